#include <cmath>
#include <filesystem>

#include "doctest.h"
#include "metarl/nn.hpp"

using namespace metarl;
using namespace metarl::nn;

namespace {

GruNetworkSpec small_spec() { return GruNetworkSpec{4, 6, 3}; }

}  // namespace

TEST_CASE("init: weight-norm scales start at row norms, biases at zero") {
  ParamStore store;
  Rng rng(2);
  GruNetworkParams net = init_network(store, rng, small_spec(), "p");
  const DenseArray& v = store.value(net.v_wz);
  const DenseArray& g = store.value(net.g_wz);
  for (int row = 0; row < 6; ++row) {
    double norm = 0.0;
    for (int col = 0; col < 4; ++col) {
      const double x = v.values[static_cast<std::size_t>(row) * 4 + col];
      norm += x * x;
    }
    CHECK(g.values[static_cast<std::size_t>(row)] == doctest::Approx(std::sqrt(norm)));
  }
  // The update gate starts biased toward keeping the previous hidden state.
  for (double b : store.value(net.b_z).values) CHECK(b == -2.0);
  for (double b : store.value(net.b_r).values) CHECK(b == 0.0);
  for (double b : store.value(net.b_head).values) CHECK(b == 0.0);
}

TEST_CASE("init: hidden-to-hidden matrices are orthogonal") {
  ParamStore store;
  Rng rng(5);
  GruNetworkParams net = init_network(store, rng, small_spec(), "p");
  const DenseArray& u = store.value(net.v_uz);
  for (int i = 0; i < 6; ++i)
    for (int j = 0; j < 6; ++j) {
      double dot = 0.0;
      for (int k = 0; k < 6; ++k)
        dot += u.values[static_cast<std::size_t>(i) * 6 + k] *
               u.values[static_cast<std::size_t>(j) * 6 + k];
      CHECK(dot == doctest::Approx(i == j ? 1.0 : 0.0).epsilon(1e-9));
    }
}

TEST_CASE("init: Xavier bound respected on input-to-hidden matrices") {
  ParamStore store;
  Rng rng(8);
  GruNetworkParams net = init_network(store, rng, small_spec(), "p");
  const double bound = std::sqrt(6.0 / (4 + 6));
  for (double v : store.value(net.v_wz).values) {
    CHECK(v <= bound + 1e-12);
    CHECK(v >= -bound - 1e-12);
  }
}

TEST_CASE("zero-head init yields exactly uniform logits") {
  ParamStore store;
  Rng rng(4);
  GruNetworkParams net = init_network_zero_head(store, rng, small_spec(), "p");
  Tape tape(&store);
  GruTapeNet tn = GruTapeNet::build(tape, net);
  const int h0 = tape.constant_zeros(6);
  const int x = tape.constant(std::vector<double>{1.0, -0.5, 0.25, 0.0});
  const int h1 = tn.step(tape, x, h0);
  const int logits = tn.head(tape, h1);
  for (double v : tape.value(logits)) CHECK(v == 0.0);
}

TEST_CASE("gru step: finite-difference gradients through a full recurrence") {
  ParamStore store;
  Rng rng(10);
  GruNetworkParams net = init_network(store, rng, GruNetworkSpec{3, 4, 2}, "p");
  Tape tape(&store);
  GruTapeNet tn = GruTapeNet::build(tape, net);
  int h = tape.constant_zeros(4);
  // Two chained steps so hidden-to-hidden paths carry gradient.
  h = tn.step(tape, tape.constant(std::vector<double>{0.5, -1.0, 0.3}), h);
  h = tn.step(tape, tape.constant(std::vector<double>{-0.2, 0.8, 0.1}), h);
  const int lp = tape.log_prob(tn.head(tape, h), 1);

  store.zero_grad();
  tape.backward(lp);
  const std::vector<double> analytic = store.flat_grad();
  const std::vector<double> theta = store.flat_values();
  const double step = 1e-6;
  for (std::size_t i = 0; i < theta.size(); i += 7) {  // probe a spread of entries
    std::vector<double> bump = theta;
    bump[i] = theta[i] + step;
    store.set_flat_values(bump);
    tape.recompute();
    const double up = tape.scalar(lp);
    bump[i] = theta[i] - step;
    store.set_flat_values(bump);
    tape.recompute();
    const double down = tape.scalar(lp);
    const double numeric = (up - down) / (2 * step);
    const double scale = std::max({1.0, std::abs(numeric), std::abs(analytic[i])});
    CHECK(std::abs(numeric - analytic[i]) / scale < 1e-4);
  }
}

TEST_CASE("softmax: stable under large logits and sums to one") {
  std::vector<double> logits = {1000.0, 1001.0, 999.0};
  std::vector<double> probs(3);
  softmax_stable(logits, probs);
  double sum = 0.0;
  for (double p : probs) {
    CHECK(std::isfinite(p));
    sum += p;
  }
  CHECK(sum == doctest::Approx(1.0));
  CHECK(probs[1] > probs[0]);
  CHECK(probs[0] > probs[2]);
}

TEST_CASE("categorical helpers: log-prob, entropy, KL") {
  const std::vector<double> p = {0.5, 0.25, 0.25};
  CHECK(categorical_log_prob(p, 0) == doctest::Approx(std::log(0.5)));
  CHECK(categorical_entropy(p) ==
        doctest::Approx(-(0.5 * std::log(0.5) + 2 * 0.25 * std::log(0.25))));
  const std::vector<double> q = {0.25, 0.5, 0.25};
  const double kl = categorical_kl(p, q);
  CHECK(kl == doctest::Approx(0.5 * std::log(2.0) + 0.25 * std::log(0.5)));
  CHECK(categorical_kl(p, p) == doctest::Approx(0.0));
  const std::vector<double> degenerate = {1.0, 0.0, 0.0};
  CHECK_THROWS_AS(categorical_kl(p, degenerate), NumericalFailure);
}

TEST_CASE("sample_categorical: frequencies match probabilities") {
  const std::vector<double> p = {0.2, 0.5, 0.3};
  Rng rng(77);
  std::vector<int> counts(3, 0);
  const int draws = 100000;
  for (int i = 0; i < draws; ++i) ++counts[static_cast<std::size_t>(sample_categorical(p, rng))];
  for (int i = 0; i < 3; ++i)
    CHECK(static_cast<double>(counts[static_cast<std::size_t>(i)]) / draws ==
          doctest::Approx(p[static_cast<std::size_t>(i)]).epsilon(0.03));
}

TEST_CASE("checkpoint: tensors and metadata round-trip bit-exactly") {
  namespace fs = std::filesystem;
  Rng rng(6);
  ParamStore store;
  init_network(store, rng, small_spec(), "net");
  const fs::path path = fs::temp_directory_path() / "nn_ckpt_test.bin";

  std::vector<std::pair<std::string, const DenseArray*>> tensors;
  for (int i = 0; i < store.count(); ++i) tensors.emplace_back(store.name(i), &store.value(i));
  nlohmann::json meta = {{"purpose", "test"}, {"width", 6}};
  save_checkpoint(path.string(), meta, tensors);

  LoadedCheckpoint loaded = load_checkpoint(path.string());
  CHECK(loaded.meta.at("purpose") == "test");
  CHECK(static_cast<int>(loaded.tensors.size()) == store.count());
  for (int i = 0; i < store.count(); ++i) {
    const DenseArray& original = store.value(i);
    const DenseArray& restored = loaded.tensors.at(store.name(i));
    CHECK(restored.shape == original.shape);
    CHECK(restored.values == original.values);  // bit-exact
  }
  fs::remove(path);
  CHECK_THROWS_AS(load_checkpoint(path.string()), IoError);
}
