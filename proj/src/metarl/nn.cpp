#include "metarl/nn.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>

namespace metarl::nn {

namespace {

using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

DenseArray xavier_matrix(Rng& rng, int rows, int cols) {
  double bound = std::sqrt(6.0 / (rows + cols));
  std::uniform_real_distribution<double> unif(-bound, bound);
  DenseArray a = DenseArray::zeros({rows, cols});
  for (double& v : a.values) v = unif(rng);
  return a;
}

DenseArray orthogonal_matrix(Rng& rng, int n) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Mat gauss(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) gauss(i, j) = normal(rng);
  Eigen::HouseholderQR<Mat> qr(gauss);
  Mat q = qr.householderQ() * Mat::Identity(n, n);
  Mat r = qr.matrixQR().triangularView<Eigen::Upper>();
  // Sign correction makes the decomposition unique.
  for (int j = 0; j < n; ++j)
    if (r(j, j) < 0.0) q.col(j) = -q.col(j);
  DenseArray a = DenseArray::zeros({n, n});
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) a.values[static_cast<std::size_t>(i) * n + j] = q(i, j);
  return a;
}

DenseArray row_norms(const DenseArray& m) {
  DenseArray g = DenseArray::zeros({m.rows()});
  for (int i = 0; i < m.rows(); ++i) {
    double acc = 0.0;
    for (int j = 0; j < m.cols(); ++j) {
      double v = m.values[static_cast<std::size_t>(i) * m.cols() + j];
      acc += v * v;
    }
    g.values[i] = std::sqrt(acc);
  }
  return g;
}

void add_weight_normed(ParamStore& store, Rng& rng, const std::string& name, int rows, int cols,
                       bool orthogonal, int& v_idx, int& g_idx, bool zero_scale = false) {
  DenseArray v = orthogonal ? orthogonal_matrix(rng, rows) : xavier_matrix(rng, rows, cols);
  DenseArray g = zero_scale ? DenseArray::zeros({rows}) : row_norms(v);
  v_idx = store.add(name + ".v", std::move(v));
  g_idx = store.add(name + ".g", std::move(g));
}

GruNetworkParams init_network_impl(ParamStore& store, Rng& rng, GruNetworkSpec spec,
                                   const std::string& prefix, bool zero_head_scale) {
  if (spec.input_width < 1 || spec.hidden_width < 1 || spec.output_width < 1)
    throw InvalidArgument("init_network: widths must be positive");
  GruNetworkParams net;
  net.spec = spec;
  const int in = spec.input_width, hid = spec.hidden_width, out = spec.output_width;
  add_weight_normed(store, rng, prefix + ".Wz", hid, in, false, net.v_wz, net.g_wz);
  add_weight_normed(store, rng, prefix + ".Wr", hid, in, false, net.v_wr, net.g_wr);
  add_weight_normed(store, rng, prefix + ".Wh", hid, in, false, net.v_wh, net.g_wh);
  add_weight_normed(store, rng, prefix + ".Uz", hid, hid, true, net.v_uz, net.g_uz);
  add_weight_normed(store, rng, prefix + ".Ur", hid, hid, true, net.v_ur, net.g_ur);
  add_weight_normed(store, rng, prefix + ".Uh", hid, hid, true, net.v_uh, net.g_uh);
  // The update-gate bias starts negative so h' = (1-z)h + z*htilde keeps most
  // of the previous hidden state at init (z ~ 0.12): task information has to
  // survive across every episode of a trial, and a zero init (z ~ 0.5) forgets
  // in about ten steps, starving the long-range credit signal.
  DenseArray bz = DenseArray::zeros({hid});
  std::fill(bz.values.begin(), bz.values.end(), -2.0);
  net.b_z = store.add(prefix + ".bz", std::move(bz));
  net.b_r = store.add(prefix + ".br", DenseArray::zeros({hid}));
  net.b_h = store.add(prefix + ".bh", DenseArray::zeros({hid}));
  add_weight_normed(store, rng, prefix + ".head", out, hid, false, net.v_head, net.g_head,
                    zero_head_scale);
  net.b_head = store.add(prefix + ".head.b", DenseArray::zeros({out}));
  return net;
}

}  // namespace

GruNetworkParams init_network(ParamStore& store, Rng& rng, GruNetworkSpec spec,
                              const std::string& prefix) {
  return init_network_impl(store, rng, spec, prefix, false);
}

GruNetworkParams init_network_zero_head(ParamStore& store, Rng& rng, GruNetworkSpec spec,
                                        const std::string& prefix) {
  return init_network_impl(store, rng, spec, prefix, true);
}

GruTapeNet GruTapeNet::build(Tape& tape, const GruNetworkParams& net) {
  GruTapeNet t;
  t.hidden_width = net.spec.hidden_width;
  t.wz = tape.weight_norm(tape.param(net.v_wz), tape.param(net.g_wz));
  t.wr = tape.weight_norm(tape.param(net.v_wr), tape.param(net.g_wr));
  t.wh = tape.weight_norm(tape.param(net.v_wh), tape.param(net.g_wh));
  t.uz = tape.weight_norm(tape.param(net.v_uz), tape.param(net.g_uz));
  t.ur = tape.weight_norm(tape.param(net.v_ur), tape.param(net.g_ur));
  t.uh = tape.weight_norm(tape.param(net.v_uh), tape.param(net.g_uh));
  t.bz = tape.param(net.b_z);
  t.br = tape.param(net.b_r);
  t.bh = tape.param(net.b_h);
  t.w_head = tape.weight_norm(tape.param(net.v_head), tape.param(net.g_head));
  t.b_head = tape.param(net.b_head);
  return t;
}

int GruTapeNet::step(Tape& tape, int x_node, int h_node) const {
  int z = tape.sigmoid(tape.affine2(wz, x_node, uz, h_node, bz));
  int r = tape.sigmoid(tape.affine2(wr, x_node, ur, h_node, br));
  int rh = tape.mul(r, h_node);
  int htilde = tape.relu(tape.affine2(wh, x_node, uh, rh, bh));
  return tape.gru_combine(h_node, z, htilde);
}

int GruTapeNet::head(Tape& tape, int h_node) const {
  return tape.affine(w_head, h_node, b_head);
}

void softmax_stable(std::span<const double> logits, std::span<double> out) {
  double mx = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - mx);
    sum += out[i];
  }
  for (std::size_t i = 0; i < logits.size(); ++i) out[i] /= sum;
}

int sample_categorical(std::span<const double> probs, Rng& rng) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  double u = unif(rng), acc = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    acc += probs[i];
    if (u < acc) return static_cast<int>(i);
  }
  return static_cast<int>(probs.size()) - 1;
}

double categorical_log_prob(std::span<const double> probs, int action) {
  if (action < 0 || action >= static_cast<int>(probs.size()))
    throw InvalidArgument("categorical_log_prob: action out of range");
  return std::log(probs[action]);
}

double categorical_entropy(std::span<const double> probs) {
  double h = 0.0;
  for (double p : probs)
    if (p > 0.0) h -= p * std::log(p);
  return h;
}

double categorical_kl(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) throw InvalidArgument("categorical_kl: size mismatch");
  double kl = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] <= 0.0) continue;
    if (q[i] <= 0.0)
      throw NumericalFailure("categorical_kl: divergent (q has zero mass where p > 0)");
    kl += p[i] * (std::log(p[i]) - std::log(q[i]));
  }
  return kl;
}

namespace {
constexpr char kCheckpointMagic[8] = {'M', 'R', 'L', 'C', 'K', 'P', 'T', '1'};
}

void save_checkpoint(const std::string& path, const nlohmann::json& meta,
                     const std::vector<std::pair<std::string, const DenseArray*>>& tensors) {
  nlohmann::json manifest;
  manifest["format_version"] = 1;
  manifest["meta"] = meta;
  manifest["tensors"] = nlohmann::json::array();
  std::uint64_t offset = 0;
  for (const auto& [name, arr] : tensors) {
    manifest["tensors"].push_back({{"name", name},
                                   {"shape", arr->shape},
                                   {"offset", offset},
                                   {"length", arr->size() * 8}});
    offset += arr->size() * 8;
  }
  std::string manifest_str = manifest.dump();
  std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw IoError("save_checkpoint: cannot open " + tmp);
    out.write(kCheckpointMagic, 8);
    std::uint64_t mlen = manifest_str.size();
    out.write(reinterpret_cast<const char*>(&mlen), 8);
    out.write(manifest_str.data(), static_cast<std::streamsize>(mlen));
    for (const auto& [name, arr] : tensors)
      out.write(reinterpret_cast<const char*>(arr->values.data()),
                static_cast<std::streamsize>(arr->size() * 8));
    if (!out) throw IoError("save_checkpoint: write failed for " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("load_checkpoint: cannot open " + path);
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kCheckpointMagic, 8) != 0)
    throw IoError("load_checkpoint: bad magic in " + path);
  std::uint64_t mlen = 0;
  in.read(reinterpret_cast<char*>(&mlen), 8);
  std::string manifest_str(mlen, '\0');
  in.read(manifest_str.data(), static_cast<std::streamsize>(mlen));
  if (!in) throw IoError("load_checkpoint: truncated manifest in " + path);
  nlohmann::json manifest = nlohmann::json::parse(manifest_str);
  if (manifest.at("format_version").get<int>() != 1)
    throw IoError("load_checkpoint: unsupported format version");

  LoadedCheckpoint ck;
  ck.meta = manifest.at("meta");
  std::streampos blob_start = in.tellg();
  for (const auto& t : manifest.at("tensors")) {
    DenseArray arr = DenseArray::zeros(t.at("shape").get<std::vector<int>>());
    std::uint64_t length = t.at("length").get<std::uint64_t>();
    if (length != arr.size() * 8) throw IoError("load_checkpoint: tensor length mismatch");
    in.seekg(blob_start + static_cast<std::streamoff>(t.at("offset").get<std::uint64_t>()));
    in.read(reinterpret_cast<char*>(arr.values.data()), static_cast<std::streamsize>(length));
    if (!in) throw IoError("load_checkpoint: truncated tensor data in " + path);
    ck.tensors.emplace(t.at("name").get<std::string>(), std::move(arr));
  }
  return ck;
}

}  // namespace metarl::nn
