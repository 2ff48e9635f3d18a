#include "metarl/bandit_agents.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace metarl::bandit {

namespace {

double beta_draw(double a, double b, Rng& rng) {
  std::gamma_distribution<double> ga(a, 1.0), gb(b, 1.0);
  double x = ga(rng), y = gb(rng);
  return x / (x + y);
}

}  // namespace

BetaPosterior update_beta(const BetaPosterior& p, double reward) {
  if (reward != 0.0 && reward != 1.0)
    throw InvalidArgument("update_beta: reward must be binary");
  BetaPosterior out = p;
  if (reward == 1.0)
    out.a += 1.0;
  else
    out.b += 1.0;
  return out;
}

int ucb1_select(const ArmStats& stats, long t, double c) {
  int best = 0;
  double best_score = -1.0;
  for (int i = 0; i < stats.arms(); ++i) {
    double score = stats.mean(i) +
                   c * std::sqrt(2.0 * std::log(static_cast<double>(t)) / stats.pulls[i]);
    if (score > best_score) {
      best_score = score;
      best = i;
    }
  }
  return best;
}

int thompson_select(const std::vector<BetaPosterior>& posteriors, Rng& rng) {
  int best = 0;
  double best_draw = -1.0;
  for (std::size_t i = 0; i < posteriors.size(); ++i) {
    double d = beta_draw(posteriors[i].a, posteriors[i].b, rng);
    if (d > best_draw) {
      best_draw = d;
      best = static_cast<int>(i);
    }
  }
  return best;
}

int optimistic_thompson_select(const std::vector<BetaPosterior>& posteriors, int n_samples,
                               Rng& rng, OtsVariant variant) {
  if (n_samples < 1) throw InvalidArgument("optimistic_thompson_select: N must be >= 1");
  const int k = static_cast<int>(posteriors.size());
  if (variant == OtsVariant::kMaxPerArm) {
    int best = 0;
    double best_index = -1.0;
    for (int i = 0; i < k; ++i) {
      double idx = 0.0;
      for (int s = 0; s < n_samples; ++s)
        idx = std::max(idx, beta_draw(posteriors[i].a, posteriors[i].b, rng));
      if (idx > best_index) {
        best_index = idx;
        best = i;
      }
    }
    return best;
  }
  std::vector<int> wins(k, 0);
  for (int s = 0; s < n_samples; ++s) wins[thompson_select(posteriors, rng)] += 1;
  int best = 0;
  for (int i = 1; i < k; ++i)
    if (wins[i] > wins[best]) best = i;
  return best;
}

int epsilon_greedy_select(const ArmStats& stats, double epsilon, Rng& rng) {
  if (!(epsilon >= 0.0 && epsilon <= 1.0))
    throw InvalidArgument("epsilon_greedy_select: epsilon outside [0,1]");
  if (epsilon > 0.0) {
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    if (unif(rng) < epsilon) {
      std::uniform_int_distribution<int> pick(0, stats.arms() - 1);
      return pick(rng);
    }
  }
  int best = 0;
  for (int i = 1; i < stats.arms(); ++i)
    if (stats.mean(i) > stats.mean(best)) best = i;
  return best;
}

GittinsTable::GittinsTable(double gamma, int truncation_depth, double tolerance)
    : gamma_(gamma), trunc_(truncation_depth), tol_(tolerance) {
  if (!(gamma > 0.0 && gamma < 1.0))
    throw InvalidArgument("GittinsTable: gamma must lie in (0,1)");
  if (trunc_ < 1) throw InvalidArgument("GittinsTable: truncation depth must be >= 1");
  if (!(tol_ > 0.0)) throw InvalidArgument("GittinsTable: tolerance must be positive");
  compute();
}

std::size_t GittinsTable::offset(int a, int b) const {
  // Points (a,b), a,b >= 1, a+b <= 2+trunc, laid out by depth d = a+b.
  int d = a + b;
  std::size_t depth_base = static_cast<std::size_t>(d - 2) * (d - 1) / 2;
  return depth_base + static_cast<std::size_t>(a - 1);
}

void GittinsTable::compute() {
  const int max_depth = 2 + trunc_;
  values_.assign(offset(max_depth - 1, 1) + 1, 0.0);
  const double inv_horizon = 1.0 / (1.0 - gamma_);

  // Continuation value of state (a0,b0) given retirement level lambda,
  // by backward induction over the descendant wedge of the lattice.
  std::vector<double> cur(max_depth + 2), next(max_depth + 2);
  auto continue_value = [&](int a0, int b0, double lambda) {
    const double retire = lambda * inv_horizon;
    // Depth max_depth+1 frontier: perpetual max(retirement, posterior mean).
    for (int a = a0; a <= max_depth + 1 - b0; ++a) {
      double mean = static_cast<double>(a) / (max_depth + 1);
      next[a] = std::max(lambda, mean) * inv_horizon;
    }
    double cont = 0.0;
    for (int d = max_depth; d >= a0 + b0; --d) {
      for (int a = a0; a <= d - b0; ++a) {
        double p = static_cast<double>(a) / d;
        double c = p + gamma_ * (p * next[a + 1] + (1.0 - p) * next[a]);
        if (d == a0 + b0) cont = c;
        cur[a] = std::max(retire, c);
      }
      std::swap(cur, next);
    }
    return cont;
  };

  const int max_iters = 200;
  for (int d = 2; d <= max_depth; ++d) {
    for (int a = 1; a <= d - 1; ++a) {
      int b = d - a;
      double lo = static_cast<double>(a) / d;  // myopic lower bound
      double hi = 1.0;
      int iter = 0;
      while (hi - lo > tol_) {
        if (++iter > max_iters)
          throw NumericalFailure("GittinsTable: bisection failed to converge at (" +
                                 std::to_string(a) + "," + std::to_string(b) +
                                 ") gamma=" + std::to_string(gamma_));
        double mid = 0.5 * (lo + hi);
        if (continue_value(a, b, mid) > mid * inv_horizon)
          lo = mid;
        else
          hi = mid;
      }
      values_[offset(a, b)] = 0.5 * (lo + hi);
    }
  }
}

double GittinsTable::index(double a, double b) const {
  int ia = static_cast<int>(std::lround(a));
  int ib = static_cast<int>(std::lround(b));
  if (ia < 1 || ib < 1) throw InvalidArgument("GittinsTable::index: counts below prior");
  if (ia + ib > 2 + trunc_) return a / (a + b);  // lattice overflow: posterior mean
  return values_[offset(ia, ib)];
}

int gittins_select(const GittinsTable& table, const std::vector<BetaPosterior>& posteriors) {
  int best = 0;
  double best_index = -1.0;
  for (std::size_t i = 0; i < posteriors.size(); ++i) {
    double idx = table.index(posteriors[i].a, posteriors[i].b);
    if (idx > best_index) {
      best_index = idx;
      best = static_cast<int>(i);
    }
  }
  return best;
}

namespace {
constexpr std::uint64_t kGittinsMagic = 0x4d524c4749545401ULL;
}

void GittinsTable::save(const std::string& path) const {
  std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw IoError("GittinsTable::save: cannot open " + tmp);
    std::uint64_t n = values_.size();
    std::int64_t trunc = trunc_;
    out.write(reinterpret_cast<const char*>(&kGittinsMagic), 8);
    out.write(reinterpret_cast<const char*>(&gamma_), 8);
    out.write(reinterpret_cast<const char*>(&trunc), 8);
    out.write(reinterpret_cast<const char*>(&tol_), 8);
    out.write(reinterpret_cast<const char*>(&n), 8);
    out.write(reinterpret_cast<const char*>(values_.data()), static_cast<std::streamsize>(n * 8));
    if (!out) throw IoError("GittinsTable::save: write failed");
  }
  std::filesystem::rename(tmp, path);
}

GittinsTable GittinsTable::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("GittinsTable::load: cannot open " + path);
  std::uint64_t magic = 0, n = 0;
  std::int64_t trunc = 0;
  GittinsTable t;
  in.read(reinterpret_cast<char*>(&magic), 8);
  if (magic != kGittinsMagic) throw IoError("GittinsTable::load: bad magic in " + path);
  in.read(reinterpret_cast<char*>(&t.gamma_), 8);
  in.read(reinterpret_cast<char*>(&trunc), 8);
  in.read(reinterpret_cast<char*>(&t.tol_), 8);
  in.read(reinterpret_cast<char*>(&n), 8);
  t.trunc_ = static_cast<int>(trunc);
  t.values_.resize(n);
  in.read(reinterpret_cast<char*>(t.values_.data()), static_cast<std::streamsize>(n * 8));
  if (!in) throw IoError("GittinsTable::load: truncated file " + path);
  return t;
}

GittinsTable cached_gittins_table(double gamma, int truncation_depth, double tolerance,
                                  const std::string& cache_dir) {
  std::filesystem::create_directories(cache_dir);
  char name[128];
  std::snprintf(name, sizeof(name), "gittins_g%.6f_n%d_t%.1e.bin", gamma, truncation_depth,
                tolerance);
  auto path = (std::filesystem::path(cache_dir) / name).string();
  if (std::filesystem::exists(path)) {
    GittinsTable t = GittinsTable::load(path);
    if (t.gamma() == gamma && t.truncation_depth() == truncation_depth) return t;
  }
  GittinsTable t(gamma, truncation_depth, tolerance);
  t.save(path);
  return t;
}

}  // namespace metarl::bandit
