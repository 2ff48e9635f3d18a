#pragma once

#include <string>
#include <vector>

#include "metarl/common.hpp"

namespace metarl::bandit {

struct BetaPosterior {
  double a = 1.0;
  double b = 1.0;

  double mean() const { return a / (a + b); }
};

// One-success/one-failure initialization, the Beta(1,1)-equivalent convention
// shared by UCB1 and the greedy family.
struct ArmStats {
  std::vector<double> successes;  // includes the one pseudo-success
  std::vector<double> pulls;      // includes the two pseudo-pulls

  explicit ArmStats(int k)
      : successes(static_cast<std::size_t>(k), 1.0),
        pulls(static_cast<std::size_t>(k), 2.0) {}

  int arms() const { return static_cast<int>(pulls.size()); }
  double mean(int i) const { return successes[i] / pulls[i]; }
  void record(int arm, double reward) {
    successes[arm] += reward;
    pulls[arm] += 1.0;
  }
};

BetaPosterior update_beta(const BetaPosterior& p, double reward);

int ucb1_select(const ArmStats& stats, long t, double c);
int thompson_select(const std::vector<BetaPosterior>& posteriors, Rng& rng);

enum class OtsVariant {
  kMaxPerArm,     // per-arm index = max of N draws, argmax over arms
  kJointBestOfN,  // N joint samples, arm winning the most joint samples
};
int optimistic_thompson_select(const std::vector<BetaPosterior>& posteriors, int n_samples,
                               Rng& rng, OtsVariant variant = OtsVariant::kMaxPerArm);

int epsilon_greedy_select(const ArmStats& stats, double epsilon, Rng& rng);

// Gittins indices for Bernoulli arms over the Beta(a,b) integer lattice with
// a + b <= 2 + truncation_depth.
class GittinsTable {
 public:
  GittinsTable(double gamma, int truncation_depth, double tolerance);

  double gamma() const { return gamma_; }
  int truncation_depth() const { return trunc_; }
  double tolerance() const { return tol_; }

  // Posteriors beyond the lattice are scored by their posterior mean.
  double index(double a, double b) const;

  void save(const std::string& path) const;
  static GittinsTable load(const std::string& path);

  // Lattice accessors for exhaustive property checks.
  double index_at(int a, int b) const { return values_[offset(a, b)]; }

 private:
  GittinsTable() = default;
  std::size_t offset(int a, int b) const;
  void compute();

  double gamma_ = 0.0;
  int trunc_ = 0;
  double tol_ = 0.0;
  std::vector<double> values_;
};

int gittins_select(const GittinsTable& table, const std::vector<BetaPosterior>& posteriors);

// Loads a cached table for (gamma, depth, tolerance) from cache_dir, computing
// and storing it on miss.
GittinsTable cached_gittins_table(double gamma, int truncation_depth, double tolerance,
                                  const std::string& cache_dir);

}  // namespace metarl::bandit
