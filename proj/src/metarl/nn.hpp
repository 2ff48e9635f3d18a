#pragma once

#include <map>
#include <string>
#include <vector>

#include "json.hpp"
#include "metarl/common.hpp"
#include "metarl/tensor.hpp"

namespace metarl::nn {

struct GruNetworkSpec {
  int input_width = 0;
  int hidden_width = 0;
  int output_width = 0;
};

// Parameter-store indices for one GRU network with a linear head. Every
// matrix is stored weight-normalized as a direction v plus per-row scale g.
struct GruNetworkParams {
  GruNetworkSpec spec;
  int v_wz = -1, g_wz = -1, v_wr = -1, g_wr = -1, v_wh = -1, g_wh = -1;
  int v_uz = -1, g_uz = -1, v_ur = -1, g_ur = -1, v_uh = -1, g_uh = -1;
  int b_z = -1, b_r = -1, b_h = -1;
  int v_head = -1, g_head = -1, b_head = -1;
};

// Xavier-uniform input-to-hidden and head matrices, orthogonal
// hidden-to-hidden matrices, zero biases; weight-norm scales start at the row
// norms of the drawn directions so the initial effective weights equal the
// raw draw.
GruNetworkParams init_network(ParamStore& store, Rng& rng, GruNetworkSpec spec,
                              const std::string& prefix);

// Same layout with the head scale g (and bias) zeroed: zero logits, uniform
// policy, used as the distillation starting point.
GruNetworkParams init_network_zero_head(ParamStore& store, Rng& rng, GruNetworkSpec spec,
                                        const std::string& prefix);

// Tape-level view of one network: effective (weight-normalized) matrices are
// materialized once per tape and shared across timesteps.
struct GruTapeNet {
  int wz, wr, wh, uz, ur, uh, bz, br, bh, w_head, b_head;
  int hidden_width = 0;

  static GruTapeNet build(Tape& tape, const GruNetworkParams& net);
  // One recurrence step; h_node may be a zero constant at trial start.
  int step(Tape& tape, int x_node, int h_node) const;
  int head(Tape& tape, int h_node) const;
};

void softmax_stable(std::span<const double> logits, std::span<double> out);

// Inverse-CDF sample from one uniform draw.
int sample_categorical(std::span<const double> probs, Rng& rng);
double categorical_log_prob(std::span<const double> probs, int action);
double categorical_entropy(std::span<const double> probs);
// KL(p || q); throws if q has a zero where p is positive.
double categorical_kl(std::span<const double> p, std::span<const double> q);

// Checkpoint container: magic + JSON manifest (names, shapes, offsets,
// format version, free-form meta) + raw little-endian float64 blobs.
// Written to a temp file and renamed into place.
void save_checkpoint(const std::string& path, const nlohmann::json& meta,
                     const std::vector<std::pair<std::string, const DenseArray*>>& tensors);

struct LoadedCheckpoint {
  nlohmann::json meta;
  std::map<std::string, DenseArray> tensors;
};
LoadedCheckpoint load_checkpoint(const std::string& path);

}  // namespace metarl::nn
