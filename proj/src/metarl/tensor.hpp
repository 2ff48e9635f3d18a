#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "metarl/common.hpp"

namespace metarl::nn {

// Row-major 64-bit real buffer. Matrices are (rows, cols); vectors are
// (n) with cols treated as 1.
struct DenseArray {
  std::vector<int> shape;
  std::vector<double> values;

  static DenseArray zeros(std::vector<int> shape);
  std::size_t size() const { return values.size(); }
  int rows() const { return shape.empty() ? 0 : shape[0]; }
  int cols() const { return shape.size() > 1 ? shape[1] : 1; }
};

// Named parameter set with parallel gradient and tangent buffers. Gradients
// accumulate additively across tapes; tangents feed forward-mode products.
class ParamStore {
 public:
  int add(std::string name, DenseArray value);

  int count() const { return static_cast<int>(entries_.size()); }
  const std::string& name(int i) const { return entries_[i].name; }
  DenseArray& value(int i) { return entries_[i].value; }
  const DenseArray& value(int i) const { return entries_[i].value; }
  DenseArray& grad(int i) { return entries_[i].grad; }
  const DenseArray& grad(int i) const { return entries_[i].grad; }
  DenseArray& tangent(int i) { return entries_[i].tangent; }
  const DenseArray& tangent(int i) const { return entries_[i].tangent; }

  std::size_t total_size() const;
  void zero_grad();
  void zero_tangent();

  std::vector<double> flat_values() const;
  std::vector<double> flat_grad() const;
  void set_flat_values(std::span<const double> flat);
  void set_flat_tangent(std::span<const double> flat);
  // theta += alpha * direction
  void add_scaled(std::span<const double> direction, double alpha);

 private:
  struct Entry {
    std::string name;
    DenseArray value, grad, tangent;
  };
  std::vector<Entry> entries_;
};

// Reverse-mode tape over the layer vocabulary the recurrent policy needs.
// Node values live in slab storage so a cleared tape reuses its capacity.
// recompute() replays the recorded graph against current parameter values,
// forward_tangent() propagates parameter tangents (exact Jacobian-vector
// products), and run_backward() accumulates parameter gradients from any set
// of seeded nodes.
class Tape {
 public:
  explicit Tape(ParamStore* params) : params_(params) {}

  void clear();
  int size() const { return static_cast<int>(nodes_.size()); }

  int param(int param_index);
  int constant(std::span<const double> v);
  int constant_zeros(int n);

  // Effective weight rows: g_i * v_i / ||v_i||.
  int weight_norm(int v_node, int g_node);
  // y = W x + b
  int affine(int w_node, int x_node, int b_node);
  // y = W1 x1 + W2 x2 + b (the GRU gate pre-activation shape)
  int affine2(int w1_node, int x1_node, int w2_node, int x2_node, int b_node);
  int sigmoid(int a);
  int tanh_op(int a);
  int relu(int a);
  int mul(int a, int b);
  // h' = (1 - z) * h + z * htilde
  int gru_combine(int h, int z, int htilde);
  int reduce_sum(int a);
  int log_prob(int logits, int action);
  // exp(lp - lp_old) * advantage
  int ratio_advantage(int lp, double lp_old, double advantage);
  int kl_fixed(std::span<const double> p_old, int logits);
  int square_diff(int scalar_node, double target);
  int sum(std::span<const int> scalar_nodes);

  std::span<const double> value(int node) const;
  double scalar(int node) const { return value(node)[0]; }
  std::span<const double> tangent_value(int node) const;

  // Replays forward values against the current parameter values.
  void recompute();

  // Reverse pass from a scalar node; gradients land in the ParamStore.
  void backward(int node, double seed = 1.0);

  // Multi-seed reverse pass: zero node grads, seed any nodes, then propagate.
  void zero_node_grads();
  void seed_grad(int node, std::span<const double> seed);
  void run_backward();

  // Forward-mode pass driven by ParamStore tangents.
  void forward_tangent();

 private:
  enum class Op : std::uint8_t {
    kParam,
    kConst,
    kWeightNorm,
    kAffine,
    kAffine2,
    kSigmoid,
    kTanh,
    kRelu,
    kMul,
    kGruCombine,
    kReduceSum,
    kLogProb,
    kRatioAdv,
    kKlFixed,
    kSquareDiff,
    kSum,
  };

  struct Node {
    Op op;
    int in0 = -1, in1 = -1, in2 = -1, in3 = -1, in4 = -1;
    int rows = 0, cols = 1;
    std::size_t offset = 0;       // into slabs
    int aux_int = 0;              // action index / param index
    double aux0 = 0.0, aux1 = 0.0;
    std::size_t aux_offset = 0;   // into aux_ (p_old for kKlFixed)
    std::size_t multi_offset = 0; // into multi_ (kSum inputs)
    int multi_count = 0;
  };

  int push(Node n);
  std::size_t node_size(const Node& n) const {
    return static_cast<std::size_t>(n.rows) * n.cols;
  }
  void eval(const Node& n, double* out);
  double* val(const Node& n) { return val_.data() + n.offset; }
  const double* val(const Node& n) const { return val_.data() + n.offset; }
  double* grd(const Node& n) { return grad_.data() + n.offset; }
  double* tan(const Node& n) { return tan_.data() + n.offset; }
  void check_node(int node) const;

  ParamStore* params_;
  std::vector<Node> nodes_;
  std::vector<double> val_, grad_, tan_;
  std::vector<double> aux_;
  std::vector<int> multi_;
  std::size_t slab_used_ = 0;
  bool grads_zeroed_ = false;
};

// Conjugate gradient on a caller-supplied SPD matrix-vector product.
std::vector<double> conjugate_gradient(
    const std::function<void(std::span<const double>, std::span<double>)>& matvec,
    std::span<const double> b, int iterations, double residual_tol);

// Adam with bias correction. Moment state persists across calls so repeated
// fits on fresh batches keep their momentum.
class Adam {
 public:
  Adam(std::size_t dim, double step_size)
      : step_size_(step_size), m_(dim, 0.0), v_(dim, 0.0) {}

  // Applies one update along -gradient (descent). Pass the negated gradient
  // to ascend.
  void step(ParamStore& params, std::span<const double> gradient);

 private:
  double step_size_;
  double beta1_ = 0.9, beta2_ = 0.999, eps_ = 1e-8;
  int t_ = 0;
  std::vector<double> m_, v_;
};

}  // namespace metarl::nn
