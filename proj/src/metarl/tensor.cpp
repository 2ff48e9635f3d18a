#include "metarl/tensor.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstring>
#include <functional>
#include <numeric>

namespace metarl::nn {

namespace {

using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<Mat>;
using CMapMat = Eigen::Map<const Mat>;
using MapVec = Eigen::Map<Eigen::VectorXd>;
using CMapVec = Eigen::Map<const Eigen::VectorXd>;

void softmax(const double* logits, int n, double* out) {
  double mx = *std::max_element(logits, logits + n);
  double sum = 0.0;
  for (int i = 0; i < n; ++i) {
    out[i] = std::exp(logits[i] - mx);
    sum += out[i];
  }
  for (int i = 0; i < n; ++i) out[i] /= sum;
}

double log_sum_exp(const double* logits, int n) {
  double mx = *std::max_element(logits, logits + n);
  double sum = 0.0;
  for (int i = 0; i < n; ++i) sum += std::exp(logits[i] - mx);
  return mx + std::log(sum);
}

}  // namespace

DenseArray DenseArray::zeros(std::vector<int> shape) {
  DenseArray a;
  a.shape = std::move(shape);
  std::size_t n = 1;
  for (int d : a.shape) n *= static_cast<std::size_t>(d);
  a.values.assign(n, 0.0);
  return a;
}

int ParamStore::add(std::string name, DenseArray value) {
  Entry e;
  e.name = std::move(name);
  e.grad = DenseArray::zeros(value.shape);
  e.tangent = DenseArray::zeros(value.shape);
  e.value = std::move(value);
  entries_.push_back(std::move(e));
  return static_cast<int>(entries_.size()) - 1;
}

std::size_t ParamStore::total_size() const {
  std::size_t n = 0;
  for (const auto& e : entries_) n += e.value.size();
  return n;
}

void ParamStore::zero_grad() {
  for (auto& e : entries_) std::fill(e.grad.values.begin(), e.grad.values.end(), 0.0);
}

void ParamStore::zero_tangent() {
  for (auto& e : entries_) std::fill(e.tangent.values.begin(), e.tangent.values.end(), 0.0);
}

std::vector<double> ParamStore::flat_values() const {
  std::vector<double> out;
  out.reserve(total_size());
  for (const auto& e : entries_)
    out.insert(out.end(), e.value.values.begin(), e.value.values.end());
  return out;
}

std::vector<double> ParamStore::flat_grad() const {
  std::vector<double> out;
  out.reserve(total_size());
  for (const auto& e : entries_)
    out.insert(out.end(), e.grad.values.begin(), e.grad.values.end());
  return out;
}

void ParamStore::set_flat_values(std::span<const double> flat) {
  std::size_t at = 0;
  for (auto& e : entries_) {
    std::copy(flat.begin() + at, flat.begin() + at + e.value.size(), e.value.values.begin());
    at += e.value.size();
  }
}

void ParamStore::set_flat_tangent(std::span<const double> flat) {
  std::size_t at = 0;
  for (auto& e : entries_) {
    std::copy(flat.begin() + at, flat.begin() + at + e.tangent.size(),
              e.tangent.values.begin());
    at += e.tangent.size();
  }
}

void ParamStore::add_scaled(std::span<const double> direction, double alpha) {
  std::size_t at = 0;
  for (auto& e : entries_) {
    for (double& v : e.value.values) v += alpha * direction[at++];
  }
}

void Tape::clear() {
  nodes_.clear();
  aux_.clear();
  multi_.clear();
  slab_used_ = 0;
  grads_zeroed_ = false;
}

void Tape::check_node(int node) const {
  if (node < 0 || node >= static_cast<int>(nodes_.size()))
    throw InvalidArgument("Tape: node index out of range");
}

int Tape::push(Node n) {
  n.offset = slab_used_;
  slab_used_ += node_size(n);
  if (val_.size() < slab_used_) {
    val_.resize(slab_used_);
    grad_.resize(slab_used_);
    tan_.resize(slab_used_);
  }
  nodes_.push_back(n);
  eval(nodes_.back(), val(nodes_.back()));
  return static_cast<int>(nodes_.size()) - 1;
}

int Tape::param(int param_index) {
  const DenseArray& p = params_->value(param_index);
  Node n;
  n.op = Op::kParam;
  n.aux_int = param_index;
  n.rows = p.rows();
  n.cols = p.cols();
  return push(n);
}

int Tape::constant(std::span<const double> v) {
  Node n;
  n.op = Op::kConst;
  n.rows = static_cast<int>(v.size());
  n.offset = slab_used_;
  slab_used_ += v.size();
  if (val_.size() < slab_used_) {
    val_.resize(slab_used_);
    grad_.resize(slab_used_);
    tan_.resize(slab_used_);
  }
  std::copy(v.begin(), v.end(), val_.begin() + static_cast<long>(n.offset));
  nodes_.push_back(n);
  return static_cast<int>(nodes_.size()) - 1;
}

int Tape::constant_zeros(int n_values) {
  std::vector<double> z(static_cast<std::size_t>(n_values), 0.0);
  return constant(z);
}

int Tape::weight_norm(int v_node, int g_node) {
  check_node(v_node);
  check_node(g_node);
  Node n;
  n.op = Op::kWeightNorm;
  n.in0 = v_node;
  n.in1 = g_node;
  n.rows = nodes_[v_node].rows;
  n.cols = nodes_[v_node].cols;
  if (nodes_[g_node].rows != n.rows || nodes_[g_node].cols != 1)
    throw InvalidArgument("weight_norm: scale shape mismatch");
  return push(n);
}

int Tape::affine(int w_node, int x_node, int b_node) {
  check_node(w_node);
  check_node(x_node);
  check_node(b_node);
  const Node& w = nodes_[w_node];
  if (w.cols != nodes_[x_node].rows || w.rows != nodes_[b_node].rows)
    throw InvalidArgument("affine: dimension mismatch");
  Node n;
  n.op = Op::kAffine;
  n.in0 = w_node;
  n.in1 = x_node;
  n.in2 = b_node;
  n.rows = w.rows;
  return push(n);
}

int Tape::affine2(int w1_node, int x1_node, int w2_node, int x2_node, int b_node) {
  const Node& w1 = nodes_[w1_node];
  const Node& w2 = nodes_[w2_node];
  if (w1.cols != nodes_[x1_node].rows || w2.cols != nodes_[x2_node].rows ||
      w1.rows != w2.rows || w1.rows != nodes_[b_node].rows)
    throw InvalidArgument("affine2: dimension mismatch");
  Node n;
  n.op = Op::kAffine2;
  n.in0 = w1_node;
  n.in1 = x1_node;
  n.in2 = w2_node;
  n.in3 = x2_node;
  n.in4 = b_node;
  n.rows = w1.rows;
  return push(n);
}

int Tape::sigmoid(int a) {
  check_node(a);
  Node n;
  n.op = Op::kSigmoid;
  n.in0 = a;
  n.rows = nodes_[a].rows;
  n.cols = nodes_[a].cols;
  return push(n);
}

int Tape::tanh_op(int a) {
  check_node(a);
  Node n;
  n.op = Op::kTanh;
  n.in0 = a;
  n.rows = nodes_[a].rows;
  n.cols = nodes_[a].cols;
  return push(n);
}

int Tape::relu(int a) {
  check_node(a);
  Node n;
  n.op = Op::kRelu;
  n.in0 = a;
  n.rows = nodes_[a].rows;
  n.cols = nodes_[a].cols;
  return push(n);
}

int Tape::mul(int a, int b) {
  check_node(a);
  check_node(b);
  if (node_size(nodes_[a]) != node_size(nodes_[b]))
    throw InvalidArgument("mul: shape mismatch");
  Node n;
  n.op = Op::kMul;
  n.in0 = a;
  n.in1 = b;
  n.rows = nodes_[a].rows;
  n.cols = nodes_[a].cols;
  return push(n);
}

int Tape::gru_combine(int h, int z, int htilde) {
  check_node(h);
  check_node(z);
  check_node(htilde);
  Node n;
  n.op = Op::kGruCombine;
  n.in0 = h;
  n.in1 = z;
  n.in2 = htilde;
  n.rows = nodes_[h].rows;
  return push(n);
}

int Tape::reduce_sum(int a) {
  check_node(a);
  Node n;
  n.op = Op::kReduceSum;
  n.in0 = a;
  n.rows = 1;
  return push(n);
}

int Tape::log_prob(int logits, int action) {
  check_node(logits);
  if (action < 0 || action >= nodes_[logits].rows)
    throw InvalidArgument("log_prob: action out of range");
  Node n;
  n.op = Op::kLogProb;
  n.in0 = logits;
  n.aux_int = action;
  n.rows = 1;
  return push(n);
}

int Tape::ratio_advantage(int lp, double lp_old, double advantage) {
  check_node(lp);
  Node n;
  n.op = Op::kRatioAdv;
  n.in0 = lp;
  n.aux0 = lp_old;
  n.aux1 = advantage;
  n.rows = 1;
  return push(n);
}

int Tape::kl_fixed(std::span<const double> p_old, int logits) {
  check_node(logits);
  if (static_cast<int>(p_old.size()) != nodes_[logits].rows)
    throw InvalidArgument("kl_fixed: distribution size mismatch");
  Node n;
  n.op = Op::kKlFixed;
  n.in0 = logits;
  n.aux_offset = aux_.size();
  aux_.insert(aux_.end(), p_old.begin(), p_old.end());
  n.rows = 1;
  return push(n);
}

int Tape::square_diff(int scalar_node, double target) {
  check_node(scalar_node);
  Node n;
  n.op = Op::kSquareDiff;
  n.in0 = scalar_node;
  n.aux0 = target;
  n.rows = 1;
  return push(n);
}

int Tape::sum(std::span<const int> scalar_nodes) {
  Node n;
  n.op = Op::kSum;
  n.multi_offset = multi_.size();
  n.multi_count = static_cast<int>(scalar_nodes.size());
  multi_.insert(multi_.end(), scalar_nodes.begin(), scalar_nodes.end());
  n.rows = 1;
  return push(n);
}

void Tape::eval(const Node& n, double* out) {
  const std::size_t sz = node_size(n);
  switch (n.op) {
    case Op::kParam: {
      const auto& p = params_->value(n.aux_int);
      std::copy(p.values.begin(), p.values.end(), out);
      break;
    }
    case Op::kConst:
      break;  // written at build time, never refreshed
    case Op::kWeightNorm: {
      const Node& vn = nodes_[n.in0];
      const Node& gn = nodes_[n.in1];
      const double* v = val(vn);
      const double* g = val(gn);
      for (int i = 0; i < n.rows; ++i) {
        CMapVec row(v + static_cast<std::size_t>(i) * n.cols, n.cols);
        double norm = row.norm();
        if (!(norm > 0.0)) throw NumericalFailure("weight_norm: zero-norm direction row");
        MapVec(out + static_cast<std::size_t>(i) * n.cols, n.cols) = (g[i] / norm) * row;
      }
      break;
    }
    case Op::kAffine: {
      CMapMat w(val(nodes_[n.in0]), nodes_[n.in0].rows, nodes_[n.in0].cols);
      CMapVec x(val(nodes_[n.in1]), nodes_[n.in1].rows);
      CMapVec b(val(nodes_[n.in2]), n.rows);
      MapVec y(out, n.rows);
      y.noalias() = w * x;
      y += b;
      break;
    }
    case Op::kAffine2: {
      CMapMat w1(val(nodes_[n.in0]), nodes_[n.in0].rows, nodes_[n.in0].cols);
      CMapVec x1(val(nodes_[n.in1]), nodes_[n.in1].rows);
      CMapMat w2(val(nodes_[n.in2]), nodes_[n.in2].rows, nodes_[n.in2].cols);
      CMapVec x2(val(nodes_[n.in3]), nodes_[n.in3].rows);
      CMapVec b(val(nodes_[n.in4]), n.rows);
      MapVec y(out, n.rows);
      y.noalias() = w1 * x1;
      y.noalias() += w2 * x2;
      y += b;
      break;
    }
    case Op::kSigmoid: {
      const double* a = val(nodes_[n.in0]);
      for (std::size_t i = 0; i < sz; ++i) out[i] = 1.0 / (1.0 + std::exp(-a[i]));
      break;
    }
    case Op::kTanh: {
      const double* a = val(nodes_[n.in0]);
      for (std::size_t i = 0; i < sz; ++i) out[i] = std::tanh(a[i]);
      break;
    }
    case Op::kRelu: {
      const double* a = val(nodes_[n.in0]);
      for (std::size_t i = 0; i < sz; ++i) out[i] = a[i] > 0.0 ? a[i] : 0.0;
      break;
    }
    case Op::kMul: {
      const double* a = val(nodes_[n.in0]);
      const double* b = val(nodes_[n.in1]);
      for (std::size_t i = 0; i < sz; ++i) out[i] = a[i] * b[i];
      break;
    }
    case Op::kGruCombine: {
      const double* h = val(nodes_[n.in0]);
      const double* z = val(nodes_[n.in1]);
      const double* ht = val(nodes_[n.in2]);
      for (std::size_t i = 0; i < sz; ++i) out[i] = (1.0 - z[i]) * h[i] + z[i] * ht[i];
      break;
    }
    case Op::kReduceSum: {
      const Node& a = nodes_[n.in0];
      out[0] = std::accumulate(val(a), val(a) + node_size(a), 0.0);
      break;
    }
    case Op::kLogProb: {
      const Node& l = nodes_[n.in0];
      out[0] = val(l)[n.aux_int] - log_sum_exp(val(l), l.rows);
      break;
    }
    case Op::kRatioAdv:
      out[0] = std::exp(val(nodes_[n.in0])[0] - n.aux0) * n.aux1;
      break;
    case Op::kKlFixed: {
      const Node& l = nodes_[n.in0];
      const double* p = aux_.data() + n.aux_offset;
      double lse = log_sum_exp(val(l), l.rows);
      double kl = 0.0;
      for (int i = 0; i < l.rows; ++i)
        if (p[i] > 0.0) kl += p[i] * (std::log(p[i]) - (val(l)[i] - lse));
      out[0] = kl;
      break;
    }
    case Op::kSquareDiff: {
      double d = val(nodes_[n.in0])[0] - n.aux0;
      out[0] = d * d;
      break;
    }
    case Op::kSum: {
      double acc = 0.0;
      for (int i = 0; i < n.multi_count; ++i)
        acc += val(nodes_[multi_[n.multi_offset + i]])[0];
      out[0] = acc;
      break;
    }
  }
}

std::span<const double> Tape::value(int node) const {
  check_node(node);
  return {val(nodes_[node]), node_size(nodes_[node])};
}

std::span<const double> Tape::tangent_value(int node) const {
  check_node(node);
  const Node& n = nodes_[node];
  return {tan_.data() + n.offset, node_size(n)};
}

void Tape::recompute() {
  for (auto& n : nodes_) eval(n, val(n));
}

void Tape::zero_node_grads() {
  std::fill(grad_.begin(), grad_.begin() + static_cast<long>(slab_used_), 0.0);
  grads_zeroed_ = true;
}

void Tape::seed_grad(int node, std::span<const double> seed) {
  check_node(node);
  if (!grads_zeroed_) throw ProtocolViolation("Tape: seed_grad before zero_node_grads");
  const Node& n = nodes_[node];
  if (seed.size() != node_size(n)) throw InvalidArgument("seed_grad: shape mismatch");
  double* g = grd(n);
  for (std::size_t i = 0; i < seed.size(); ++i) g[i] += seed[i];
}

void Tape::backward(int node, double seed) {
  check_node(node);
  if (nodes_[node].rows != 1 || nodes_[node].cols != 1)
    throw InvalidArgument("backward: loss must be a scalar node");
  zero_node_grads();
  seed_grad(node, std::span<const double>(&seed, 1));
  run_backward();
}

void Tape::run_backward() {
  if (nodes_.empty()) throw ProtocolViolation("Tape: backward before forward");
  if (!grads_zeroed_) throw ProtocolViolation("Tape: backward without seeding");
  for (int i = static_cast<int>(nodes_.size()) - 1; i >= 0; --i) {
    const Node& n = nodes_[i];
    const double* gy = grd(n);
    const std::size_t sz = node_size(n);
    switch (n.op) {
      case Op::kParam: {
        auto& pg = params_->grad(n.aux_int);
        for (std::size_t j = 0; j < sz; ++j) pg.values[j] += gy[j];
        break;
      }
      case Op::kConst:
        break;
      case Op::kWeightNorm: {
        const Node& vn = nodes_[n.in0];
        const Node& gn = nodes_[n.in1];
        const double* v = val(vn);
        const double* g = val(gn);
        double* dv = grd(vn);
        double* dg = grd(gn);
        for (int r = 0; r < n.rows; ++r) {
          std::size_t o = static_cast<std::size_t>(r) * n.cols;
          CMapVec row(v + o, n.cols);
          CMapVec gout(gy + o, n.cols);
          double norm = row.norm();
          Eigen::VectorXd u = row / norm;
          double dot = gout.dot(u);
          dg[r] += dot;
          MapVec(dv + o, n.cols) += (g[r] / norm) * (gout - dot * u);
        }
        break;
      }
      case Op::kAffine: {
        const Node& wn = nodes_[n.in0];
        const Node& xn = nodes_[n.in1];
        CMapMat w(val(wn), wn.rows, wn.cols);
        CMapVec x(val(xn), xn.rows);
        CMapVec gyv(gy, n.rows);
        MapMat(grd(wn), wn.rows, wn.cols).noalias() += gyv * x.transpose();
        MapVec(grd(xn), xn.rows).noalias() += w.transpose() * gyv;
        MapVec(grd(nodes_[n.in2]), n.rows) += gyv;
        break;
      }
      case Op::kAffine2: {
        const Node& w1n = nodes_[n.in0];
        const Node& x1n = nodes_[n.in1];
        const Node& w2n = nodes_[n.in2];
        const Node& x2n = nodes_[n.in3];
        CMapVec gyv(gy, n.rows);
        {
          CMapMat w1(val(w1n), w1n.rows, w1n.cols);
          CMapVec x1(val(x1n), x1n.rows);
          MapMat(grd(w1n), w1n.rows, w1n.cols).noalias() += gyv * x1.transpose();
          MapVec(grd(x1n), x1n.rows).noalias() += w1.transpose() * gyv;
        }
        {
          CMapMat w2(val(w2n), w2n.rows, w2n.cols);
          CMapVec x2(val(x2n), x2n.rows);
          MapMat(grd(w2n), w2n.rows, w2n.cols).noalias() += gyv * x2.transpose();
          MapVec(grd(x2n), x2n.rows).noalias() += w2.transpose() * gyv;
        }
        MapVec(grd(nodes_[n.in4]), n.rows) += gyv;
        break;
      }
      case Op::kSigmoid: {
        const double* y = val(n);
        double* da = grd(nodes_[n.in0]);
        for (std::size_t j = 0; j < sz; ++j) da[j] += gy[j] * y[j] * (1.0 - y[j]);
        break;
      }
      case Op::kTanh: {
        const double* y = val(n);
        double* da = grd(nodes_[n.in0]);
        for (std::size_t j = 0; j < sz; ++j) da[j] += gy[j] * (1.0 - y[j] * y[j]);
        break;
      }
      case Op::kRelu: {
        const double* a = val(nodes_[n.in0]);
        double* da = grd(nodes_[n.in0]);
        for (std::size_t j = 0; j < sz; ++j)
          if (a[j] > 0.0) da[j] += gy[j];
        break;
      }
      case Op::kMul: {
        const double* a = val(nodes_[n.in0]);
        const double* b = val(nodes_[n.in1]);
        double* da = grd(nodes_[n.in0]);
        double* db = grd(nodes_[n.in1]);
        for (std::size_t j = 0; j < sz; ++j) {
          da[j] += gy[j] * b[j];
          db[j] += gy[j] * a[j];
        }
        break;
      }
      case Op::kGruCombine: {
        const double* h = val(nodes_[n.in0]);
        const double* z = val(nodes_[n.in1]);
        const double* ht = val(nodes_[n.in2]);
        double* dh = grd(nodes_[n.in0]);
        double* dz = grd(nodes_[n.in1]);
        double* dht = grd(nodes_[n.in2]);
        for (std::size_t j = 0; j < sz; ++j) {
          dh[j] += gy[j] * (1.0 - z[j]);
          dz[j] += gy[j] * (ht[j] - h[j]);
          dht[j] += gy[j] * z[j];
        }
        break;
      }
      case Op::kReduceSum: {
        const Node& a = nodes_[n.in0];
        double* da = grd(a);
        for (std::size_t j = 0; j < node_size(a); ++j) da[j] += gy[0];
        break;
      }
      case Op::kLogProb: {
        const Node& l = nodes_[n.in0];
        double* dl = grd(l);
        std::vector<double> p(static_cast<std::size_t>(l.rows));
        softmax(val(l), l.rows, p.data());
        for (int j = 0; j < l.rows; ++j) dl[j] -= gy[0] * p[j];
        dl[n.aux_int] += gy[0];
        break;
      }
      case Op::kRatioAdv:
        grd(nodes_[n.in0])[0] += gy[0] * val(n)[0];
        break;
      case Op::kKlFixed: {
        const Node& l = nodes_[n.in0];
        double* dl = grd(l);
        const double* p = aux_.data() + n.aux_offset;
        std::vector<double> q(static_cast<std::size_t>(l.rows));
        softmax(val(l), l.rows, q.data());
        for (int j = 0; j < l.rows; ++j) dl[j] += gy[0] * (q[j] - p[j]);
        break;
      }
      case Op::kSquareDiff:
        grd(nodes_[n.in0])[0] += gy[0] * 2.0 * (val(nodes_[n.in0])[0] - n.aux0);
        break;
      case Op::kSum:
        for (int j = 0; j < n.multi_count; ++j)
          grd(nodes_[multi_[n.multi_offset + j]])[0] += gy[0];
        break;
    }
  }
  grads_zeroed_ = false;
}

void Tape::forward_tangent() {
  std::fill(tan_.begin(), tan_.begin() + static_cast<long>(slab_used_), 0.0);
  for (auto& n : nodes_) {
    double* ty = tan(n);
    const std::size_t sz = node_size(n);
    switch (n.op) {
      case Op::kParam: {
        const auto& pt = params_->tangent(n.aux_int);
        std::copy(pt.values.begin(), pt.values.end(), ty);
        break;
      }
      case Op::kConst:
        break;
      case Op::kWeightNorm: {
        const Node& vn = nodes_[n.in0];
        const Node& gn = nodes_[n.in1];
        const double* v = val(vn);
        const double* g = val(gn);
        const double* tv = tan(vn);
        const double* tg = tan(gn);
        for (int r = 0; r < n.rows; ++r) {
          std::size_t o = static_cast<std::size_t>(r) * n.cols;
          CMapVec row(v + o, n.cols);
          CMapVec trow(tv + o, n.cols);
          double norm = row.norm();
          Eigen::VectorXd u = row / norm;
          double dot = trow.dot(u);
          MapVec(ty + o, n.cols) = tg[r] * u + (g[r] / norm) * (trow - dot * u);
        }
        break;
      }
      case Op::kAffine: {
        const Node& wn = nodes_[n.in0];
        const Node& xn = nodes_[n.in1];
        CMapMat w(val(wn), wn.rows, wn.cols);
        CMapMat tw(tan(wn), wn.rows, wn.cols);
        CMapVec x(val(xn), xn.rows);
        CMapVec tx(tan(xn), xn.rows);
        CMapVec tb(tan(nodes_[n.in2]), n.rows);
        MapVec tyv(ty, n.rows);
        tyv.noalias() = w * tx;
        tyv.noalias() += tw * x;
        tyv += tb;
        break;
      }
      case Op::kAffine2: {
        CMapMat w1(val(nodes_[n.in0]), nodes_[n.in0].rows, nodes_[n.in0].cols);
        CMapMat tw1(tan(nodes_[n.in0]), nodes_[n.in0].rows, nodes_[n.in0].cols);
        CMapVec x1(val(nodes_[n.in1]), nodes_[n.in1].rows);
        CMapVec tx1(tan(nodes_[n.in1]), nodes_[n.in1].rows);
        CMapMat w2(val(nodes_[n.in2]), nodes_[n.in2].rows, nodes_[n.in2].cols);
        CMapMat tw2(tan(nodes_[n.in2]), nodes_[n.in2].rows, nodes_[n.in2].cols);
        CMapVec x2(val(nodes_[n.in3]), nodes_[n.in3].rows);
        CMapVec tx2(tan(nodes_[n.in3]), nodes_[n.in3].rows);
        CMapVec tb(tan(nodes_[n.in4]), n.rows);
        MapVec tyv(ty, n.rows);
        tyv.noalias() = w1 * tx1;
        tyv.noalias() += tw1 * x1;
        tyv.noalias() += w2 * tx2;
        tyv.noalias() += tw2 * x2;
        tyv += tb;
        break;
      }
      case Op::kSigmoid: {
        const double* y = val(n);
        const double* ta = tan(nodes_[n.in0]);
        for (std::size_t j = 0; j < sz; ++j) ty[j] = ta[j] * y[j] * (1.0 - y[j]);
        break;
      }
      case Op::kTanh: {
        const double* y = val(n);
        const double* ta = tan(nodes_[n.in0]);
        for (std::size_t j = 0; j < sz; ++j) ty[j] = ta[j] * (1.0 - y[j] * y[j]);
        break;
      }
      case Op::kRelu: {
        const double* a = val(nodes_[n.in0]);
        const double* ta = tan(nodes_[n.in0]);
        for (std::size_t j = 0; j < sz; ++j) ty[j] = a[j] > 0.0 ? ta[j] : 0.0;
        break;
      }
      case Op::kMul: {
        const double* a = val(nodes_[n.in0]);
        const double* b = val(nodes_[n.in1]);
        const double* ta = tan(nodes_[n.in0]);
        const double* tb = tan(nodes_[n.in1]);
        for (std::size_t j = 0; j < sz; ++j) ty[j] = ta[j] * b[j] + a[j] * tb[j];
        break;
      }
      case Op::kGruCombine: {
        const double* h = val(nodes_[n.in0]);
        const double* z = val(nodes_[n.in1]);
        const double* ht = val(nodes_[n.in2]);
        const double* th = tan(nodes_[n.in0]);
        const double* tz = tan(nodes_[n.in1]);
        const double* tht = tan(nodes_[n.in2]);
        for (std::size_t j = 0; j < sz; ++j)
          ty[j] = (1.0 - z[j]) * th[j] + (ht[j] - h[j]) * tz[j] + z[j] * tht[j];
        break;
      }
      case Op::kReduceSum: {
        const Node& a = nodes_[n.in0];
        const double* ta = tan(a);
        ty[0] = std::accumulate(ta, ta + node_size(a), 0.0);
        break;
      }
      case Op::kLogProb: {
        const Node& l = nodes_[n.in0];
        const double* tl = tan(l);
        std::vector<double> p(static_cast<std::size_t>(l.rows));
        softmax(val(l), l.rows, p.data());
        double mean_t = 0.0;
        for (int j = 0; j < l.rows; ++j) mean_t += p[j] * tl[j];
        ty[0] = tl[n.aux_int] - mean_t;
        break;
      }
      case Op::kRatioAdv:
        ty[0] = val(n)[0] * tan(nodes_[n.in0])[0];
        break;
      case Op::kKlFixed: {
        const Node& l = nodes_[n.in0];
        const double* tl = tan(l);
        const double* p = aux_.data() + n.aux_offset;
        std::vector<double> q(static_cast<std::size_t>(l.rows));
        softmax(val(l), l.rows, q.data());
        double acc = 0.0;
        for (int j = 0; j < l.rows; ++j) acc += (q[j] - p[j]) * tl[j];
        ty[0] = acc;
        break;
      }
      case Op::kSquareDiff:
        ty[0] = 2.0 * (val(nodes_[n.in0])[0] - n.aux0) * tan(nodes_[n.in0])[0];
        break;
      case Op::kSum: {
        double acc = 0.0;
        for (int j = 0; j < n.multi_count; ++j) acc += tan(nodes_[multi_[n.multi_offset + j]])[0];
        ty[0] = acc;
        break;
      }
    }
  }
}

std::vector<double> conjugate_gradient(
    const std::function<void(std::span<const double>, std::span<double>)>& matvec,
    std::span<const double> b, int iterations, double residual_tol) {
  const std::size_t n = b.size();
  std::vector<double> x(n, 0.0), r(b.begin(), b.end()), p(b.begin(), b.end()), ap(n);
  double rr = std::inner_product(r.begin(), r.end(), r.begin(), 0.0);
  for (int it = 0; it < iterations && std::sqrt(rr) > residual_tol; ++it) {
    matvec(p, ap);
    double pap = std::inner_product(p.begin(), p.end(), ap.begin(), 0.0);
    if (!std::isfinite(pap) || pap <= 0.0)
      throw NumericalFailure("conjugate_gradient: non-positive curvature");
    double alpha = rr / pap;
    double rr_next = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      x[i] += alpha * p[i];
      r[i] -= alpha * ap[i];
      rr_next += r[i] * r[i];
    }
    if (!std::isfinite(rr_next)) throw NumericalFailure("conjugate_gradient: non-finite residual");
    double beta = rr_next / rr;
    rr = rr_next;
    for (std::size_t i = 0; i < n; ++i) p[i] = r[i] + beta * p[i];
  }
  return x;
}

}  // namespace metarl::nn

namespace metarl::nn {

void Adam::step(ParamStore& params, std::span<const double> gradient) {
  if (gradient.size() != m_.size()) throw InvalidArgument("Adam::step: dimension mismatch");
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, t_);
  const double bc2 = 1.0 - std::pow(beta2_, t_);
  std::vector<double> update(m_.size());
  for (std::size_t i = 0; i < m_.size(); ++i) {
    m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * gradient[i];
    v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * gradient[i] * gradient[i];
    update[i] = (m_[i] / bc1) / (std::sqrt(v_[i] / bc2) + eps_);
  }
  params.add_scaled(update, -step_size_);
}

}  // namespace metarl::nn
