#include "groundlab/neural/tape.hpp"

#include <algorithm>
#include <cmath>

#include "groundlab/error.hpp"
#include "groundlab/neural/crf.hpp"

namespace groundlab::nn {

namespace {

void require(bool ok, const char* what) {
  if (!ok) throw ShapeError(what);
}

double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

double sigmoid_of(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

Tensor softmax_of(const Tensor& a) {
  Tensor y = a;
  const double mx = *std::max_element(a.values().begin(), a.values().end());
  double s = 0.0;
  for (auto& v : y.values()) {
    v = std::exp(v - mx);
    s += v;
  }
  for (auto& v : y.values()) v /= s;
  return y;
}

double logsumexp_of(std::span<const double> a) {
  const double mx = *std::max_element(a.begin(), a.end());
  double s = 0.0;
  for (double v : a) s += std::exp(v - mx);
  return mx + std::log(s);
}

}  // namespace

const Tensor& Tape::val(int id) const {
  const auto& n = nodes_[static_cast<std::size_t>(id)];
  return n.param ? n.param->value : n.value;
}

const Tensor& Tape::value(Var v) const { return val(v.id); }

const Tensor& Tape::grad(Var v) const {
  const auto& n = node(v);
  return n.param ? n.param->grad : n.grad;
}

Tensor& Tape::grad_buffer(int id) {
  auto& n = nodes_[static_cast<std::size_t>(id)];
  if (n.param) return n.param->grad;
  if (n.grad.empty()) n.grad = Tensor(n.value.shape());
  return n.grad;
}

Var Tape::push(Node n) {
  nodes_.push_back(std::move(n));
  return Var{static_cast<int>(nodes_.size() - 1)};
}

Var Tape::param(Param& p) {
  if (const auto it = param_nodes_.find(&p); it != param_nodes_.end()) return Var{it->second};
  Node n;
  n.op = Op::Param;
  n.param = &p;
  const auto v = push(std::move(n));
  param_nodes_[&p] = v.id;
  return v;
}

Var Tape::constant(Tensor value) {
  Node n;
  n.op = Op::Constant;
  n.value = std::move(value);
  return push(std::move(n));
}

Var Tape::matvec(Var w, Var x) {
  const auto& W = value(w);
  const auto& X = value(x);
  require(W.rank() == 2 && W.cols() == X.size(), "matvec: shape mismatch");
  Tensor y({W.rows()});
  const std::size_t m = W.rows(), k = W.cols();
  const double* wp = W.data();
  const double* xp = X.data();
  for (std::size_t i = 0; i < m; ++i) {
    double s = 0.0;
    const double* row = wp + i * k;
    for (std::size_t j = 0; j < k; ++j) s += row[j] * xp[j];
    y[i] = s;
  }
  Node n;
  n.op = Op::MatVec;
  n.in = {w.id, x.id};
  n.value = std::move(y);
  return push(std::move(n));
}

Var Tape::affine(Var w, Var x, Var b) {
  const auto& W = value(w);
  const auto& X = value(x);
  const auto& B = value(b);
  require(W.rank() == 2 && W.cols() == X.size() && B.size() == W.rows(), "affine: shape mismatch");
  Tensor y({W.rows()});
  const std::size_t m = W.rows(), k = W.cols();
  const double* wp = W.data();
  const double* xp = X.data();
  for (std::size_t i = 0; i < m; ++i) {
    double s = B[i];
    const double* row = wp + i * k;
    for (std::size_t j = 0; j < k; ++j) s += row[j] * xp[j];
    y[i] = s;
  }
  Node n;
  n.op = Op::Affine;
  n.in = {w.id, x.id, b.id};
  n.value = std::move(y);
  return push(std::move(n));
}

Var Tape::row(Var matrix, std::size_t index) {
  const auto& M = value(matrix);
  require(M.rank() == 2 && index < M.rows(), "row: index out of range");
  Tensor y({M.cols()});
  std::copy_n(M.data() + index * M.cols(), M.cols(), y.data());
  Node n;
  n.op = Op::Row;
  n.in = {matrix.id};
  n.index = index;
  n.value = std::move(y);
  return push(std::move(n));
}

Var Tape::add(Var a, Var b) {
  const auto& A = value(a);
  const auto& B = value(b);
  require(A.size() == B.size(), "add: shape mismatch");
  Tensor y = A;
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += B[i];
  Node n;
  n.op = Op::Add;
  n.in = {a.id, b.id};
  n.value = std::move(y);
  return push(std::move(n));
}

Var Tape::add(std::span<const Var> xs) {
  require(!xs.empty(), "add: no inputs");
  Tensor y = value(xs[0]);
  Node n;
  n.op = Op::AddN;
  n.in.push_back(xs[0].id);
  for (std::size_t k = 1; k < xs.size(); ++k) {
    const auto& X = value(xs[k]);
    require(X.size() == y.size(), "add: shape mismatch");
    for (std::size_t i = 0; i < y.size(); ++i) y[i] += X[i];
    n.in.push_back(xs[k].id);
  }
  n.value = std::move(y);
  return push(std::move(n));
}

Var Tape::sub(Var a, Var b) {
  const auto& A = value(a);
  const auto& B = value(b);
  require(A.size() == B.size(), "sub: shape mismatch");
  Tensor y = A;
  for (std::size_t i = 0; i < y.size(); ++i) y[i] -= B[i];
  Node n;
  n.op = Op::Sub;
  n.in = {a.id, b.id};
  n.value = std::move(y);
  return push(std::move(n));
}

Var Tape::mul(Var a, Var b) {
  const auto& A = value(a);
  const auto& B = value(b);
  require(A.size() == B.size(), "mul: shape mismatch");
  Tensor y = A;
  for (std::size_t i = 0; i < y.size(); ++i) y[i] *= B[i];
  Node n;
  n.op = Op::Mul;
  n.in = {a.id, b.id};
  n.value = std::move(y);
  return push(std::move(n));
}

Var Tape::scale(Var a, double s) {
  Tensor y = value(a);
  for (auto& v : y.values()) v *= s;
  Node n;
  n.op = Op::Scale;
  n.in = {a.id};
  n.factor = s;
  n.value = std::move(y);
  return push(std::move(n));
}

Var Tape::one_minus(Var a) {
  Tensor y = value(a);
  for (auto& v : y.values()) v = 1.0 - v;
  Node n;
  n.op = Op::OneMinus;
  n.in = {a.id};
  n.value = std::move(y);
  return push(std::move(n));
}

Var Tape::tanh(Var a) {
  Tensor y = value(a);
  for (auto& v : y.values()) v = std::tanh(v);
  Node n;
  n.op = Op::Tanh;
  n.in = {a.id};
  n.value = std::move(y);
  return push(std::move(n));
}

Var Tape::sigmoid(Var a) {
  Tensor y = value(a);
  for (auto& v : y.values()) v = sigmoid_of(v);
  Node n;
  n.op = Op::Sigmoid;
  n.in = {a.id};
  n.value = std::move(y);
  return push(std::move(n));
}

Var Tape::softmax(Var a) {
  Node n;
  n.op = Op::Softmax;
  n.in = {a.id};
  n.value = softmax_of(value(a));
  return push(std::move(n));
}

Var Tape::log_softmax(Var a) {
  const auto& A = value(a);
  const double lse = logsumexp_of(A.values());
  Tensor y = A;
  for (auto& v : y.values()) v -= lse;
  Node n;
  n.op = Op::LogSoftmax;
  n.in = {a.id};
  n.value = std::move(y);
  return push(std::move(n));
}

Var Tape::logsumexp(Var a) {
  const auto& A = value(a);
  Node n;
  n.op = Op::LogSumExp;
  n.in = {a.id};
  n.value = Tensor::from({logsumexp_of(A.values())});
  return push(std::move(n));
}

Var Tape::concat(std::span<const Var> xs) {
  require(!xs.empty(), "concat: no inputs");
  std::vector<double> y;
  Node n;
  n.op = Op::Concat;
  for (const auto& x : xs) {
    const auto& X = value(x);
    y.insert(y.end(), X.values().begin(), X.values().end());
    n.in.push_back(x.id);
  }
  n.value = Tensor::from(std::move(y));
  return push(std::move(n));
}

Var Tape::slice(Var a, std::size_t offset, std::size_t length) {
  const auto& A = value(a);
  require(length > 0 && offset + length <= A.size(), "slice: out of range");
  Tensor y({length});
  std::copy_n(A.data() + offset, length, y.data());
  Node n;
  n.op = Op::Slice;
  n.in = {a.id};
  n.index = offset;
  n.value = std::move(y);
  return push(std::move(n));
}

Var Tape::stack(std::span<const Var> scalars) {
  require(!scalars.empty(), "stack: no inputs");
  Tensor y({scalars.size()});
  Node n;
  n.op = Op::Stack;
  for (std::size_t i = 0; i < scalars.size(); ++i) {
    const auto& S = value(scalars[i]);
    require(S.size() == 1, "stack: inputs must be scalars");
    y[i] = S[0];
    n.in.push_back(scalars[i].id);
  }
  n.value = std::move(y);
  return push(std::move(n));
}

Var Tape::pick(Var a, std::size_t index) {
  const auto& A = value(a);
  require(index < A.size(), "pick: index out of range");
  Node n;
  n.op = Op::Pick;
  n.in = {a.id};
  n.index = index;
  n.value = Tensor::from({A[index]});
  return push(std::move(n));
}

Var Tape::dot(Var a, Var b) {
  const auto& A = value(a);
  const auto& B = value(b);
  require(A.size() == B.size(), "dot: shape mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < A.size(); ++i) s += A[i] * B[i];
  Node n;
  n.op = Op::Dot;
  n.in = {a.id, b.id};
  n.value = Tensor::from({s});
  return push(std::move(n));
}

Var Tape::sum(Var a) {
  double s = 0.0;
  for (double v : value(a).values()) s += v;
  Node n;
  n.op = Op::Sum;
  n.in = {a.id};
  n.value = Tensor::from({s});
  return push(std::move(n));
}

Var Tape::mean(std::span<const Var> xs) { return scale(add(xs), 1.0 / static_cast<double>(xs.size())); }

Var Tape::weighted_sum(Var weights, std::span<const Var> vectors) {
  const auto& W = value(weights);
  require(W.size() == vectors.size() && !vectors.empty(), "weighted_sum: count mismatch");
  Tensor y(value(vectors[0]).shape());
  Node n;
  n.op = Op::WeightedSum;
  n.in.push_back(weights.id);
  for (std::size_t k = 0; k < vectors.size(); ++k) {
    const auto& V = value(vectors[k]);
    require(V.size() == y.size(), "weighted_sum: shape mismatch");
    for (std::size_t i = 0; i < y.size(); ++i) y[i] += W[k] * V[i];
    n.in.push_back(vectors[k].id);
  }
  n.value = std::move(y);
  return push(std::move(n));
}

Var Tape::cross_entropy(Var logits, std::size_t target) {
  const auto& L = value(logits);
  require(target < L.size(), "cross_entropy: target out of range");
  Node n;
  n.op = Op::CrossEntropy;
  n.in = {logits.id};
  n.index = target;
  const auto p = softmax_of(L);
  n.value = Tensor::from({logsumexp_of(L.values()) - L[target]});
  n.aux.assign(p.values().begin(), p.values().end());
  return push(std::move(n));
}

Var Tape::bce_with_logits(Var logits, std::span<const double> targets) {
  const auto& L = value(logits);
  require(L.size() == targets.size(), "bce_with_logits: shape mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < L.size(); ++i) s += softplus(L[i]) - targets[i] * L[i];
  Node n;
  n.op = Op::Bce;
  n.in = {logits.id};
  n.aux.assign(targets.begin(), targets.end());
  n.value = Tensor::from({s / static_cast<double>(L.size())});
  return push(std::move(n));
}

Var Tape::crf_nll(std::span<const Var> emissions, Var transitions, std::span<const int> gold) {
  require(!emissions.empty() && emissions.size() == gold.size(), "crf_nll: length mismatch");
  const auto& trans = value(transitions);
  const std::size_t K = trans.rows();
  require(trans.rank() == 2 && trans.cols() == K, "crf_nll: transitions must be square");
  Tensor em({emissions.size(), K});
  Node n;
  n.op = Op::CrfNll;
  for (std::size_t t = 0; t < emissions.size(); ++t) {
    const auto& e = value(emissions[t]);
    require(e.size() == K, "crf_nll: emission width differs from tag count");
    std::copy_n(e.data(), K, em.data() + t * K);
    n.in.push_back(emissions[t].id);
    require(gold[t] >= 0 && static_cast<std::size_t>(gold[t]) < K, "crf_nll: gold tag out of range");
  }
  n.in.push_back(transitions.id);
  n.iaux.assign(gold.begin(), gold.end());
  auto marg = crf_marginals(em, trans);
  const double score = crf_path_score(em, trans, gold);
  n.value = Tensor::from({marg.log_partition - score});
  n.aux.assign(marg.unary.values().begin(), marg.unary.values().end());
  n.aux.insert(n.aux.end(), marg.pairwise.values().begin(), marg.pairwise.values().end());
  return push(std::move(n));
}

Var Tape::dropout(Var a, double rate, Rng& rng) {
  if (rate <= 0.0) return a;
  if (rate >= 1.0) throw InvalidArgument("dropout rate must be below 1");
  const auto& A = value(a);
  Node n;
  n.op = Op::Dropout;
  n.in = {a.id};
  n.aux.resize(A.size());
  Tensor y = A;
  for (std::size_t i = 0; i < A.size(); ++i) {
    n.aux[i] = rng.uniform() < rate ? 0.0 : 1.0 / (1.0 - rate);
    y[i] *= n.aux[i];
  }
  n.value = std::move(y);
  return push(std::move(n));
}

void Tape::accumulate(int id, std::size_t i, double g) { grad_buffer(id)[i] += g; }

void Tape::backward(Var loss) {
  require(value(loss).size() == 1, "backward: loss must be a scalar");
  grad_buffer(loss.id)[0] += 1.0;

  for (int id = loss.id; id >= 0; --id) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    if (n.op == Op::Param || n.op == Op::Constant || n.grad.empty()) continue;
    const Tensor& g = n.grad;
    auto is_const = [&](int in) { return nodes_[static_cast<std::size_t>(in)].op == Op::Constant; };

    switch (n.op) {
      case Op::MatVec:
      case Op::Affine: {
        const int w = n.in[0], x = n.in[1];
        const Tensor& W = val(w);
        const Tensor& X = val(x);
        const std::size_t m = W.rows(), k = W.cols();
        if (!is_const(w)) {
          double* dw = grad_buffer(w).data();
          for (std::size_t i = 0; i < m; ++i) {
            const double gi = g[i];
            if (gi == 0.0) continue;
            double* row = dw + i * k;
            for (std::size_t j = 0; j < k; ++j) row[j] += gi * X[j];
          }
        }
        if (!is_const(x)) {
          double* dx = grad_buffer(x).data();
          const double* wp = W.data();
          for (std::size_t i = 0; i < m; ++i) {
            const double gi = g[i];
            if (gi == 0.0) continue;
            const double* row = wp + i * k;
            for (std::size_t j = 0; j < k; ++j) dx[j] += gi * row[j];
          }
        }
        if (n.op == Op::Affine && !is_const(n.in[2])) {
          auto& db = grad_buffer(n.in[2]);
          for (std::size_t i = 0; i < m; ++i) db[i] += g[i];
        }
        break;
      }
      case Op::Row: {
        if (is_const(n.in[0])) break;
        auto& dm = grad_buffer(n.in[0]);
        const std::size_t d = g.size();
        for (std::size_t j = 0; j < d; ++j) dm[n.index * d + j] += g[j];
        break;
      }
      case Op::Add:
      case Op::AddN:
        for (int in : n.in) {
          if (is_const(in)) continue;
          auto& d = grad_buffer(in);
          for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i];
        }
        break;
      case Op::Sub: {
        if (!is_const(n.in[0])) {
          auto& d = grad_buffer(n.in[0]);
          for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i];
        }
        if (!is_const(n.in[1])) {
          auto& d = grad_buffer(n.in[1]);
          for (std::size_t i = 0; i < g.size(); ++i) d[i] -= g[i];
        }
        break;
      }
      case Op::Mul: {
        const int a = n.in[0], b = n.in[1];
        if (!is_const(a)) {
          const Tensor& B = val(b);
          auto& d = grad_buffer(a);
          for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i] * B[i];
        }
        if (!is_const(b)) {
          const Tensor& A = val(a);
          auto& d = grad_buffer(b);
          for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i] * A[i];
        }
        break;
      }
      case Op::Scale: {
        if (is_const(n.in[0])) break;
        auto& d = grad_buffer(n.in[0]);
        for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i] * n.factor;
        break;
      }
      case Op::OneMinus: {
        if (is_const(n.in[0])) break;
        auto& d = grad_buffer(n.in[0]);
        for (std::size_t i = 0; i < g.size(); ++i) d[i] -= g[i];
        break;
      }
      case Op::Tanh: {
        if (is_const(n.in[0])) break;
        auto& d = grad_buffer(n.in[0]);
        for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i] * (1.0 - n.value[i] * n.value[i]);
        break;
      }
      case Op::Sigmoid: {
        if (is_const(n.in[0])) break;
        auto& d = grad_buffer(n.in[0]);
        for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i] * n.value[i] * (1.0 - n.value[i]);
        break;
      }
      case Op::Softmax: {
        if (is_const(n.in[0])) break;
        double gy = 0.0;
        for (std::size_t i = 0; i < g.size(); ++i) gy += g[i] * n.value[i];
        auto& d = grad_buffer(n.in[0]);
        for (std::size_t i = 0; i < g.size(); ++i) d[i] += n.value[i] * (g[i] - gy);
        break;
      }
      case Op::LogSoftmax: {
        if (is_const(n.in[0])) break;
        double gs = 0.0;
        for (std::size_t i = 0; i < g.size(); ++i) gs += g[i];
        auto& d = grad_buffer(n.in[0]);
        for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i] - std::exp(n.value[i]) * gs;
        break;
      }
      case Op::LogSumExp: {
        if (is_const(n.in[0])) break;
        const Tensor& A = val(n.in[0]);
        auto& d = grad_buffer(n.in[0]);
        for (std::size_t i = 0; i < A.size(); ++i) d[i] += g[0] * std::exp(A[i] - n.value[0]);
        break;
      }
      case Op::Concat: {
        std::size_t off = 0;
        for (int in : n.in) {
          const std::size_t len = val(in).size();
          if (!is_const(in)) {
            auto& d = grad_buffer(in);
            for (std::size_t i = 0; i < len; ++i) d[i] += g[off + i];
          }
          off += len;
        }
        break;
      }
      case Op::Slice: {
        if (is_const(n.in[0])) break;
        auto& d = grad_buffer(n.in[0]);
        for (std::size_t i = 0; i < g.size(); ++i) d[n.index + i] += g[i];
        break;
      }
      case Op::Stack:
        for (std::size_t k = 0; k < n.in.size(); ++k)
          if (!is_const(n.in[k])) accumulate(n.in[k], 0, g[k]);
        break;
      case Op::Pick:
        if (!is_const(n.in[0])) accumulate(n.in[0], n.index, g[0]);
        break;
      case Op::Dot: {
        const int a = n.in[0], b = n.in[1];
        if (!is_const(a)) {
          const Tensor& B = val(b);
          auto& d = grad_buffer(a);
          for (std::size_t i = 0; i < B.size(); ++i) d[i] += g[0] * B[i];
        }
        if (!is_const(b)) {
          const Tensor& A = val(a);
          auto& d = grad_buffer(b);
          for (std::size_t i = 0; i < A.size(); ++i) d[i] += g[0] * A[i];
        }
        break;
      }
      case Op::Sum: {
        if (is_const(n.in[0])) break;
        auto& d = grad_buffer(n.in[0]);
        for (std::size_t i = 0; i < d.size(); ++i) d[i] += g[0];
        break;
      }
      case Op::WeightedSum: {
        const int w = n.in[0];
        const Tensor& W = val(w);
        for (std::size_t k = 1; k < n.in.size(); ++k) {
          const int v = n.in[k];
          const Tensor& V = val(v);
          if (!is_const(w)) {
            double s = 0.0;
            for (std::size_t i = 0; i < g.size(); ++i) s += g[i] * V[i];
            accumulate(w, k - 1, s);
          }
          if (!is_const(v)) {
            auto& d = grad_buffer(v);
            for (std::size_t i = 0; i < g.size(); ++i) d[i] += W[k - 1] * g[i];
          }
        }
        break;
      }
      case Op::CrossEntropy: {
        if (is_const(n.in[0])) break;
        auto& d = grad_buffer(n.in[0]);
        for (std::size_t i = 0; i < n.aux.size(); ++i)
          d[i] += g[0] * (n.aux[i] - (i == n.index ? 1.0 : 0.0));
        break;
      }
      case Op::Bce: {
        if (is_const(n.in[0])) break;
        const Tensor& L = val(n.in[0]);
        auto& d = grad_buffer(n.in[0]);
        const double inv = 1.0 / static_cast<double>(L.size());
        for (std::size_t i = 0; i < L.size(); ++i) d[i] += g[0] * (sigmoid_of(L[i]) - n.aux[i]) * inv;
        break;
      }
      case Op::CrfNll: {
        const std::size_t T = n.iaux.size();
        const int trans = n.in.back();
        const std::size_t K = val(trans).rows();
        for (std::size_t t = 0; t < T; ++t) {
          const int e = n.in[t];
          if (is_const(e)) continue;
          auto& d = grad_buffer(e);
          for (std::size_t k = 0; k < K; ++k)
            d[k] += g[0] * (n.aux[t * K + k] - (n.iaux[t] == static_cast<int>(k) ? 1.0 : 0.0));
        }
        if (!is_const(trans)) {
          auto& d = grad_buffer(trans);
          const double* pair = n.aux.data() + T * K;
          for (std::size_t i = 0; i < K * K; ++i) d[i] += g[0] * pair[i];
          for (std::size_t t = 1; t < T; ++t)
            d[static_cast<std::size_t>(n.iaux[t - 1]) * K + static_cast<std::size_t>(n.iaux[t])] -= g[0];
        }
        break;
      }
      case Op::Dropout: {
        if (is_const(n.in[0])) break;
        auto& d = grad_buffer(n.in[0]);
        for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i] * n.aux[i];
        break;
      }
      case Op::Param:
      case Op::Constant:
        break;
    }
  }
}

}  // namespace groundlab::nn
