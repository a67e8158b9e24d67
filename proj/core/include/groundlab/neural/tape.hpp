#pragma once

#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "groundlab/neural/param_store.hpp"
#include "groundlab/neural/tensor.hpp"
#include "groundlab/random.hpp"

namespace groundlab::nn {

struct Var {
  int id = -1;
  bool valid() const { return id >= 0; }
};

/// Reverse-mode differentiation over a fixed operator set. Nodes are appended
/// in evaluation order; backward() walks them in reverse. Parameter nodes
/// accumulate straight into the owning ParamStore's gradient buffers.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var param(Param& p);
  Var constant(Tensor value);
  Var constant(std::vector<double> values) { return constant(Tensor::from(std::move(values))); }

  /// W [m, n] times x [n].
  Var matvec(Var w, Var x);
  /// W x + b.
  Var affine(Var w, Var x, Var b);
  /// Row `index` of a [rows, d] matrix, as [d].
  Var row(Var matrix, std::size_t index);

  Var add(Var a, Var b);
  Var add(std::span<const Var> xs);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);
  Var scale(Var a, double s);
  /// 1 - a, elementwise.
  Var one_minus(Var a);

  Var tanh(Var a);
  Var sigmoid(Var a);
  Var softmax(Var a);
  Var log_softmax(Var a);
  Var logsumexp(Var a);

  Var concat(std::span<const Var> xs);
  Var slice(Var a, std::size_t offset, std::size_t length);
  /// Scalars [1] gathered into one vector.
  Var stack(std::span<const Var> scalars);
  Var pick(Var a, std::size_t index);
  Var dot(Var a, Var b);
  Var sum(Var a);
  Var mean(std::span<const Var> xs);
  /// sum_i weights[i] * vectors[i]
  Var weighted_sum(Var weights, std::span<const Var> vectors);

  /// -log softmax(logits)[target]
  Var cross_entropy(Var logits, std::size_t target);
  /// Mean binary cross-entropy of sigmoid(logits) against targets in {0, 1}.
  Var bce_with_logits(Var logits, std::span<const double> targets);
  /// Negative log-likelihood of `gold` under a linear-chain CRF whose
  /// emissions[t] are [K] vectors and transitions are [K, K] (from, to).
  Var crf_nll(std::span<const Var> emissions, Var transitions, std::span<const int> gold);

  /// Inverted dropout with a fresh mask; identity when rate is 0.
  Var dropout(Var a, double rate, Rng& rng);

  const Tensor& value(Var v) const;
  double scalar(Var v) const { return value(v)[0]; }
  const Tensor& grad(Var v) const;

  /// Seeds d(loss) = 1 and propagates to every node and parameter.
  void backward(Var loss);

  std::size_t size() const { return nodes_.size(); }

 private:
  enum class Op {
    Param, Constant, MatVec, Affine, Row, Add, AddN, Sub, Mul, Scale, OneMinus, Tanh, Sigmoid,
    Softmax, LogSoftmax, LogSumExp, Concat, Slice, Stack, Pick, Dot, Sum, WeightedSum,
    CrossEntropy, Bce, CrfNll, Dropout
  };

  struct Node {
    Op op;
    std::vector<int> in;
    Tensor value;
    Tensor grad;
    Param* param = nullptr;
    std::size_t index = 0;
    double factor = 0.0;
    std::vector<double> aux;
    std::vector<int> iaux;
  };

  Var push(Node n);
  Node& node(Var v) { return nodes_.at(static_cast<std::size_t>(v.id)); }
  const Node& node(Var v) const { return nodes_.at(static_cast<std::size_t>(v.id)); }
  const Tensor& val(int id) const;
  Tensor& grad_buffer(int id);
  void accumulate(int id, std::size_t i, double g);

  std::vector<Node> nodes_;
  std::unordered_map<const Param*, int> param_nodes_;
};

}  // namespace groundlab::nn
