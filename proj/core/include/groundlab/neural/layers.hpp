#pragma once

#include <string>

#include "groundlab/neural/param_store.hpp"
#include "groundlab/neural/tape.hpp"

namespace groundlab::nn {

/// Parameters of one GRU cell:
///   z = sigmoid(Wz x + Uz h + bz)
///   r = sigmoid(Wr x + Ur h + br)
///   c = tanh(Wh x + Uh (r * h) + bh)
///   h' = (1 - z) * h + z * c
struct GruParams {
  Param* wz;
  Param* uz;
  Param* bz;
  Param* wr;
  Param* ur;
  Param* br;
  Param* wh;
  Param* uh;
  Param* bh;

  static GruParams create(ParamStore& store, const std::string& prefix, std::size_t input, std::size_t hidden);
  static GruParams bind(ParamStore& store, const std::string& prefix);
  std::size_t hidden() const { return bz->value.size(); }
};

Var gru_cell(Tape& tape, const GruParams& p, Var x, Var h);

struct LinearParams {
  Param* w;
  Param* b;

  static LinearParams create(ParamStore& store, const std::string& prefix, std::size_t input, std::size_t output);
  static LinearParams bind(ParamStore& store, const std::string& prefix);
};

inline Var linear(Tape& tape, const LinearParams& p, Var x) {
  return tape.affine(tape.param(*p.w), x, tape.param(*p.b));
}

}  // namespace groundlab::nn
