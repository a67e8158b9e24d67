#include "groundlab/neural/layers.hpp"

namespace groundlab::nn {

GruParams GruParams::create(ParamStore& store, const std::string& prefix, std::size_t input, std::size_t hidden) {
  GruParams p{};
  p.wz = &store.add(prefix + ".wz", {hidden, input});
  p.uz = &store.add(prefix + ".uz", {hidden, hidden});
  p.bz = &store.add(prefix + ".bz", {hidden}, Init::Zeros);
  p.wr = &store.add(prefix + ".wr", {hidden, input});
  p.ur = &store.add(prefix + ".ur", {hidden, hidden});
  p.br = &store.add(prefix + ".br", {hidden}, Init::Zeros);
  p.wh = &store.add(prefix + ".wh", {hidden, input});
  p.uh = &store.add(prefix + ".uh", {hidden, hidden});
  p.bh = &store.add(prefix + ".bh", {hidden}, Init::Zeros);
  return p;
}

GruParams GruParams::bind(ParamStore& store, const std::string& prefix) {
  return {&store.get(prefix + ".wz"), &store.get(prefix + ".uz"), &store.get(prefix + ".bz"),
          &store.get(prefix + ".wr"), &store.get(prefix + ".ur"), &store.get(prefix + ".br"),
          &store.get(prefix + ".wh"), &store.get(prefix + ".uh"), &store.get(prefix + ".bh")};
}

Var gru_cell(Tape& t, const GruParams& p, Var x, Var h) {
  const Var z = t.sigmoid(t.add(t.affine(t.param(*p.wz), x, t.param(*p.bz)), t.matvec(t.param(*p.uz), h)));
  const Var r = t.sigmoid(t.add(t.affine(t.param(*p.wr), x, t.param(*p.br)), t.matvec(t.param(*p.ur), h)));
  const Var c =
      t.tanh(t.add(t.affine(t.param(*p.wh), x, t.param(*p.bh)), t.matvec(t.param(*p.uh), t.mul(r, h))));
  return t.add(t.mul(t.one_minus(z), h), t.mul(z, c));
}

LinearParams LinearParams::create(ParamStore& store, const std::string& prefix, std::size_t input,
                                  std::size_t output) {
  return {&store.add(prefix + ".w", {output, input}), &store.add(prefix + ".b", {output}, Init::Zeros)};
}

LinearParams LinearParams::bind(ParamStore& store, const std::string& prefix) {
  return {&store.get(prefix + ".w"), &store.get(prefix + ".b")};
}

}  // namespace groundlab::nn
