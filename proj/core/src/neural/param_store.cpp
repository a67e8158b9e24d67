#include "groundlab/neural/param_store.hpp"

#include <bit>
#include <cmath>
#include <cstring>

#include "groundlab/error.hpp"
#include "groundlab/io.hpp"

namespace groundlab::nn {

namespace {

constexpr char kMagic[8] = {'G', 'L', 'P', 'A', 'R', 'A', 'M', 'S'};
constexpr std::uint32_t kVersion = 1;

static_assert(std::endian::native == std::endian::little, "checkpoint format assumes a little-endian host");

template <typename T>
void put(std::string& out, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(buf, sizeof(T));
}

template <typename T>
T take(const std::string& in, std::size_t& pos) {
  if (pos + sizeof(T) > in.size()) throw SchemaError("truncated parameter checkpoint");
  T v;
  std::memcpy(&v, in.data() + pos, sizeof(T));
  pos += sizeof(T);
  return v;
}

}  // namespace

Param& ParamStore::add(const std::string& name, std::vector<std::size_t> shape, Init init) {
  if (index_.count(name)) throw InvalidArgument("duplicate parameter " + name);
  auto p = std::make_unique<Param>();
  p->name = name;
  p->value = Tensor(shape);
  p->grad = Tensor(shape);
  if (init == Init::FanIn) {
    const double a = 1.0 / std::sqrt(static_cast<double>(shape.back()));
    for (auto& v : p->value.values()) v = rng_.uniform(-a, a);
  }
  index_[name] = params_.size();
  params_.push_back(std::move(p));
  return *params_.back();
}

Param& ParamStore::get(const std::string& name) {
  const auto it = index_.find(name);
  if (it == index_.end()) throw InvalidArgument("unknown parameter " + name);
  return *params_[it->second];
}

const Param& ParamStore::get(const std::string& name) const {
  const auto it = index_.find(name);
  if (it == index_.end()) throw InvalidArgument("unknown parameter " + name);
  return *params_[it->second];
}

void ParamStore::zero_grad() {
  for (auto& p : params_) p->grad.fill(0.0);
}

double ParamStore::grad_norm() const {
  double s = 0.0;
  for (const auto& p : params_)
    for (double g : p->grad.values()) s += g * g;
  return std::sqrt(s);
}

void ParamStore::clip_grad_norm(double max_norm) {
  const double n = grad_norm();
  if (n <= max_norm || n == 0.0) return;
  const double f = max_norm / n;
  for (auto& p : params_)
    for (auto& g : p->grad.values()) g *= f;
}

std::size_t ParamStore::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p->value.size();
  return n;
}

void ParamStore::copy_values_from(const ParamStore& other) {
  if (other.params_.size() != params_.size()) throw ShapeError("parameter layouts differ");
  for (std::size_t i = 0; i < params_.size(); ++i) {
    if (params_[i]->name != other.params_[i]->name || !params_[i]->value.same_shape(other.params_[i]->value))
      throw ShapeError("parameter layouts differ at " + params_[i]->name);
    params_[i]->value = other.params_[i]->value;
  }
}

bool ParamStore::same_values(const ParamStore& other) const {
  if (other.params_.size() != params_.size()) return false;
  for (std::size_t i = 0; i < params_.size(); ++i)
    if (params_[i]->name != other.params_[i]->name || !(params_[i]->value == other.params_[i]->value)) return false;
  return true;
}

std::string ParamStore::serialize() const {
  std::string out(kMagic, sizeof(kMagic));
  put<std::uint32_t>(out, kVersion);
  put<std::uint64_t>(out, seed_);
  put<std::uint64_t>(out, params_.size());
  for (const auto& p : params_) {
    put<std::uint64_t>(out, p->name.size());
    out += p->name;
    put<std::uint64_t>(out, p->value.shape().size());
    for (auto d : p->value.shape()) put<std::uint64_t>(out, d);
    out.append(reinterpret_cast<const char*>(p->value.data()), p->value.size() * sizeof(double));
  }
  return out;
}

ParamStore ParamStore::deserialize(const std::string& in) {
  if (in.size() < sizeof(kMagic) || std::memcmp(in.data(), kMagic, sizeof(kMagic)) != 0)
    throw SchemaError("not a parameter checkpoint");
  std::size_t pos = sizeof(kMagic);
  const auto version = take<std::uint32_t>(in, pos);
  if (version != kVersion) throw SchemaError("unsupported checkpoint version " + std::to_string(version));
  ParamStore store(take<std::uint64_t>(in, pos));
  const auto count = take<std::uint64_t>(in, pos);
  for (std::uint64_t i = 0; i < count; ++i) {
    const auto len = take<std::uint64_t>(in, pos);
    if (pos + len > in.size()) throw SchemaError("truncated parameter checkpoint");
    std::string name = in.substr(pos, len);
    pos += len;
    const auto rank = take<std::uint64_t>(in, pos);
    std::vector<std::size_t> shape;
    for (std::uint64_t r = 0; r < rank; ++r) shape.push_back(take<std::uint64_t>(in, pos));
    auto& p = store.add(name, shape, Init::Zeros);
    const auto bytes = p.value.size() * sizeof(double);
    if (pos + bytes > in.size()) throw SchemaError("truncated parameter checkpoint");
    std::memcpy(p.value.data(), in.data() + pos, bytes);
    pos += bytes;
  }
  if (pos != in.size()) throw SchemaError("trailing bytes in parameter checkpoint");
  return store;
}

void ParamStore::save(const std::filesystem::path& path) const { write_file_atomic(path, serialize()); }

ParamStore ParamStore::load(const std::filesystem::path& path) { return deserialize(read_file(path)); }

}  // namespace groundlab::nn
