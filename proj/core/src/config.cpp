#include "groundlab/config.hpp"

#include <charconv>
#include <sstream>

#include "groundlab/error.hpp"
#include "groundlab/io.hpp"

namespace groundlab {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

Config Config::parse(const std::string& text, const std::string& origin) {
  Config c;
  std::istringstream in(text);
  std::string line;
  int n = 0;
  bool versioned = false;
  while (std::getline(in, line)) {
    ++n;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    const auto where = origin + ":" + std::to_string(n);
    if (eq == std::string::npos) throw SchemaError(where + ": expected 'key = value'");
    const auto key = trim(line.substr(0, eq));
    const auto value = trim(line.substr(eq + 1));
    if (key.empty()) throw SchemaError(where + ": empty key");
    if (!versioned) {
      if (key != "version") throw SchemaError(where + ": the first entry must be 'version'");
      if (value != std::to_string(kVersion)) throw SchemaError(where + ": unsupported config version " + value);
      versioned = true;
      continue;
    }
    if (c.values_.count(key)) throw SchemaError(where + ": duplicate key '" + key + "'");
    c.values_[key] = value;
  }
  if (!versioned) throw SchemaError(origin + ": missing 'version'");
  return c;
}

Config Config::load(const std::filesystem::path& path) { return parse(read_file(path), path.string()); }

std::optional<std::string> Config::get(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return std::nullopt;
  return it->second;
}

std::string Config::get_string(const std::string& key, const std::string& fallback) const {
  return get(key).value_or(fallback);
}

double Config::get_double(const std::string& key, double fallback) const {
  const auto v = get(key);
  if (!v) return fallback;
  try {
    std::size_t used = 0;
    const double d = std::stod(*v, &used);
    if (used != v->size()) throw std::invalid_argument("trailing characters");
    return d;
  } catch (const std::exception&) {
    throw InvalidArgument("config key '" + key + "' is not a number: " + *v);
  }
}

long long Config::get_int(const std::string& key, long long fallback) const {
  const auto v = get(key);
  if (!v) return fallback;
  long long out = 0;
  const auto [ptr, ec] = std::from_chars(v->data(), v->data() + v->size(), out);
  if (ec != std::errc() || ptr != v->data() + v->size())
    throw InvalidArgument("config key '" + key + "' is not an integer: " + *v);
  return out;
}

bool Config::get_bool(const std::string& key, bool fallback) const {
  const auto v = get(key);
  if (!v) return fallback;
  if (*v == "true" || *v == "1" || *v == "yes") return true;
  if (*v == "false" || *v == "0" || *v == "no") return false;
  throw InvalidArgument("config key '" + key + "' is not a boolean: " + *v);
}

std::string Config::dump() const {
  std::string out = "version = " + std::to_string(kVersion) + "\n";
  for (const auto& [k, v] : values_) out += k + " = " + v + "\n";
  return out;
}

}  // namespace groundlab
