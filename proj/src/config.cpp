#include "cdgan/config.hpp"

#include <fstream>
#include <sstream>

#include "cdgan/errors.hpp"

namespace cdgan {

namespace {

std::string trim(const std::string& s) {
  const size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

int to_int(const std::string& key, const std::string& v) {
  try {
    size_t pos = 0;
    const int out = std::stoi(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return out;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "': expected an integer, got '" + v + "'");
  }
}

float to_float(const std::string& key, const std::string& v) {
  try {
    size_t pos = 0;
    const float out = std::stof(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return out;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "': expected a number, got '" + v + "'");
  }
}

std::uint64_t to_u64(const std::string& key, const std::string& v) {
  try {
    size_t pos = 0;
    const std::uint64_t out = std::stoull(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return out;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "': expected an unsigned integer, got '" + v + "'");
  }
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError("config key '" + key + "': expected a boolean, got '" + v + "'");
}

template <typename T, typename Conv>
void take(KeyValues& kv, const std::string& key, T* field, const Conv& conv) {
  auto it = kv.find(key);
  if (it == kv.end()) return;
  *field = conv(key, it->second);
  kv.erase(it);
}

}  // namespace

KeyValues parse_config_text(const std::string& text, const std::string& origin) {
  KeyValues kv;
  std::istringstream is(text);
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(origin + ":" + std::to_string(lineno) + ": expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError(origin + ":" + std::to_string(lineno) + ": empty key");
    if (kv.count(key) != 0)
      throw ConfigError(origin + ":" + std::to_string(lineno) + ": duplicate key '" + key + "'");
    kv[key] = value;
  }
  return kv;
}

KeyValues parse_config_file(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config file: " + path.string());
  std::stringstream buf;
  buf << is.rdbuf();
  return parse_config_text(buf.str(), path.string());
}

void apply_config(KeyValues& kv, TrainConfig& cfg) {
  take(kv, "epochs", &cfg.epochs, to_int);
  take(kv, "batch_size", &cfg.batch_size, to_int);
  take(kv, "learning_rate", &cfg.learning_rate, to_float);
  take(kv, "adam_beta1", &cfg.adam_beta1, to_float);
  take(kv, "adam_beta2", &cfg.adam_beta2, to_float);
  take(kv, "adam_eps", &cfg.adam_eps, to_float);
  take(kv, "lambda_l1", &cfg.lambda_l1, to_float);
  take(kv, "seed", &cfg.seed, to_u64);
  take(kv, "deterministic", &cfg.deterministic, to_bool);
  take(kv, "crop_size", &cfg.crop_size, to_int);
  take(kv, "augment", &cfg.augment, to_bool);
  cfg.validate();
}

void apply_config(KeyValues& kv, SimConfig& cfg) {
  take(kv, "height", &cfg.height, to_int);
  take(kv, "width", &cfg.width, to_int);
  take(kv, "polygons_min", &cfg.polygons_min, to_int);
  take(kv, "polygons_max", &cfg.polygons_max, to_int);
  take(kv, "vertices_min", &cfg.vertices_min, to_int);
  take(kv, "vertices_max", &cfg.vertices_max, to_int);
  take(kv, "shift_min", &cfg.shift_min, to_float);
  take(kv, "shift_max", &cfg.shift_max, to_float);
  take(kv, "p_add", &cfg.p_add, to_float);
  take(kv, "p_remove", &cfg.p_remove, to_float);
  take(kv, "p_shift", &cfg.p_shift, to_float);
  take(kv, "brightness", &cfg.brightness, to_float);
  take(kv, "noise_sigma", &cfg.noise_sigma, to_float);
  take(kv, "hue_jitter", &cfg.hue_jitter, to_bool);
  take(kv, "seed", &cfg.seed, to_u64);
  cfg.validate();
}

void apply_config(KeyValues& kv, TileConfig& cfg) {
  take(kv, "tile_size", &cfg.tile_size, to_int);
  take(kv, "overlap", &cfg.overlap, to_int);
  cfg.validate();
}

void require_consumed(const KeyValues& kv, const std::string& context) {
  if (kv.empty()) return;
  std::string keys;
  for (const auto& [k, v] : kv) keys += (keys.empty() ? "" : ", ") + k;
  throw ConfigError("unknown config key(s) for " + context + ": " + keys);
}

}  // namespace cdgan
