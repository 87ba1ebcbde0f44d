#pragma once

// Run configuration and manifests.
//
// A config file is one JSON object with a section per subcommand. A value is
// resolved as command-line flag, else environment variable
// STANCENET_<SECTION>_<KEY>, else file, else the built-in default.

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "stancenet/digest.hpp"
#include "stancenet/error.hpp"
#include "stancenet/util.hpp"

namespace stancenet::config {

using json = nlohmann::json;

inline constexpr const char* kToolVersion = "0.3.0";

struct KeySpec {
  std::string key;
  json fallback;  // also fixes the value type; null means string
  std::string help;
};

using EnvLookup = std::function<std::optional<std::string>(const std::string&)>;

inline std::optional<std::string> process_env(const std::string& name) {
  if (const char* v = std::getenv(name.c_str())) return std::string(v);
  return std::nullopt;
}

inline std::string env_name(const std::string& section, const std::string& key) {
  std::string out = "STANCENET_";
  for (char c : section + "_" + key) {
    out.push_back(c == '-' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
  }
  return out;
}

/// Converts text from a flag or the environment to the type of `like`.
inline json coerce(const std::string& text, const json& like, const std::string& where) {
  try {
    if (like.is_boolean()) {
      std::string t;
      for (char c : text) t.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
      if (t == "1" || t == "true" || t == "yes" || t == "on") return true;
      if (t == "0" || t == "false" || t == "no" || t == "off") return false;
      throw ConfigError(where + ": expected a boolean, got '" + text + "'");
    }
    if (like.is_number_integer() || like.is_number_unsigned()) {
      std::size_t used = 0;
      const long long v = std::stoll(text, &used);
      if (used != text.size()) throw std::invalid_argument(text);
      return v;
    }
    if (like.is_number_float()) {
      std::size_t used = 0;
      const double v = std::stod(text, &used);
      if (used != text.size()) throw std::invalid_argument(text);
      return v;
    }
    if (like.is_array()) {
      json arr = json::array();
      std::size_t start = 0;
      while (start <= text.size()) {
        const auto comma = text.find(',', start);
        const auto piece = trim(std::string_view(text).substr(start, comma - start));
        if (!piece.empty()) arr.push_back(std::string(piece));
        if (comma == std::string::npos) break;
        start = comma + 1;
      }
      return arr;
    }
  } catch (const std::logic_error&) {
    throw ConfigError(where + ": cannot read '" + text + "' as " + like.type_name());
  }
  return text;
}

inline json load_file(const std::filesystem::path& path) {
  if (path.empty()) return json::object();
  if (!std::filesystem::exists(path)) {
    throw ConfigError("config file '" + path.string() + "' does not exist");
  }
  json j = json::parse(read_file(path), nullptr, false);
  if (j.is_discarded() || !j.is_object()) {
    throw ConfigError("config file '" + path.string() + "' is not a JSON object");
  }
  return j;
}

/// Resolved settings of one section, with where each value came from.
class Settings {
 public:
  Settings(std::string section, const std::vector<KeySpec>& specs, const json& file,
           const std::map<std::string, std::string>& flags, const EnvLookup& env = process_env)
      : section_(std::move(section)) {
    const json empty = json::object();
    const json* sec = &empty;
    if (file.contains(section_)) {
      if (!file[section_].is_object()) throw ConfigError("config section '" + section_ + "' must be an object");
      sec = &file[section_];
    }
    for (const auto& [k, v] : sec->items()) {
      const bool known = std::any_of(specs.begin(), specs.end(), [&](const KeySpec& s) { return s.key == k; });
      if (!known) throw ConfigError("unknown key '" + k + "' in config section '" + section_ + "'");
    }
    for (const auto& spec : specs) {
      json value = spec.fallback;
      std::string source = "default";
      if (sec->contains(spec.key)) {
        value = (*sec)[spec.key];
        source = "file";
      }
      const std::string var = env_name(section_, spec.key);
      if (auto e = env(var)) {
        value = coerce(*e, spec.fallback, var);
        source = "env";
      }
      if (auto f = flags.find(spec.key); f != flags.end()) {
        value = coerce(f->second, spec.fallback, "--" + flag_name(spec.key));
        source = "flag";
      }
      values_[spec.key] = std::move(value);
      sources_[spec.key] = source;
    }
  }

  static std::string flag_name(std::string key) {
    std::replace(key.begin(), key.end(), '_', '-');
    return key;
  }

  const std::string& section() const noexcept { return section_; }
  const json& values() const noexcept { return values_; }
  const std::string& source(const std::string& key) const { return sources_.at(key); }

  const json& raw(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) throw ConfigError("no setting '" + key + "' in section '" + section_ + "'");
    return *it;
  }
  std::string str(const std::string& key) const {
    const json& v = raw(key);
    if (v.is_null()) return {};
    if (!v.is_string()) throw ConfigError(where(key) + " must be a string");
    return v.get<std::string>();
  }
  std::filesystem::path path(const std::string& key) const { return str(key); }
  std::int64_t integer(const std::string& key) const {
    const json& v = raw(key);
    if (!v.is_number_integer()) throw ConfigError(where(key) + " must be an integer");
    return v.get<std::int64_t>();
  }
  std::size_t count(const std::string& key) const {
    const auto v = integer(key);
    if (v < 0) throw ConfigError(where(key) + " must be nonnegative");
    return static_cast<std::size_t>(v);
  }
  double number(const std::string& key) const {
    const json& v = raw(key);
    if (!v.is_number()) throw ConfigError(where(key) + " must be a number");
    return v.get<double>();
  }
  bool flag(const std::string& key) const {
    const json& v = raw(key);
    if (!v.is_boolean()) throw ConfigError(where(key) + " must be a boolean");
    return v.get<bool>();
  }
  std::vector<std::string> list(const std::string& key) const {
    const json& v = raw(key);
    if (!v.is_array()) throw ConfigError(where(key) + " must be a list");
    std::vector<std::string> out;
    for (const auto& e : v) {
      if (!e.is_string()) throw ConfigError(where(key) + " must be a list of strings");
      out.push_back(e.get<std::string>());
    }
    return out;
  }

  /// Human-readable resolved configuration, one `key = value  (source)` per line.
  std::string describe() const {
    std::string out = "[" + section_ + "]\n";
    for (const auto& [k, v] : values_.items()) {
      out += "  " + k + " = " + v.dump() + "  (" + sources_.at(k) + ")\n";
    }
    return out;
  }

  std::string hash() const { return sha256_hex(json{{section_, values_}}.dump()); }

 private:
  std::string where(const std::string& key) const { return "setting " + section_ + "." + key; }

  std::string section_;
  json values_ = json::object();
  std::map<std::string, std::string> sources_;
};

/// Sits beside each output as `<output>.manifest.json`.
class Manifest {
 public:
  Manifest(std::string command, const Settings& settings)
      : command_(std::move(command)), config_hash_(settings.hash()), config_(settings.values()) {}

  void input(const std::filesystem::path& path) {
    if (path.empty() || !std::filesystem::is_regular_file(path)) return;
    inputs_[path.generic_string()] = sha256_file(path);
  }
  void seed(const std::string& name, std::uint64_t value) { seeds_[name] = value; }

  /// Times `fn` as stage `name`.
  template <class Fn>
  auto stage(const std::string& name, Fn&& fn) {
    const auto start = std::chrono::steady_clock::now();
    struct Record {
      Manifest* self;
      std::string name;
      std::chrono::steady_clock::time_point start;
      ~Record() {
        self->timings_[name] =
            std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
      }
    } record{this, name, start};
    return fn();
  }

  json to_json() const {
    return {{"tool", "stancenet"},
            {"tool_version", kToolVersion},
            {"command", command_},
            {"config_hash", config_hash_},
            {"config", config_},
            {"inputs", inputs_},
            {"seeds", seeds_},
            {"stage_timings_ms", timings_}};
  }

  const std::string& config_hash() const noexcept { return config_hash_; }

  void write_beside(const std::filesystem::path& output) const {
    write_file(manifest_path(output), to_json().dump(2) + "\n");
  }

  static std::filesystem::path manifest_path(const std::filesystem::path& output) {
    return output.string() + ".manifest.json";
  }

 private:
  std::string command_;
  std::string config_hash_;
  json config_;
  std::map<std::string, std::string> inputs_;
  std::map<std::string, std::uint64_t> seeds_;
  std::map<std::string, double> timings_;
};

}  // namespace stancenet::config
