// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------

#include "coopcdma/config_io.hpp"

#include <json.hpp>

#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <sstream>

namespace coopcdma {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

double to_double(const std::string& key, const std::string& v) {
  errno = 0;
  char* end = nullptr;
  const double d = std::strtod(v.c_str(), &end);
  if (v.empty() || *end != '\0' || errno == ERANGE)
    throw ConfigError(key, "expected a number, got '" + v + "'");
  return d;
}

long long to_integer(const std::string& key, const std::string& v) {
  errno = 0;
  char* end = nullptr;
  const long long i = std::strtoll(v.c_str(), &end, 10);
  if (v.empty() || *end != '\0' || errno == ERANGE)
    throw ConfigError(key, "expected an integer, got '" + v + "'");
  return i;
}

int to_int(const std::string& key, const std::string& v) {
  const long long i = to_integer(key, v);
  if (i < -2147483647LL || i > 2147483647LL) throw ConfigError(key, "out of range");
  return int(i);
}

using Setter = std::function<void(ExperimentConfig&, const std::string&, const std::string&)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = {
      {"users", [](auto& c, auto& k, auto& v) { c.dims.users = to_int(k, v); }},
      {"chips", [](auto& c, auto& k, auto& v) { c.dims.chips = to_int(k, v); }},
      {"taps", [](auto& c, auto& k, auto& v) { c.dims.taps = to_int(k, v); }},
      {"relays", [](auto& c, auto& k, auto& v) { c.dims.relays = to_int(k, v); }},
      {"packet_len", [](auto& c, auto& k, auto& v) { c.dims.packet_len = to_int(k, v); }},
      {"snr_db",
       [](auto& c, auto& k, auto& v) {
         c.snr_db.clear();
         for (const auto& s : split_list(v)) c.snr_db.push_back(to_double(k, s));
         if (c.snr_db.empty()) throw ConfigError(k, "empty list");
       }},
      {"user_grid",
       [](auto& c, auto& k, auto& v) {
         c.user_grid.clear();
         for (const auto& s : split_list(v)) c.user_grid.push_back(to_int(k, s));
         if (c.user_grid.empty()) throw ConfigError(k, "empty list");
       }},
      {"schemes",
       [](auto& c, auto& k, auto& v) {
         c.schemes.clear();
         try {
           for (const auto& s : split_list(v)) c.schemes.push_back(parse_scheme(s));
         } catch (const std::invalid_argument& e) {
           throw ConfigError(k, e.what());
         }
         if (c.schemes.empty()) throw ConfigError(k, "empty list");
       }},
      {"variant",
       [](auto& c, auto& k, auto& v) {
         try {
           c.variant = parse_variant(v);
         } catch (const std::invalid_argument& e) {
           throw ConfigError(k, e.what());
         }
       }},
      {"trials", [](auto& c, auto& k, auto& v) { c.trials = to_int(k, v); }},
      {"training_len", [](auto& c, auto& k, auto& v) { c.training_len = to_int(k, v); }},
      {"power_warmup", [](auto& c, auto& k, auto& v) { c.power_warmup = to_int(k, v); }},
      {"alpha", [](auto& c, auto& k, auto& v) { c.alpha = to_double(k, v); }},
      {"lambda", [](auto& c, auto& k, auto& v) { c.lambda = to_double(k, v); }},
      {"lambda_T", [](auto& c, auto& k, auto& v) { c.lambda_T = to_double(k, v); }},
      {"seed",
       [](auto& c, auto& k, auto& v) {
         if (!v.empty() && v[0] == '-') throw ConfigError(k, "must be non-negative");
         errno = 0;
         char* end = nullptr;
         const unsigned long long s = std::strtoull(v.c_str(), &end, 10);
         if (v.empty() || *end != '\0' || errno == ERANGE)
           throw ConfigError(k, "expected an unsigned integer, got '" + v + "'");
         c.seed = s;
       }},
      {"shadowing_std_db", [](auto& c, auto& k, auto& v) { c.shadowing_std_db = to_double(k, v); }},
      {"user_power", [](auto& c, auto& k, auto& v) { c.user_power = to_double(k, v); }},
      {"max_iters", [](auto& c, auto& k, auto& v) { c.max_iters = to_int(k, v); }},
      {"tol", [](auto& c, auto& k, auto& v) { c.tol = to_double(k, v); }},
      {"threads", [](auto& c, auto& k, auto& v) { c.threads = to_int(k, v); }},
  };
  return table;
}

// Maps a validation failure back to the key it concerns.
std::string key_of_validation_error(std::string what) {
  const std::string prefix = "mmse config: ";
  if (what.rfind(prefix, 0) == 0) what.erase(0, prefix.size());
  for (const auto& [key, _] : setters())
    if (what.rfind(key + " ", 0) == 0) return key;
  if (what.rfind("taps", 0) == 0) return "taps";
  return "config";
}

template <typename T, typename F>
std::string join(const std::vector<T>& xs, F f) {
  std::string out;
  for (std::size_t i = 0; i < xs.size(); ++i) out += (i ? "," : "") + f(xs[i]);
  return out;
}

nlohmann::ordered_json config_json(const ExperimentConfig& c) {
  nlohmann::ordered_json j;
  j["users"] = c.dims.users;
  j["chips"] = c.dims.chips;
  j["taps"] = c.dims.taps;
  j["relays"] = c.dims.relays;
  j["packet_len"] = c.dims.packet_len;
  j["snr_db"] = c.snr_db;
  j["user_grid"] = c.user_grid;
  std::vector<std::string> schemes;
  for (Scheme s : c.schemes) schemes.push_back(to_string(s));
  j["schemes"] = schemes;
  j["variant"] = to_string(c.variant);
  j["trials"] = c.trials;
  j["training_len"] = c.training_len;
  j["power_warmup"] = c.power_warmup;
  j["alpha"] = c.alpha;
  j["lambda"] = c.lambda;
  j["lambda_T"] = c.lambda_T;
  j["seed"] = c.seed;
  j["shadowing_std_db"] = c.shadowing_std_db;
  j["user_power"] = c.user_power;
  j["max_iters"] = c.max_iters;
  j["tol"] = c.tol;
  j["threads"] = c.threads;
  return j;
}

nlohmann::ordered_json manifest_json(const RunManifest& m) {
  nlohmann::ordered_json j;
  j["version"] = m.version;
  j["command"] = m.command;
  j["config"] = config_json(m.config);
  j["config_text"] = emit_config(m.config);
  j["wall_time_s"] = m.wall_time_s;
  j["divergences"] = m.divergences;
  j["outputs"] = m.outputs;
  return j;
}

void write_file(const std::string& path, const std::string& body) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open '" + path + "' for writing");
  f << body;
  if (!f) throw std::runtime_error("failed writing '" + path + "'");
}

}  // namespace

std::string format_number(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::vector<std::pair<std::string, std::string>> parse_key_values(const std::string& text) {
  std::vector<std::pair<std::string, std::string>> out;
  std::stringstream ss(text);
  std::string line;
  int number = 0;
  while (std::getline(ss, line)) {
    ++number;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(number), "expected key=value, got '" + line + "'");
    const std::string key = trim(line.substr(0, eq));
    if (key.empty()) throw ConfigError("line " + std::to_string(number), "missing key");
    out.emplace_back(key, trim(line.substr(eq + 1)));
  }
  return out;
}

ExperimentConfig apply_settings(ExperimentConfig base,
                                const std::vector<std::pair<std::string, std::string>>& settings) {
  const auto& table = setters();
  for (const auto& [key, value] : settings) {
    const auto it = table.find(key);
    if (it == table.end()) throw ConfigError(key, "unknown key");
    if (value.empty()) throw ConfigError(key, "missing value");
    it->second(base, key, value);
  }
  try {
    base.validate();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::invalid_argument& e) {
    throw ConfigError(key_of_validation_error(e.what()), e.what());
  }
  return base;
}

ExperimentConfig parse_config(const std::string& text) {
  return apply_settings(ExperimentConfig{}, parse_key_values(text));
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("config", "cannot read '" + path + "'");
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_config(ss.str());
}

std::string emit_config(const ExperimentConfig& c) {
  std::ostringstream o;
  o << "users = " << c.dims.users << "\n";
  o << "chips = " << c.dims.chips << "\n";
  o << "taps = " << c.dims.taps << "\n";
  o << "relays = " << c.dims.relays << "\n";
  o << "packet_len = " << c.dims.packet_len << "\n";
  o << "snr_db = " << join(c.snr_db, format_number) << "\n";
  o << "user_grid = " << join(c.user_grid, [](int k) { return std::to_string(k); }) << "\n";
  o << "schemes = " << join(c.schemes, [](Scheme s) { return to_string(s); }) << "\n";
  o << "variant = " << to_string(c.variant) << "\n";
  o << "trials = " << c.trials << "\n";
  o << "training_len = " << c.training_len << "\n";
  o << "power_warmup = " << c.power_warmup << "\n";
  o << "alpha = " << format_number(c.alpha) << "\n";
  o << "lambda = " << format_number(c.lambda) << "\n";
  o << "lambda_T = " << format_number(c.lambda_T) << "\n";
  o << "seed = " << c.seed << "\n";
  o << "shadowing_std_db = " << format_number(c.shadowing_std_db) << "\n";
  o << "user_power = " << format_number(c.user_power) << "\n";
  o << "max_iters = " << c.max_iters << "\n";
  o << "tol = " << format_number(c.tol) << "\n";
  o << "threads = " << c.threads << "\n";
  return o.str();
}

std::string curves_to_csv(const std::vector<BerCurve>& curves) {
  std::string out = "x_name,x_value,scheme,variant,ber_mean,ber_stderr,bit_count\n";
  for (const BerCurve& c : curves)
    for (const BerPoint& p : c.rows) {
      out += c.x_name + "," + format_number(p.x) + "," + to_string(c.scheme) + "," +
             to_string(c.variant) + "," + format_number(p.ber_mean) + "," +
             format_number(p.ber_stderr) + "," + std::to_string(p.bit_count) + "\n";
    }
  return out;
}

std::map<std::string, int> divergence_counts(const std::vector<BerCurve>& curves) {
  std::map<std::string, int> out;
  for (const BerCurve& c : curves) {
    int& n = out[to_string(c.scheme)];
    for (const BerPoint& p : c.rows) n += p.diverged;
  }
  return out;
}

std::string manifest_to_json(const RunManifest& m) { return manifest_json(m).dump(2) + "\n"; }

std::string curves_to_json(const std::vector<BerCurve>& curves, const RunManifest& manifest) {
  // Rows are written by hand so every number keeps 17 significant digits.
  auto quote = [](const std::string& s) { return nlohmann::json(s).dump(); };
  std::string out = "{\n  \"manifest\": " + manifest_json(manifest).dump() + ",\n  \"rows\": [";
  bool first = true;
  for (const BerCurve& c : curves)
    for (const BerPoint& p : c.rows) {
      out += first ? "\n    " : ",\n    ";
      first = false;
      out += "{\"x_name\": " + quote(c.x_name) + ", \"x_value\": " + format_number(p.x) +
             ", \"scheme\": " + quote(to_string(c.scheme)) +
             ", \"variant\": " + quote(to_string(c.variant)) +
             ", \"ber_mean\": " + format_number(p.ber_mean) +
             ", \"ber_stderr\": " + format_number(p.ber_stderr) +
             ", \"bit_count\": " + std::to_string(p.bit_count) +
             ", \"diverged\": " + std::to_string(p.diverged) + "}";
    }
  out += first ? "]\n}\n" : "\n  ]\n}\n";
  return out;
}

void write_results(const std::vector<BerCurve>& curves, RunManifest manifest,
                   const std::string& path, const std::string& format) {
  if (format != "csv" && format != "json")
    throw ConfigError("format", "expected csv or json, got '" + format + "'");
  const std::string manifest_path = path + ".manifest.json";
  manifest.divergences = divergence_counts(curves);
  manifest.outputs = {path, manifest_path};
  write_file(path, format == "csv" ? curves_to_csv(curves) : curves_to_json(curves, manifest));
  write_file(manifest_path, manifest_to_json(manifest));
}

}  // namespace coopcdma
