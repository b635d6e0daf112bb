#include "lsdnn/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "lsdnn/error.hpp"

namespace lsdnn {

namespace {

const std::map<std::string, std::string>& defaults() {
  static const std::map<std::string, std::string> d = {
      // optics
      {"size", "64"},
      {"dx", "65e-6"},
      {"wavelength", "632.8e-9"},
      {"z", "0.4"},
      {"pad", "1"},
      // noise
      {"photons", "1"},
      {"sigma", "0"},
      {"noise_seed", "11"},
      // data
      {"exponent", "2"},
      {"fmax", "3.141592653589793"},
      {"n_train", "512"},
      {"n_val", "64"},
      {"n_test", "64"},
      {"data_seed", "7"},
      {"split_seed", "5"},
      {"ingest_dir", ""},
      // retrieval / scheme
      {"scheme", "approximant"},
      {"gs_iters", "1"},
      // spectral
      {"q", "0.5"},
      {"q_sweep", ""},
      // networks
      {"widths", "4,8,16"},
      {"kernel", "3"},
      {"slope", "0.1"},
      {"s_residual", "1"},
      {"l3", "0"},
      // training
      {"epochs", "30"},
      {"lr", "1e-3"},
      {"beta1", "0.9"},
      {"beta2", "0.999"},
      {"eps", "1e-8"},
      {"batch", "8"},
      {"loss", "npcc"},
      {"train_seed", "3"},
      // evaluation
      {"affine", "least_squares"},
      {"export_pgm", "0"},
  };
  return d;
}

bool is_output_key(const std::string& key) {
  return key.rfind("artifact.", 0) == 0 || key.rfind("software.", 0) == 0;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double parse_double(const std::string& key, const std::string& v) {
  if (v == "inf" || v == "+inf" || v == "infinity") return std::numeric_limits<double>::infinity();
  try {
    std::size_t pos = 0;
    const double d = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw UsageError("config key '" + key + "': not a number: '" + v + "'");
  }
}

std::uint64_t parse_u64(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size() || v.empty())
    throw UsageError("config key '" + key + "': not a nonnegative integer: '" + v + "'");
  return out;
}

std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::istringstream in(v);
  std::string tok;
  while (std::getline(in, tok, ',')) {
    tok = trim(tok);
    if (!tok.empty()) out.push_back(tok);
  }
  return out;
}

}  // namespace

Config::Config() : values_(defaults()) {}

const std::vector<std::string>& Config::known_keys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> k;
    for (const auto& [key, value] : defaults()) k.push_back(key);
    return k;
  }();
  return keys;
}

void Config::set(const std::string& key, const std::string& value) {
  if (!defaults().count(key)) throw UsageError("unknown config key: " + key);
  values_[key] = value;
}

const std::string& Config::get(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) throw UsageError("unknown config key: " + key);
  return it->second;
}

bool Config::has(const std::string& key) const { return values_.count(key) != 0; }

double Config::get_double(const std::string& key) const { return parse_double(key, get(key)); }
std::uint64_t Config::get_u64(const std::string& key) const { return parse_u64(key, get(key)); }
std::size_t Config::get_size(const std::string& key) const {
  return static_cast<std::size_t>(get_u64(key));
}

bool Config::get_bool(const std::string& key) const {
  const std::string& v = get(key);
  if (v == "1" || v == "true" || v == "yes") return true;
  if (v == "0" || v == "false" || v == "no" || v.empty()) return false;
  throw UsageError("config key '" + key + "': not a boolean: '" + v + "'");
}

std::vector<double> Config::get_doubles(const std::string& key) const {
  std::vector<double> out;
  for (const std::string& t : split_list(get(key))) out.push_back(parse_double(key, t));
  return out;
}

std::vector<std::size_t> Config::get_sizes(const std::string& key) const {
  std::vector<std::size_t> out;
  for (const std::string& t : split_list(get(key))) out.push_back(static_cast<std::size_t>(parse_u64(key, t)));
  return out;
}

void Config::parse(const std::string& text, const std::string& origin) {
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw UsageError(origin + ":" + std::to_string(lineno) + ": expected key=value");
    const std::string key = trim(line.substr(0, eq));
    if (is_output_key(key)) continue;
    set(key, trim(line.substr(eq + 1)));
  }
}

void Config::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot read config: " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  parse(ss.str(), path.string());
}

std::string Config::to_text() const {
  std::ostringstream os;
  for (const auto& [key, value] : values_) os << key << '=' << value << '\n';
  return os.str();
}

}  // namespace lsdnn
