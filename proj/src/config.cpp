#include "wda/config.hpp"

#include <cctype>
#include <charconv>
#include <functional>
#include <map>
#include <sstream>

#include "wda/errors.hpp"
#include "wda/io.hpp"

namespace wda {

void TrainConfig::validate() const {
  if (z_max < 1) throw ConfigError("z_max must be >= 1");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (crop < 32) throw ConfigError("crop must be >= 32");
  if (g1_lr <= 0 || disc_lr <= 0 || g2_lr <= 0)
    throw ConfigError("learning rates must be positive");
  if (g1_momentum < 0 || g1_momentum >= 1)
    throw ConfigError("g1_momentum must be in [0,1)");
  if (poly_power <= 0) throw ConfigError("poly_power must be positive");
  if (g2_epochs < 1) throw ConfigError("g2_epochs must be >= 1");
  if (checkpoint_every < 1) throw ConfigError("checkpoint_every must be >= 1");
  if (base_channels < 8) throw ConfigError("base_channels must be >= 8");
  if (depth < 2) throw ConfigError("depth must be >= 2");
  if (block_kind != "factorized" && block_kind != "standard")
    throw ConfigError("block_kind must be 'factorized' or 'standard'");
  if (disc_channels < 4) throw ConfigError("disc_channels must be >= 4");
  if (cp_patch < 16) throw ConfigError("cp_patch must be >= 16");
  if (filter_radius < 1) throw ConfigError("filter_radius must be >= 1");
  if (peak_threshold <= 0 || peak_threshold >= 1)
    throw ConfigError("peak_threshold must be in (0,1)");
  if (grad_clip <= 0) throw ConfigError("grad_clip must be positive");
}

namespace config {

namespace {

struct Field {
  std::function<void(const std::string&)> set;
  std::function<std::string()> get;
};

std::string trim(const std::string& s) {
  size_t a = 0, b = s.size();
  while (a < b && std::isspace(uint8_t(s[a]))) ++a;
  while (b > a && std::isspace(uint8_t(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

int64_t parse_int(const std::string& v, const std::string& key) {
  int64_t out = 0;
  const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc{} || res.ptr != v.data() + v.size())
    throw ConfigError("bad integer for " + key + ": '" + v + "'");
  return out;
}

double parse_float(const std::string& v, const std::string& key) {
  try {
    size_t used = 0;
    const double out = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return out;
  } catch (const std::exception&) {
    throw ConfigError("bad number for " + key + ": '" + v + "'");
  }
}

bool parse_bool(const std::string& v, const std::string& key) {
  if (v == "true") return true;
  if (v == "false") return false;
  throw ConfigError("bad boolean for " + key + ": '" + v + "'");
}

std::string fmt_double(double v) {
  std::ostringstream ss;
  ss.precision(17);
  ss << v;
  const std::string s = ss.str();
  return s.find_first_of(".eE") == std::string::npos ? s + ".0" : s;
}

std::map<std::string, Field> schema(RunConfig& c) {
  std::map<std::string, Field> m;
  auto I = [&](const std::string& key, auto* p) {
    m[key] = {[p, key](const std::string& v) {
                *p = static_cast<std::remove_pointer_t<decltype(p)>>(
                    parse_int(v, key));
              },
              [p] { return std::to_string(*p); }};
  };
  auto F = [&](const std::string& key, double* p) {
    m[key] = {[p, key](const std::string& v) { *p = parse_float(v, key); },
              [p] { return fmt_double(*p); }};
  };
  auto B = [&](const std::string& key, bool* p) {
    m[key] = {[p, key](const std::string& v) { *p = parse_bool(v, key); },
              [p] { return *p ? std::string("true") : std::string("false"); }};
  };
  auto S = [&](const std::string& key, std::string* p) {
    m[key] = {[p, key](const std::string& v) {
                if (v.size() < 2 || v.front() != '"' || v.back() != '"')
                  throw ConfigError("string value for " + key +
                                    " must be double-quoted");
                *p = v.substr(1, v.size() - 2);
              },
              [p] { return "\"" + *p + "\""; }};
  };

  TrainConfig& t = c.train;
  I("train.z_max", &t.z_max);
  I("train.batch_size", &t.batch_size);
  I("train.crop", &t.crop);
  F("train.g1_lr", &t.g1_lr);
  F("train.g1_momentum", &t.g1_momentum);
  F("train.poly_power", &t.poly_power);
  F("train.disc_lr", &t.disc_lr);
  F("train.g2_lr", &t.g2_lr);
  I("train.g2_epochs", &t.g2_epochs);
  I("train.seed", &t.seed);
  I("train.checkpoint_every", &t.checkpoint_every);
  I("train.base_channels", &t.base_channels);
  I("train.depth", &t.depth);
  S("train.block_kind", &t.block_kind);
  I("train.disc_channels", &t.disc_channels);
  I("train.cp_patch", &t.cp_patch);
  I("train.filter_radius", &t.filter_radius);
  F("train.peak_threshold", &t.peak_threshold);
  F("train.grad_clip", &t.grad_clip);
  B("train.detect", &t.flags.detect);
  B("train.count", &t.flags.count);
  B("train.pseudo_label", &t.flags.pseudo_label);
  B("train.cp_aug", &t.flags.cp_aug);
  B("train.filter", &t.flags.filter);

  losses::LossWeights& w = c.weights;
  F("weights.lambda_a", &w.lambda_a);
  F("weights.lambda_d", &w.lambda_d);
  F("weights.lambda_point", &w.lambda_point);
  F("weights.epsilon", &w.epsilon);
  F("weights.rho", &w.rho);
  I("weights.K", &w.K);
  F("weights.sigma1", &w.sigma1);
  F("weights.sigma2", &w.sigma2);
  F("weights.beta_peak", &w.beta_peak);
  return m;
}

}  // namespace

RunConfig parse_toml(const std::string& text) {
  RunConfig cfg;
  auto fields = schema(cfg);

  std::istringstream in(text);
  std::string line, section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw ConfigError("line " + std::to_string(lineno) +
                          ": malformed table header");
      section = trim(line.substr(1, line.size() - 2));
      if (section != "train" && section != "weights")
        throw ConfigError("unknown table [" + section + "]");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(lineno) +
                        ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (section.empty())
      throw ConfigError("key '" + key + "' outside any table");
    const std::string full = section + "." + key;
    const auto it = fields.find(full);
    if (it == fields.end()) throw ConfigError("unknown key '" + full + "'");
    it->second.set(value);
  }
  try {
    cfg.train.validate();
    cfg.weights.validate();
  } catch (const ValidationError& e) {
    throw ConfigError(e.what());
  }
  return cfg;
}

RunConfig load_toml(const std::string& path) {
  return parse_toml(io::read_text_file(path));
}

std::string to_toml(const RunConfig& cfg) {
  RunConfig copy = cfg;
  auto fields = schema(copy);
  std::ostringstream out;
  std::string section;
  for (const auto& [key, field] : fields) {
    const auto dot = key.find('.');
    const std::string sec = key.substr(0, dot);
    if (sec != section) {
      if (!section.empty()) out << "\n";
      out << "[" << sec << "]\n";
      section = sec;
    }
    out << key.substr(dot + 1) << " = " << field.get() << "\n";
  }
  return out.str();
}

RunConfig desk_preset() {
  RunConfig cfg;
  cfg.train.z_max = 2000;
  cfg.train.crop = 256;
  cfg.train.base_channels = 16;
  cfg.train.depth = 4;
  cfg.train.g1_lr = 5e-3;
  cfg.train.disc_channels = 16;
  cfg.train.cp_patch = 128;
  cfg.train.g2_epochs = 96;
  cfg.train.checkpoint_every = 500;
  return cfg;
}

}  // namespace config
}  // namespace wda
