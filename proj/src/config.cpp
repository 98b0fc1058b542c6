#include "ge2ae/config.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <stdexcept>

namespace ge2ae::config {

namespace {

struct Field {
  std::function<std::string(const train::TrainRunConfig&)> get;
  std::function<void(train::TrainRunConfig&, const std::string&)> set;
};

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

int parse_int(const std::string& s) {
  std::size_t pos = 0;
  const int v = std::stoi(s, &pos);
  if (pos != s.size()) throw std::invalid_argument("not an integer: '" + s + "'");
  return v;
}

std::uint64_t parse_u64(const std::string& s) {
  std::size_t pos = 0;
  const unsigned long long v = std::stoull(s, &pos);
  if (pos != s.size()) throw std::invalid_argument("not an unsigned integer: '" + s + "'");
  return v;
}

double parse_double(const std::string& s) {
  std::size_t pos = 0;
  const double v = std::stod(s, &pos);
  if (pos != s.size()) throw std::invalid_argument("not a number: '" + s + "'");
  return v;
}

bool parse_bool(const std::string& s) {
  if (s == "true" || s == "1") return true;
  if (s == "false" || s == "0") return false;
  throw std::invalid_argument("not a boolean (true/false): '" + s + "'");
}

using C = train::TrainRunConfig;

const std::map<std::string, Field>& fields() {
  static const std::map<std::string, Field> table = [] {
    std::map<std::string, Field> f;

#define GE2AE_INT_FIELD(key, expr)                                                        \
  f[key] = {[](const C& c) { return std::to_string(c.expr); },                           \
            [](C& c, const std::string& s) { c.expr = parse_int(s); }}
#define GE2AE_DOUBLE_FIELD(key, expr)                                                     \
  f[key] = {[](const C& c) { return fmt_double(c.expr); },                               \
            [](C& c, const std::string& s) { c.expr = parse_double(s); }}
#define GE2AE_BOOL_FIELD(key, expr)                                                       \
  f[key] = {[](const C& c) { return c.expr ? "true" : "false"; },                        \
            [](C& c, const std::string& s) { c.expr = parse_bool(s); }}
#define GE2AE_STRING_FIELD(key, expr)                                                     \
  f[key] = {[](const C& c) { return c.expr; },                                           \
            [](C& c, const std::string& s) { c.expr = s; }}

    GE2AE_INT_FIELD("model.image_size", model.image_size);
    GE2AE_INT_FIELD("model.patch_size", model.patch_size);
    GE2AE_INT_FIELD("model.channels", model.channels);
    GE2AE_INT_FIELD("model.enc_depth", model.enc_depth);
    GE2AE_INT_FIELD("model.enc_heads", model.enc_heads);
    GE2AE_INT_FIELD("model.enc_dim", model.enc_dim);
    GE2AE_INT_FIELD("model.dec_dim", model.dec_dim);
    GE2AE_INT_FIELD("model.dec_depth", model.dec_depth);
    GE2AE_DOUBLE_FIELD("model.mask_ratio", model.mask_ratio);
    GE2AE_BOOL_FIELD("model.norm_pix_target", model.norm_pix_target);

    GE2AE_DOUBLE_FIELD("loss.lambda", loss.lambda);
    GE2AE_DOUBLE_FIELD("loss.beta", loss.beta);
    GE2AE_BOOL_FIELD("loss.toggles.pix_re", loss.pix_re);
    GE2AE_BOOL_FIELD("loss.toggles.freq_con", loss.freq_con);
    GE2AE_BOOL_FIELD("loss.toggles.freq_re", loss.freq_re);
    GE2AE_BOOL_FIELD("loss.toggles.pix_con", loss.pix_con);

    GE2AE_INT_FIELD("training.epochs", epochs);
    GE2AE_INT_FIELD("training.batch_size", batch_size);
    GE2AE_DOUBLE_FIELD("training.base_lr", base_lr);
    GE2AE_DOUBLE_FIELD("training.weight_decay", weight_decay);
    GE2AE_DOUBLE_FIELD("training.beta1", beta1);
    GE2AE_DOUBLE_FIELD("training.beta2", beta2);
    GE2AE_INT_FIELD("training.warmup_epochs", warmup_epochs);
    GE2AE_INT_FIELD("training.checkpoint_every", checkpoint_every);
    GE2AE_STRING_FIELD("training.dataset", dataset_path);
    GE2AE_STRING_FIELD("training.format", dataset_format);
    GE2AE_STRING_FIELD("training.out_dir", out_dir);
    f["training.seed"] = {[](const C& c) { return std::to_string(c.seed); },
                          [](C& c, const std::string& s) { c.seed = parse_u64(s); }};

#undef GE2AE_INT_FIELD
#undef GE2AE_DOUBLE_FIELD
#undef GE2AE_BOOL_FIELD
#undef GE2AE_STRING_FIELD
    return f;
  }();
  return table;
}

std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

void apply_line(train::TrainRunConfig& cfg, const std::string& raw, const std::string& where) {
  const std::size_t eq = raw.find('=');
  if (eq == std::string::npos)
    throw std::invalid_argument("config: missing '=' " + where + ": '" + raw + "'");
  const std::string key = trim(raw.substr(0, eq));
  const std::string value = trim(raw.substr(eq + 1));
  auto it = fields().find(key);
  if (it == fields().end())
    throw std::invalid_argument("config: unknown key '" + key + "' " + where);
  try {
    it->second.set(cfg, value);
  } catch (const std::exception& e) {
    throw std::invalid_argument("config: bad value for '" + key + "' " + where + ": " + e.what());
  }
}

void validate(const train::TrainRunConfig& cfg) {
  cfg.validate();  // model/loss/training range checks
}

}  // namespace

train::TrainRunConfig defaults() {
  train::TrainRunConfig cfg;
  // Paper-recipe defaults: ViT-B/16 geometry at 224 px, both decoders 8 blocks
  // deep, mask ratio 0.75, lambda 0.5, beta 1, AdamW 1.5e-4/0.05 with betas
  // (0.9, 0.95), cosine schedule with 40 warmup epochs, 800 epochs, batch 4096.
  cfg.model.image_size = 224;
  cfg.model.patch_size = 16;
  cfg.model.channels = 3;
  cfg.model.enc_depth = 12;
  cfg.model.enc_heads = 12;
  cfg.model.enc_dim = 768;
  cfg.model.dec_dim = 512;
  cfg.model.dec_depth = 8;
  cfg.model.mask_ratio = 0.75;
  cfg.model.norm_pix_target = false;
  return cfg;
}

train::TrainRunConfig parse_config(const std::string& path,
                                   const std::vector<std::string>& overrides) {
  train::TrainRunConfig cfg = defaults();
  if (!path.empty()) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("config: cannot open " + path);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      const std::size_t hash = line.find('#');
      if (hash != std::string::npos) line = line.substr(0, hash);
      line = trim(line);
      if (line.empty()) continue;
      apply_line(cfg, line, "at " + path + ":" + std::to_string(lineno));
    }
  }
  for (const auto& ov : overrides) apply_line(cfg, ov, "in --set override");
  validate(cfg);
  return cfg;
}

std::string serialize(const train::TrainRunConfig& cfg) {
  std::ostringstream out;
  for (const auto& [key, field] : fields()) out << key << " = " << field.get(cfg) << "\n";
  return out.str();
}

void apply_preset(train::TrainRunConfig& cfg, const std::string& name) {
  auto set = [&](bool pix_re, bool freq_con, bool freq_re, bool pix_con) {
    cfg.loss.pix_re = pix_re;
    cfg.loss.freq_con = freq_con;
    cfg.loss.freq_re = freq_re;
    cfg.loss.pix_con = pix_con;
  };
  if (name == "pix-only")
    set(true, false, false, false);
  else if (name == "no-fd")
    set(true, true, false, false);
  else if (name == "freq-only")
    set(false, false, true, false);
  else if (name == "no-pd")
    set(false, false, true, true);
  else if (name == "no-con")
    set(true, false, true, false);
  else if (name == "full")
    set(true, true, true, true);
  else
    throw std::invalid_argument("unknown preset '" + name +
                                "' (pix-only|no-fd|freq-only|no-pd|no-con|full)");
}

train::TrainRunConfig from_snapshot(const std::string& text) {
  train::TrainRunConfig cfg = defaults();
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    apply_line(cfg, line, "in snapshot line " + std::to_string(lineno));
  }
  validate(cfg);
  return cfg;
}

}  // namespace ge2ae::config
