#include "plastic/harness/config.hpp"

#include <cstdio>
#include <cstdlib>
#include <sstream>
#include <stdexcept>

extern char** environ;

namespace plastic::harness {
namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

[[noreturn]] void bad_value(const std::string& key, const std::string& what, const std::string& value) {
  throw std::invalid_argument("config key '" + key + "': expected " + what + ", got '" + value + "'");
}

long long to_int(const std::string& key, const std::string& value) {
  std::size_t used = 0;
  long long v = 0;
  try {
    v = std::stoll(value, &used);
  } catch (const std::exception&) {
    bad_value(key, "an integer", value);
  }
  if (used != value.size()) bad_value(key, "an integer", value);
  return v;
}

double to_double(const std::string& key, const std::string& value) {
  std::size_t used = 0;
  double v = 0;
  try {
    v = std::stod(value, &used);
  } catch (const std::exception&) {
    bad_value(key, "a number", value);
  }
  if (used != value.size()) bad_value(key, "a number", value);
  return v;
}

bool to_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1" || value == "yes") return true;
  if (value == "false" || value == "0" || value == "no") return false;
  bad_value(key, "true or false", value);
}

std::vector<int> to_int_list(const std::string& key, const std::string& value) {
  std::vector<int> out;
  if (trim(value).empty()) return out;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(static_cast<int>(to_int(key, trim(item))));
  return out;
}

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

#ifndef PLASTIC_DEFAULT_CORPUS
#define PLASTIC_DEFAULT_CORPUS ""
#endif

}  // namespace

ExperimentConfig::ExperimentConfig() : corpus_path(PLASTIC_DEFAULT_CORPUS) {}

void ExperimentConfig::validate() const {
  network.validate();
  train.validate();
  lstm.validate();
  if (corpus_path.empty()) throw std::invalid_argument("corpus_path: must be set");
}

std::string_view model_name(ModelKind kind) { return kind == ModelKind::kLstm ? "lstm" : "plastic"; }

void apply_setting(ExperimentConfig& cfg, const std::string& key, const std::string& raw) {
  const std::string value = trim(raw);
  auto& n = cfg.network;
  auto& t = cfg.train;
  try {
    if (key == "model") {
      if (value == "plastic") cfg.model = ModelKind::kPlastic;
      else if (value == "lstm") cfg.model = ModelKind::kLstm;
      else bad_value(key, "plastic or lstm", value);
    } else if (key == "corpus_path") {
      cfg.corpus_path = value;
    } else if (key == "h_op") {
      n.h_op = rules::parse_op(value);
    } else if (key == "w_op") {
      n.w_op = rules::parse_op(value);
    } else if (key == "hidden_layers") {
      n.hidden_layers = to_int_list(key, value);
    } else if (key == "state_size") {
      n.d_h = n.d_w = static_cast<int>(to_int(key, value));
    } else if (key == "d_h") {
      n.d_h = static_cast<int>(to_int(key, value));
    } else if (key == "d_w") {
      n.d_w = static_cast<int>(to_int(key, value));
    } else if (key == "d_e") {
      n.d_e = static_cast<int>(to_int(key, value));
    } else if (key == "hidden_width") {
      n.hidden_width = static_cast<int>(to_int(key, value));
    } else if (key == "lstm_units") {
      cfg.lstm.units = static_cast<int>(to_int(key, value));
    } else if (key == "segment_length") {
      t.segment_length = static_cast<int>(to_int(key, value));
    } else if (key == "delay") {
      t.delay = static_cast<int>(to_int(key, value));
    } else if (key == "steps") {
      t.steps = to_int(key, value);
    } else if (key == "seed") {
      const long long s = to_int(key, value);
      if (s < 0) bad_value(key, "a non-negative integer", value);
      t.seed = static_cast<std::uint64_t>(s);
    } else if (key == "lr") {
      t.lr = to_double(key, value);
    } else if (key == "beta1") {
      t.adam.beta1 = to_double(key, value);
    } else if (key == "beta2") {
      t.adam.beta2 = to_double(key, value);
    } else if (key == "adam_eps") {
      t.adam.eps = to_double(key, value);
    } else if (key == "include_online_loss") {
      t.include_online_loss = to_bool(key, value);
    } else if (key == "log_every") {
      t.log_every = static_cast<int>(to_int(key, value));
    } else if (key == "checkpoint_every") {
      t.checkpoint_every = to_int(key, value);
    } else if (key == "finite_check_every") {
      t.finite_check_every = static_cast<int>(to_int(key, value));
    } else if (key == "early_window") {
      t.early_window = to_int(key, value);
    } else if (key == "final_window") {
      t.final_window = to_int(key, value);
    } else if (key == "out_dir") {
      cfg.out_dir = value;
    } else {
      throw std::invalid_argument("config key '" + key + "': unknown key");
    }
  } catch (const std::invalid_argument& e) {
    const std::string msg = e.what();
    if (msg.rfind("config key '", 0) == 0) throw;
    throw std::invalid_argument("config key '" + key + "': " + msg);
  }
}

ExperimentConfig parse_config(std::string_view text, const Overrides& overrides, const Overrides& env) {
  ExperimentConfig cfg;
  std::istringstream in{std::string(text)};
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const std::string body = trim(line);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument("config line " + std::to_string(lineno) + ": expected key = value");
    }
    apply_setting(cfg, trim(body.substr(0, eq)), body.substr(eq + 1));
  }
  for (const auto& [k, v] : env) apply_setting(cfg, k, v);
  for (const auto& [k, v] : overrides) apply_setting(cfg, k, v);
  cfg.validate();
  return cfg;
}

Overrides environment_overrides() {
  Overrides out;
  for (char** e = environ; e != nullptr && *e != nullptr; ++e) {
    std::string_view kv(*e);
    if (kv.substr(0, kEnvPrefix.size()) != kEnvPrefix) continue;
    const auto eq = kv.find('=');
    if (eq == std::string_view::npos) continue;
    std::string key(kv.substr(kEnvPrefix.size(), eq - kEnvPrefix.size()));
    for (auto& c : key) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    out.emplace_back(std::move(key), std::string(kv.substr(eq + 1)));
  }
  return out;
}

std::string render_config(const ExperimentConfig& cfg) {
  const auto& n = cfg.network;
  const auto& t = cfg.train;
  std::ostringstream o;
  std::string layers;
  for (std::size_t i = 0; i < n.hidden_layers.size(); ++i) {
    if (i) layers += ",";
    layers += std::to_string(n.hidden_layers[i]);
  }
  o << "model=" << model_name(cfg.model) << '\n'
    << "corpus_path=" << cfg.corpus_path << '\n'
    << "h_op=" << rules::op_name(n.h_op) << '\n'
    << "w_op=" << rules::op_name(n.w_op) << '\n'
    << "hidden_layers=" << layers << '\n'
    << "d_h=" << n.d_h << '\n'
    << "d_w=" << n.d_w << '\n'
    << "d_e=" << n.d_e << '\n'
    << "hidden_width=" << n.hidden_width << '\n'
    << "lstm_units=" << cfg.lstm.units << '\n'
    << "segment_length=" << t.segment_length << '\n'
    << "delay=" << t.delay << '\n'
    << "steps=" << t.steps << '\n'
    << "seed=" << t.seed << '\n'
    << "lr=" << fmt_double(t.lr) << '\n'
    << "beta1=" << fmt_double(t.adam.beta1) << '\n'
    << "beta2=" << fmt_double(t.adam.beta2) << '\n'
    << "adam_eps=" << fmt_double(t.adam.eps) << '\n'
    << "include_online_loss=" << (t.include_online_loss ? "true" : "false") << '\n'
    << "log_every=" << t.log_every << '\n'
    << "checkpoint_every=" << t.checkpoint_every << '\n'
    << "finite_check_every=" << t.finite_check_every << '\n'
    << "early_window=" << t.early_window << '\n'
    << "final_window=" << t.final_window << '\n'
    << "out_dir=" << cfg.out_dir << '\n';
  return o.str();
}

std::string cell_hash(const ExperimentConfig& cfg) {
  std::istringstream in(render_config(cfg));
  std::uint64_t h = 1469598103934665603ULL;
  std::string line;
  while (std::getline(in, line)) {
    if (line.rfind("seed=", 0) == 0 || line.rfind("out_dir=", 0) == 0) continue;
    for (unsigned char c : line + "\n") {
      h ^= c;
      h *= 1099511628211ULL;
    }
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace plastic::harness
