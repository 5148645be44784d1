#include "uwrange/config.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

namespace uwrange {

namespace {

std::string trim(const std::string& s) {
  std::size_t begin = 0, end = s.size();
  while (begin < end && std::isspace(static_cast<unsigned char>(s[begin]))) ++begin;
  while (end > begin && std::isspace(static_cast<unsigned char>(s[end - 1]))) --end;
  return s.substr(begin, end - begin);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> parts;
  std::stringstream ss(s);
  std::string part;
  while (std::getline(ss, part, sep)) parts.push_back(trim(part));
  return parts;
}

double parse_double(const std::string& key, const std::string& value) {
  if (value == "inf" || value == "+inf" || value == "infinity") {
    return std::numeric_limits<double>::infinity();
  }
  try {
    std::size_t used = 0;
    const double v = std::stod(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw std::runtime_error("config: bad number for " + key + ": '" + value + "'");
  }
}

std::vector<double> parse_double_list(const std::string& key, const std::string& value) {
  std::vector<double> out;
  for (const std::string& part : split(value, ',')) {
    if (!part.empty()) out.push_back(parse_double(key, part));
  }
  if (out.empty()) throw std::runtime_error("config: empty list for " + key);
  return out;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1" || value == "yes") return true;
  if (value == "false" || value == "0" || value == "no") return false;
  throw std::runtime_error("config: bad bool for " + key + ": '" + value + "'");
}

}  // namespace

std::vector<SspSample> load_ssp_csv(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("load_ssp_csv: cannot open " + path);
  std::vector<SspSample> ssp;
  std::string line;
  while (std::getline(is, line)) {
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    const auto fields = split(line, ',');
    if (fields.size() != 2) throw std::runtime_error("load_ssp_csv: bad line '" + line + "'");
    // Tolerate a header row.
    if (!std::isdigit(static_cast<unsigned char>(fields[0][0])) && fields[0][0] != '-' &&
        fields[0][0] != '+' && fields[0][0] != '.') {
      continue;
    }
    ssp.push_back({parse_double("ssp depth", fields[0]), parse_double("ssp speed", fields[1])});
  }
  if (ssp.size() < 2) throw std::runtime_error("load_ssp_csv: need at least 2 samples");
  return ssp;
}

ExperimentConfig default_experiment_config() {
  ExperimentConfig cfg;
  cfg.env = default_environment();
  return cfg;
}

ExperimentConfig parse_experiment_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("config: cannot open " + path);

  std::map<std::string, std::string> pairs;
  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::runtime_error("config: missing '=' at line " + std::to_string(line_no));
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) {
      throw std::runtime_error("config: empty key at line " + std::to_string(line_no));
    }
    pairs[key] = value;
  }

  ExperimentConfig cfg = default_experiment_config();
  auto take = [&](const std::string& key) -> std::string {
    auto it = pairs.find(key);
    if (it == pairs.end()) return {};
    std::string value = it->second;
    pairs.erase(it);
    return value;
  };

  if (const std::string v = take("master_seed"); !v.empty()) {
    cfg.master_seed = static_cast<std::uint64_t>(std::stoull(v));
  }
  if (const std::string v = take("threads"); !v.empty()) cfg.threads = std::stoi(v);
  if (const std::string v = take("methods"); !v.empty()) {
    cfg.methods = split(v, ',');
    for (const std::string& m : cfg.methods) {
      if (m != "mfp" && m != "cnn" && m != "cnn_shot" && m != "cnn_jsea") {
        throw std::runtime_error("config: unknown method '" + m + "'");
      }
    }
  }

  // Environment.
  if (const std::string v = take("environment.water_depth"); !v.empty()) {
    cfg.env.water_depth_m = parse_double("environment.water_depth", v);
  }
  if (const std::string v = take("environment.source_depth"); !v.empty()) {
    cfg.env.source_depth_m = parse_double("environment.source_depth", v);
  }
  if (const std::string v = take("environment.frequency"); !v.empty()) {
    cfg.env.frequency_hz = parse_double("environment.frequency", v);
  }
  if (const std::string v = take("environment.delta_c"); !v.empty()) {
    cfg.env_delta_c = parse_double("environment.delta_c", v);
  }
  if (const std::string v = take("environment.ssp_file"); !v.empty()) {
    cfg.env.ssp_base = load_ssp_csv(v);
  }
  if (const std::string v = take("environment.ssp"); !v.empty()) {
    // inline profile: depth:speed,depth:speed,...
    cfg.env.ssp_base.clear();
    for (const std::string& pair : split(v, ',')) {
      const auto parts = split(pair, ':');
      if (parts.size() != 2) throw std::runtime_error("config: bad ssp entry '" + pair + "'");
      cfg.env.ssp_base.push_back({parse_double("environment.ssp depth", parts[0]),
                                  parse_double("environment.ssp speed", parts[1])});
    }
  }
  if (const std::string v = take("environment.array_depths"); !v.empty()) {
    cfg.env.array_depths_m = parse_double_list("environment.array_depths", v);
  }
  if (const std::string v = take("environment.array"); !v.empty()) {
    // top:bottom:count shorthand
    const auto parts = split(v, ':');
    if (parts.size() != 3) throw std::runtime_error("config: environment.array wants top:bottom:count");
    const double top = parse_double("environment.array top", parts[0]);
    const double bottom = parse_double("environment.array bottom", parts[1]);
    const int count = std::stoi(parts[2]);
    if (count < 2) throw std::runtime_error("config: environment.array count < 2");
    cfg.env.array_depths_m.resize(count);
    for (int i = 0; i < count; ++i) {
      cfg.env.array_depths_m[i] = top + (bottom - top) * i / (count - 1);
    }
  }

  // Signal.
  if (const std::string v = take("signal.num_snapshots"); !v.empty()) {
    cfg.num_snapshots = std::stoi(v);
  }
  if (const std::string v = take("signal.train_snr_db"); !v.empty()) {
    cfg.train_snr_db = parse_double("signal.train_snr_db", v);
  }
  if (const std::string v = take("signal.snr_db"); !v.empty()) {
    cfg.eval_snr_db = parse_double("signal.snr_db", v);
  }
  if (const std::string v = take("signal.snr_db_list"); !v.empty()) {
    cfg.snr_db_list = parse_double_list("signal.snr_db_list", v);
  }
  if (const std::string v = take("signal.realizations"); !v.empty()) {
    cfg.realizations = std::stoi(v);
  }
  if (const std::string v = take("signal.noise_kind"); !v.empty()) {
    if (v == "gaussian") {
      cfg.noise.kind = NoiseKind::gaussian;
    } else if (v == "file") {
      cfg.noise.kind = NoiseKind::file;
    } else {
      throw std::runtime_error("config: unknown noise kind '" + v + "'");
    }
  }
  if (const std::string v = take("signal.noise_file"); !v.empty()) {
    cfg.noise.file_path = v;
  }

  // Grid and labels.
  if (const std::string v = take("grid.d_min"); !v.empty()) {
    cfg.grid.d_min_m = parse_double("grid.d_min", v);
  }
  if (const std::string v = take("grid.d_max"); !v.empty()) {
    cfg.grid.d_max_m = parse_double("grid.d_max", v);
  }
  if (const std::string v = take("grid.bin_width"); !v.empty()) {
    cfg.grid.bin_width_m = parse_double("grid.bin_width", v);
  }
  if (const std::string v = take("label.sigma"); !v.empty()) {
    cfg.label.sigma = parse_double("label.sigma", v);
  }

  // Training.
  if (const std::string v = take("train.learning_rate"); !v.empty()) {
    cfg.train.learning_rate = parse_double("train.learning_rate", v);
  }
  if (const std::string v = take("train.batch_size"); !v.empty()) {
    cfg.train.batch_size = std::stoi(v);
  }
  if (const std::string v = take("train.val_fraction"); !v.empty()) {
    cfg.train.val_fraction = parse_double("train.val_fraction", v);
  }
  if (const std::string v = take("train.lr_decay_factor"); !v.empty()) {
    cfg.train.lr_decay_factor = parse_double("train.lr_decay_factor", v);
  }
  if (const std::string v = take("train.patience_decay"); !v.empty()) {
    cfg.train.patience_decay = std::stoi(v);
  }
  if (const std::string v = take("train.patience_stop"); !v.empty()) {
    cfg.train.patience_stop = std::stoi(v);
  }
  if (const std::string v = take("train.max_epochs"); !v.empty()) {
    cfg.train.max_epochs = std::stoi(v);
  }
  if (const std::string v = take("train.range_step"); !v.empty()) {
    cfg.train_range_step_m = parse_double("train.range_step", v);
  }
  if (const std::string v = take("train.enabled"); !v.empty()) {
    cfg.train_enabled = parse_bool("train.enabled", v);
  }

  // Adaptation.
  if (const std::string v = take("adapt.mu_da"); !v.empty()) {
    cfg.adapt.mu_da = parse_double("adapt.mu_da", v);
  }
  if (const std::string v = take("adapt.beta"); !v.empty()) {
    cfg.adapt.beta = parse_double("adapt.beta", v);
  }
  if (const std::string v = take("adapt.delta"); !v.empty()) {
    cfg.adapt.delta_m = parse_double("adapt.delta", v);
  }
  if (const std::string v = take("adapt.sigma_s"); !v.empty()) {
    if (v == "auto") {
      cfg.adapt.sigma_s.reset();
    } else {
      cfg.adapt.sigma_s = parse_double("adapt.sigma_s", v);
    }
  }
  if (const std::string v = take("adapt.peak_dominance"); !v.empty()) {
    cfg.adapt.peak_dominance = parse_double("adapt.peak_dominance", v);
  }
  if (const std::string v = take("adapt.num_steps"); !v.empty()) {
    cfg.adapt.num_steps = std::stoi(v);
  }
  if (const std::string v = take("adapt.sigma_label"); !v.empty()) {
    cfg.adapt.sigma_label = parse_double("adapt.sigma_label", v);
  }

  // Test block.
  if (const std::string v = take("test.num_samples"); !v.empty()) {
    cfg.num_test = std::stoi(v);
  }
  if (const std::string v = take("test.delta_c_list"); !v.empty()) {
    cfg.delta_c_list = parse_double_list("test.delta_c_list", v);
  }
  if (const std::string v = take("test.on_grid"); !v.empty()) {
    cfg.test_on_grid = parse_bool("test.on_grid", v);
  }

  if (!pairs.empty()) {
    throw std::runtime_error("config: unknown key '" + pairs.begin()->first + "'");
  }
  validate(cfg.env);
  return cfg;
}

}  // namespace uwrange
