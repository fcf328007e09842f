#include "sdoa/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

namespace sdoa {

namespace pt = boost::property_tree;

std::vector<double> SweepRange::values() const {
  if (!std::isfinite(start) || !std::isfinite(stop) || !std::isfinite(step))
    throw ConfigError("sweep bounds must be finite");
  if (step <= 0.0) {
    if (start == stop) return {start};
    throw ConfigError("sweep step must be positive");
  }
  if (stop < start) throw ConfigError("sweep stop is below start");
  std::vector<double> out;
  for (int i = 0;; ++i) {
    const double v = start + i * step;
    if (v > stop + 1e-9 * step) break;
    out.push_back(v);
  }
  return out;
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto b = item.find_first_not_of(" \t");
    if (b == std::string::npos) continue;
    const auto e = item.find_last_not_of(" \t");
    out.push_back(item.substr(b, e - b + 1));
  }
  return out;
}

std::vector<double> parse_double_list(const std::string& text) {
  std::vector<double> out;
  for (const std::string& tok : split_list(text)) {
    size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(tok, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != tok.size()) throw ConfigError("not a number: '" + tok + "'");
    out.push_back(v);
  }
  return out;
}

void ExperimentConfig::validate() const {
  try {
    array.validate();
    caps.validate();
    doa.validate();
    net.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (net.n_antennas != array.n_antennas)
    throw ConfigError("network and array antenna counts differ");
  if (n_samples < 1) throw ConfigError("dataset.n_samples must be >= 1");
  if (!(snr_min_db <= snr_max_db)) throw ConfigError("dataset SNR range is empty");
  if (stages.empty()) throw ConfigError("dataset.stages is empty");
  if (epochs < 1 || samples_per_epoch < 2) throw ConfigError("train.epochs and samples_per_epoch too small");
  if (!(sigma_bar > 0.0)) throw ConfigError("train.sigma_bar must be positive");
  if (train_grid_points < 2 || eval_grid_points < 2 || spectrum_grid_points < 2)
    throw ConfigError("grid_points must be >= 2");
  if (estimators.empty()) throw ConfigError("eval.estimators is empty");
  if (n_trials < 1) throw ConfigError("eval.n_trials must be >= 1");
  if (snr_sweep.values().empty()) throw ConfigError("SNR sweep is empty");
  if (xi_values.empty()) throw ConfigError("eval.xi_values is empty");
  for (double xi : xi_values)
    if (!(xi >= 0.0)) throw ConfigError("imperfect factors must be nonnegative");
  try {
    caps.with_factor(eval_imperfect_factor).validate();
    caps.with_factor(spectrum_imperfect_factor).validate();
    for (double xi : xi_values) caps.with_factor(xi).validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (static_cast<int>(spectrum_doas_deg.size()) < 1) throw ConfigError("spectrum.doas_deg is empty");
}

DatasetSpec ExperimentConfig::dataset_spec() const {
  DatasetSpec s;
  s.array = array;
  s.caps = caps;
  s.stage_schedule = stages;
  s.n_samples = n_samples;
  s.snr_min_db = snr_min_db;
  s.snr_max_db = snr_max_db;
  s.doa = doa;
  s.seed = seed;
  return s;
}

net::TrainConfig ExperimentConfig::train_config() const {
  net::TrainConfig t;
  t.net = net;
  t.data = dataset_spec();
  t.epochs = epochs;
  t.samples_per_epoch = samples_per_epoch;
  t.sigma_bar = sigma_bar;
  t.train_grid_points = train_grid_points;
  t.fixed_dataset = fixed_dataset;
  t.seed = seed;
  return t;
}

namespace {

template <class T>
T get(const pt::ptree& tree, const std::string& key, T fallback) {
  try {
    const auto node = tree.get_child_optional(key);
    return node ? node->template get_value<T>() : fallback;
  } catch (const pt::ptree_bad_data&) {
    throw ConfigError("bad value for " + key + ": '" + tree.get<std::string>(key) + "'");
  }
}

bool get_bool(const pt::ptree& tree, const std::string& key, bool fallback) {
  const auto v = tree.get_optional<std::string>(key);
  if (!v) return fallback;
  if (*v == "true" || *v == "1" || *v == "yes") return true;
  if (*v == "false" || *v == "0" || *v == "no") return false;
  throw ConfigError("bad boolean for " + key + ": '" + *v + "'");
}

void check_known(const pt::ptree& tree) {
  static const std::vector<std::pair<std::string, std::vector<std::string>>> known{
      {"run", {"seed", "out_dir"}},
      {"array", {"n_antennas", "spacing", "wavelength"}},
      {"caps",
       {"max_pos_std", "max_gain_std", "max_phase_std", "coupling_base", "nonlinear_strength",
        "imperfect_factor"}},
      {"sources", {"k", "min_separation_deg", "doa_min_deg", "doa_max_deg"}},
      {"dataset", {"n_samples", "snr_min_db", "snr_max_db", "stages"}},
      {"net",
       {"n_filters", "inner_dim", "n_conv_layers", "kernel_size", "batch_size", "learning_rate",
        "bn_epsilon", "bn_momentum", "output_init_scale"}},
      {"train", {"epochs", "samples_per_epoch", "sigma_bar", "grid_points", "fixed_dataset"}},
      {"eval",
       {"estimators", "n_trials", "grid_points", "snr_start", "snr_stop", "snr_step",
        "imperfect_factor", "xi_values", "xi_snr_db"}},
      {"spectrum", {"doas_deg", "snr_db", "imperfect_factor", "grid_points"}},
  };
  for (const auto& [section, body] : tree) {
    const auto it = std::find_if(known.begin(), known.end(),
                                 [&](const auto& s) { return s.first == section; });
    if (it == known.end()) throw ConfigError("unknown config section [" + section + "]");
    for (const auto& [key, unused] : body) {
      (void)unused;
      if (std::find(it->second.begin(), it->second.end(), key) == it->second.end())
        throw ConfigError("unknown key " + section + "." + key);
    }
  }
}

}  // namespace

ExperimentConfig parse_config(const std::string& text) {
  pt::ptree tree;
  try {
    std::istringstream is(text);
    pt::read_ini(is, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(std::string("config parse error: ") + e.what());
  }
  check_known(tree);

  ExperimentConfig c;
  c.seed = get<std::uint64_t>(tree, "run.seed", c.seed);
  c.out_dir = get<std::string>(tree, "run.out_dir", c.out_dir.string());

  const int n = get<int>(tree, "array.n_antennas", c.array.n_antennas);
  const double spacing = get<double>(tree, "array.spacing", c.array.nominal_spacing);
  const double lambda = get<double>(tree, "array.wavelength", c.array.wavelength);
  try {
    c.array = ArrayConfig::ula(n, spacing, lambda);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  c.net.n_antennas = n;

  c.caps.max_pos_std = get(tree, "caps.max_pos_std", c.caps.max_pos_std);
  c.caps.max_gain_std = get(tree, "caps.max_gain_std", c.caps.max_gain_std);
  c.caps.max_phase_std = get(tree, "caps.max_phase_std", c.caps.max_phase_std);
  c.caps.coupling_base = get(tree, "caps.coupling_base", c.caps.coupling_base);
  c.caps.nonlinear_strength = get(tree, "caps.nonlinear_strength", c.caps.nonlinear_strength);
  c.caps.imperfect_factor = get(tree, "caps.imperfect_factor", c.caps.imperfect_factor);

  c.doa.k = get(tree, "sources.k", c.doa.k);
  c.doa.min_separation_deg = get(tree, "sources.min_separation_deg", c.doa.min_separation_deg);
  c.doa.lo_deg = get(tree, "sources.doa_min_deg", c.doa.lo_deg);
  c.doa.hi_deg = get(tree, "sources.doa_max_deg", c.doa.hi_deg);

  c.n_samples = get(tree, "dataset.n_samples", c.n_samples);
  c.snr_min_db = get(tree, "dataset.snr_min_db", c.snr_min_db);
  c.snr_max_db = get(tree, "dataset.snr_max_db", c.snr_max_db);
  if (const auto st = tree.get_optional<std::string>("dataset.stages")) {
    c.stages.clear();
    const auto names = split_list(*st);
    if (names.size() == 1 && names[0] == "curriculum") {
      for (int i = 0; i < kNumStages; ++i) c.stages.push_back(stage_from_index(i));
    } else {
      try {
        for (const std::string& name : names) c.stages.push_back(stage_from_name(name));
      } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
      }
    }
  }

  c.net.n_filters = get(tree, "net.n_filters", c.net.n_filters);
  c.net.inner_dim = get(tree, "net.inner_dim", c.net.inner_dim);
  c.net.n_conv_layers = get(tree, "net.n_conv_layers", c.net.n_conv_layers);
  c.net.kernel_size = get(tree, "net.kernel_size", c.net.kernel_size);
  c.net.batch_size = get(tree, "net.batch_size", c.net.batch_size);
  c.net.learning_rate = get(tree, "net.learning_rate", c.net.learning_rate);
  c.net.bn_epsilon = get(tree, "net.bn_epsilon", c.net.bn_epsilon);
  c.net.bn_momentum = get(tree, "net.bn_momentum", c.net.bn_momentum);
  c.net.output_init_scale = get(tree, "net.output_init_scale", c.net.output_init_scale);

  c.epochs = get(tree, "train.epochs", c.epochs);
  c.samples_per_epoch = get(tree, "train.samples_per_epoch", c.samples_per_epoch);
  c.sigma_bar = get(tree, "train.sigma_bar", c.sigma_bar);
  c.train_grid_points = get(tree, "train.grid_points", c.train_grid_points);
  c.fixed_dataset = get_bool(tree, "train.fixed_dataset", c.fixed_dataset);

  if (const auto e = tree.get_optional<std::string>("eval.estimators")) c.estimators = split_list(*e);
  c.n_trials = get(tree, "eval.n_trials", c.n_trials);
  c.eval_grid_points = get(tree, "eval.grid_points", c.eval_grid_points);
  c.snr_sweep.start = get(tree, "eval.snr_start", c.snr_sweep.start);
  c.snr_sweep.stop = get(tree, "eval.snr_stop", c.snr_sweep.stop);
  c.snr_sweep.step = get(tree, "eval.snr_step", c.snr_sweep.step);
  c.eval_imperfect_factor = get(tree, "eval.imperfect_factor", c.eval_imperfect_factor);
  if (const auto x = tree.get_optional<std::string>("eval.xi_values")) c.xi_values = parse_double_list(*x);
  c.xi_snr_db = get(tree, "eval.xi_snr_db", c.xi_snr_db);

  if (const auto d = tree.get_optional<std::string>("spectrum.doas_deg"))
    c.spectrum_doas_deg = parse_double_list(*d);
  c.spectrum_snr_db = get(tree, "spectrum.snr_db", c.spectrum_snr_db);
  c.spectrum_imperfect_factor = get(tree, "spectrum.imperfect_factor", c.spectrum_imperfect_factor);
  c.spectrum_grid_points = get(tree, "spectrum.grid_points", c.spectrum_grid_points);

  c.validate();
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot read config " + path.string());
  std::stringstream ss;
  ss << is.rdbuf();
  return parse_config(ss.str());
}

}  // namespace sdoa
