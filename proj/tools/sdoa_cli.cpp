// sdoa: dataset generation, training and estimator benchmarks.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "sdoa/bench.hpp"
#include "sdoa/config.hpp"
#include "sdoa/io.hpp"
#include "sdoa/sdoanet.hpp"

namespace fs = std::filesystem;
using namespace sdoa;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitRuntime = 2;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Options {
  std::string config;
  std::string model;
  std::string out;
  std::optional<std::uint64_t> seed;
  bool single_thread = false;
  std::string estimators;
  std::string doas;
  std::optional<double> snr;
  std::optional<double> xi;
};

ExperimentConfig load(const Options& o) {
  ExperimentConfig cfg = o.config.empty() ? ExperimentConfig{} : load_config(o.config);
  if (o.seed) cfg.seed = *o.seed;
  if (!o.out.empty()) cfg.out_dir = o.out;
  if (!o.estimators.empty()) cfg.estimators = split_list(o.estimators);
  if (!o.doas.empty()) cfg.spectrum_doas_deg = parse_double_list(o.doas);
  if (o.snr) cfg.spectrum_snr_db = *o.snr;
  if (o.xi) cfg.spectrum_imperfect_factor = *o.xi;
  cfg.validate();
  return cfg;
}

void make_out_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir))
    throw std::runtime_error("cannot create output directory " + dir.string());
}

std::ofstream open_text(const fs::path& path) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
  return os;
}

std::optional<net::NetworkParams> load_model(const Options& o, const std::vector<std::string>& estimators) {
  if (!bench::needs_model(estimators)) return std::nullopt;
  if (o.model.empty()) throw UsageError("the sdoanet estimator needs --model PATH");
  if (!fs::exists(o.model)) throw UsageError("model file not found: " + o.model);
  return io::read_model_file(o.model);
}

int cmd_simulate(const Options& o) {
  const ExperimentConfig cfg = load(o);
  make_out_dir(cfg.out_dir);
  const DatasetSpec spec = cfg.dataset_spec();
  std::vector<io::DatasetRecord> records;
  records.reserve(static_cast<size_t>(spec.n_samples));
  for (std::int64_t i = 0; i < spec.n_samples; ++i) {
    const auto stage = spec.stage_schedule[static_cast<size_t>(i) % spec.stage_schedule.size()];
    records.push_back({stage, generate_sample(spec, i)});
  }
  const fs::path data = cfg.out_dir / "dataset.sdoa";
  io::write_dataset_file(data, spec.array.n_antennas, spec.doa.k, records);
  std::ofstream meta = open_text(cfg.out_dir / "dataset.json");
  meta << io::dataset_metadata_json(spec);
  if (!meta.flush()) throw std::runtime_error("failed writing dataset metadata");
  std::cout << "wrote " << records.size() << " samples (seed " << cfg.seed << ") to "
            << data.string() << "\n";
  return 0;
}

void write_history(const fs::path& path, const std::vector<net::EpochRecord>& history) {
  std::ofstream os = open_text(path);
  os << "epoch,stage,loss\n" << std::setprecision(12);
  for (const auto& r : history) os << r.epoch << ',' << stage_name(r.stage) << ',' << r.mean_loss << '\n';
  if (!os.flush()) throw std::runtime_error("failed writing " + path.string());
}

int cmd_train(const Options& o) {
  const ExperimentConfig cfg = load(o);
  make_out_dir(cfg.out_dir);
  const fs::path model_path = o.model.empty() ? cfg.out_dir / "model.sdon" : fs::path(o.model);
  const fs::path history_path = cfg.out_dir / "history.csv";
  // Fail on an unwritable model path before spending time on training.
  open_text(model_path);

  try {
    const net::TrainResult res = net::train(cfg.train_config(), [](const net::EpochRecord& r) {
      std::cerr << "epoch " << r.epoch << " [" << stage_name(r.stage) << "] loss " << r.mean_loss
                << " (" << std::fixed << std::setprecision(2) << r.wall_seconds << " s)\n"
                << std::defaultfloat << std::setprecision(6);
    });
    io::write_model_file(model_path, res.params);
    write_history(history_path, res.history);
    std::cout << "trained " << res.history.size() << " epochs (seed " << cfg.seed << "); model "
              << model_path.string() << ", history " << history_path.string() << "\n";
    return 0;
  } catch (const net::TrainingDiverged& e) {
    write_history(history_path, e.history());
    std::error_code ec;
    fs::remove(model_path, ec);
    std::cerr << "error: " << e.what() << " (partial history in " << history_path.string() << ")\n";
    return kExitRuntime;
  }
}

int cmd_spectrum(const Options& o) {
  const ExperimentConfig cfg = load(o);
  bench::check_estimators(cfg.estimators);
  const auto model = load_model(o, cfg.estimators);
  make_out_dir(cfg.out_dir);
  const bench::Overlay ov = bench::spectrum_overlay(cfg, cfg.estimators, model ? &*model : nullptr);
  for (const auto& entry : ov.entries) {
    const fs::path path = cfg.out_dir / ("spectrum_" + entry.estimator + ".csv");
    std::ofstream os = open_text(path);
    write_spectrum_csv(os, entry.run.spectrum);
    if (!os.flush()) throw std::runtime_error("failed writing " + path.string());
    std::cout << entry.estimator << ":";
    for (double d : entry.run.estimate.doas_deg) std::cout << ' ' << d;
    std::cout << "\n";
  }
  return 0;
}

int cmd_eval(const Options& o, bool imperfect) {
  const ExperimentConfig cfg = load(o);
  bench::check_estimators(cfg.estimators);
  const auto model = load_model(o, cfg.estimators);
  make_out_dir(cfg.out_dir);
  const net::NetworkParams* mp = model ? &*model : nullptr;
  const auto rows = imperfect ? bench::eval_imperfect(cfg, mp, o.single_thread)
                              : bench::eval_snr(cfg, mp, o.single_thread);
  const fs::path path = cfg.out_dir / (imperfect ? "rmse_imperfect.csv" : "rmse_snr.csv");
  std::ofstream os = open_text(path);
  bench::write_results_csv(os, imperfect ? "xi" : "snr_db", rows);
  if (!os.flush()) throw std::runtime_error("failed writing " + path.string());
  bench::write_results_csv(std::cout, imperfect ? "xi" : "snr_db", rows);
  for (const auto& r : rows)
    if (r.anm_fallbacks > 0)
      std::cerr << "warning: ANM hit the iteration cap in " << r.anm_fallbacks << " of "
                << r.n_trials << " trials at " << r.value << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Single-snapshot DOA estimation: simulation, training and benchmarks"};
  app.require_subcommand(1);
  Options o;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", o.config, "INI experiment config")->check(CLI::ExistingFile);
    sub->add_option("--out", o.out, "output directory (overrides run.out_dir)");
    sub->add_option("--seed", o.seed, "master seed (overrides run.seed)");
    sub->add_flag("--single-thread", o.single_thread, "run trials on one thread");
  };
  auto* sim = app.add_subcommand("simulate", "generate a dataset and its metadata sidecar");
  common(sim);
  auto* tr = app.add_subcommand("train", "train SDOAnet; writes the model and history.csv");
  common(tr);
  tr->add_option("--model", o.model, "model output path (default <out>/model.sdon)");
  auto* sp = app.add_subcommand("spectrum", "overlay spectra of one synthesized snapshot");
  auto* es = app.add_subcommand("eval-snr", "RMSE against SNR");
  auto* ei = app.add_subcommand("eval-imperfect", "RMSE against the imperfect factor");
  for (CLI::App* sub : {sp, es, ei}) {
    common(sub);
    sub->add_option("--model", o.model, "trained model (required for sdoanet)");
    sub->add_option("--estimators", o.estimators, "comma list (overrides eval.estimators)");
  }
  sp->add_option("--doas", o.doas, "comma list of source DOAs in degrees");
  sp->add_option("--snr", o.snr, "SNR in dB");
  sp->add_option("--xi", o.xi, "imperfect factor");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitUsage;
  }

  try {
    if (sim->parsed()) return cmd_simulate(o);
    if (tr->parsed()) return cmd_train(o);
    if (sp->parsed()) return cmd_spectrum(o);
    if (es->parsed()) return cmd_eval(o, false);
    if (ei->parsed()) return cmd_eval(o, true);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const bench::UnknownEstimator& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitUsage;
}
