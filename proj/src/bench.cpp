#include "sdoa/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <iomanip>
#include <numbers>
#include <ostream>
#include <random>
#include <thread>

#include "sdoa/rng.hpp"

namespace sdoa::bench {

const std::vector<std::string>& estimator_names() {
  static const std::vector<std::string> names{"sdoanet", "fft", "music", "omp", "anm"};
  return names;
}

void check_estimators(const std::vector<std::string>& names) {
  const auto& valid = estimator_names();
  for (const std::string& n : names) {
    if (std::find(valid.begin(), valid.end(), n) != valid.end()) continue;
    std::string list;
    for (const std::string& v : valid) list += (list.empty() ? "" : ", ") + v;
    throw UnknownEstimator("unknown estimator '" + n + "' (valid: " + list + ")");
  }
}

bool needs_model(const std::vector<std::string>& names) {
  return std::find(names.begin(), names.end(), "sdoanet") != names.end();
}

namespace {

Spectrum sticks(const OmpResult& res, const AngleGrid& grid) {
  Spectrum s{grid, std::vector<double>(static_cast<size_t>(grid.size()), 0.0)};
  for (size_t i = 0; i < res.atoms.size(); ++i)
    s.values[static_cast<size_t>(res.atoms[i])] = std::abs(res.coefficients(static_cast<Eigen::Index>(i)));
  return s.normalized();
}

}  // namespace

EstimatorRun run_estimator(const std::string& name, const CVector& r, const EstimatorContext& ctx) {
  if (ctx.table == nullptr) throw std::invalid_argument("run_estimator: missing steering table");
  const SteeringTable& table = *ctx.table;
  auto peaks_of = [&](Spectrum spec, bool fallback = false) {
    spec = spec.normalized();
    DoaEstimate est = find_peaks(spec, ctx.k);
    return EstimatorRun{std::move(spec), std::move(est), fallback};
  };
  if (name == "fft") return peaks_of(beamformer_spectrum(r, table));
  if (name == "music") {
    const MusicConfig mc = MusicConfig::for_array(static_cast<int>(r.size()), ctx.k);
    EstimatorOutput res = music_single_snapshot(r, mc, table.grid(), ctx.spacing);
    return {std::move(res.spectrum), std::move(res.estimate), false};
  }
  if (name == "omp") {
    const OmpResult res = omp(r, table, ctx.k);
    return {sticks(res, table.grid()), res.estimate, false};
  }
  if (name == "anm") {
    try {
      return peaks_of(anm_spectrum(anm_denoise(r, ctx.anm).h, table));
    } catch (const AnmConvergenceError& e) {
      return peaks_of(anm_spectrum(e.last_iterate().h, table), true);
    }
  }
  if (name == "sdoanet") {
    if (ctx.model == nullptr) throw std::invalid_argument("sdoanet estimator needs a model");
    net::NetEstimate res = net::estimate(*ctx.model, r, table, ctx.k);
    return {res.spectrum.normalized(), std::move(res.estimate), false};
  }
  check_estimators({name});
  throw UnknownEstimator("unknown estimator '" + name + "'");
}

void write_results_csv(std::ostream& os, const std::string& variable,
                       const std::vector<ResultRow>& rows) {
  os << "estimator," << variable
     << ",rmse_deg,n_trials,mean_runtime_ms,median_runtime_ms,anm_fallbacks\n";
  os << std::setprecision(10);
  for (const ResultRow& r : rows)
    os << r.estimator << ',' << r.value << ',' << r.rmse_deg << ',' << r.n_trials << ','
       << r.mean_runtime_ms << ',' << r.median_runtime_ms << ',' << r.anm_fallbacks << '\n';
}

Snapshot trial_snapshot(const ExperimentConfig& cfg, double snr_db, double xi, int trial) {
  DatasetSpec spec;
  spec.array = cfg.array;
  spec.caps = cfg.caps.with_factor(xi);
  spec.stage_schedule = {CurriculumStage::AllEffects};
  spec.n_samples = cfg.n_trials;
  spec.snr_min_db = spec.snr_max_db = snr_db;
  spec.doa = cfg.doa;
  spec.seed = cfg.seed;
  return generate_sample(spec, trial);
}

namespace {

struct TrialRecord {
  DoaEstimate estimate;
  double runtime_ms = 0.0;
  bool anm_fallback = false;
};

void run_indices(int count, bool single_thread, const std::function<void(int)>& job) {
  const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  const int workers = single_thread ? 1 : static_cast<int>(std::min<unsigned>(hw, static_cast<unsigned>(count)));
  if (workers <= 1) {
    for (int i = 0; i < count; ++i) job(i);
    return;
  }
  std::vector<std::exception_ptr> errors(static_cast<size_t>(workers));
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w)
    pool.emplace_back([&, w] {
      try {
        for (int i = w; i < count; i += workers) job(i);
      } catch (...) {
        errors[static_cast<size_t>(w)] = std::current_exception();
      }
    });
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

EstimatorContext make_context(const ExperimentConfig& cfg, const SteeringTable& table,
                              const net::NetworkParams* model) {
  EstimatorContext ctx;
  ctx.table = &table;
  ctx.k = cfg.doa.k;
  ctx.spacing = cfg.array.nominal_spacing;
  ctx.model = model;
  return ctx;
}

void check_model(const std::vector<std::string>& estimators, const net::NetworkParams* model,
                 const ExperimentConfig& cfg) {
  check_estimators(estimators);
  if (!needs_model(estimators)) return;
  if (model == nullptr) throw std::invalid_argument("the sdoanet estimator needs a model");
  if (model->cfg.n_antennas != cfg.array.n_antennas)
    throw std::invalid_argument("model antenna count does not match the array");
}

// Runs every estimator on the same n_trials snapshots for each sweep point.
std::vector<ResultRow> sweep(const ExperimentConfig& cfg, const net::NetworkParams* model,
                             bool single_thread, const std::vector<double>& points,
                             const std::function<Snapshot(double, int)>& make_snapshot) {
  cfg.validate();
  check_model(cfg.estimators, model, cfg);
  const SteeringTable table(AngleGrid::full(cfg.eval_grid_points), cfg.array.positions,
                            cfg.array.wavelength);
  const EstimatorContext ctx = make_context(cfg, table, model);
  const size_t n_est = cfg.estimators.size();
  const auto n_trials = static_cast<size_t>(cfg.n_trials);

  std::vector<ResultRow> rows;
  for (double point : points) {
    std::vector<SourceSet> truths(n_trials);
    std::vector<std::vector<TrialRecord>> records(n_est, std::vector<TrialRecord>(n_trials));
    run_indices(cfg.n_trials, single_thread, [&](int t) {
      const Snapshot snap = make_snapshot(point, t);
      truths[static_cast<size_t>(t)] = snap.truth;
      for (size_t e = 0; e < n_est; ++e) {
        const auto t0 = std::chrono::steady_clock::now();
        EstimatorRun run = run_estimator(cfg.estimators[e], snap.received, ctx);
        const auto t1 = std::chrono::steady_clock::now();
        TrialRecord& rec = records[e][static_cast<size_t>(t)];
        rec.estimate = std::move(run.estimate);
        rec.anm_fallback = run.anm_fallback;
        rec.runtime_ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
      }
    });
    for (size_t e = 0; e < n_est; ++e) {
      ResultRow row;
      row.estimator = cfg.estimators[e];
      row.value = point;
      row.n_trials = cfg.n_trials;
      std::vector<DoaEstimate> est;
      std::vector<double> times;
      for (const TrialRecord& rec : records[e]) {
        est.push_back(rec.estimate);
        times.push_back(rec.runtime_ms);
        row.anm_fallbacks += rec.anm_fallback ? 1 : 0;
      }
      row.rmse_deg = rmse(est, truths);
      double sum = 0.0;
      for (double t : times) sum += t;
      row.mean_runtime_ms = sum / static_cast<double>(times.size());
      std::sort(times.begin(), times.end());
      const size_t m = times.size() / 2;
      row.median_runtime_ms = times.size() % 2 ? times[m] : 0.5 * (times[m - 1] + times[m]);
      rows.push_back(std::move(row));
    }
  }
  std::stable_sort(rows.begin(), rows.end(), [](const ResultRow& a, const ResultRow& b) {
    if (a.estimator != b.estimator) return a.estimator < b.estimator;
    return a.value < b.value;
  });
  return rows;
}

}  // namespace

std::vector<ResultRow> eval_snr(const ExperimentConfig& cfg, const net::NetworkParams* model,
                                bool single_thread) {
  const double xi = cfg.eval_imperfect_factor;
  return sweep(cfg, model, single_thread, cfg.snr_sweep.values(),
               [&](double snr, int t) { return trial_snapshot(cfg, snr, xi, t); });
}

std::vector<ResultRow> eval_imperfect(const ExperimentConfig& cfg,
                                      const net::NetworkParams* model, bool single_thread) {
  const double snr = cfg.xi_snr_db;
  return sweep(cfg, model, single_thread, cfg.xi_values,
               [&](double xi, int t) { return trial_snapshot(cfg, snr, xi, t); });
}

Overlay spectrum_overlay(const ExperimentConfig& cfg, const std::vector<std::string>& estimators,
                         const net::NetworkParams* model) {
  cfg.validate();
  check_model(estimators, model, cfg);
  const int n = cfg.array.n_antennas;

  SourceSet sources;
  const auto k = static_cast<Eigen::Index>(cfg.spectrum_doas_deg.size());
  sources.doas_deg.resize(k);
  sources.amplitudes.resize(k);
  Rng rng(derive_seed(cfg.seed, SeedStream::Sources, 0));
  std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
  std::vector<double> doas = cfg.spectrum_doas_deg;
  std::sort(doas.begin(), doas.end());
  for (Eigen::Index i = 0; i < k; ++i) {
    sources.doas_deg(i) = doas[static_cast<size_t>(i)];
    sources.amplitudes(i) = std::polar(1.0, phase(rng));
  }

  const ImperfectionRealization real =
      sample_imperfections(n, cfg.caps.with_factor(cfg.spectrum_imperfect_factor),
                           CurriculumStage::AllEffects, derive_seed(cfg.seed, SeedStream::Imperfections, 0));
  Overlay out;
  out.snapshot = synthesize_snapshot(cfg.array, real, sources, cfg.spectrum_snr_db,
                                     derive_seed(cfg.seed, SeedStream::Noise, 0));

  const SteeringTable table(AngleGrid::full(cfg.spectrum_grid_points), cfg.array.positions,
                            cfg.array.wavelength);
  EstimatorContext ctx = make_context(cfg, table, model);
  ctx.k = static_cast<int>(k);
  for (const std::string& name : estimators)
    out.entries.push_back({name, run_estimator(name, out.snapshot.received, ctx)});
  return out;
}

}  // namespace sdoa::bench
