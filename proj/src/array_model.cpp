#include "sdoa/array_model.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "sdoa/rng.hpp"

namespace sdoa {

namespace {

constexpr std::array<std::string_view, kNumStages> kStageNames = {
    "perfect", "position", "gain", "phase", "coupling", "nonlinear", "all",
};

constexpr double kMinGain = 0.05;
constexpr int kMaxSourceDraws = 100000;

double deg2rad(double d) { return d * std::numbers::pi / 180.0; }

}  // namespace

ArrayConfig ArrayConfig::ula(int n_antennas, double spacing, double wavelength) {
  ArrayConfig cfg;
  cfg.n_antennas = n_antennas;
  cfg.wavelength = wavelength;
  cfg.nominal_spacing = spacing;
  cfg.positions = RVector(std::max(n_antennas, 0));
  for (int n = 0; n < n_antennas; ++n) cfg.positions(n) = n * spacing * wavelength;
  cfg.validate();
  return cfg;
}

void ArrayConfig::validate() const {
  if (n_antennas < 2) throw std::invalid_argument("array needs at least 2 antennas");
  if (!(wavelength > 0.0)) throw std::invalid_argument("wavelength must be positive");
  if (positions.size() != n_antennas)
    throw std::invalid_argument("position vector length differs from n_antennas");
  if (positions(0) != 0.0) throw std::invalid_argument("antenna 0 must sit at the origin");
  for (int n = 1; n < n_antennas; ++n)
    if (!(positions(n) > positions(n - 1)))
      throw std::invalid_argument("antenna positions must be strictly increasing");
}

void ImperfectionCaps::validate() const {
  const double vals[] = {max_pos_std, max_gain_std, max_phase_std,
                         coupling_base, nonlinear_strength, imperfect_factor};
  for (double v : vals)
    if (!(v >= 0.0) || !std::isfinite(v))
      throw std::invalid_argument("imperfection caps must be finite and nonnegative");
  if (coupling_base >= 1.0) throw std::invalid_argument("coupling base must be < 1");
  if (imperfect_factor * coupling_base >= 1.0)
    throw std::invalid_argument("scaled coupling base must be < 1");
}

std::string_view stage_name(CurriculumStage s) {
  return kStageNames.at(static_cast<size_t>(s));
}

CurriculumStage stage_from_name(std::string_view name) {
  for (int i = 0; i < kNumStages; ++i)
    if (kStageNames[static_cast<size_t>(i)] == name) return static_cast<CurriculumStage>(i);
  throw std::invalid_argument("unknown curriculum stage: " + std::string(name));
}

CurriculumStage stage_from_index(int index) {
  if (index < 0 || index >= kNumStages)
    throw std::invalid_argument("curriculum stage index out of range: " + std::to_string(index));
  return static_cast<CurriculumStage>(index);
}

CurriculumStage curriculum_stage_for(std::int64_t step_index) {
  if (step_index < 0) throw std::invalid_argument("step index must be nonnegative");
  return static_cast<CurriculumStage>(step_index % kNumStages);
}

EffectFlags EffectFlags::for_stage(CurriculumStage s) {
  EffectFlags f;
  switch (s) {
    case CurriculumStage::Perfect: break;
    case CurriculumStage::PositionPerturbation: f.position = true; break;
    case CurriculumStage::InconsistentGains: f.gain = true; break;
    case CurriculumStage::InconsistentPhases: f.phase = true; break;
    case CurriculumStage::MutualCoupling: f.coupling = true; break;
    case CurriculumStage::Nonlinear: f.nonlinear = true; break;
    case CurriculumStage::AllEffects:
      f = {true, true, true, true, true};
      break;
    default: throw std::invalid_argument("invalid curriculum stage");
  }
  return f;
}

ImperfectionRealization ImperfectionRealization::identity(int n_antennas) {
  ImperfectionRealization r;
  r.pos_offsets = RVector::Zero(n_antennas);
  r.gains = RVector::Ones(n_antennas);
  r.phases = RVector::Zero(n_antennas);
  r.coupling = CMatrix::Identity(n_antennas, n_antennas);
  r.nonlinear_sigma = 0.0;
  return r;
}

bool ImperfectionRealization::same_values(const ImperfectionRealization& o) const {
  return pos_offsets == o.pos_offsets && gains == o.gains && phases == o.phases &&
         coupling == o.coupling && nonlinear_sigma == o.nonlinear_sigma;
}

ImperfectionRealization sample_imperfections(int n_antennas, const ImperfectionCaps& caps,
                                             CurriculumStage stage, std::uint64_t rng_seed) {
  caps.validate();
  if (n_antennas < 2) throw std::invalid_argument("array needs at least 2 antennas");
  const EffectFlags flags = EffectFlags::for_stage(stage);
  const double xi = caps.imperfect_factor;

  ImperfectionRealization r = ImperfectionRealization::identity(n_antennas);
  r.flags = flags;
  Rng rng(rng_seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  if (flags.position) {
    const double sd = unit(rng) * xi * caps.max_pos_std;
    for (int n = 1; n < n_antennas; ++n) {
      const double z = normal(rng);
      r.pos_offsets(n) = sd > 0.0 ? sd * z : 0.0;
    }
  }
  if (flags.gain) {
    const double sd = unit(rng) * xi * caps.max_gain_std;
    if (sd > 0.0) {
      for (int n = 0; n < n_antennas; ++n) {
        double g = 0.0;
        do {
          g = 1.0 + sd * normal(rng);
        } while (g <= kMinGain);
        r.gains(n) = g;
      }
    }
  }
  if (flags.phase) {
    const double sd = unit(rng) * xi * caps.max_phase_std;
    for (int n = 1; n < n_antennas; ++n) {
      const double z = normal(rng);
      r.phases(n) = sd > 0.0 ? sd * z : 0.0;
    }
  }
  if (flags.coupling) {
    const double base = xi * caps.coupling_base;
    for (int n = 0; n < n_antennas; ++n) {
      for (int m = 0; m < n_antennas; ++m) {
        if (n == m) continue;
        const double bound = std::pow(base, std::abs(n - m));
        const double mag = unit(rng) * bound;
        const double psi = 2.0 * std::numbers::pi * unit(rng);
        r.coupling(n, m) = mag > 0.0 ? std::polar(mag, psi) : cplx(0.0, 0.0);
      }
    }
  }
  if (flags.nonlinear) r.nonlinear_sigma = xi * caps.nonlinear_strength;
  return r;
}

CVector apply_nonlinearity(const CVector& x, double sigma) {
  if (sigma < 0.0) throw std::invalid_argument("nonlinearity strength must be nonnegative");
  if (sigma == 0.0) return x;
  CVector out(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i)
    out(i) = cplx(std::tanh(sigma * x(i).real()), std::tanh(sigma * x(i).imag()));
  return out;
}

double snr_to_noise_std(double snr_db, const SourceSet& sources) {
  if (sources.amplitudes.size() == 0) throw std::invalid_argument("empty source set");
  if (std::isnan(snr_db)) throw std::invalid_argument("SNR is NaN");
  const double power = sources.amplitudes.squaredNorm() / static_cast<double>(sources.amplitudes.size());
  return std::sqrt(power / std::pow(10.0, snr_db / 10.0));
}

CVector array_response(const ArrayConfig& array, const ImperfectionRealization& real,
                       const SourceSet& sources) {
  const int n_ant = array.n_antennas;
  if (real.pos_offsets.size() != n_ant || real.gains.size() != n_ant ||
      real.phases.size() != n_ant || real.coupling.rows() != n_ant ||
      real.coupling.cols() != n_ant)
    throw std::invalid_argument("realization size does not match the array");
  if (sources.doas_deg.size() != sources.amplitudes.size() || sources.k() < 1)
    throw std::invalid_argument("malformed source set");

  CVector x = CVector::Zero(n_ant);
  for (int n = 0; n < n_ant; ++n) {
    const double pos = array.positions(n) + real.pos_offsets(n);
    const cplx channel = real.gains(n) * std::polar(1.0, real.phases(n));
    cplx acc = 0.0;
    for (int k = 0; k < sources.k(); ++k) {
      const double arg = 2.0 * std::numbers::pi * pos / array.wavelength *
                         std::sin(deg2rad(sources.doas_deg(k)));
      acc += sources.amplitudes(k) * channel * std::polar(1.0, arg);
    }
    x(n) = acc;
  }

  CVector coupled = x;
  for (int n = 0; n < n_ant; ++n)
    for (int m = 0; m < n_ant; ++m)
      if (m != n) coupled(n) += real.coupling(n, m) * x(m);

  return apply_nonlinearity(coupled, real.nonlinear_sigma);
}

Snapshot synthesize_snapshot(const ArrayConfig& array, const ImperfectionRealization& real,
                             const SourceSet& sources, double snr_db, std::uint64_t rng_seed) {
  Snapshot snap;
  snap.received = array_response(array, real, sources);
  snap.truth = sources;
  snap.snr_db = snr_db;

  // snr_db = +inf gives a noiseless snapshot.
  const double sigma_w = snr_to_noise_std(snr_db, sources);
  if (sigma_w > 0.0) {
    Rng rng(rng_seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    const double s = sigma_w / std::numbers::sqrt2;
    for (Eigen::Index n = 0; n < snap.received.size(); ++n) {
      const double re = normal(rng);
      const double im = normal(rng);
      snap.received(n) += cplx(s * re, s * im);
    }
  }
  return snap;
}

void DoaPolicy::validate() const {
  if (k < 1) throw std::invalid_argument("need at least one source");
  if (!(hi_deg > lo_deg) || lo_deg < -90.0 || hi_deg > 90.0)
    throw std::invalid_argument("DOA range must be a nonempty subrange of [-90, 90]");
  if (min_separation_deg < 0.0) throw std::invalid_argument("negative DOA separation");
  if ((k - 1) * min_separation_deg >= hi_deg - lo_deg)
    throw std::invalid_argument("DOA separation constraint is infeasible for this range");
}

SourceSet sample_sources(const DoaPolicy& policy, std::uint64_t rng_seed) {
  policy.validate();
  Rng rng(rng_seed);
  std::uniform_real_distribution<double> angle(policy.lo_deg, policy.hi_deg);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);

  SourceSet s;
  s.doas_deg = RVector(policy.k);
  for (int attempt = 0; attempt < kMaxSourceDraws; ++attempt) {
    for (int k = 0; k < policy.k; ++k) {
      double a = angle(rng);
      while (a <= policy.lo_deg) a = angle(rng);  // open interval
      s.doas_deg(k) = a;
    }
    std::sort(s.doas_deg.begin(), s.doas_deg.end());
    bool ok = true;
    for (int k = 1; k < policy.k; ++k)
      if (s.doas_deg(k) - s.doas_deg(k - 1) < policy.min_separation_deg) ok = false;
    if (!ok) continue;
    s.amplitudes = CVector(policy.k);
    for (int k = 0; k < policy.k; ++k) s.amplitudes(k) = std::polar(1.0, phase(rng));
    return s;
  }
  throw std::invalid_argument("could not draw DOAs satisfying the separation constraint");
}

Snapshot generate_sample(const DatasetSpec& spec, std::int64_t index) {
  if (spec.stage_schedule.empty()) throw std::invalid_argument("empty stage schedule");
  if (!(spec.snr_max_db >= spec.snr_min_db)) throw std::invalid_argument("empty SNR range");
  const auto i = static_cast<std::uint64_t>(index);
  const CurriculumStage stage =
      spec.stage_schedule[i % spec.stage_schedule.size()];

  const SourceSet sources = sample_sources(spec.doa, derive_seed(spec.seed, SeedStream::Sources, i));
  Rng snr_rng(derive_seed(spec.seed, SeedStream::Snr, i));
  const double snr = spec.snr_min_db == spec.snr_max_db
                         ? spec.snr_min_db
                         : std::uniform_real_distribution<double>(spec.snr_min_db, spec.snr_max_db)(snr_rng);
  const ImperfectionRealization real = sample_imperfections(
      spec.array.n_antennas, spec.caps, stage, derive_seed(spec.seed, SeedStream::Imperfections, i));
  Snapshot snap = synthesize_snapshot(spec.array, real, sources, snr,
                                      derive_seed(spec.seed, SeedStream::Noise, i));
  snap.realization_id = i;
  return snap;
}

std::vector<Snapshot> generate_dataset(const DatasetSpec& spec) {
  if (spec.n_samples < 1) throw std::invalid_argument("n_samples must be >= 1");
  spec.array.validate();
  spec.caps.validate();
  spec.doa.validate();
  std::vector<Snapshot> out;
  out.reserve(static_cast<size_t>(spec.n_samples));
  for (std::int64_t i = 0; i < spec.n_samples; ++i) out.push_back(generate_sample(spec, i));
  return out;
}

}  // namespace sdoa
