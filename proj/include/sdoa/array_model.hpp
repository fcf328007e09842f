#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "sdoa/numerics.hpp"

namespace sdoa {

/// Linear array geometry. Positions are in units of the wavelength.
struct ArrayConfig {
  int n_antennas = 16;
  double wavelength = 1.0;
  double nominal_spacing = 0.5;
  RVector positions;

  /// Uniform linear array with d_n = n * spacing * wavelength.
  static ArrayConfig ula(int n_antennas, double spacing = 0.5, double wavelength = 1.0);
  void validate() const;
};

/// Upper bounds for the imperfection draws; `imperfect_factor` scales all of
/// them at once.
struct ImperfectionCaps {
  double max_pos_std = 0.15;
  double max_gain_std = 0.5;
  double max_phase_std = 0.2;
  double coupling_base = 0.06;
  double nonlinear_strength = 1.0;
  double imperfect_factor = 1.0;

  static ImperfectionCaps table1() { return {}; }
  ImperfectionCaps with_factor(double xi) const {
    ImperfectionCaps c = *this;
    c.imperfect_factor = xi;
    return c;
  }
  void validate() const;
};

enum class CurriculumStage : int {
  Perfect = 0,
  PositionPerturbation = 1,
  InconsistentGains = 2,
  InconsistentPhases = 3,
  MutualCoupling = 4,
  Nonlinear = 5,
  AllEffects = 6,
};

inline constexpr int kNumStages = 7;

std::string_view stage_name(CurriculumStage s);
CurriculumStage stage_from_name(std::string_view name);
/// Throws std::invalid_argument for indices outside [0, 6].
CurriculumStage stage_from_index(int index);

/// Stage used at training step `step_index`; the seven stages repeat
/// cyclically.
CurriculumStage curriculum_stage_for(std::int64_t step_index);

struct EffectFlags {
  bool position = false;
  bool gain = false;
  bool phase = false;
  bool coupling = false;
  bool nonlinear = false;

  static EffectFlags for_stage(CurriculumStage s);
  bool operator==(const EffectFlags&) const = default;
};

/// One concrete draw of all array imperfections. Antenna 0 is the position
/// and phase reference.
struct ImperfectionRealization {
  RVector pos_offsets;
  RVector gains;
  RVector phases;
  CMatrix coupling;
  double nonlinear_sigma = 0.0;
  EffectFlags flags;

  static ImperfectionRealization identity(int n_antennas);
  /// Compares the numeric content only (flags are ignored).
  bool same_values(const ImperfectionRealization& other) const;
};

struct SourceSet {
  RVector doas_deg;
  CVector amplitudes;

  int k() const { return static_cast<int>(doas_deg.size()); }
};

struct Snapshot {
  CVector received;
  SourceSet truth;
  std::uint64_t realization_id = 0;
  double snr_db = 0.0;
};

/// Draws the effects active in `stage`; the others stay at identity.
ImperfectionRealization sample_imperfections(int n_antennas, const ImperfectionCaps& caps,
                                             CurriculumStage stage,
                                             std::uint64_t rng_seed);

/// Elementwise tanh(sigma * Re x) + j tanh(sigma * Im x); identity for
/// sigma == 0.
CVector apply_nonlinearity(const CVector& x, double sigma);

/// Per-antenna complex noise standard deviation for a target SNR measured
/// against the mean per-source power.
double snr_to_noise_std(double snr_db, const SourceSet& sources);

/// Noise-free array output: gains, phases, positions, coupling and the
/// nonlinearity applied to the source mixture.
CVector array_response(const ArrayConfig& array, const ImperfectionRealization& real,
                       const SourceSet& sources);

Snapshot synthesize_snapshot(const ArrayConfig& array, const ImperfectionRealization& real,
                             const SourceSet& sources, double snr_db,
                             std::uint64_t rng_seed);

/// How ground-truth DOAs are drawn: K angles uniform in (lo, hi) with a
/// minimum pairwise gap, unit-modulus random-phase amplitudes.
struct DoaPolicy {
  int k = 3;
  double min_separation_deg = 10.0;
  double lo_deg = -60.0;
  double hi_deg = 60.0;

  void validate() const;
};

SourceSet sample_sources(const DoaPolicy& policy, std::uint64_t rng_seed);

struct DatasetSpec {
  ArrayConfig array = ArrayConfig::ula(16);
  ImperfectionCaps caps;
  std::vector<CurriculumStage> stage_schedule{CurriculumStage::AllEffects};
  std::int64_t n_samples = 1;
  double snr_min_db = 0.0;
  double snr_max_db = 30.0;
  DoaPolicy doa;
  std::uint64_t seed = 0;
};

/// Deterministic per seed; sample i uses stage_schedule[i % size] and seeds
/// derived from (seed, i), so generation order does not matter.
std::vector<Snapshot> generate_dataset(const DatasetSpec& spec);

/// Sample i of generate_dataset(spec), computed on its own.
Snapshot generate_sample(const DatasetSpec& spec, std::int64_t index);

}  // namespace sdoa
