#pragma once

// Stationary potential models normalized to ess sup V = 0 and
// ess inf V = -mbar.  Three variants:
//   - periodic analytic cosine V(y) = -(mbar/2)(1 - cos 2 pi y),
//   - random phase: a periodic base shifted by a seeded uniform phase,
//   - block random: one smooth bump per unit cell, i.i.d. seeded depths.
// Models are immutable; seeded variants denote one fixed realization, so
// eval(y) is deterministic and translation acts on the seed/phase.

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "hjhom/common.hpp"

namespace hjhom {

struct PotentialPath {
  Interval window;
  double h = 0.0;
  std::vector<double> values;
  uint64_t seed = 0;
  double mbar = 0.0;

  double value_at(double y) const;  // linear interpolation
  double min_value() const;
  double max_value() const;
};

struct ExpectedValue {
  double value = 0.0;
  double std_error = 0.0;  // 0 for periodic models
};

struct MollifyResult {
  PotentialPath path;
  double shift = 0.0;     // amount subtracted to restore sup = 0
  double sup_diff = 0.0;  // ||V_eps - V||_inf before the shift
};

class PotentialModel;
using PotentialModelPtr = std::shared_ptr<const PotentialModel>;

class PotentialModel {
 public:
  enum class Variant { PeriodicAnalytic, RandomPhase, BlockRandom };

  static PotentialModelPtr cosine(double mbar);
  static PotentialModelPtr random_phase_cosine(double mbar, uint64_t seed);
  static PotentialModelPtr block_random(double depth_lo, double depth_hi,
                                        uint64_t seed);
  static PotentialModelPtr from_json(const std::string& text);
  std::string to_json() const;

  Variant variant() const { return variant_; }
  double oscillation() const { return mbar_; }
  bool periodic() const { return variant_ != Variant::BlockRandom; }
  double period() const { return 1.0; }
  uint64_t seed() const { return seed_; }

  // Pointwise evaluation of the fixed realization; always in [-mbar, 0].
  double eval(double y) const;

  // V(-y) as a model (same law for every variant here).
  PotentialModelPtr reflected() const;

  // Deterministic sampled path on the window; validates that the window
  // realizes the full oscillation range within range_tol.
  PotentialPath sample_path(uint64_t seed, Interval window, double h,
                            double range_tol = 0.02) const;

  // E[g(V(0))].  Periodic: Gauss-Legendre over one period, split at the
  // given y-cuts (and at nothing else).  BlockRandom: average of per-cell
  // integrals over `cells` unit cells with a reported standard error.
  ExpectedValue expected_functional(const std::function<double(double)>& g,
                                    const std::vector<double>& y_cuts = {},
                                    int cells = 1000) const;

  // Ordered transversal crossings of V = c inside the window, bisected to
  // high precision on the actual model (not a sampled path).
  std::vector<double> level_crossings(Interval window, double c) const;

  // Local extrema locations of V inside the window (for tangential-touch
  // detection).  Returned with their values.
  struct Extremum {
    double y;
    double value;
    bool is_max;
  };
  std::vector<Extremum> extrema(Interval window) const;

  // Exact range of V over [a, b].
  RangeExtrema range_on(double a, double b) const;

 private:
  PotentialModel() = default;

  Variant variant_ = Variant::PeriodicAnalytic;
  double mbar_ = 1.0;
  double depth_lo_ = 0.0;  // BlockRandom depth distribution support
  double depth_hi_ = 1.0;
  uint64_t seed_ = 0;
  double phase_ = 0.0;  // RandomPhase realization
  bool mirrored_ = false;
};

// Path-level helpers mandated by the interface: crossings from samples and
// Gaussian mollification.
std::vector<double> path_level_crossings(const PotentialPath& path, double c);
MollifyResult mollify(const PotentialPath& path, double eps);

// (H4) surrogate: all crossings of the level pairwise separated by more than
// 10 h (and finitely many).
bool crossings_well_separated(const std::vector<double>& crossings, double h);

}  // namespace hjhom
