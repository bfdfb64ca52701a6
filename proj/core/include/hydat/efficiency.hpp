#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hydat/datastore.hpp"

namespace hydat {

/// MW produced per (cfs * ft) at unit efficiency: rho * g with the US flow
/// and length conversions folded in (the 1/11.81 kW rule).
inline constexpr double kMwPerCfsFt = 8.4674e-5;
inline constexpr double kMaxPlausibleEfficiency = 1.05;
inline constexpr double kDefaultEfficiencyThreshold = 0.90;
inline constexpr double kHeadBucketWidthFt = 5.0;

/// eta = P / (K Q H). Throws DomainError for nonpositive flow or head and
/// DataQualityError above 1.05. Values in (1, 1.05] are returned; callers
/// flag them with exceeds_unity().
double compute_efficiency(double power_mw, double flow_cfs, double head_ft);
inline bool exceeds_unity(double efficiency) noexcept { return efficiency > 1.0; }

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;

  double operator()(double x) const noexcept { return slope * x + intercept; }
  /// x such that fit(x) == y. Requires slope != 0.
  double inverse(double y) const;
};

/// Ordinary least squares y = slope * x + intercept. Throws
/// InsufficientDataError below two points and SingularityError when all x
/// coincide.
LinearFit fit_ols(std::span<const double> x, std::span<const double> y);

struct FlowBand {
  double low_cfs = 0.0;
  double high_cfs = 0.0;
};

/// One unit at one head condition. `points` mixes raw and regression-estimated
/// points, strictly ascending in flow; estimated points lie outside the raw
/// flow range.
struct EfficiencyCurve {
  std::string unit_id;
  double head_ft = 0.0;
  std::vector<EfficiencyPoint> points;
  LinearFit regression;
  double threshold = kDefaultEfficiencyThreshold;
  std::optional<FlowBand> band;
  std::size_t dropped_observations = 0;
  std::size_t flagged_observations = 0;

  double raw_flow_min() const;
  double raw_flow_max() const;
  /// Linear interpolation, clamped to the end points.
  double efficiency_at(double flow_cfs) const;
};

struct Observation {
  double flow_cfs = 0.0;
  double head_ft = 0.0;
  double power_mw = 0.0;
};

struct CurveOptions {
  double threshold = kDefaultEfficiencyThreshold;
  /// Raw observations are averaged into at most this many equal-width flow bins.
  std::size_t max_raw_points = 40;
  /// Estimated points span [lo, hi] x (max observed flow) in `estimate_steps` steps.
  double estimate_lo = 0.10;
  double estimate_hi = 1.10;
  std::size_t estimate_steps = 20;
};

/// Needs at least five usable observations (InsufficientDataError otherwise).
/// The curve's head is the median observed head.
EfficiencyCurve build_curve(const std::string& unit_id, const std::vector<Observation>& observations,
                            const CurveOptions& options = {});

/// One curve per head bucket of `bucket_width_ft`; buckets with fewer than
/// five observations are skipped. Ordered by head.
std::vector<EfficiencyCurve> build_curve_family(const std::string& unit_id,
                                                const std::vector<Observation>& observations,
                                                const CurveOptions& options = {},
                                                double bucket_width_ft = kHeadBucketWidthFt);

/// Smallest and largest flow whose linearly interpolated efficiency reaches
/// the threshold; nullopt when no point qualifies.
std::optional<FlowBand> efficient_band(std::span<const EfficiencyPoint> points, double threshold);
inline std::optional<FlowBand> efficient_band(const EfficiencyCurve& curve, double threshold) {
  return efficient_band(curve.points, threshold);
}

/// Rebuilds a curve from stored points at one head; the regression is refit
/// on the raw points so it matches build_curve.
EfficiencyCurve curve_from_points(const std::string& unit_id, std::vector<EfficiencyPoint> points,
                                  double threshold = kDefaultEfficiencyThreshold);

/// Stored curves of a unit grouped by head, ascending.
std::vector<EfficiencyCurve> load_curves(const Store& store, const std::string& unit_id,
                                         double threshold = kDefaultEfficiencyThreshold);

/// The curve whose head is closest to `head_ft`.
const EfficiencyCurve* nearest_head(const std::vector<EfficiencyCurve>& curves, double head_ft);

/// Per-unit (flow, head, power) observations. A unit's flow is the plant's
/// turbine flow (flow minus spill) split in proportion to unit output.
std::vector<Observation> unit_observations(const Store& store, const std::string& unit_id);

std::string curve_to_svg(const EfficiencyCurve& curve);

}  // namespace hydat
