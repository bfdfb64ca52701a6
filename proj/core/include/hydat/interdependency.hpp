#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hydat/datastore.hpp"
#include "hydat/hydrology.hpp"

namespace hydat {

inline constexpr std::size_t kDefaultMaxLagHours = 12;
inline constexpr std::size_t kMinLagOverlap = 24;
inline constexpr std::size_t kMinFitOverlap = 48;

struct TimedValue {
  Timestamp t;
  double value = 0.0;
};
using Series = std::vector<TimedValue>;

/// Non-null values of one PlantSample field, in input order.
Series flow_series(const std::vector<PlantSample>& samples);
Series mw_series(const std::vector<PlantSample>& samples);
Series head_series(const std::vector<PlantSample>& samples);

/// Pearson product-moment coefficient. Throws ValidationError on length
/// mismatch or fewer than 3 points, DomainError when either side is constant.
double pearson(std::span<const double> x, std::span<const double> y);

/// Positive lag k pairs upstream(t) with downstream(t + k hours).
struct LagProfile {
  std::string upstream;
  std::string downstream;
  Season season = Season::winter;
  std::vector<double> correlations;  // index = lag in hours
  std::vector<std::size_t> overlap;  // pairs used per lag
  std::size_t best_lag = 0;

  double best_correlation() const { return correlations.at(best_lag); }
};

/// Correlates upstream(t) with downstream(t + k) for k in [0, max_lag] using
/// only pairs whose both ends fall in `season`. Ties go to the smaller lag.
/// Throws InsufficientDataError when any lag has fewer than 24 pairs.
LagProfile lag_scan(const Series& upstream, const Series& downstream, std::size_t max_lag, Season season);

struct RegressionTerm {
  double estimate = 0.0;
  double std_error = 0.0;
};

/// downstream_mw(t + lag) = intercept + b_mw * upstream_mw(t) + b_head * upstream_head(t)
struct CascadeLink {
  std::string upstream;
  std::string downstream;
  std::optional<Season> season;
  std::size_t lag_hours = 0;
  RegressionTerm intercept;
  RegressionTerm upstream_mw;
  RegressionTerm upstream_head;
  bool head_dropped = false;  // head constant over the sample, coefficient fixed at 0
  double r_squared = 0.0;
  std::size_t samples = 0;

  double predict(double up_mw, double up_head) const {
    return intercept.estimate + upstream_mw.estimate * up_mw + upstream_head.estimate * up_head;
  }
};

/// Shifts the downstream series by `lag` and fits the link by least squares.
/// With a season, only pairs whose both ends fall in it are used. Throws
/// InsufficientDataError below 48 aligned pairs and SingularityError for a
/// constant or collinear upstream output.
CascadeLink align_and_fit(const std::vector<PlantSample>& upstream, const std::vector<PlantSample>& downstream,
                          std::size_t lag, std::optional<Season> season = std::nullopt);

struct HeadBucket {
  double low_ft = 0.0;   // inclusive
  double high_ft = 0.0;  // exclusive
};

/// Buckets of `width_ft` centred on each head.
std::vector<HeadBucket> buckets_around(std::span<const double> centres_ft, double width_ft);

struct BucketSummary {
  HeadBucket bucket;
  std::size_t samples = 0;
  double intercept = 0.0;
  double slope = 0.0;
  double r_squared = 0.0;
  double mean_upstream_mw = 0.0;
  double mean_downstream_mw = 0.0;
};

struct HeadComparison {
  std::vector<BucketSummary> buckets;
  std::vector<std::string> warnings;
};

/// One downstream-on-upstream MW regression per upstream head bucket.
/// Buckets under 24 aligned samples are dropped with a warning; fewer than
/// two buckets (given or surviving) is an InsufficientDataError.
HeadComparison head_partition_compare(const std::vector<PlantSample>& upstream,
                                      const std::vector<PlantSample>& downstream, std::size_t lag,
                                      const std::vector<HeadBucket>& buckets,
                                      std::optional<Season> season = std::nullopt);

}  // namespace hydat
