#include "hydat/interdependency.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <unordered_map>

#include "hydat/error.hpp"

namespace hydat {

namespace {

template <typename Field>
Series series_of(const std::vector<PlantSample>& samples, Field field) {
  Series out;
  out.reserve(samples.size());
  for (const auto& s : samples) {
    if (const auto& v = s.*field) out.push_back({s.timestamp, *v});
  }
  return out;
}

using HourIndex = std::unordered_map<long long, double>;

long long hour_key(Timestamp t) { return t.time_since_epoch().count() / 3600; }

HourIndex index_by_hour(const Series& s) {
  HourIndex idx;
  idx.reserve(s.size());
  for (const auto& v : s) idx[hour_key(v.t)] = v.value;
  return idx;
}

bool in_season(Timestamp a, Timestamp b, std::optional<Season> season) {
  return !season || (season_of(a) == *season && season_of(b) == *season);
}

double variance(std::span<const double> v) {
  const double n = static_cast<double>(v.size());
  const double m = std::accumulate(v.begin(), v.end(), 0.0) / n;
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return s / n;
}

bool is_constant(std::span<const double> v) {
  if (v.empty()) return true;
  const double scale = std::max(1.0, std::abs(v.front()));
  return variance(v) <= 1e-20 * scale * scale;
}

struct Aligned {
  std::vector<double> up_mw, up_head, down_mw;
};

Aligned align(const std::vector<PlantSample>& upstream, const std::vector<PlantSample>& downstream,
              std::size_t lag, std::optional<Season> season) {
  HourIndex down = index_by_hour(mw_series(downstream));
  Aligned a;
  for (const auto& s : upstream) {
    if (!s.total_mw || !s.head_ft) continue;
    const Timestamp t2 = s.timestamp + Hours(lag);
    if (!in_season(s.timestamp, t2, season)) continue;
    const auto it = down.find(hour_key(t2));
    if (it == down.end()) continue;
    a.up_mw.push_back(*s.total_mw);
    a.up_head.push_back(*s.head_ft);
    a.down_mw.push_back(it->second);
  }
  return a;
}

struct FitResult {
  Eigen::VectorXd beta;
  Eigen::VectorXd se;
  double r_squared = 0.0;
};

FitResult least_squares(const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
  const auto n = X.rows();
  const auto p = X.cols();
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
  qr.setThreshold(1e-10);
  if (qr.rank() < p) throw SingularityError("regressors are collinear");
  FitResult r;
  r.beta = qr.solve(y);
  const Eigen::VectorXd resid = y - X * r.beta;
  const double rss = resid.squaredNorm();
  const double tss = (y.array() - y.mean()).square().sum();
  if (tss > 0.0) {
    r.r_squared = std::clamp(1.0 - rss / tss, 0.0, 1.0);
  } else {
    r.r_squared = rss <= 1e-18 ? 1.0 : 0.0;
  }
  r.se = Eigen::VectorXd::Zero(p);
  if (n > p) {
    const double sigma2 = rss / static_cast<double>(n - p);
    const Eigen::MatrixXd cov = sigma2 * (X.transpose() * X).inverse();
    for (Eigen::Index i = 0; i < p; ++i) r.se(i) = std::sqrt(std::max(0.0, cov(i, i)));
  }
  return r;
}

}  // namespace

Series flow_series(const std::vector<PlantSample>& samples) { return series_of(samples, &PlantSample::flow_cfs); }
Series mw_series(const std::vector<PlantSample>& samples) { return series_of(samples, &PlantSample::total_mw); }
Series head_series(const std::vector<PlantSample>& samples) { return series_of(samples, &PlantSample::head_ft); }

double pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw ValidationError("pearson: series differ in length");
  if (x.size() < 3) throw ValidationError("pearson needs at least 3 points");
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxx = 0.0, syy = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxx += dx * dx;
    syy += dy * dy;
    sxy += dx * dy;
  }
  if (is_constant(x) || is_constant(y) || sxx == 0.0 || syy == 0.0) {
    throw DomainError("pearson: correlation undefined for a constant series");
  }
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

LagProfile lag_scan(const Series& upstream, const Series& downstream, std::size_t max_lag, Season season) {
  const HourIndex down = index_by_hour(downstream);
  LagProfile profile;
  profile.season = season;
  std::vector<double> xs, ys;
  for (std::size_t k = 0; k <= max_lag; ++k) {
    xs.clear();
    ys.clear();
    for (const auto& u : upstream) {
      const Timestamp t2 = u.t + Hours(k);
      if (season_of(u.t) != season || season_of(t2) != season) continue;
      const auto it = down.find(hour_key(t2));
      if (it == down.end()) continue;
      xs.push_back(u.value);
      ys.push_back(it->second);
    }
    if (xs.size() < kMinLagOverlap) {
      throw InsufficientDataError("lag " + std::to_string(k) + " h has only " + std::to_string(xs.size()) +
                                  " overlapping " + std::string(to_string(season)) + " samples (need 24)");
    }
    profile.correlations.push_back(pearson(xs, ys));
    profile.overlap.push_back(xs.size());
    if (profile.correlations.back() > profile.correlations[profile.best_lag]) profile.best_lag = k;
  }
  return profile;
}

CascadeLink align_and_fit(const std::vector<PlantSample>& upstream, const std::vector<PlantSample>& downstream,
                          std::size_t lag, std::optional<Season> season) {
  const Aligned a = align(upstream, downstream, lag, season);
  if (a.down_mw.size() < kMinFitOverlap) {
    throw InsufficientDataError("only " + std::to_string(a.down_mw.size()) +
                                " aligned samples after shifting (need 48)");
  }
  if (is_constant(a.up_mw)) throw SingularityError("upstream MW is constant; regression is singular");

  CascadeLink link;
  if (!upstream.empty()) link.upstream = upstream.front().project_name;
  if (!downstream.empty()) link.downstream = downstream.front().project_name;
  link.season = season;
  link.lag_hours = lag;
  link.samples = a.down_mw.size();
  link.head_dropped = is_constant(a.up_head);

  const auto n = static_cast<Eigen::Index>(a.down_mw.size());
  const Eigen::Index p = link.head_dropped ? 2 : 3;
  Eigen::MatrixXd X(n, p);
  Eigen::VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    X(i, 0) = 1.0;
    X(i, 1) = a.up_mw[static_cast<std::size_t>(i)];
    if (p == 3) X(i, 2) = a.up_head[static_cast<std::size_t>(i)];
    y(i) = a.down_mw[static_cast<std::size_t>(i)];
  }
  const FitResult fit = least_squares(X, y);
  link.intercept = {fit.beta(0), fit.se(0)};
  link.upstream_mw = {fit.beta(1), fit.se(1)};
  if (p == 3) link.upstream_head = {fit.beta(2), fit.se(2)};
  link.r_squared = fit.r_squared;
  return link;
}

std::vector<HeadBucket> buckets_around(std::span<const double> centres_ft, double width_ft) {
  std::vector<HeadBucket> out;
  for (double c : centres_ft) out.push_back({c - 0.5 * width_ft, c + 0.5 * width_ft});
  return out;
}

HeadComparison head_partition_compare(const std::vector<PlantSample>& upstream,
                                      const std::vector<PlantSample>& downstream, std::size_t lag,
                                      const std::vector<HeadBucket>& buckets, std::optional<Season> season) {
  if (buckets.size() < 2) throw InsufficientDataError("head comparison needs at least two buckets");
  const Aligned a = align(upstream, downstream, lag, season);
  HeadComparison out;
  for (const auto& b : buckets) {
    std::vector<double> x, y;
    for (std::size_t i = 0; i < a.up_head.size(); ++i) {
      if (a.up_head[i] >= b.low_ft && a.up_head[i] < b.high_ft) {
        x.push_back(a.up_mw[i]);
        y.push_back(a.down_mw[i]);
      }
    }
    char label[96];
    std::snprintf(label, sizeof label, "[%.2f, %.2f) ft", b.low_ft, b.high_ft);
    if (x.size() < kMinLagOverlap) {
      out.warnings.push_back(std::string("bucket ") + label + " has " + std::to_string(x.size()) +
                             " samples (< 24); excluded");
      continue;
    }
    if (is_constant(x)) {
      out.warnings.push_back(std::string("bucket ") + label + " has constant upstream MW; excluded");
      continue;
    }
    const auto n = static_cast<Eigen::Index>(x.size());
    Eigen::MatrixXd X(n, 2);
    Eigen::VectorXd Y(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      X(i, 0) = 1.0;
      X(i, 1) = x[static_cast<std::size_t>(i)];
      Y(i) = y[static_cast<std::size_t>(i)];
    }
    const FitResult fit = least_squares(X, Y);
    BucketSummary s;
    s.bucket = b;
    s.samples = x.size();
    s.intercept = fit.beta(0);
    s.slope = fit.beta(1);
    s.r_squared = fit.r_squared;
    s.mean_upstream_mw = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
    s.mean_downstream_mw = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(y.size());
    out.buckets.push_back(s);
  }
  if (out.buckets.size() < 2) {
    throw InsufficientDataError("fewer than two head buckets hold 24 or more samples");
  }
  return out;
}

}  // namespace hydat
