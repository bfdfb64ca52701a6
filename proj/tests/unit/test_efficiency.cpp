#include <gtest/gtest.h>

#include <cmath>

#include "hydat/efficiency.hpp"
#include "hydat/error.hpp"
#include "hydat/random.hpp"

namespace hydat {
namespace {

// rho * g * (m^3/s per cfs) * (m per ft), in MW.
double dimensional_k() {
  const double rho = 1000.0, g = 9.81, cfs = 0.0283168, ft = 0.3048;
  return rho * g * cfs * ft * 1e-6;
}

// Normal equations [n sx; sx sxx] [a; b] = [sy; sxy], solved in long double.
LinearFit oracle_ols(const std::vector<double>& x, const std::vector<double>& y) {
  long double n = x.size(), sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i], sy += y[i], sxx += (long double)x[i] * x[i], sxy += (long double)x[i] * y[i];
  }
  const long double det = n * sxx - sx * sx;
  return {static_cast<double>((n * sxy - sx * sy) / det), static_cast<double>((sxx * sy - sx * sxy) / det)};
}

TEST(ComputeEfficiency, Examples) {
  EXPECT_NEAR(compute_efficiency(8.4674, 1000, 100), 1.0, 1e-12);
  EXPECT_NEAR(compute_efficiency(4.2337, 1000, 100), 0.5, 1e-12);
  EXPECT_THROW(compute_efficiency(1, 0, 100), DomainError);
  EXPECT_THROW(compute_efficiency(1, 10, -1), DomainError);
}

TEST(ComputeEfficiency, ConstantAgreesWithDimensionalOracle) {
  char a[32], b[32];
  std::snprintf(a, sizeof a, "%.3e", dimensional_k());
  std::snprintf(b, sizeof b, "%.3e", kMwPerCfsFt);
  EXPECT_STREQ(a, b);
  EXPECT_NEAR(compute_efficiency(dimensional_k() * 1000 * 100, 1000, 100), 1.0, 1e-4);
}

TEST(ComputeEfficiency, UnityBand) {
  const double p = 1.03 * kMwPerCfsFt * 500 * 200;
  const double eta = compute_efficiency(p, 500, 200);
  EXPECT_TRUE(exceeds_unity(eta));
  EXPECT_THROW(compute_efficiency(1.06 * kMwPerCfsFt * 500 * 200, 500, 200), DataQualityError);
  EXPECT_FALSE(exceeds_unity(0.99));
}

TEST(Property, EfficiencyRoundTripAndHomogeneity) {
  Rng rng(31);
  for (int i = 0; i < 1000; ++i) {
    const double eta = rng.uniform(0.05, 1.05), q = rng.uniform(1, 50000), h = rng.uniform(5, 1500);
    const double p = kMwPerCfsFt * eta * q * h;
    EXPECT_NEAR(compute_efficiency(p, q, h), eta, 1e-12);
    const double c = rng.uniform(0.1, 0.9);
    EXPECT_NEAR(compute_efficiency(c * p, q, h), c * eta, 1e-12);
    EXPECT_NEAR(compute_efficiency(c * p, q / c, h), c * c * eta, 1e-12);
  }
}

TEST(FitOls, Examples) {
  const std::vector<double> x{0, 1, 2};
  auto f = fit_ols(x, std::vector<double>{0, 1, 2});
  EXPECT_NEAR(f.slope, 1.0, 1e-15);
  EXPECT_NEAR(f.intercept, 0.0, 1e-15);
  f = fit_ols(x, std::vector<double>{1, 3, 5});
  EXPECT_NEAR(f.slope, 2.0, 1e-15);
  EXPECT_NEAR(f.intercept, 1.0, 1e-15);
  EXPECT_NEAR(f.inverse(7.0), 3.0, 1e-15);
}

TEST(FitOls, Errors) {
  EXPECT_THROW(fit_ols(std::vector<double>{1}, std::vector<double>{1}), InsufficientDataError);
  EXPECT_THROW(fit_ols(std::vector<double>{2, 2, 2}, std::vector<double>{1, 2, 3}), SingularityError);
  EXPECT_THROW(fit_ols(std::vector<double>{1, 2}, std::vector<double>{1}), ValidationError);
  EXPECT_THROW((LinearFit{0.0, 1.0}).inverse(2.0), SingularityError);
}

TEST(Property, OlsMatchesNormalEquationsAndResidualsAreOrthogonal) {
  Rng rng(50);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 2 + rng.index(60);
    std::vector<double> x(n), y(n);
    const double a = rng.uniform(-5, 5), b = rng.uniform(-5, 5), spread = rng.uniform(0.1, 20);
    for (std::size_t i = 0; i < n; ++i) {
      x[i] = rng.uniform(-spread, spread);
      y[i] = a + b * x[i] + rng.gaussian(0, 1);
    }
    const auto got = fit_ols(x, y);
    const auto want = oracle_ols(x, y);
    EXPECT_NEAR(got.slope, want.slope, 1e-10);
    EXPECT_NEAR(got.intercept, want.intercept, 1e-10);
    double r_sum = 0, rx_sum = 0, scale = 0, xscale = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const double r = y[i] - got(x[i]);
      r_sum += r;
      rx_sum += r * x[i];
      scale += std::abs(y[i]);
      xscale += std::abs(y[i] * x[i]);
    }
    EXPECT_LE(std::abs(r_sum), 1e-9 * std::max(1.0, scale));
    EXPECT_LE(std::abs(rx_sum), 1e-9 * std::max(1.0, xscale));
  }
}

std::vector<Observation> observations(double (*eta)(double), double q_lo, double q_hi, double head, std::size_t n) {
  std::vector<Observation> out;
  for (std::size_t i = 0; i < n; ++i) {
    const double q = q_lo + (q_hi - q_lo) * static_cast<double>(i) / static_cast<double>(n - 1);
    out.push_back({q, head, kMwPerCfsFt * eta(q) * q * head});
  }
  return out;
}

double flat_eta(double) { return 0.9; }
double parabola_eta(double q) {
  const double u = (q - 550.0) / 450.0;
  return 0.95 - 0.3 * u * u;
}

TEST(BuildCurve, ConstantEfficiencyBandSpansEverything) {
  const auto c = build_curve("u", observations(flat_eta, 200, 1000, 300, 400));
  ASSERT_TRUE(c.band);
  EXPECT_DOUBLE_EQ(c.band->low_cfs, c.points.front().flow_cfs);
  EXPECT_DOUBLE_EQ(c.band->high_cfs, c.points.back().flow_cfs);
  EXPECT_NEAR(c.points.front().flow_cfs, 100.0, 1e-9);  // 10 % of the largest observed flow
  EXPECT_NEAR(c.points.back().flow_cfs, 1100.0, 1e-9);
  EXPECT_DOUBLE_EQ(c.head_ft, 300.0);
}

TEST(BuildCurve, ParabolaBandMatchesTheQuadraticRoots) {
  const auto c = build_curve("u", observations(parabola_eta, 100, 1000, 300, 2000));
  // 0.95 - 0.3 u^2 >= 0.9  <=>  |u| <= sqrt(0.05 / 0.3)
  const double half = 450.0 * std::sqrt(0.05 / 0.3);
  ASSERT_TRUE(c.band);
  EXPECT_NEAR(c.band->low_cfs, 550.0 - half, 3.0);
  EXPECT_NEAR(c.band->high_cfs, 550.0 + half, 3.0);
}

TEST(BuildCurve, TooFewObservations) {
  EXPECT_THROW(build_curve("u", observations(flat_eta, 100, 300, 300, 3)), InsufficientDataError);
  auto obs = observations(flat_eta, 100, 300, 300, 4);
  obs.push_back({0.0, 300, 1.0});
  EXPECT_THROW(build_curve("u", obs), InsufficientDataError);
}

TEST(BuildCurve, MedianHeadAndFlags) {
  std::vector<Observation> obs;
  for (int i = 0; i < 9; ++i) obs.push_back({100.0 + 10 * i, 290.0 + 5 * i, kMwPerCfsFt * 0.9 * (100.0 + 10 * i) * 300});
  obs.push_back({150, 300, kMwPerCfsFt * 1.02 * 150 * 300});
  obs.push_back({150, 300, kMwPerCfsFt * 1.2 * 150 * 300});
  const auto c = build_curve("u", obs);
  EXPECT_DOUBLE_EQ(c.head_ft, 307.5);
  EXPECT_EQ(c.flagged_observations, 1u);
  EXPECT_EQ(c.dropped_observations, 1u);
}

TEST(Property, CurveStructure) {
  Rng rng(77);
  for (int trial = 0; trial < 60; ++trial) {
    std::vector<Observation> obs;
    const double peak = rng.uniform(0.85, 0.97), q0 = rng.uniform(300, 3000), width = rng.uniform(0.2, 1.0) * q0;
    const double head = rng.uniform(50, 500);
    const std::size_t n = 5 + rng.index(300);
    for (std::size_t i = 0; i < n; ++i) {
      const double q = rng.uniform(q0 - width, q0 + width);
      const double u = (q - q0) / width;
      const double eta = std::max(0.2, peak - 0.3 * u * u + rng.gaussian(0, 0.005));
      obs.push_back({q, head + rng.gaussian(0, 1), kMwPerCfsFt * eta * q * head});
    }
    const auto c = build_curve("u", obs);
    for (std::size_t i = 1; i < c.points.size(); ++i) ASSERT_LT(c.points[i - 1].flow_cfs, c.points[i].flow_cfs);
    for (const auto& p : c.points) {
      if (p.estimated) { EXPECT_TRUE(p.flow_cfs < c.raw_flow_min() || p.flow_cfs > c.raw_flow_max()); }
      EXPECT_GT(p.efficiency, 0.0);
    }
    if (c.band) { EXPECT_LE(c.band->low_cfs, c.band->high_cfs); }
    // Lowering the threshold never narrows the band.
    std::optional<FlowBand> prev;
    for (double t = 1.0; t >= 0.0; t -= 0.05) {
      const auto b = efficient_band(c, t);
      if (prev) {
        ASSERT_TRUE(b);
        EXPECT_LE(b->low_cfs, prev->low_cfs);
        EXPECT_GE(b->high_cfs, prev->high_cfs);
      }
      if (b) prev = b;
    }
  }
}

std::vector<EfficiencyPoint> pts(std::initializer_list<std::pair<double, double>> qe) {
  std::vector<EfficiencyPoint> out;
  for (auto [q, e] : qe) out.push_back({"u", q, 300, 0, e, false});
  return out;
}

TEST(EfficientBand, Examples) {
  const auto curve = pts({{100, 0.8}, {200, 0.92}, {300, 0.91}, {400, 0.85}});
  auto all = efficient_band(curve, 0.0);
  ASSERT_TRUE(all);
  EXPECT_EQ(all->low_cfs, 100);
  EXPECT_EQ(all->high_cfs, 400);
  EXPECT_FALSE(efficient_band(pts({{100, 0.8}, {200, 0.95}, {300, 0.9}}), 1.01));
  const auto b = efficient_band(curve, 0.9);
  ASSERT_TRUE(b);
  // 0.8 + (q - 100) * 0.12 / 100 = 0.9  and  0.91 - (q - 300) * 0.06 / 100 = 0.9
  EXPECT_NEAR(b->low_cfs, 100.0 + 100.0 * 0.1 / 0.12, 1e-9);
  EXPECT_NEAR(b->high_cfs, 300.0 + 100.0 * 0.01 / 0.06, 1e-9);
}

TEST(CurveFamily, OneCurvePerHeadBucket) {
  std::vector<Observation> obs;
  for (int i = 0; i < 20; ++i) {
    const double q = 100 + 20 * i;
    obs.push_back({q, 301.0, kMwPerCfsFt * 0.9 * q * 301});
    obs.push_back({q, 322.0, kMwPerCfsFt * 0.88 * q * 322});
  }
  obs.push_back({500, 340.0, 10});
  const auto fam = build_curve_family("u", obs);
  ASSERT_EQ(fam.size(), 2u);
  EXPECT_DOUBLE_EQ(fam[0].head_ft, 301.0);
  EXPECT_DOUBLE_EQ(fam[1].head_ft, 322.0);
  EXPECT_EQ(nearest_head(fam, 330.0), &fam[1]);
  EXPECT_EQ(nearest_head(fam, 290.0), &fam[0]);
  EXPECT_EQ(nearest_head({}, 290.0), nullptr);
}

TEST(CurveFamily, StoreRoundTrip) {
  Store store(":memory:");
  store.upsert(std::vector<StaticPlant>{{"P", 45, -120, 1, 300}});
  store.upsert(std::vector<StaticUnit>{{"P", "b", 1, "1", "1-1", 100, {}, {}}});
  const auto built = build_curve("1-1", observations(parabola_eta, 100, 1000, 300, 500));
  store.replace_efficiency("1-1", built.points);
  const auto loaded = load_curves(store, "1-1");
  ASSERT_EQ(loaded.size(), 1u);
  EXPECT_EQ(loaded[0].points, built.points);
  EXPECT_NEAR(loaded[0].regression.slope, built.regression.slope, 1e-12);
  ASSERT_TRUE(loaded[0].band);
  EXPECT_DOUBLE_EQ(loaded[0].band->low_cfs, built.band->low_cfs);
  EXPECT_NE(curve_to_svg(loaded[0]).find("<polyline"), std::string::npos);
}

TEST(UnitObservations, SplitsTurbineFlowByOutput) {
  Store store(":memory:");
  store.upsert(std::vector<StaticPlant>{{"P", 45, -120, 1, 300}});
  store.upsert(std::vector<StaticUnit>{{"P", "b", 1, "1", "1-1", 100, {}, {}}, {"P", "b", 1, "2", "1-2", 100, {}, {}}});
  const auto t = make_timestamp(2020, 1, 1);
  store.upsert(std::vector<PlantSample>{{"P", t, 1100.0, 300.0, 1.0, 100.0, 60.0}});
  store.upsert(std::vector<UnitSample>{{"1-1", t, 45.0}, {"1-2", t, 15.0}});
  const auto obs = unit_observations(store, "1-1");
  ASSERT_EQ(obs.size(), 1u);
  EXPECT_DOUBLE_EQ(obs[0].flow_cfs, 1000.0 * 45.0 / 60.0);
  EXPECT_DOUBLE_EQ(obs[0].power_mw, 45.0);
  EXPECT_THROW(unit_observations(store, "9-9"), NotFoundError);
}

}  // namespace
}  // namespace hydat
