#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "hydat/error.hpp"
#include "hydat/hydrology.hpp"
#include "hydat/random.hpp"

namespace hydat {
namespace {

// Independent linear-interpolation percentile.
double oracle_percentile(std::vector<double> v, double p) {
  std::sort(v.begin(), v.end());
  const double pos = p / 100.0 * static_cast<double>(v.size() - 1);
  const std::size_t i = static_cast<std::size_t>(pos);
  if (i + 1 >= v.size()) return v.back();
  return v[i] * (1.0 - (pos - static_cast<double>(i))) + v[i + 1] * (pos - static_cast<double>(i));
}

WaterYearClass oracle_class(const std::map<int, double>& means, int year) {
  std::vector<double> v;
  for (const auto& [y, m] : means) v.push_back(m);
  const double lo = oracle_percentile(v, 100.0 / 3.0), hi = oracle_percentile(v, 200.0 / 3.0);
  const double m = means.at(year);
  return m < lo ? WaterYearClass::dry : (m > hi ? WaterYearClass::wet : WaterYearClass::average);
}

std::vector<PlantSample> hourly_years(const std::string& project, const std::map<int, double>& flow_by_year) {
  std::vector<PlantSample> out;
  for (const auto& [year, flow] : flow_by_year) {
    for (auto t = make_timestamp(year, 1, 1); t < make_timestamp(year + 1, 1, 1); t += Hours(1)) {
      out.push_back({project, t, flow, 300.0, 1000.0, 0.0, 100.0});
    }
  }
  return out;
}

TEST(Season, Examples) {
  EXPECT_EQ(season_of(parse_timestamp("2020-01-15T00:00Z")), Season::winter);
  EXPECT_EQ(season_of(parse_timestamp("2020-04-10T00:00Z")), Season::spring);
  EXPECT_EQ(season_of(parse_timestamp("2020-08-01T00:00Z")), Season::summer);
}

TEST(Season, PartitionsTheMonths) {
  std::map<Season, int> count;
  for (unsigned m = 1; m <= 12; ++m) ++count[season_of(make_timestamp(2019, m, 10))];
  EXPECT_EQ(count[Season::winter], 4);
  EXPECT_EQ(count[Season::spring], 4);
  EXPECT_EQ(count[Season::summer], 4);
  // Every hour of a season window maps back to that season.
  for (Season s : kAllSeasons) {
    const auto [a, b] = season_window(2019, s);
    for (auto t = a; t < b; t += Hours(1)) ASSERT_EQ(season_of(t), s);
    EXPECT_NE(season_of(a - Hours(1)), s);
    EXPECT_NE(season_of(b), s);
  }
}

TEST(Season, ParseNames) {
  EXPECT_EQ(parse_season("Winter"), Season::winter);
  EXPECT_EQ(parse_water_year_class("avg"), WaterYearClass::average);
  EXPECT_EQ(parse_water_year_class("AVERAGE"), WaterYearClass::average);
  EXPECT_THROW(parse_season("autumn"), ValidationError);
  EXPECT_THROW(parse_water_year_class("damp"), ValidationError);
}

TEST(Percentile, MatchesOracle) {
  Rng rng(8);
  for (int i = 0; i < 200; ++i) {
    std::vector<double> v(1 + rng.index(30));
    for (auto& x : v) x = rng.uniform(-10, 10);
    const double p = rng.uniform(0, 100);
    EXPECT_NEAR(percentile(v, p), oracle_percentile(v, p), 1e-12);
  }
  EXPECT_THROW(percentile({}, 50), InsufficientDataError);
}

TEST(ClassifyWaterYear, Examples) {
  std::map<int, double> means;
  for (int i = 0; i < 10; ++i) means[2005 + i] = 100.0 + 37.0 * ((i * 7) % 10);
  const auto lowest = std::min_element(means.begin(), means.end(), [](auto& a, auto& b) { return a.second < b.second; });
  const auto highest = std::max_element(means.begin(), means.end(), [](auto& a, auto& b) { return a.second < b.second; });
  EXPECT_EQ(classify_water_year(means, lowest->first), WaterYearClass::dry);
  EXPECT_EQ(classify_water_year(means, highest->first), WaterYearClass::wet);

  std::map<int, double> one_to_ten;
  for (int i = 1; i <= 10; ++i) one_to_ten[2000 + i] = i;
  EXPECT_EQ(oracle_class(one_to_ten, 2005), WaterYearClass::average);
  EXPECT_EQ(classify_water_year(one_to_ten, 2005), WaterYearClass::average);
  for (const auto& [y, m] : one_to_ten) EXPECT_EQ(classify_water_year(one_to_ten, y), oracle_class(one_to_ten, y));
}

TEST(ClassifyWaterYear, Errors) {
  EXPECT_THROW(classify_water_year({{2000, 1.0}, {2001, 2.0}}, 2000), InsufficientDataError);
  EXPECT_THROW(classify_water_year({{2000, 1.0}, {2001, 2.0}, {2002, 3.0}}, 1999), NotFoundError);
}

TEST(ClassifyWaterYear, DegenerateRecordIsAllAverage) {
  std::map<int, double> flat{{2000, 5.0}, {2001, 5.0}, {2002, 5.0}, {2003, 5.0}};
  for (const auto& [y, m] : flat) EXPECT_EQ(classify_water_year(flat, y), WaterYearClass::average);
}

TEST(Property, ClassificationIsMonotone) {
  Rng rng(13);
  auto rank = [](WaterYearClass c) { return c == WaterYearClass::dry ? 0 : (c == WaterYearClass::average ? 1 : 2); };
  for (int trial = 0; trial < 300; ++trial) {
    std::map<int, double> means;
    const int n = 3 + static_cast<int>(rng.index(15));
    for (int i = 0; i < n; ++i) means[1990 + i] = rng.uniform(100, 1000);
    const int year = 1990 + static_cast<int>(rng.index(static_cast<std::size_t>(n)));
    const auto before = classify_water_year(means, year);
    EXPECT_EQ(before, oracle_class(means, year));
    means[year] += rng.uniform(0, 500);
    EXPECT_GE(rank(classify_water_year(means, year)), rank(before));
  }
}

TEST(Property, TercileSplit) {
  Rng rng(17);
  for (int trial = 0; trial < 200; ++trial) {
    std::map<int, double> means;
    const int n = 3 + static_cast<int>(rng.index(40));
    for (int i = 0; i < n; ++i) means[1900 + i] = rng.uniform(0, 1) + i * 1e-9;
    std::map<WaterYearClass, int> count;
    for (const auto& [y, m] : means) ++count[classify_water_year(means, y)];
    const double third = n / 3.0;
    EXPECT_LE(std::abs(count[WaterYearClass::dry] - third), 1.0) << n;
    EXPECT_LE(std::abs(count[WaterYearClass::wet] - third), 1.0) << n;
  }
}

TEST(Scenario, ParseAndFormat) {
  EXPECT_EQ(parse_scenario("dry:summer"), HydroScenario(SyntheticCondition{WaterYearClass::dry, Season::summer}));
  const auto h = parse_scenario("hist:2019-01-01..2019-02-01");
  EXPECT_EQ(h, HydroScenario(HistoricalWindow{make_timestamp(2019, 1, 1), make_timestamp(2019, 2, 1)}));
  EXPECT_EQ(format_scenario(h), "hist:2019-01-01T00:00:00Z..2019-02-01T00:00:00Z");
  EXPECT_EQ(parse_scenario(format_scenario(h)), h);
  EXPECT_EQ(format_scenario(parse_scenario("Wet:Winter")), "wet:winter");
  for (const char* bad : {"dry", "dry:fall", "moist:summer", "hist:2019-01-01", "hist:2019-02-01..2019-01-01"}) {
    EXPECT_THROW(parse_scenario(bad), ValidationError) << bad;
  }
}

TEST(Scenario, HistoricalWindowIsIdentity) {
  const HistoricalWindow w{make_timestamp(2019, 1, 1), make_timestamp(2019, 2, 1)};
  EXPECT_EQ(select_scenario_window(w, {}), std::make_pair(w.start, w.end));
  EXPECT_THROW(select_scenario_window(HistoricalWindow{w.end, w.start}, {}), ValidationError);
}

TEST(Scenario, DrySummerPicksTheOnlyDryYear) {
  const std::map<int, double> flows{{2014, 10000.0}, {2015, 5000.0}, {2016, 12000.0}};
  for (const auto& [y, m] : flows) {
    EXPECT_EQ(oracle_class(flows, y) == WaterYearClass::dry, y == 2015);
  }
  const SyntheticCondition dry_summer{WaterYearClass::dry, Season::summer};
  const auto want = std::make_pair(make_timestamp(2015, 7, 1), make_timestamp(2015, 11, 1));
  EXPECT_EQ(select_scenario_window(dry_summer, flows), want);

  Store store(":memory:");
  store.upsert(hourly_years("P", flows));
  EXPECT_EQ(select_scenario_window(dry_summer, store, "P"), want);
  EXPECT_EQ(classify_water_year(store, "P", 2015), WaterYearClass::dry);
}

TEST(Scenario, NoWetYearInAFlatRecord) {
  const std::map<int, double> flat{{2014, 7.0}, {2015, 7.0}, {2016, 7.0}};
  EXPECT_THROW(select_scenario_window(SyntheticCondition{WaterYearClass::wet, Season::winter}, flat), NotFoundError);
  Store store(":memory:");
  store.upsert(hourly_years("P", flat));
  EXPECT_THROW(select_scenario_window(SyntheticCondition{WaterYearClass::wet, Season::winter}, store, "P"),
               NotFoundError);
}

TEST(Scenario, PartialYearsAreIgnoredByTheStore) {
  auto samples = hourly_years("P", {{2013, 9000.0}, {2014, 10000.0}, {2015, 11000.0}});
  // A single day of a very dry 2016 must not become the dry year.
  for (unsigned h = 0; h < 24; ++h) samples.push_back({"P", make_timestamp(2016, 1, 1, h), 100.0, 300.0, 1.0, 0.0, 1.0});
  Store store(":memory:");
  store.upsert(samples);
  const auto means = annual_mean_flows(store.plant_samples("P"), kMinYearCoverage);
  EXPECT_EQ(means.size(), 3u);
  EXPECT_EQ(annual_mean_flows(store.plant_samples("P")).size(), 4u);
  EXPECT_EQ(select_scenario_window(SyntheticCondition{WaterYearClass::dry, Season::summer}, store, "P").first,
            make_timestamp(2013, 7, 1));
}

TEST(Synthetic, Deterministic) {
  SyntheticCascadeConfig cfg;
  cfg.hours = 500;
  const auto a = generate_synthetic_cascade(cfg);
  const auto b = generate_synthetic_cascade(cfg);
  EXPECT_EQ(a.upstream, b.upstream);
  EXPECT_EQ(a.downstream, b.downstream);
  EXPECT_EQ(a.unit_samples, b.unit_samples);
  EXPECT_EQ(to_bundle_csv(a), to_bundle_csv(b));
  cfg.seed = 43;
  EXPECT_NE(generate_synthetic_cascade(cfg).upstream, a.upstream);
}

TEST(Synthetic, ZeroLagNoNoiseCopiesFlow) {
  SyntheticCascadeConfig cfg;
  cfg.hours = 400;
  cfg.lag_hours = 0;
  cfg.noise_sigma = 0.0;
  const auto c = generate_synthetic_cascade(cfg);
  ASSERT_EQ(c.upstream.size(), c.downstream.size());
  for (std::size_t i = 0; i < c.upstream.size(); ++i) EXPECT_EQ(*c.downstream[i].flow_cfs, *c.upstream[i].flow_cfs);
}

TEST(Synthetic, LagTwoIsTheCorrelationPeak) {
  SyntheticCascadeConfig cfg;
  cfg.hours = 1000;
  cfg.lag_hours = 2;
  cfg.noise_sigma = 0.0;
  const auto c = generate_synthetic_cascade(cfg);
  // Brute force: Pearson of up[i] with down[i + k] over all pairs.
  std::size_t best = 0;
  double best_r = -2.0;
  for (std::size_t k = 0; k <= 12; ++k) {
    double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
    const std::size_t n = c.upstream.size() - k;
    for (std::size_t i = 0; i < n; ++i) {
      const double x = *c.upstream[i].flow_cfs, y = *c.downstream[i + k].flow_cfs;
      sx += x, sy += y, sxx += x * x, syy += y * y, sxy += x * y;
    }
    const double r = (n * sxy - sx * sy) / std::sqrt((n * sxx - sx * sx) * (n * syy - sy * sy));
    if (r > best_r) best_r = r, best = k;
  }
  EXPECT_EQ(best, 2u);
  EXPECT_NEAR(best_r, 1.0, 1e-9);
}

TEST(Synthetic, SatisfiesStoreInvariants) {
  const auto c = generate_synthetic_cascade({});
  for (const auto& p : c.upstream) EXPECT_NO_THROW(validate(p));
  for (const auto& p : c.downstream) EXPECT_NO_THROW(validate(p));
  for (const auto& p : c.plants) EXPECT_NO_THROW(validate(p));
  for (const auto& u : c.units) EXPECT_NO_THROW(validate(u));
  std::set<std::string> ids;
  for (const auto& u : c.units) EXPECT_TRUE(ids.insert(u.unit_id).second);
  for (const auto& s : c.unit_samples) {
    EXPECT_TRUE(ids.count(s.unit_id));
    EXPECT_GE(*s.mw, 0.0);
  }
  EXPECT_THROW(generate_synthetic_cascade({.seed = 1, .hours = 2, .lag_hours = 2}), ValidationError);
}

TEST(Synthetic, CommitmentRuleFillsLargestFirst) {
  const auto c = generate_synthetic_cascade({});
  std::vector<StaticUnit> up(c.units.begin(), c.units.begin() + 9);
  const auto mw = fill_by_descending_capacity(up, 1000.0, 380.2, 380.2);
  double sum = 0;
  for (double m : mw) sum += m;
  EXPECT_NEAR(sum, 1000.0, 1e-9);
  // Two 825.7 MW units cover 1000 MW; the 707 and 125 MW units stay off.
  for (std::size_t k = 3; k < 9; ++k) EXPECT_EQ(mw[k], 0.0);
  EXPECT_GT(synthetic_unit_efficiency(0.8), synthetic_unit_efficiency(0.3));
  EXPECT_NEAR(synthetic_unit_efficiency(0.8), 0.93, 0.01);
}

}  // namespace
}  // namespace hydat
