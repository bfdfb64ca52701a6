#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "hydat/datastore.hpp"
#include "hydat/time.hpp"

namespace hydat {

enum class Season { winter, spring, summer };
enum class WaterYearClass { dry, average, wet };

std::string_view to_string(Season s) noexcept;
std::string_view to_string(WaterYearClass c) noexcept;
/// Case-insensitive; accepts "avg" for average. Throws ValidationError.
Season parse_season(std::string_view text);
WaterYearClass parse_water_year_class(std::string_view text);

inline constexpr Season kAllSeasons[] = {Season::winter, Season::spring, Season::summer};

/// Winter = Nov-Feb, Spring = Mar-Jun, Summer = Jul-Oct.
Season season_of(Timestamp t);

/// Half-open [start, end) of a season attributed to `year`. Winter of year Y
/// runs from 1 Nov of Y-1 to 1 Mar of Y.
std::pair<Timestamp, Timestamp> season_window(int year, Season season);

/// Mean of the non-null flows per calendar year.
std::map<int, double> annual_mean_flows(const std::vector<PlantSample>& samples);
/// Same, keeping only years whose non-null hourly flows cover at least
/// `min_hourly_coverage` of the year's hours.
std::map<int, double> annual_mean_flows(const std::vector<PlantSample>& samples, double min_hourly_coverage);

/// Store-backed classification and scenario selection ignore partial years.
inline constexpr double kMinYearCoverage = 0.8;

/// Linear-interpolation percentile (p in [0, 100]) of an unsorted sample.
double percentile(std::vector<double> values, double p);

inline constexpr double kDryPercentile = 100.0 / 3.0;
inline constexpr double kWetPercentile = 200.0 / 3.0;

/// Dry below the lower tercile of all annual means, Wet above the upper one,
/// Average otherwise. Throws InsufficientDataError below three years and
/// NotFoundError when `year` is absent.
WaterYearClass classify_water_year(const std::map<int, double>& annual_means, int year);
WaterYearClass classify_water_year(const Store& store, const std::string& project, int year);

struct HistoricalWindow {
  Timestamp start;
  Timestamp end;
  bool operator==(const HistoricalWindow&) const = default;
};

struct SyntheticCondition {
  WaterYearClass water_year = WaterYearClass::average;
  Season season = Season::winter;
  bool operator==(const SyntheticCondition&) const = default;
};

using HydroScenario = std::variant<HistoricalWindow, SyntheticCondition>;

/// `dry|avg|wet:winter|spring|summer` or `hist:START..END`.
HydroScenario parse_scenario(std::string_view text);
std::string format_scenario(const HydroScenario& scenario);

/// Historical windows come back unchanged once start < end holds. Synthetic
/// conditions resolve to the season window of the most recent year in the
/// requested class. Throws NotFoundError when no year qualifies.
std::pair<Timestamp, Timestamp> select_scenario_window(const HydroScenario& scenario,
                                                       const std::map<int, double>& annual_means);
std::pair<Timestamp, Timestamp> select_scenario_window(const HydroScenario& scenario, const Store& store,
                                                       const std::string& project);

struct SyntheticCascadeConfig {
  std::uint64_t seed = 42;
  std::size_t hours = 2000;
  std::size_t lag_hours = 2;
  double noise_sigma = 0.05;
  Timestamp start = make_timestamp(2013, 1, 1);
  std::string upstream_name = "UP";
  std::string downstream_name = "DOWN";
};

struct SyntheticCascade {
  std::vector<StaticPlant> plants;
  std::vector<StaticUnit> units;
  std::vector<PlantSample> upstream;
  std::vector<PlantSample> downstream;
  std::vector<UnitSample> unit_samples;
};

/// Two-plant cascade with known structure, used as a stand-in for utility
/// telemetry. Deterministic for a seed (see Rng for the random algorithm).
///
///  - upstream flow: seasonal base + daily cycle + AR(1) innovations
///  - downstream flow(t) = upstream flow(t - lag) * (1 + N(0, noise_sigma))
///  - each unit's efficiency depends on its loading fraction; plant output is
///    the turbine flow converted at that efficiency
///  - unit MW follows a commitment rule: units are committed in descending
///    nominal power until the head-derated capacity covers the plant output,
///    then loaded to a common fraction of their derated capacity
SyntheticCascade generate_synthetic_cascade(const SyntheticCascadeConfig& config);

/// Synthetic per-unit efficiency as a function of loading fraction, peaking
/// at 0.93 near 80 % load.
double synthetic_unit_efficiency(double load_fraction);

/// The commitment rule used by the generator, exposed for fixtures:
/// returns per-unit MW in the order of `units`.
std::vector<double> fill_by_descending_capacity(const std::vector<StaticUnit>& units, double target_mw,
                                                double head_ft, double rated_head_ft);

/// Writes static plants, static units, plant samples and unit samples as
/// consecutive CSV sections accepted by Store::ingest_bundle.
std::string to_bundle_csv(const SyntheticCascade& cascade);

}  // namespace hydat
