#include "hydat/hydrology.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numbers>
#include <numeric>

#include "hydat/dispatch.hpp"
#include "hydat/efficiency.hpp"
#include "hydat/error.hpp"
#include "hydat/random.hpp"

namespace hydat {

namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
  return out;
}

}  // namespace

std::string_view to_string(Season s) noexcept {
  switch (s) {
    case Season::winter: return "winter";
    case Season::spring: return "spring";
    case Season::summer: return "summer";
  }
  return "winter";
}

std::string_view to_string(WaterYearClass c) noexcept {
  switch (c) {
    case WaterYearClass::dry: return "dry";
    case WaterYearClass::average: return "avg";
    case WaterYearClass::wet: return "wet";
  }
  return "avg";
}

Season parse_season(std::string_view text) {
  const auto t = lower(text);
  if (t == "winter") return Season::winter;
  if (t == "spring") return Season::spring;
  if (t == "summer") return Season::summer;
  throw ValidationError("unknown season '" + std::string(text) + "' (winter|spring|summer)");
}

WaterYearClass parse_water_year_class(std::string_view text) {
  const auto t = lower(text);
  if (t == "dry") return WaterYearClass::dry;
  if (t == "avg" || t == "average") return WaterYearClass::average;
  if (t == "wet") return WaterYearClass::wet;
  throw ValidationError("unknown water-year class '" + std::string(text) + "' (dry|avg|wet)");
}

Season season_of(Timestamp t) {
  const unsigned m = month_of(t);
  if (m >= 3 && m <= 6) return Season::spring;
  if (m >= 7 && m <= 10) return Season::summer;
  return Season::winter;
}

std::pair<Timestamp, Timestamp> season_window(int year, Season season) {
  switch (season) {
    case Season::winter: return {make_timestamp(year - 1, 11, 1), make_timestamp(year, 3, 1)};
    case Season::spring: return {make_timestamp(year, 3, 1), make_timestamp(year, 7, 1)};
    case Season::summer: return {make_timestamp(year, 7, 1), make_timestamp(year, 11, 1)};
  }
  throw ValidationError("bad season");
}

std::map<int, double> annual_mean_flows(const std::vector<PlantSample>& samples) {
  std::map<int, std::pair<double, std::size_t>> acc;
  for (const auto& s : samples) {
    if (!s.flow_cfs) continue;
    auto& [sum, n] = acc[year_of(s.timestamp)];
    sum += *s.flow_cfs;
    ++n;
  }
  std::map<int, double> out;
  for (const auto& [year, a] : acc) out[year] = a.first / static_cast<double>(a.second);
  return out;
}

std::map<int, double> annual_mean_flows(const std::vector<PlantSample>& samples, double min_hourly_coverage) {
  std::map<int, std::size_t> counts;
  for (const auto& s : samples) {
    if (s.flow_cfs) ++counts[year_of(s.timestamp)];
  }
  auto out = annual_mean_flows(samples);
  for (auto it = out.begin(); it != out.end();) {
    const auto hours = (make_timestamp(it->first + 1, 1, 1) - make_timestamp(it->first, 1, 1)) / Hours(1);
    if (static_cast<double>(counts[it->first]) < min_hourly_coverage * static_cast<double>(hours)) {
      it = out.erase(it);
    } else {
      ++it;
    }
  }
  return out;
}

double percentile(std::vector<double> values, double p) {
  if (values.empty()) throw InsufficientDataError("percentile of an empty sample");
  std::sort(values.begin(), values.end());
  const double rank = p / 100.0 * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(rank));
  const auto hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (rank - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

WaterYearClass classify_water_year(const std::map<int, double>& annual_means, int year) {
  if (annual_means.size() < 3) {
    throw InsufficientDataError("water-year classification needs at least 3 years of history, have " +
                                std::to_string(annual_means.size()));
  }
  const auto it = annual_means.find(year);
  if (it == annual_means.end()) throw NotFoundError("no flow data for year " + std::to_string(year));
  std::vector<double> means;
  for (const auto& [y, m] : annual_means) means.push_back(m);
  const double dry_cut = percentile(means, kDryPercentile);
  const double wet_cut = percentile(means, kWetPercentile);
  if (it->second < dry_cut) return WaterYearClass::dry;
  if (it->second > wet_cut) return WaterYearClass::wet;
  return WaterYearClass::average;
}

WaterYearClass classify_water_year(const Store& store, const std::string& project, int year) {
  return classify_water_year(annual_mean_flows(store.plant_samples(project), kMinYearCoverage), year);
}

HydroScenario parse_scenario(std::string_view text) {
  const auto colon = text.find(':');
  if (colon == std::string_view::npos) {
    throw ValidationError("scenario must look like dry:summer or hist:START..END");
  }
  const auto head = lower(text.substr(0, colon));
  const auto rest = text.substr(colon + 1);
  if (head == "hist") {
    const auto dots = rest.find("..");
    if (dots == std::string_view::npos) throw ValidationError("historical scenario must be hist:START..END");
    HistoricalWindow w{parse_timestamp(rest.substr(0, dots)), parse_timestamp(rest.substr(dots + 2))};
    if (!(w.start < w.end)) throw ValidationError("historical scenario start must precede end");
    return w;
  }
  return SyntheticCondition{parse_water_year_class(head), parse_season(rest)};
}

std::string format_scenario(const HydroScenario& scenario) {
  if (const auto* w = std::get_if<HistoricalWindow>(&scenario)) {
    return "hist:" + format_timestamp(w->start) + ".." + format_timestamp(w->end);
  }
  const auto& c = std::get<SyntheticCondition>(scenario);
  return std::string(to_string(c.water_year)) + ":" + std::string(to_string(c.season));
}

std::pair<Timestamp, Timestamp> select_scenario_window(const HydroScenario& scenario,
                                                       const std::map<int, double>& annual_means) {
  if (const auto* w = std::get_if<HistoricalWindow>(&scenario)) {
    if (!(w->start < w->end)) throw ValidationError("historical window start must precede end");
    return {w->start, w->end};
  }
  const auto& c = std::get<SyntheticCondition>(scenario);
  for (auto it = annual_means.rbegin(); it != annual_means.rend(); ++it) {
    if (classify_water_year(annual_means, it->first) == c.water_year) {
      return season_window(it->first, c.season);
    }
  }
  throw NotFoundError("no " + std::string(to_string(c.water_year)) + " year in the record");
}

std::pair<Timestamp, Timestamp> select_scenario_window(const HydroScenario& scenario, const Store& store,
                                                       const std::string& project) {
  if (std::holds_alternative<HistoricalWindow>(scenario)) {
    if (!store.has_plant_data(project)) throw NotFoundError("unknown project '" + project + "'");
    return select_scenario_window(scenario, std::map<int, double>{});
  }
  // A year can qualify while its season lies outside the record (a partial
  // first or last year), so fall back to earlier years of the class.
  const auto& c = std::get<SyntheticCondition>(scenario);
  const auto means = annual_mean_flows(store.plant_samples(project), kMinYearCoverage);
  bool class_seen = false;
  for (auto it = means.rbegin(); it != means.rend(); ++it) {
    if (classify_water_year(means, it->first) != c.water_year) continue;
    class_seen = true;
    const auto window = season_window(it->first, c.season);
    if (!store.query_plant_window(project, window.first, window.second).empty()) return window;
  }
  if (!class_seen) throw NotFoundError("no " + std::string(to_string(c.water_year)) + " year in the record");
  throw NotFoundError("no " + std::string(to_string(c.water_year)) + " year has " +
                      std::string(to_string(c.season)) + " data");
}

double synthetic_unit_efficiency(double load_fraction) {
  const double d = load_fraction - 0.8;
  return std::max(0.3, 0.93 - 0.35 * d * d);
}

std::vector<double> fill_by_descending_capacity(const std::vector<StaticUnit>& units, double target_mw,
                                                double head_ft, double rated_head_ft) {
  std::vector<std::size_t> order(units.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (units[a].nominal_pmax_mw != units[b].nominal_pmax_mw) {
      return units[a].nominal_pmax_mw > units[b].nominal_pmax_mw;
    }
    return units[a].unit_id < units[b].unit_id;
  });
  std::vector<double> out(units.size(), 0.0);
  if (target_mw <= 0.0) return out;
  double committed = 0.0;
  std::size_t n = 0;
  while (n < order.size() && committed < target_mw) {
    committed += pmax_available(units[order[n]].nominal_pmax_mw, head_ft, rated_head_ft);
    ++n;
  }
  const double share = std::min(1.0, target_mw / committed);
  for (std::size_t k = 0; k < n; ++k) {
    const auto i = order[k];
    out[i] = pmax_available(units[i].nominal_pmax_mw, head_ft, rated_head_ft) * share;
  }
  return out;
}

namespace {

struct PlantPhysics {
  const StaticPlant* plant;
  std::vector<StaticUnit> units;
};

/// Turbine flow needed to produce `p_mw` at `head_ft` under the commitment rule.
double turbine_flow_for(const PlantPhysics& ph, double p_mw, double head_ft) {
  const auto mw = fill_by_descending_capacity(ph.units, p_mw, head_ft, ph.plant->rated_head_ft);
  double q = 0.0;
  for (std::size_t i = 0; i < mw.size(); ++i) {
    if (mw[i] <= 0.0) continue;
    const double eta = synthetic_unit_efficiency(mw[i] / ph.units[i].nominal_pmax_mw);
    q += mw[i] / (kMwPerCfsFt * eta * head_ft);
  }
  return q;
}

struct Conversion {
  double total_mw;
  double spill_cfs;
  std::vector<double> unit_mw;
};

Conversion convert(const PlantPhysics& ph, double flow_cfs, double head_ft) {
  double capacity = 0.0;
  for (const auto& u : ph.units) capacity += pmax_available(u.nominal_pmax_mw, head_ft, ph.plant->rated_head_ft);
  const double q_max = turbine_flow_for(ph, capacity, head_ft);
  double p = capacity;
  double spill = 0.0;
  if (flow_cfs >= q_max) {
    spill = flow_cfs - q_max;
  } else {
    double lo = 0.0, hi = capacity;
    for (int it = 0; it < 60; ++it) {
      const double mid = 0.5 * (lo + hi);
      (turbine_flow_for(ph, mid, head_ft) < flow_cfs ? lo : hi) = mid;
    }
    p = 0.5 * (lo + hi);
  }
  return {p, spill, fill_by_descending_capacity(ph.units, p, head_ft, ph.plant->rated_head_ft)};
}

StaticUnit make_unit(const std::string& project, long long bus, const std::string& id, double pmax) {
  StaticUnit u;
  u.project_name = project;
  u.bus_name = project + " Bus" + std::to_string(bus % 10);
  u.bus_number = bus;
  u.id = id;
  u.unit_id = derive_unit_id(bus, id);
  u.nominal_pmax_mw = pmax;
  u.scada_bus_number = std::to_string(bus);
  u.scada_bus_id = id;
  return u;
}

/// Seasonal base flow (cfs) interpolated between mid-month anchors.
double base_flow(Timestamp t) {
  static constexpr double kMonthly[12] = {92e3,  90e3,  105e3, 135e3, 155e3, 150e3,
                                          110e3, 85e3,  75e3,  78e3,  85e3,  90e3};
  using namespace std::chrono;
  const auto day_point = floor<days>(t);
  const year_month_day ymd{day_point};
  const double day_frac = (static_cast<double>(static_cast<unsigned>(ymd.day())) - 15.0) / 30.0;
  const int m = static_cast<int>(static_cast<unsigned>(ymd.month())) - 1;
  const int next = day_frac >= 0 ? (m + 1) % 12 : (m + 11) % 12;
  const double w = std::abs(day_frac);
  return (1.0 - w) * kMonthly[m] + w * kMonthly[next];
}

double day_of_year_fraction(Timestamp t) {
  using namespace std::chrono;
  const auto jan1 = sys_days{year{year_of(t)} / January / 1};
  return duration<double>(t - jan1).count() / (365.25 * 86400.0);
}

double hour_of_day(Timestamp t) {
  return static_cast<double>((t.time_since_epoch().count() / 3600) % 24);
}

}  // namespace

SyntheticCascade generate_synthetic_cascade(const SyntheticCascadeConfig& cfg) {
  if (cfg.hours <= cfg.lag_hours) throw ValidationError("hours must exceed lag_hours");
  if (cfg.noise_sigma < 0.0) throw ValidationError("noise_sigma must be >= 0");

  SyntheticCascade out;
  out.plants.push_back({cfg.upstream_name, 47.95, -118.98, 40, 380.2});
  out.plants.push_back({cfg.downstream_name, 47.99, -119.64, 40, 170.0});

  PlantPhysics up{&out.plants[0], {}};
  for (int i = 1; i <= 3; ++i) up.units.push_back(make_unit(cfg.upstream_name, 40001, std::to_string(i), 825.7));
  for (int i = 4; i <= 6; ++i) up.units.push_back(make_unit(cfg.upstream_name, 40002, std::to_string(i), 707.0));
  for (int i = 7; i <= 9; ++i) up.units.push_back(make_unit(cfg.upstream_name, 40003, std::to_string(i), 125.0));
  PlantPhysics down{&out.plants[1], {}};
  for (int i = 1; i <= 4; ++i) down.units.push_back(make_unit(cfg.downstream_name, 41001, std::to_string(i), 400.0));
  for (int i = 5; i <= 6; ++i) down.units.push_back(make_unit(cfg.downstream_name, 41002, std::to_string(i), 200.0));
  out.units = up.units;
  out.units.insert(out.units.end(), down.units.begin(), down.units.end());

  Rng rng(cfg.seed);
  const std::size_t total = cfg.hours + cfg.lag_hours;
  const Timestamp origin = cfg.start - Hours(cfg.lag_hours);

  // River flow at the upstream plant, including lag_hours of pre-history.
  std::vector<double> river(total);
  double ar = 0.0;
  for (std::size_t j = 0; j < total; ++j) {
    const Timestamp t = origin + Hours(j);
    const double base = base_flow(t);
    ar = 0.8 * ar + rng.gaussian(0.0, 0.07 * base);
    const double daily = 0.25 * std::sin(2.0 * std::numbers::pi * (hour_of_day(t) - 10.0) / 24.0);
    river[j] = std::max(5000.0, base * (1.0 + daily) + ar);
  }

  double head_ar_up = 0.0, head_ar_down = 0.0;
  for (std::size_t i = 0; i < cfg.hours; ++i) {
    const Timestamp t = cfg.start + Hours(i);
    const double doy = day_of_year_fraction(t);
    const double noise = rng.gaussian(0.0, cfg.noise_sigma);
    head_ar_up = 0.95 * head_ar_up + rng.gaussian(0.0, 0.6);
    head_ar_down = 0.95 * head_ar_down + rng.gaussian(0.0, 0.3);
    const double storage_noise = rng.gaussian(0.0, 2.0e4);

    const double up_flow = river[i + cfg.lag_hours];
    const double up_head = 300.0 + 22.0 * std::sin(2.0 * std::numbers::pi * (doy - 0.2)) + head_ar_up;
    const double down_flow = river[i] * std::max(0.0, 1.0 + noise);
    const double down_head = 163.0 + 4.0 * std::sin(2.0 * std::numbers::pi * (doy - 0.1)) + head_ar_down;

    const auto up_conv = convert(up, up_flow, up_head);
    const auto down_conv = convert(down, down_flow, down_head);

    PlantSample us;
    us.project_name = cfg.upstream_name;
    us.timestamp = t;
    us.flow_cfs = up_flow;
    us.head_ft = up_head;
    us.storage_af = 4.0e6 + 9.0e4 * (up_head - 300.0) + storage_noise;
    us.spill_cfs = up_conv.spill_cfs;
    us.total_mw = up_conv.total_mw;
    out.upstream.push_back(std::move(us));

    PlantSample ds;
    ds.project_name = cfg.downstream_name;
    ds.timestamp = t;
    ds.flow_cfs = down_flow;
    ds.head_ft = down_head;
    ds.storage_af = 2.0e5 + 0.1 * storage_noise;
    ds.spill_cfs = down_conv.spill_cfs;
    ds.total_mw = down_conv.total_mw;
    out.downstream.push_back(std::move(ds));

    for (std::size_t k = 0; k < up.units.size(); ++k) {
      out.unit_samples.push_back({up.units[k].unit_id, t, up_conv.unit_mw[k]});
    }
    for (std::size_t k = 0; k < down.units.size(); ++k) {
      out.unit_samples.push_back({down.units[k].unit_id, t, down_conv.unit_mw[k]});
    }
  }
  return out;
}

std::string to_bundle_csv(const SyntheticCascade& cascade) {
  std::string out = to_csv(cascade.plants);
  out += to_csv(cascade.units);
  std::vector<PlantSample> samples = cascade.upstream;
  samples.insert(samples.end(), cascade.downstream.begin(), cascade.downstream.end());
  out += to_csv(samples);
  out += to_csv(cascade.unit_samples);
  return out;
}

}  // namespace hydat
