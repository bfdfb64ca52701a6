#include "hydat/efficiency.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>

#include "hydat/error.hpp"

namespace hydat {

namespace {

constexpr double kBandTolerance = 1e-9;
constexpr std::size_t kMinObservations = 5;

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const auto n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

double compute_efficiency(double power_mw, double flow_cfs, double head_ft) {
  if (!(flow_cfs > 0.0)) throw DomainError("flow must be > 0 to compute efficiency");
  if (!(head_ft > 0.0)) throw DomainError("head must be > 0 to compute efficiency");
  const double eta = power_mw / (kMwPerCfsFt * flow_cfs * head_ft);
  if (eta > kMaxPlausibleEfficiency) {
    throw DataQualityError("efficiency " + std::to_string(eta) + " exceeds 1.05");
  }
  return eta;
}

double LinearFit::inverse(double y) const {
  if (slope == 0.0) throw SingularityError("cannot invert a flat regression line");
  return (y - intercept) / slope;
}

LinearFit fit_ols(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw ValidationError("fit_ols: x and y differ in length");
  if (x.size() < 2) throw InsufficientDataError("fit_ols needs at least two points");
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxx = 0.0, sxy = 0.0, scale = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx;
    sxx += dx * dx;
    sxy += dx * (y[i] - my);
    scale = std::max(scale, std::abs(x[i]));
  }
  if (sxx <= 1e-24 * std::max(1.0, scale * scale) * n) {
    throw SingularityError("fit_ols: all x values coincide");
  }
  const double slope = sxy / sxx;
  return {slope, my - slope * mx};
}

double EfficiencyCurve::raw_flow_min() const {
  for (const auto& p : points) {
    if (!p.estimated) return p.flow_cfs;
  }
  return points.empty() ? 0.0 : points.front().flow_cfs;
}

double EfficiencyCurve::raw_flow_max() const {
  for (auto it = points.rbegin(); it != points.rend(); ++it) {
    if (!it->estimated) return it->flow_cfs;
  }
  return points.empty() ? 0.0 : points.back().flow_cfs;
}

double EfficiencyCurve::efficiency_at(double flow_cfs) const {
  if (points.empty()) return 0.0;
  if (flow_cfs <= points.front().flow_cfs) return points.front().efficiency;
  if (flow_cfs >= points.back().flow_cfs) return points.back().efficiency;
  auto hi = std::upper_bound(points.begin(), points.end(), flow_cfs,
                             [](double q, const EfficiencyPoint& p) { return q < p.flow_cfs; });
  auto lo = hi - 1;
  const double w = (flow_cfs - lo->flow_cfs) / (hi->flow_cfs - lo->flow_cfs);
  return lo->efficiency + w * (hi->efficiency - lo->efficiency);
}

std::optional<FlowBand> efficient_band(std::span<const EfficiencyPoint> points, double threshold) {
  const double t = threshold - kBandTolerance;
  std::optional<FlowBand> band;
  auto include = [&band](double q) {
    if (!band) {
      band = FlowBand{q, q};
    } else {
      band->low_cfs = std::min(band->low_cfs, q);
      band->high_cfs = std::max(band->high_cfs, q);
    }
  };
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (points[i].efficiency >= t) include(points[i].flow_cfs);
    if (i + 1 == points.size()) break;
    const auto& a = points[i];
    const auto& b = points[i + 1];
    const bool a_in = a.efficiency >= t;
    const bool b_in = b.efficiency >= t;
    if (a_in != b_in) {
      const double w = (threshold - a.efficiency) / (b.efficiency - a.efficiency);
      include(a.flow_cfs + std::clamp(w, 0.0, 1.0) * (b.flow_cfs - a.flow_cfs));
    }
  }
  return band;
}

EfficiencyCurve build_curve(const std::string& unit_id, const std::vector<Observation>& observations,
                            const CurveOptions& options) {
  struct Valid {
    double flow, head, power, eta;
  };
  std::vector<Valid> valid;
  EfficiencyCurve curve;
  curve.unit_id = unit_id;
  curve.threshold = options.threshold;
  for (const auto& o : observations) {
    if (!(o.flow_cfs > 0.0) || !(o.head_ft > 0.0) || !(o.power_mw > 0.0)) {
      ++curve.dropped_observations;
      continue;
    }
    try {
      const double eta = compute_efficiency(o.power_mw, o.flow_cfs, o.head_ft);
      if (exceeds_unity(eta)) ++curve.flagged_observations;
      valid.push_back({o.flow_cfs, o.head_ft, o.power_mw, eta});
    } catch (const DataQualityError&) {
      ++curve.dropped_observations;
    }
  }
  if (valid.size() < kMinObservations) {
    throw InsufficientDataError("unit " + unit_id + ": efficiency curve needs at least 5 valid observations, have " +
                                std::to_string(valid.size()));
  }

  std::vector<double> heads;
  heads.reserve(valid.size());
  for (const auto& v : valid) heads.push_back(v.head);
  curve.head_ft = median(heads);

  std::sort(valid.begin(), valid.end(), [](const Valid& a, const Valid& b) { return a.flow < b.flow; });
  const double q_min = valid.front().flow;
  const double q_max = valid.back().flow;
  const std::size_t bins = std::max<std::size_t>(1, options.max_raw_points);
  const double width = (q_max - q_min) / static_cast<double>(bins);

  struct Acc {
    double flow = 0, power = 0, eta = 0;
    std::size_t n = 0;
  };
  std::vector<Acc> acc(bins);
  for (const auto& v : valid) {
    std::size_t b = width > 0.0 ? static_cast<std::size_t>((v.flow - q_min) / width) : 0;
    b = std::min(b, bins - 1);
    acc[b].flow += v.flow;
    acc[b].power += v.power;
    acc[b].eta += v.eta;
    ++acc[b].n;
  }
  std::vector<EfficiencyPoint> raw;
  for (const auto& a : acc) {
    if (a.n == 0) continue;
    const double n = static_cast<double>(a.n);
    raw.push_back({unit_id, a.flow / n, curve.head_ft, a.power / n, a.eta / n, false});
  }

  std::vector<double> xs, ys;
  for (const auto& p : raw) {
    xs.push_back(p.flow_cfs);
    ys.push_back(p.power_mw);
  }
  curve.regression = fit_ols(xs, ys);

  const double raw_lo = raw.front().flow_cfs;
  const double raw_hi = raw.back().flow_cfs;
  std::vector<EfficiencyPoint> merged = raw;
  const std::size_t steps = std::max<std::size_t>(1, options.estimate_steps);
  for (std::size_t k = 0; k <= steps; ++k) {
    const double frac = options.estimate_lo +
                        (options.estimate_hi - options.estimate_lo) * static_cast<double>(k) / static_cast<double>(steps);
    const double q = frac * q_max;
    if (q >= raw_lo && q <= raw_hi) continue;
    const double p = curve.regression(q);
    if (!(p > 0.0)) continue;
    const double eta = p / (kMwPerCfsFt * q * curve.head_ft);
    if (!(eta > 0.0) || eta > kMaxPlausibleEfficiency) continue;
    merged.push_back({unit_id, q, curve.head_ft, p, eta, true});
  }
  std::sort(merged.begin(), merged.end(),
            [](const EfficiencyPoint& a, const EfficiencyPoint& b) { return a.flow_cfs < b.flow_cfs; });
  curve.points = std::move(merged);
  curve.band = efficient_band(curve, options.threshold);
  return curve;
}

std::vector<EfficiencyCurve> build_curve_family(const std::string& unit_id,
                                                const std::vector<Observation>& observations,
                                                const CurveOptions& options, double bucket_width_ft) {
  if (!(bucket_width_ft > 0.0)) throw ValidationError("head bucket width must be > 0");
  std::map<long long, std::vector<Observation>> buckets;
  for (const auto& o : observations) {
    if (!(o.head_ft > 0.0)) continue;
    buckets[static_cast<long long>(std::floor(o.head_ft / bucket_width_ft))].push_back(o);
  }
  std::vector<EfficiencyCurve> out;
  for (const auto& [key, obs] : buckets) {
    if (obs.size() < kMinObservations) continue;
    try {
      out.push_back(build_curve(unit_id, obs, options));
    } catch (const InsufficientDataError&) {
    } catch (const SingularityError&) {
    }
  }
  if (out.empty()) {
    throw InsufficientDataError("unit " + unit_id + ": no head bucket holds enough observations");
  }
  return out;
}

EfficiencyCurve curve_from_points(const std::string& unit_id, std::vector<EfficiencyPoint> points,
                                  double threshold) {
  if (points.empty()) throw NotFoundError("no efficiency points for unit " + unit_id);
  std::sort(points.begin(), points.end(),
            [](const EfficiencyPoint& a, const EfficiencyPoint& b) { return a.flow_cfs < b.flow_cfs; });
  EfficiencyCurve curve;
  curve.unit_id = unit_id;
  curve.head_ft = points.front().head_ft;
  curve.threshold = threshold;
  std::vector<double> xs, ys;
  for (const auto& p : points) {
    if (p.estimated) continue;
    xs.push_back(p.flow_cfs);
    ys.push_back(p.power_mw);
  }
  curve.regression = fit_ols(xs, ys);
  curve.points = std::move(points);
  curve.band = efficient_band(curve, threshold);
  return curve;
}

std::vector<EfficiencyCurve> load_curves(const Store& store, const std::string& unit_id, double threshold) {
  std::map<double, std::vector<EfficiencyPoint>> by_head;
  for (auto& p : store.efficiency_points(unit_id)) by_head[p.head_ft].push_back(p);
  std::vector<EfficiencyCurve> out;
  for (auto& [head, pts] : by_head) {
    try {
      out.push_back(curve_from_points(unit_id, std::move(pts), threshold));
    } catch (const Error&) {
    }
  }
  return out;
}

const EfficiencyCurve* nearest_head(const std::vector<EfficiencyCurve>& curves, double head_ft) {
  const EfficiencyCurve* best = nullptr;
  for (const auto& c : curves) {
    if (!best || std::abs(c.head_ft - head_ft) < std::abs(best->head_ft - head_ft)) best = &c;
  }
  return best;
}

std::vector<Observation> unit_observations(const Store& store, const std::string& unit_id) {
  const auto unit = store.unit(unit_id);
  if (!unit) throw NotFoundError("unknown unit '" + unit_id + "'");
  const auto plant_rows = store.plant_samples(unit->project_name);
  const auto unit_rows = store.unit_samples_of(unit->project_name);

  std::map<Timestamp, std::pair<double, double>> per_hour;  // (plant unit total, this unit)
  for (const auto& s : unit_rows) {
    if (!s.active()) continue;
    auto& [total, mine] = per_hour[s.timestamp];
    total += *s.mw;
    if (s.unit_id == unit_id) mine = *s.mw;
  }
  std::vector<Observation> out;
  for (const auto& p : plant_rows) {
    if (!p.flow_cfs || !p.head_ft) continue;
    const auto it = per_hour.find(p.timestamp);
    if (it == per_hour.end()) continue;
    const auto [total, mine] = it->second;
    if (mine <= 0.0 || total <= 0.0) continue;
    const double turbine = *p.flow_cfs - p.spill_cfs.value_or(0.0);
    if (turbine <= 0.0) continue;
    out.push_back({turbine * mine / total, *p.head_ft, mine});
  }
  return out;
}

std::string curve_to_svg(const EfficiencyCurve& curve) {
  constexpr double W = 640, H = 400, L = 60, R = 20, T = 30, B = 50;
  if (curve.points.empty()) return "<svg xmlns=\"http://www.w3.org/2000/svg\"/>\n";
  const double q0 = curve.points.front().flow_cfs;
  const double q1 = std::max(curve.points.back().flow_cfs, q0 + 1.0);
  double e0 = 1.0, e1 = 0.0;
  for (const auto& p : curve.points) {
    e0 = std::min(e0, p.efficiency);
    e1 = std::max(e1, p.efficiency);
  }
  e0 = std::min(e0, curve.threshold) - 0.02;
  e1 = std::max(e1, curve.threshold) + 0.02;
  auto sx = [&](double q) { return L + (q - q0) / (q1 - q0) * (W - L - R); };
  auto sy = [&](double e) { return H - B - (e - e0) / (e1 - e0) * (H - T - B); };

  std::string svg;
  char buf[256];
  std::snprintf(buf, sizeof buf,
                "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"%.0f\" height=\"%.0f\" font-family=\"sans-serif\" "
                "font-size=\"12\">\n",
                W, H);
  svg += buf;
  std::snprintf(buf, sizeof buf, "<text x=\"%.0f\" y=\"18\">%s at %.1f ft</text>\n", L, curve.unit_id.c_str(),
                curve.head_ft);
  svg += buf;
  if (curve.band) {
    std::snprintf(buf, sizeof buf,
                  "<rect x=\"%.2f\" y=\"%.2f\" width=\"%.2f\" height=\"%.2f\" fill=\"#dff0d8\"/>\n",
                  sx(curve.band->low_cfs), T, sx(curve.band->high_cfs) - sx(curve.band->low_cfs), H - T - B);
    svg += buf;
  }
  std::snprintf(buf, sizeof buf,
                "<line x1=\"%.2f\" y1=\"%.2f\" x2=\"%.2f\" y2=\"%.2f\" stroke=\"#c00\" stroke-dasharray=\"4 3\"/>\n",
                L, sy(curve.threshold), W - R, sy(curve.threshold));
  svg += buf;
  svg += "<polyline fill=\"none\" stroke=\"#1f4e79\" stroke-width=\"1.5\" points=\"";
  for (const auto& p : curve.points) {
    std::snprintf(buf, sizeof buf, "%.2f,%.2f ", sx(p.flow_cfs), sy(p.efficiency));
    svg += buf;
  }
  svg += "\"/>\n";
  for (const auto& p : curve.points) {
    std::snprintf(buf, sizeof buf, "<circle cx=\"%.2f\" cy=\"%.2f\" r=\"3\" fill=\"%s\" stroke=\"#1f4e79\"/>\n",
                  sx(p.flow_cfs), sy(p.efficiency), p.estimated ? "white" : "#1f4e79");
    svg += buf;
  }
  std::snprintf(buf, sizeof buf,
                "<line x1=\"%.0f\" y1=\"%.0f\" x2=\"%.0f\" y2=\"%.0f\" stroke=\"black\"/>\n"
                "<line x1=\"%.0f\" y1=\"%.0f\" x2=\"%.0f\" y2=\"%.0f\" stroke=\"black\"/>\n",
                L, H - B, W - R, H - B, L, T, L, H - B);
  svg += buf;
  std::snprintf(buf, sizeof buf,
                "<text x=\"%.0f\" y=\"%.0f\">%.0f cfs</text><text x=\"%.0f\" y=\"%.0f\" text-anchor=\"end\">%.0f cfs</text>\n"
                "<text x=\"4\" y=\"%.0f\">%.3f</text><text x=\"4\" y=\"%.0f\">%.3f</text>\n",
                L, H - B + 18, q0, W - R, H - B + 18, q1, sy(e1) + 4, e1, sy(e0), e0);
  svg += buf;
  svg += "</svg>\n";
  return svg;
}

}  // namespace hydat
