#include "hydat/dispatch.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "hydat/csv.hpp"
#include "hydat/error.hpp"

namespace hydat {

namespace {

constexpr double kBandSlackMw = 1e-9;

double sum_mw(const std::vector<UnitDispatch>& units) {
  double s = 0.0;
  for (const auto& u : units) s += u.mw;
  return s;
}

}  // namespace

double pmax_available(double nominal_mw, double head_ft, double rated_head_ft, double alpha) {
  if (!(head_ft > 0.0)) throw DomainError("head must be positive");
  if (!(rated_head_ft > 0.0)) throw DomainError("rated head must be positive");
  if (nominal_mw < 0.0) throw DomainError("nominal power must be nonnegative");
  return nominal_mw * std::min(1.0, std::pow(head_ft / rated_head_ft, alpha));
}

std::string_view to_string(TargetSource s) noexcept {
  switch (s) {
    case TargetSource::user: return "user";
    case TargetSource::historical: return "historical";
    case TargetSource::recalibrated: return "recalibrated";
  }
  return "historical";
}

std::vector<PlantTarget> recalibrate_cascade(const std::vector<PlantTarget>& targets,
                                             const std::vector<CascadeLink>& links,
                                             const std::map<std::string, double>& capacity_mw) {
  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < targets.size(); ++i) index[targets[i].project] = i;

  // Kahn's algorithm over every plant named by a link.
  std::map<std::string, std::set<std::string>> out_edges;
  std::map<std::string, std::size_t> in_degree;
  for (const auto& l : links) {
    in_degree.try_emplace(l.upstream, 0);
    in_degree.try_emplace(l.downstream, 0);
    if (out_edges[l.upstream].insert(l.downstream).second) ++in_degree[l.downstream];
  }
  std::set<std::string> ready;
  for (const auto& [name, deg] : in_degree) {
    if (deg == 0) ready.insert(name);
  }
  std::vector<std::string> order;
  while (!ready.empty()) {
    const std::string n = *ready.begin();
    ready.erase(ready.begin());
    order.push_back(n);
    for (const auto& m : out_edges[n]) {
      if (--in_degree[m] == 0) ready.insert(m);
    }
  }
  if (order.size() != in_degree.size()) {
    std::string members;
    for (const auto& [name, deg] : in_degree) {
      if (deg > 0) members += (members.empty() ? "" : ", ") + name;
    }
    throw CycleError("cascade links form a cycle through: " + members);
  }

  std::map<std::string, const CascadeLink*> incoming;
  for (const auto& l : links) {
    if (!index.count(l.upstream) || !index.count(l.downstream)) continue;
    auto& best = incoming[l.downstream];
    if (!best || l.r_squared > best->r_squared ||
        (l.r_squared == best->r_squared && l.upstream < best->upstream)) {
      best = &l;
    }
  }

  std::vector<PlantTarget> out = targets;
  for (const auto& name : order) {
    const auto link = incoming.find(name);
    if (link == incoming.end()) continue;
    const PlantTarget& up = out[index.at(link->second->upstream)];
    PlantTarget& down = out[index.at(name)];
    double mw = std::max(0.0, link->second->predict(up.target_mw, up.head_ft));
    if (const auto cap = capacity_mw.find(name); cap != capacity_mw.end()) mw = std::min(mw, cap->second);
    down.target_mw = mw;
    down.source = TargetSource::recalibrated;
  }
  return out;
}

CategoryAllocation allocate_category(double cat_mw, const std::vector<double>& pmax) {
  if (!std::isfinite(cat_mw) || cat_mw < 0.0) throw ValidationError("category MW must be finite and nonnegative");
  for (double p : pmax) {
    if (!std::isfinite(p) || p < 0.0) throw ValidationError("pmax_available must be finite and nonnegative");
  }
  CategoryAllocation a;
  a.unit_mw.assign(pmax.size(), 0.0);
  if (cat_mw == 0.0) return a;
  if (pmax.empty()) {
    throw InconsistencyError("category carries positive MW but has no active unit");
  }

  std::vector<bool> clamped(pmax.size(), false);
  std::size_t free = pmax.size();
  double remaining = cat_mw;
  while (free > 0) {
    const double share = remaining / static_cast<double>(free);
    bool changed = false;
    for (std::size_t i = 0; i < pmax.size(); ++i) {
      if (clamped[i] || pmax[i] > share) continue;
      clamped[i] = true;
      a.unit_mw[i] = pmax[i];
      remaining -= pmax[i];
      --free;
      changed = true;
    }
    if (!changed) break;
  }
  if (free > 0) {
    const double share = remaining / static_cast<double>(free);
    for (std::size_t i = 0; i < pmax.size(); ++i) {
      if (!clamped[i]) a.unit_mw[i] = std::min(share, pmax[i]);
    }
  }

  // Unserved is defined by the sum in unit order, nudged by ulps so the
  // identity sum + unserved == cat_mw holds exactly in floating point.
  double served = 0.0;
  for (double v : a.unit_mw) served += v;
  double unserved = cat_mw - served;
  for (int k = 0; k < 16 && served + unserved != cat_mw; ++k) {
    unserved = std::nextafter(unserved, served + unserved < cat_mw ? std::numeric_limits<double>::infinity()
                                                                     : -std::numeric_limits<double>::infinity());
  }
  a.unserved_mw = unserved;
  return a;
}

UnitAllocation allocate_units(const std::vector<CategoryPrediction>& predictions, const CategorySpec& spec,
                              const std::map<std::string, double>& pmax_available_mw) {
  UnitAllocation out;
  for (const auto& cat : spec.categories) {
    const auto pred = std::find_if(predictions.begin(), predictions.end(),
                                   [&](const CategoryPrediction& p) { return p.label == cat.label; });
    std::vector<std::pair<double, std::string>> candidates;
    for (const auto& id : cat.unit_ids) {
      const auto it = pmax_available_mw.find(id);
      out.units.push_back({id, cat.label, 0.0, it == pmax_available_mw.end() ? 0.0 : it->second, false});
      if (it != pmax_available_mw.end()) candidates.emplace_back(it->second, id);
    }
    out.unserved_mw[cat.label] = 0.0;
    if (pred == predictions.end() || !pred->exist) continue;
    if (pred->active_units > cat.unit_ids.size()) {
      throw ValidationError("category " + cat.label + " cannot commit " + std::to_string(pred->active_units) +
                            " of " + std::to_string(cat.unit_ids.size()) + " units");
    }
    std::sort(candidates.begin(), candidates.end(), [](const auto& a, const auto& b) {
      if (a.first != b.first) return a.first > b.first;
      return a.second < b.second;
    });
    candidates.resize(std::min(candidates.size(), pred->active_units));
    std::vector<double> pmax;
    for (const auto& c : candidates) pmax.push_back(c.first);
    const auto alloc = allocate_category(pred->cat_mw, pmax);
    out.unserved_mw[cat.label] = alloc.unserved_mw;
    for (std::size_t i = 0; i < candidates.size(); ++i) {
      for (auto& u : out.units) {
        if (u.unit_id == candidates[i].second) {
          u.mw = alloc.unit_mw[i];
          u.active = true;
        }
      }
    }
  }
  std::sort(out.units.begin(), out.units.end(),
            [](const UnitDispatch& a, const UnitDispatch& b) { return a.unit_id < b.unit_id; });
  return out;
}

std::optional<MwBand> mw_band(const EfficiencyCurve& curve, double threshold, double pmax_available_mw) {
  const auto band = efficient_band(curve, threshold);
  if (!band || !(curve.regression.slope > 0.0)) return std::nullopt;
  MwBand b;
  b.low_mw = std::max(0.0, curve.regression(band->low_cfs));
  b.high_mw = std::min(curve.regression(band->high_cfs), pmax_available_mw);
  return b;
}

CorrectionResult validate_and_correct(std::vector<UnitDispatch> units,
                                      const std::map<std::string, EfficiencyCurve>& curves, double threshold) {
  CorrectionResult r;
  auto& log = r.log;
  log.target_mw = sum_mw(units);

  std::vector<std::optional<MwBand>> bands(units.size());
  for (std::size_t i = 0; i < units.size(); ++i) {
    const auto c = curves.find(units[i].unit_id);
    if (c == curves.end()) {
      if (units[i].active) log.warnings.push_back("unit " + units[i].unit_id + " has no efficiency curve; not checked");
      continue;
    }
    bands[i] = mw_band(c->second, threshold, units[i].pmax_available_mw);
    if (!bands[i] && units[i].active) {
      log.warnings.push_back("unit " + units[i].unit_id + " has no efficient band at threshold " +
                             csv::fixed(threshold, 3) + "; not checked");
    }
  }
  auto feasible = [&](std::size_t i) { return bands[i] && bands[i]->low_mw <= bands[i]->high_mw; };
  auto in_band = [&](std::size_t i) {
    return feasible(i) && units[i].mw >= bands[i]->low_mw - kBandSlackMw &&
           units[i].mw <= bands[i]->high_mw + kBandSlackMw;
  };
  auto offender = [&](std::size_t i) { return units[i].active && bands[i] && !in_band(i); };

  for (std::size_t round = 0; round < units.size(); ++round) {
    std::vector<std::size_t> offenders;
    for (std::size_t i = 0; i < units.size(); ++i) {
      if (offender(i)) offenders.push_back(i);
    }
    if (offenders.empty()) break;

    bool shiftable = true;
    for (auto i : offenders) shiftable = shiftable && feasible(i);
    if (shiftable) {
      std::vector<UnitDispatch> trial = units;
      std::vector<CorrectionAction> actions;
      double delta = 0.0;  // MW the other units must add
      for (auto i : offenders) {
        const double edge = units[i].mw < bands[i]->low_mw ? bands[i]->low_mw : bands[i]->high_mw;
        actions.push_back({units[i].unit_id, "shift_to_band", units[i].mw, edge});
        delta += units[i].mw - edge;
        trial[i].mw = edge;
      }
      std::vector<std::pair<std::size_t, double>> rooms;
      double total_room = 0.0;
      for (std::size_t i = 0; i < units.size(); ++i) {
        if (!units[i].active || !in_band(i) || std::find(offenders.begin(), offenders.end(), i) != offenders.end()) {
          continue;
        }
        const double room = delta > 0.0 ? bands[i]->high_mw - units[i].mw : units[i].mw - bands[i]->low_mw;
        if (room > 0.0) {
          rooms.emplace_back(i, room);
          total_room += room;
        }
      }
      if (std::abs(delta) <= total_room + kBandSlackMw) {
        for (const auto& [i, room] : rooms) {
          if (delta == 0.0) break;
          const double moved = std::min(room, std::abs(delta) * room / total_room);
          const double next = std::clamp(units[i].mw + (delta > 0.0 ? moved : -moved), bands[i]->low_mw,
                                         bands[i]->high_mw);
          if (next == units[i].mw) continue;
          actions.push_back({units[i].unit_id, "absorb", units[i].mw, next});
          trial[i].mw = next;
        }
        units = std::move(trial);
        log.actions.insert(log.actions.end(), actions.begin(), actions.end());
        continue;
      }
    }

    // Shifts cannot be absorbed: switch off the least-loaded offender, preferring
    // one whose band is infeasible, and spread its MW over its category.
    std::size_t victim = offenders.front();
    for (auto i : offenders) {
      const bool better_class = !feasible(i) && feasible(victim);
      const bool same_class = feasible(i) == feasible(victim);
      if (better_class || (same_class && (units[i].mw < units[victim].mw ||
                                          (units[i].mw == units[victim].mw && units[i].unit_id < units[victim].unit_id)))) {
        victim = i;
      }
    }
    const std::string category = units[victim].category;
    double cat_total = 0.0;
    std::vector<std::size_t> peers;
    for (std::size_t i = 0; i < units.size(); ++i) {
      if (!units[i].active || units[i].category != category) continue;
      cat_total += units[i].mw;
      if (i != victim) peers.push_back(i);
    }
    log.actions.push_back({units[victim].unit_id, "deactivate", units[victim].mw, 0.0});
    units[victim].mw = 0.0;
    units[victim].active = false;
    if (!peers.empty()) {
      std::vector<double> pmax;
      for (auto i : peers) pmax.push_back(units[i].pmax_available_mw);
      const auto alloc = allocate_category(cat_total, pmax);
      for (std::size_t k = 0; k < peers.size(); ++k) {
        auto& u = units[peers[k]];
        if (u.mw != alloc.unit_mw[k]) log.actions.push_back({u.unit_id, "redistribute", u.mw, alloc.unit_mw[k]});
        u.mw = alloc.unit_mw[k];
      }
    }
  }

  for (std::size_t i = 0; i < units.size(); ++i) {
    if (!units[i].active) continue;
    if (!bands[i]) {
      log.unchecked.push_back(units[i].unit_id);
    } else if (!in_band(i)) {
      log.unresolved.push_back(units[i].unit_id);
    }
  }
  log.final_mw = sum_mw(units);
  log.residual_mw = log.target_mw - log.final_mw;
  r.units = std::move(units);
  return r;
}

std::string case_csv(std::vector<DispatchRow> rows) {
  std::sort(rows.begin(), rows.end(), [](const DispatchRow& a, const DispatchRow& b) {
    if (a.project != b.project) return a.project < b.project;
    return a.unit_id < b.unit_id;
  });
  std::string out(kCaseHeader);
  out += '\n';
  for (const auto& r : rows) {
    out += csv::join({r.project, r.unit_id, csv::fixed(r.pgen_ref_mw, 2), csv::fixed(r.pmax_nominal_mw, 2),
                      csv::fixed(r.head_ft, 2), csv::fixed(r.pgen_calculated_mw, 2),
                      csv::fixed(r.pmax_available_mw, 2)});
    out += '\n';
  }
  return out;
}

void export_case(const std::vector<DispatchRow>& rows, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << case_csv(rows);
  out.flush();
  if (!out) throw IoError("failed writing " + path.string());
}

std::vector<DispatchRow> read_case(std::istream& in) {
  csv::Reader reader(in);
  std::vector<std::string> f;
  if (!reader.next(f) || csv::join(f) != kCaseHeader) throw ValidationError("not a planning-case CSV");
  std::vector<DispatchRow> rows;
  while (reader.next(f)) {
    const auto line = reader.line_number();
    if (f.size() != 7) throw ValidationError("line " + std::to_string(line) + ": expected 7 fields");
    rows.push_back({f[0], f[1], csv::parse_double(f[2], line, "Pgen (MW)"), csv::parse_double(f[3], line, "Pmax (MW)"),
                    csv::parse_double(f[4], line, "Head (ft)"), csv::parse_double(f[5], line, "Pgen calculated (MW)"),
                    csv::parse_double(f[6], line, "Pmax available (MW)")});
  }
  return rows;
}

}  // namespace hydat
