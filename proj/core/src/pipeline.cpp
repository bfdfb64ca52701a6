#include "hydat/pipeline.hpp"

#include <algorithm>
#include <cctype>
#include <set>

#include "hydat/csv.hpp"
#include "hydat/efficiency.hpp"
#include "hydat/error.hpp"
#include "hydat/interdependency.hpp"

namespace hydat {

namespace {

std::string file_stem_for(const std::string& plant) {
  std::string out;
  for (unsigned char c : plant) {
    out += (std::isalnum(c) || c == '-' || c == '_' || c == '.') ? static_cast<char>(c) : '_';
  }
  return out.empty() ? "_" : out;
}

double mean_of(const std::vector<PlantSample>& samples, std::optional<double> PlantSample::*field, bool& any) {
  double s = 0.0;
  std::size_t n = 0;
  for (const auto& p : samples) {
    if (const auto& v = p.*field) {
      s += *v;
      ++n;
    }
  }
  any = n > 0;
  return n ? s / static_cast<double>(n) : 0.0;
}

Season scenario_season(const HydroScenario& scenario) {
  if (const auto* c = std::get_if<SyntheticCondition>(&scenario)) return c->season;
  return season_of(std::get<HistoricalWindow>(scenario).start);
}

}  // namespace

std::filesystem::path ModelRepository::path_for(const std::string& plant) const {
  return dir_ / (file_stem_for(plant) + ".json");
}

bool ModelRepository::has(const std::string& plant) const { return std::filesystem::exists(path_for(plant)); }

TrainedPlantModel ModelRepository::load(const std::string& plant) const {
  if (!has(plant)) throw NotFoundError("no trained model for plant '" + plant + "'");
  auto m = load_model(path_for(plant));
  if (m.plant != plant) throw IncompatibleError("model file " + path_for(plant).string() + " belongs to '" + m.plant + "'");
  return m;
}

std::filesystem::path ModelRepository::save(const TrainedPlantModel& model) const {
  std::error_code ec;
  std::filesystem::create_directories(dir_, ec);
  if (ec) throw IoError("cannot create model directory " + dir_.string() + ": " + ec.message());
  const auto path = path_for(model.plant);
  const auto tmp = path.string() + ".tmp";
  save_model(model, tmp);
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot move model into place: " + ec.message());
  return path;
}

std::filesystem::path default_model_dir(const std::filesystem::path& db_path) {
  return std::filesystem::path(db_path.string() + ".models");
}

nlohmann::json to_json(const CorrectionLog& log) {
  nlohmann::json actions = nlohmann::json::array();
  for (const auto& a : log.actions) {
    actions.push_back({{"unit_id", a.unit_id}, {"action", a.action}, {"before_mw", a.before_mw}, {"after_mw", a.after_mw}});
  }
  return {{"actions", actions},
          {"warnings", log.warnings},
          {"target_mw", log.target_mw},
          {"final_mw", log.final_mw},
          {"residual_mw", log.residual_mw},
          {"unresolved", log.unresolved},
          {"unchecked", log.unchecked}};
}

nlohmann::json to_json(const CascadeLink& link) {
  auto term = [](const RegressionTerm& t) { return nlohmann::json{{"estimate", t.estimate}, {"std_error", t.std_error}}; };
  return {{"upstream", link.upstream},
          {"downstream", link.downstream},
          {"season", link.season ? nlohmann::json(std::string(to_string(*link.season))) : nlohmann::json(nullptr)},
          {"lag_hours", link.lag_hours},
          {"intercept", term(link.intercept)},
          {"upstream_mw", term(link.upstream_mw)},
          {"upstream_head", term(link.upstream_head)},
          {"head_dropped", link.head_dropped},
          {"r_squared", link.r_squared},
          {"samples", link.samples}};
}

nlohmann::json to_json(const DispatchRow& r) {
  return {{"project", r.project},
          {"unit_id", r.unit_id},
          {"pgen_ref_mw", r.pgen_ref_mw},
          {"pmax_mw", r.pmax_nominal_mw},
          {"head_ft", r.head_ft},
          {"pgen_calculated_mw", r.pgen_calculated_mw},
          {"pmax_available_mw", r.pmax_available_mw}};
}

nlohmann::json DispatchResult::manifest() const {
  auto target_json = [](const PlantTarget& t) {
    return nlohmann::json{{"target_mw", t.target_mw},
                          {"head_ft", t.head_ft},
                          {"storage_af", t.storage_af},
                          {"source", std::string(to_string(t.source))}};
  };
  nlohmann::json plants_json = nlohmann::json::array();
  for (const auto& p : plants) {
    nlohmann::json preds = nlohmann::json::array();
    for (const auto& c : p.prediction.categories) {
      preds.push_back({{"label", c.label},
                       {"probability", c.probability},
                       {"exist", c.exist},
                       {"cat_mw", c.cat_mw},
                       {"unit_mw", c.unit_mw},
                       {"active_units", c.active_units}});
    }
    plants_json.push_back({{"project", p.project},
                           {"window", {{"start", format_timestamp(p.window_start)}, {"end", format_timestamp(p.window_end)}}},
                           {"initial", target_json(p.initial)},
                           {"target", target_json(p.target)},
                           {"capacity_mw", p.capacity_mw},
                           {"predictions", preds},
                           {"prediction_warnings", p.prediction.warnings},
                           {"unserved_mw", p.unserved_mw},
                           {"correction_log", to_json(p.correction)}});
  }
  nlohmann::json links_json = nlohmann::json::array();
  for (const auto& l : links) links_json.push_back(to_json(l));
  nlohmann::json rows_json = nlohmann::json::array();
  for (const auto& r : rows) rows_json.push_back(to_json(r));
  return {{"scenario", format_scenario(request.scenario)},
          {"plants_requested", request.plants},
          {"seed", request.seed},
          {"threshold", request.threshold},
          {"alpha", request.alpha},
          {"models", model_info},
          {"links", links_json},
          {"plants", plants_json},
          {"rows", rows_json}};
}

DispatchResult run_dispatch(const Store& store, const std::map<std::string, TrainedPlantModel>& models,
                            const DispatchRequest& request) {
  if (request.plants.empty()) throw ValidationError("no plant selected");
  if (!(request.threshold > 0.0 && request.threshold <= kMaxPlausibleEfficiency)) {
    throw ValidationError("efficiency threshold must lie in (0, 1.05]");
  }
  DispatchResult result;
  result.request = request;

  struct PlantContext {
    StaticPlant plant;
    std::vector<StaticUnit> units;
    const TrainedPlantModel* model = nullptr;
  };
  std::map<std::string, PlantContext> ctx;
  std::set<std::string> seen;
  for (const auto& name : request.plants) {
    if (!seen.insert(name).second) throw ValidationError("plant '" + name + "' requested twice");
    const auto plant = store.plant(name);
    if (!plant) throw NotFoundError("unknown plant '" + name + "'");
    const auto model = models.find(name);
    if (model == models.end()) throw NotFoundError("no trained model for plant '" + name + "'");
    PlantContext c{*plant, store.join_units_of(name), &model->second};
    if (c.units.empty()) throw NotFoundError("plant '" + name + "' has no units");
    for (const auto& cat : c.model->spec.categories) {
      for (const auto& id : cat.unit_ids) {
        if (std::none_of(c.units.begin(), c.units.end(), [&](const StaticUnit& u) { return u.unit_id == id; })) {
          throw IncompatibleError("model for '" + name + "' names unit " + id + " which the store does not hold");
        }
      }
    }
    ctx.emplace(name, std::move(c));
    result.model_info.push_back({{"plant", name},
                                 {"format", kModelFormat},
                                 {"version", kModelFormatVersion},
                                 {"training_seed", model->second.config.seed},
                                 {"epochs", model->second.config.epochs},
                                 {"rows", model->second.rows}});
  }

  // Plant targets from the scenario window.
  std::vector<PlantTarget> targets;
  std::map<std::string, std::pair<Timestamp, Timestamp>> windows;
  for (const auto& name : request.plants) {
    const auto window = select_scenario_window(request.scenario, store, name);
    windows[name] = window;
    const auto samples = store.query_plant_window(name, window.first, window.second);
    bool has_mw = false, has_head = false, has_storage = false;
    PlantTarget t;
    t.project = name;
    t.target_mw = mean_of(samples, &PlantSample::total_mw, has_mw);
    t.head_ft = mean_of(samples, &PlantSample::head_ft, has_head);
    t.storage_af = mean_of(samples, &PlantSample::storage_af, has_storage);
    t.source = TargetSource::historical;
    if (!has_head || !has_storage) {
      throw InsufficientDataError("plant '" + name + "' has no head or storage data in " +
                                  format_timestamp(window.first) + ".." + format_timestamp(window.second));
    }
    if (const auto o = request.target_overrides.find(name); o != request.target_overrides.end()) {
      if (!(o->second >= 0.0)) throw ValidationError("target for '" + name + "' must be nonnegative");
      t.target_mw = o->second;
      t.source = TargetSource::user;
    } else if (!has_mw) {
      throw InsufficientDataError("plant '" + name + "' has no MW data in the scenario window");
    }
    targets.push_back(t);
  }

  std::map<std::string, double> capacity;
  for (const auto& t : targets) {
    const auto& c = ctx.at(t.project);
    double cap = 0.0;
    for (const auto& u : c.units) cap += pmax_available(u.nominal_pmax_mw, t.head_ft, c.plant.rated_head_ft, request.alpha);
    capacity[t.project] = cap;
  }

  // Cascade links are fitted on the full history for the scenario's season.
  const Season season = scenario_season(request.scenario);
  for (const auto& spec : request.links) {
    if (!ctx.count(spec.upstream) || !ctx.count(spec.downstream)) {
      throw ValidationError("link " + spec.upstream + " -> " + spec.downstream + " names a plant outside the request");
    }
    const auto up = store.plant_samples(spec.upstream);
    const auto down = store.plant_samples(spec.downstream);
    const auto profile = lag_scan(flow_series(up), flow_series(down), request.max_lag_hours, season);
    auto link = align_and_fit(up, down, profile.best_lag, season);
    link.upstream = spec.upstream;
    link.downstream = spec.downstream;
    result.links.push_back(link);
  }
  const auto recalibrated = recalibrate_cascade(targets, result.links, capacity);

  for (std::size_t k = 0; k < request.plants.size(); ++k) {
    const auto& name = request.plants[k];
    const auto& c = ctx.at(name);
    PlantRun run;
    run.project = name;
    run.window_start = windows[name].first;
    run.window_end = windows[name].second;
    run.initial = targets[k];
    run.target = recalibrated[k];
    run.capacity_mw = capacity[name];

    const auto& t = run.target;
    run.prediction = predict_categories(*c.model, {t.target_mw, t.head_ft, t.storage_af});

    std::map<std::string, double> pmax;
    for (const auto& u : c.units) {
      pmax[u.unit_id] = pmax_available(u.nominal_pmax_mw, t.head_ft, c.plant.rated_head_ft, request.alpha);
    }
    const auto alloc = allocate_units(run.prediction.categories, c.model->spec, pmax);
    run.unserved_mw = alloc.unserved_mw;

    std::map<std::string, EfficiencyCurve> curves;
    for (const auto& u : alloc.units) {
      const auto family = load_curves(store, u.unit_id, request.threshold);
      if (const auto* curve = nearest_head(family, t.head_ft)) curves.emplace(u.unit_id, *curve);
    }
    auto corrected = validate_and_correct(alloc.units, curves, request.threshold);
    run.correction = std::move(corrected.log);

    std::map<std::string, std::pair<double, std::size_t>> observed;
    for (const auto& s : store.unit_samples_of(name, run.window_start, run.window_end)) {
      if (!s.mw) continue;
      auto& o = observed[s.unit_id];
      o.first += *s.mw;
      ++o.second;
    }
    for (const auto& u : corrected.units) {
      const auto unit = std::find_if(c.units.begin(), c.units.end(),
                                     [&](const StaticUnit& su) { return su.unit_id == u.unit_id; });
      DispatchRow row;
      row.project = name;
      row.unit_id = u.unit_id;
      if (const auto ref = request.reference_pgen.find(u.unit_id); ref != request.reference_pgen.end()) {
        row.pgen_ref_mw = ref->second;
      } else if (const auto o = observed.find(u.unit_id); o != observed.end() && o->second.second > 0) {
        row.pgen_ref_mw = o->second.first / static_cast<double>(o->second.second);
      }
      row.pmax_nominal_mw = unit->nominal_pmax_mw;
      row.head_ft = t.head_ft;
      row.pgen_calculated_mw = u.active ? u.mw : 0.0;
      row.pmax_available_mw = u.pmax_available_mw;
      result.rows.push_back(row);
    }
    result.plants.push_back(std::move(run));
  }
  std::sort(result.rows.begin(), result.rows.end(), [](const DispatchRow& a, const DispatchRow& b) {
    if (a.project != b.project) return a.project < b.project;
    return a.unit_id < b.unit_id;
  });
  return result;
}

std::map<std::string, double> read_reference_pgen(std::istream& in) {
  csv::Reader reader(in);
  std::vector<std::string> f;
  if (!reader.next(f) || f.size() != 2 || csv::trim(f[0]) != "unit_id" || csv::trim(f[1]) != "pgen_mw") {
    throw ValidationError("reference file must start with the header unit_id,pgen_mw");
  }
  std::map<std::string, double> out;
  while (reader.next(f)) {
    if (f.size() != 2) throw ValidationError("line " + std::to_string(reader.line_number()) + ": expected 2 fields");
    out[csv::trim(f[0])] = csv::parse_double(f[1], reader.line_number(), "pgen_mw");
  }
  return out;
}

}  // namespace hydat
