#include "hydat/service.hpp"

#include <httplib.h>

#include <algorithm>
#include <cstdio>
#include <mutex>
#include <optional>
#include <sstream>
#include <thread>

#include "hydat/error.hpp"
#include "hydat/hydrology.hpp"
#include "hydat/job_pool.hpp"

namespace hydat {

namespace {

using json = nlohmann::json;

ApiResponse error_response(int status, std::string code, std::string message, json details = nullptr) {
  return {status, {{"error", {{"code", std::move(code)}, {"message", std::move(message)}, {"details", std::move(details)}}}}};
}

json error_payload(const std::exception& e) {
  if (const auto* he = dynamic_cast<const Error*>(&e)) {
    return {{"code", std::string(to_string(he->code()))}, {"message", he->what()}, {"details", nullptr}};
  }
  return {{"code", "internal"}, {"message", e.what()}, {"details", nullptr}};
}

int status_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::validation: return 400;
    case ErrorCode::not_found: return 404;
    case ErrorCode::io: return 500;
    default: return 422;
  }
}

std::vector<std::string> split_path(const std::string& path) {
  std::vector<std::string> out;
  std::string part;
  std::istringstream in(path);
  while (std::getline(in, part, '/')) {
    if (!part.empty()) out.push_back(part);
  }
  return out;
}

std::optional<std::string> param(const std::multimap<std::string, std::string>& query, const std::string& key) {
  const auto it = query.find(key);
  if (it == query.end()) return std::nullopt;
  return it->second;
}

// Public field names of the timeseries endpoint and the sample member each reads.
struct FieldDef {
  const char* name;
  const char* column;
  std::optional<double> PlantSample::*member;
};
constexpr FieldDef kFields[] = {
    {"flow", "flow_cfs", &PlantSample::flow_cfs},      {"head", "head_ft", &PlantSample::head_ft},
    {"storage", "storage_af", &PlantSample::storage_af}, {"spill", "spill_cfs", &PlantSample::spill_cfs},
    {"mw", "total_mw", &PlantSample::total_mw},
};

const FieldDef* field_named(const std::string& s) {
  for (const auto& f : kFields) {
    if (s == f.name || s == f.column) return &f;
  }
  return nullptr;
}

HydroScenario scenario_from(const json& j) {
  if (j.is_string()) return parse_scenario(j.get<std::string>());
  if (j.is_object()) {
    if (j.contains("start") || j.contains("end")) {
      const auto start = parse_timestamp(j.at("start").get<std::string>());
      const auto end = parse_timestamp(j.at("end").get<std::string>());
      if (!(start < end)) throw ValidationError("scenario window must have start < end");
      return HistoricalWindow{start, end};
    }
    return SyntheticCondition{parse_water_year_class(j.at("water_year").get<std::string>()),
                              parse_season(j.at("season").get<std::string>())};
  }
  throw ValidationError("scenario must be a string or an object");
}

}  // namespace

struct Service::Impl {
  struct DispatchJob {
    std::string id;
    std::string status = "queued";
    json request;
    json result;  // set once, when done
    json error;
  };
  struct TrainJob {
    std::string id;
    std::string plant;
    std::string status = "queued";
    double progress = 0.0;
    std::string stage;
    json report;
    json error;
  };

  Impl(Store& s, ModelRepository m, ServiceOptions o)
      : store(s), models(std::move(m)), options(std::move(o)), pool(options.workers, options.max_queued_jobs) {}

  Store& store;
  ModelRepository models;
  ServiceOptions options;

  std::mutex mutex;
  std::map<std::string, DispatchJob> dispatch_jobs;
  std::map<std::string, TrainJob> train_jobs;
  std::size_t next_run = 1;
  std::size_t next_job = 1;
  std::mutex persist_mutex;

  httplib::Server server;
  std::thread server_thread;
  bool routes_installed = false;

  JobPool pool;  // last: destroyed first, before the job tables it writes

  ApiResponse route(const std::string& method, const std::vector<std::string>& seg,
                    const std::multimap<std::string, std::string>& query, const std::string& body);
  ApiResponse plants();
  ApiResponse timeseries(const std::string& name, const std::multimap<std::string, std::string>& query);
  ApiResponse post_dispatch(const std::string& body);
  ApiResponse get_dispatch(const std::string& id);
  ApiResponse post_train(const std::string& body);
  ApiResponse get_train(const std::string& id);
  void install_routes();
};

Service::Service(Store& store, ModelRepository models, ServiceOptions options)
    : impl_(std::make_unique<Impl>(store, std::move(models), std::move(options))) {}

Service::~Service() { stop(); }

ApiResponse Service::handle(const std::string& method, const std::string& path,
                            const std::multimap<std::string, std::string>& query, const std::string& body) {
  try {
    return impl_->route(method, split_path(path), query, body);
  } catch (const Error& e) {
    return error_response(status_for(e.code()), std::string(to_string(e.code())), e.what());
  } catch (const std::exception& e) {
    return error_response(500, "internal", e.what());
  }
}

ApiResponse Service::Impl::route(const std::string& method, const std::vector<std::string>& seg,
                                 const std::multimap<std::string, std::string>& query, const std::string& body) {
  if (seg.empty() || seg[0] != "api") return error_response(404, "not_found", "unknown path");
  const bool get = method == "GET";
  const bool post = method == "POST";
  if (seg.size() == 2 && seg[1] == "health" && get) return {200, {{"status", "ok"}}};
  if (seg.size() == 2 && seg[1] == "plants" && get) return plants();
  if (seg.size() == 4 && seg[1] == "plants" && seg[3] == "timeseries" && get) return timeseries(seg[2], query);
  if (seg.size() == 2 && seg[1] == "dispatch" && post) return post_dispatch(body);
  if (seg.size() == 3 && seg[1] == "dispatch" && get) return get_dispatch(seg[2]);
  if (seg.size() == 2 && seg[1] == "train" && post) return post_train(body);
  if (seg.size() == 3 && seg[1] == "train" && get) return get_train(seg[2]);
  const bool known = (seg.size() >= 2 && (seg[1] == "plants" || seg[1] == "dispatch" || seg[1] == "train" ||
                                          seg[1] == "health"));
  if (known) return error_response(405, "method_not_allowed", method + " is not supported here");
  return error_response(404, "not_found", "unknown path");
}

ApiResponse Service::Impl::plants() {
  json list = json::array();
  for (const auto& p : store.plants()) {
    list.push_back({{"project_name", p.project_name},
                    {"latitude", p.latitude},
                    {"longitude", p.longitude},
                    {"area_number", p.area_number},
                    {"rated_head_ft", p.rated_head_ft},
                    {"unit_count", store.join_units_of(p.project_name).size()},
                    {"has_model", models.has(p.project_name)}});
  }
  return {200, {{"plants", list}}};
}

ApiResponse Service::Impl::timeseries(const std::string& name, const std::multimap<std::string, std::string>& query) {
  if (!store.plant(name) && !store.has_plant_data(name)) {
    return error_response(404, "not_found", "unknown plant '" + name + "'");
  }
  std::vector<const FieldDef*> fields;
  const std::string field_text = param(query, "fields").value_or("flow,head,storage,spill,mw");
  std::istringstream in(field_text);
  std::string f;
  while (std::getline(in, f, ',')) {
    if (f.empty()) continue;
    const auto* def = field_named(f);
    if (!def) return error_response(400, "validation", "unknown field '" + f + "'");
    if (std::find(fields.begin(), fields.end(), def) == fields.end()) fields.push_back(def);
  }
  if (fields.empty()) return error_response(400, "validation", "no field requested");

  Timestamp start, end;
  const auto start_text = param(query, "start");
  const auto end_text = param(query, "end");
  const auto range = store.plant_time_range(name);
  try {
    if (start_text) {
      start = parse_timestamp(*start_text);
    } else if (range) {
      start = range->first;
    }
    if (end_text) {
      end = parse_timestamp(*end_text);
    } else if (range) {
      end = range->second + Hours(1);
    }
  } catch (const ValidationError& e) {
    return error_response(400, "validation", e.what());
  }
  if ((start_text || end_text || range) && !(start < end)) {
    return error_response(400, "validation", "window start must precede end");
  }
  const auto first_slot = std::chrono::ceil<Hours>(start);
  const auto slots = start < end ? std::chrono::duration_cast<Hours>(std::chrono::ceil<Hours>(end) - first_slot).count() : 0;
  if (slots > static_cast<long long>(options.max_timeseries_hours)) {
    return error_response(400, "validation", "window spans " + std::to_string(slots) + " hours (limit " +
                                                 std::to_string(options.max_timeseries_hours) + ")");
  }

  std::map<long long, const PlantSample*> by_hour;
  const auto samples = start < end ? store.query_plant_window(name, start, end) : std::vector<PlantSample>{};
  for (const auto& s : samples) by_hour[s.timestamp.time_since_epoch().count() / 3600] = &s;

  json timestamps = json::array();
  json series = json::object();
  for (const auto* def : fields) series[def->name] = json::array();
  for (long long i = 0; i < slots; ++i) {
    const Timestamp t = Timestamp(first_slot) + Hours(i);
    if (!(t < end)) break;
    timestamps.push_back(format_timestamp(t));
    const auto it = by_hour.find(t.time_since_epoch().count() / 3600);
    for (const auto* def : fields) {
      const PlantSample* s = it == by_hour.end() ? nullptr : it->second;
      series[def->name].push_back(s && (s->*(def->member)) ? json(*(s->*(def->member))) : json(nullptr));
    }
  }
  json field_names = json::array();
  for (const auto* def : fields) field_names.push_back(def->name);
  return {200,
          {{"project", name},
           {"start", start < end ? json(format_timestamp(start)) : json(nullptr)},
           {"end", start < end ? json(format_timestamp(end)) : json(nullptr)},
           {"fields", field_names},
           {"timestamps", timestamps},
           {"series", series}}};
}

ApiResponse Service::Impl::post_dispatch(const std::string& body) {
  json j;
  try {
    j = json::parse(body);
  } catch (const json::exception& e) {
    return error_response(400, "validation", std::string("body is not JSON: ") + e.what());
  }
  if (!j.is_object()) return error_response(400, "validation", "body must be a JSON object");
  DispatchRequest request;
  try {
    if (!j.contains("plants") || !j["plants"].is_array() || j["plants"].empty()) {
      return error_response(400, "validation", "plants must be a nonempty array of names");
    }
    request.plants = j["plants"].get<std::vector<std::string>>();
    if (!j.contains("scenario")) return error_response(422, "validation", "scenario is required");
    request.scenario = scenario_from(j["scenario"]);
    if (j.contains("threshold") && !j["threshold"].is_null()) request.threshold = j["threshold"].get<double>();
    if (!(request.threshold > 0.0 && request.threshold <= kMaxPlausibleEfficiency)) {
      return error_response(422, "validation", "threshold must lie in (0, 1.05]");
    }
    if (j.contains("seed") && !j["seed"].is_null()) request.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("links")) {
      for (const auto& l : j["links"]) {
        request.links.push_back({l.at("upstream").get<std::string>(), l.at("downstream").get<std::string>()});
      }
    }
    if (j.contains("targets")) request.target_overrides = j["targets"].get<std::map<std::string, double>>();
  } catch (const Error& e) {
    return error_response(422, std::string(to_string(e.code())), e.what());
  } catch (const json::exception& e) {
    return error_response(422, "validation", std::string("malformed request: ") + e.what());
  }

  json unknown = json::array(), untrained = json::array();
  for (const auto& p : request.plants) {
    if (!store.plant(p)) {
      unknown.push_back(p);
    } else if (!models.has(p)) {
      untrained.push_back(p);
    }
  }
  if (!unknown.empty()) return error_response(422, "not_found", "unknown plant", {{"plants", unknown}});
  for (const auto& l : request.links) {
    const auto named = [&](const std::string& p) {
      return std::find(request.plants.begin(), request.plants.end(), p) != request.plants.end();
    };
    if (!named(l.upstream) || !named(l.downstream)) {
      return error_response(422, "validation", "links must join requested plants");
    }
  }
  if (!untrained.empty()) return error_response(409, "untrained", "no trained model", {{"plants", untrained}});

  std::string id;
  {
    std::lock_guard lock(mutex);
    char buf[32];
    std::snprintf(buf, sizeof buf, "run-%06zu", next_run++);
    id = buf;
    DispatchJob job;
    job.id = id;
    job.request = {{"plants", request.plants},
                   {"scenario", format_scenario(request.scenario)},
                   {"threshold", request.threshold},
                   {"seed", request.seed}};
    dispatch_jobs.emplace(id, std::move(job));
  }
  const bool queued = pool.submit([this, id, request] {
    {
      std::lock_guard lock(mutex);
      dispatch_jobs.at(id).status = "running";
    }
    json result, error;
    try {
      std::map<std::string, TrainedPlantModel> loaded;
      for (const auto& p : request.plants) loaded.emplace(p, models.load(p));
      const auto r = run_dispatch(store, loaded, request);
      json rows = json::array();
      for (const auto& row : r.rows) rows.push_back(to_json(row));
      json logs = json::array();
      for (const auto& p : r.plants) {
        auto l = to_json(p.correction);
        l["project"] = p.project;
        logs.push_back(std::move(l));
      }
      result = {{"rows", rows}, {"correction_log", logs}, {"export_csv", r.export_csv()}, {"manifest", r.manifest()}};
    } catch (const std::exception& e) {
      error = error_payload(e);
    }
    std::lock_guard lock(mutex);
    auto& job = dispatch_jobs.at(id);
    if (error.is_null()) {
      job.result = std::move(result);
      job.status = "done";
    } else {
      job.error = std::move(error);
      job.status = "failed";
    }
  });
  if (!queued) {
    std::lock_guard lock(mutex);
    dispatch_jobs.erase(id);
    return error_response(503, "busy", "job queue is full");
  }
  return {202, {{"run_id", id}, {"status", "queued"}}};
}

ApiResponse Service::Impl::get_dispatch(const std::string& id) {
  std::lock_guard lock(mutex);
  const auto it = dispatch_jobs.find(id);
  if (it == dispatch_jobs.end()) return error_response(404, "not_found", "unknown run '" + id + "'");
  const auto& job = it->second;
  json out{{"run_id", job.id}, {"status", job.status}, {"request", job.request}};
  if (job.status == "done") out.update(job.result);
  if (job.status == "failed") out["error"] = job.error;
  return {200, out};
}

ApiResponse Service::Impl::post_train(const std::string& body) {
  json j;
  try {
    j = json::parse(body);
  } catch (const json::exception& e) {
    return error_response(400, "validation", std::string("body is not JSON: ") + e.what());
  }
  if (!j.is_object() || !j.contains("plant") || !j["plant"].is_string()) {
    return error_response(400, "validation", "plant is required");
  }
  const std::string plant = j["plant"].get<std::string>();
  TrainConfig config;
  try {
    json merged = options.train_defaults.to_json();
    if (j.contains("config")) {
      if (!j["config"].is_object()) return error_response(400, "validation", "config must be an object");
      merged.update(j["config"]);
    }
    config = TrainConfig::from_json(merged);
  } catch (const Error& e) {
    return error_response(400, std::string(to_string(e.code())), e.what());
  } catch (const json::exception& e) {
    return error_response(400, "validation", std::string("malformed config: ") + e.what());
  }
  if (!store.plant(plant)) return error_response(422, "not_found", "unknown plant '" + plant + "'");

  std::string id;
  {
    std::lock_guard lock(mutex);
    for (const auto& [_, job] : train_jobs) {
      if (job.plant == plant && (job.status == "queued" || job.status == "running")) {
        return error_response(409, "conflict", "training already running for '" + plant + "'", {{"job_id", job.id}});
      }
    }
    char buf[32];
    std::snprintf(buf, sizeof buf, "train-%06zu", next_job++);
    id = buf;
    TrainJob job;
    job.id = id;
    job.plant = plant;
    train_jobs.emplace(id, std::move(job));
  }
  const bool queued = pool.submit([this, id, plant, config] {
    {
      std::lock_guard lock(mutex);
      train_jobs.at(id).status = "running";
    }
    json report, error;
    try {
      const auto model = train_plant_model(store, plant, config, [this, &id](double fraction, const std::string& stage) {
        std::lock_guard lock(mutex);
        auto& job = train_jobs.at(id);
        job.progress = fraction;
        job.stage = stage;
      });
      {
        std::lock_guard persist(persist_mutex);
        models.save(model);
      }
      report = model.report();
    } catch (const std::exception& e) {
      error = error_payload(e);
    }
    std::lock_guard lock(mutex);
    auto& job = train_jobs.at(id);
    if (error.is_null()) {
      job.report = std::move(report);
      job.progress = 1.0;
      job.status = "done";
    } else {
      job.error = std::move(error);
      job.status = "failed";
    }
  });
  if (!queued) {
    std::lock_guard lock(mutex);
    train_jobs.erase(id);
    return error_response(503, "busy", "job queue is full");
  }
  return {202, {{"job_id", id}, {"status", "queued"}}};
}

ApiResponse Service::Impl::get_train(const std::string& id) {
  std::lock_guard lock(mutex);
  const auto it = train_jobs.find(id);
  if (it == train_jobs.end()) return error_response(404, "not_found", "unknown training job '" + id + "'");
  const auto& job = it->second;
  json out{{"job_id", job.id}, {"plant", job.plant}, {"status", job.status}, {"progress", job.progress},
           {"stage", job.stage}};
  if (job.status == "done") out["report"] = job.report;
  if (job.status == "failed") out["error"] = job.error;
  return {200, out};
}

void Service::Impl::install_routes() {
  if (routes_installed) return;
  routes_installed = true;
  auto handler = [this](const std::string& method) {
    return [this, method](const httplib::Request& req, httplib::Response& res) {
      ApiResponse r;
      try {
        r = route(method, split_path(req.path), req.params, req.body);
      } catch (const Error& e) {
        r = error_response(status_for(e.code()), std::string(to_string(e.code())), e.what());
      } catch (const std::exception& e) {
        r = error_response(500, "internal", e.what());
      }
      res.status = r.status;
      res.set_content(r.body.dump(), "application/json");
    };
  };
  server.Get(R"(/.*)", handler("GET"));
  server.Post(R"(/.*)", handler("POST"));
}

bool Service::listen(const std::string& host, int port) {
  impl_->install_routes();
  return impl_->server.listen(host, port);
}

int Service::start_background(const std::string& host) {
  impl_->install_routes();
  const int port = impl_->server.bind_to_any_port(host);
  if (port <= 0) throw IoError("cannot bind an HTTP port on " + host);
  impl_->server_thread = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
  return port;
}

void Service::stop() {
  if (!impl_) return;
  impl_->server.stop();
  if (impl_->server_thread.joinable()) impl_->server_thread.join();
}

void Service::wait_idle() { impl_->pool.wait_idle(); }

}  // namespace hydat
