#include "cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "hydat/csv.hpp"
#include "hydat/datastore.hpp"
#include "hydat/dispatch.hpp"
#include "hydat/efficiency.hpp"
#include "hydat/error.hpp"
#include "hydat/hydrology.hpp"
#include "hydat/interdependency.hpp"
#include "hydat/pipeline.hpp"
#include "hydat/service.hpp"
#include "hydat/unitdispatch.hpp"

namespace hydat::cli {

namespace fs = std::filesystem;

namespace {

std::string table_name(TableKind k) {
  switch (k) {
    case TableKind::plant: return "Plant_Data";
    case TableKind::unit: return "Unit_Data";
    case TableKind::static_plant: return "Static_Plant_Data";
    case TableKind::static_unit: return "Static_Unit_Data";
    case TableKind::efficiency: return "Efficiency_Data";
  }
  return "?";
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open " + path.string() + " for writing");
  f << text;
  f.flush();
  if (!f) throw IoError("failed writing " + path.string());
}

fs::path model_dir_for(const std::string& db, const std::string& models) {
  return models.empty() ? default_model_dir(db) : fs::path(models);
}

struct IngestArgs {
  std::string db = "hydat.db";
  std::vector<std::string> files;
};

int cmd_ingest(const IngestArgs& a, std::istream& in, std::ostream& out) {
  Store store(a.db);
  std::vector<IngestSummary> all;
  if (a.files.empty()) {
    all = store.ingest_bundle(in);
  } else {
    for (const auto& f : a.files) {
      std::ifstream file(f, std::ios::binary);
      if (!file) throw IoError("cannot open " + f);
      const auto part = store.ingest_bundle(file);
      all.insert(all.end(), part.begin(), part.end());
    }
  }
  for (const auto& s : all) out << table_name(s.table) << ' ' << s.rows << '\n';
  return 0;
}

struct SynthArgs {
  std::uint64_t seed = 42;
  std::size_t hours = 2000;
  std::size_t lag = 2;
  double noise = 0.05;
  std::string start = "2013-01-01";
  std::string up = "UP";
  std::string down = "DOWN";
  std::string out;
};

int cmd_synth(const SynthArgs& a, std::ostream& out) {
  SyntheticCascadeConfig c;
  c.seed = a.seed;
  c.hours = a.hours;
  c.lag_hours = a.lag;
  c.noise_sigma = a.noise;
  c.start = parse_timestamp(a.start);
  c.upstream_name = a.up;
  c.downstream_name = a.down;
  const auto text = to_bundle_csv(generate_synthetic_cascade(c));
  if (a.out.empty()) {
    out << text;
  } else {
    write_text(a.out, text);
  }
  return 0;
}

struct EfficiencyArgs {
  std::string db = "hydat.db";
  std::vector<std::string> units;
  std::string plant;
  double threshold = kDefaultEfficiencyThreshold;
  std::string plot;
  std::string out;
};

int cmd_efficiency(const EfficiencyArgs& a, std::ostream& out, std::ostream& err) {
  Store store(a.db);
  std::vector<std::string> ids = a.units;
  const bool explicit_units = !ids.empty();
  if (ids.empty()) {
    const auto units = a.plant.empty() ? store.units() : store.join_units_of(a.plant);
    for (const auto& u : units) ids.push_back(u.unit_id);
    if (ids.empty()) throw NotFoundError(a.plant.empty() ? "store holds no units" : "plant '" + a.plant + "' has no units");
  }
  CurveOptions options;
  options.threshold = a.threshold;
  std::vector<EfficiencyPoint> exported;
  std::size_t built = 0;
  out << "unit_id,head_ft,points,slope,intercept,band_low_cfs,band_high_cfs,flagged,dropped\n";
  for (const auto& id : ids) {
    if (!store.unit(id)) throw NotFoundError("unknown unit '" + id + "'");
    std::vector<EfficiencyCurve> family;
    try {
      family = build_curve_family(id, unit_observations(store, id), options);
    } catch (const InsufficientDataError& e) {
      // Plant-wide runs skip idle units rather than abort.
      if (explicit_units) throw;
      err << "warning: " << e.what() << '\n';
      continue;
    }
    ++built;
    for (const auto& curve : family) {
      store.replace_efficiency(id, curve.points);
      exported.insert(exported.end(), curve.points.begin(), curve.points.end());
      out << csv::join({id, csv::fixed(curve.head_ft, 2), std::to_string(curve.points.size()),
                        csv::exact(curve.regression.slope), csv::exact(curve.regression.intercept),
                        curve.band ? csv::fixed(curve.band->low_cfs, 2) : "",
                        curve.band ? csv::fixed(curve.band->high_cfs, 2) : "",
                        std::to_string(curve.flagged_observations), std::to_string(curve.dropped_observations)})
          << '\n';
      if (!a.plot.empty()) {
        fs::create_directories(a.plot);
        std::string name = id + "_" + csv::fixed(curve.head_ft, 1) + "ft.svg";
        std::replace(name.begin(), name.end(), '/', '_');
        write_text(fs::path(a.plot) / name, curve_to_svg(curve));
      }
    }
  }
  if (built == 0) throw InsufficientDataError("no unit has enough observations for a curve");
  if (!a.out.empty()) write_text(a.out, to_csv(exported));
  return 0;
}

struct LagArgs {
  std::string db = "hydat.db";
  std::string up;
  std::string down;
  std::string season;
  std::size_t max_lag = kDefaultMaxLagHours;
  bool json = false;
};

int cmd_lag(const LagArgs& a, std::ostream& out, std::ostream& err) {
  Store store(a.db);
  const auto up = store.plant_samples(a.up);
  const auto down = store.plant_samples(a.down);
  if (up.empty()) throw NotFoundError("no plant data for '" + a.up + "'");
  if (down.empty()) throw NotFoundError("no plant data for '" + a.down + "'");
  std::vector<Season> seasons;
  if (a.season.empty()) {
    seasons.assign(std::begin(kAllSeasons), std::end(kAllSeasons));
  } else {
    seasons.push_back(parse_season(a.season));
  }
  nlohmann::json report = nlohmann::json::array();
  std::size_t ok = 0;
  if (!a.json) out << "season,best_lag_h,correlation,pairs\n";
  for (const auto s : seasons) {
    try {
      const auto profile = lag_scan(flow_series(up), flow_series(down), a.max_lag, s);
      ++ok;
      if (a.json) {
        nlohmann::json entry{{"season", std::string(to_string(s))},
                             {"best_lag_hours", profile.best_lag},
                             {"correlations", profile.correlations},
                             {"pairs", profile.overlap}};
        try {
          entry["link"] = to_json(align_and_fit(up, down, profile.best_lag, s));
        } catch (const Error& e) {
          entry["link"] = nullptr;
          entry["link_error"] = e.what();
        }
        report.push_back(std::move(entry));
      } else {
        out << to_string(s) << ',' << profile.best_lag << ',' << csv::fixed(profile.best_correlation(), 4) << ','
            << profile.overlap[profile.best_lag] << '\n';
      }
    } catch (const InsufficientDataError& e) {
      if (!a.season.empty()) throw;
      err << "warning: " << to_string(s) << " skipped: " << e.what() << '\n';
    }
  }
  if (ok == 0) throw InsufficientDataError("no season has enough overlapping samples");
  if (a.json) out << nlohmann::json{{"upstream", a.up}, {"downstream", a.down}, {"seasons", report}}.dump(2) << '\n';
  return 0;
}

struct TrainArgs {
  std::string db = "hydat.db";
  std::string plant;
  std::uint64_t seed = 42;
  std::size_t epochs = 200;
  double learning_rate = 1e-3;
  std::size_t batch = 32;
  std::vector<std::size_t> hidden;
  std::string out;
  std::string models;
};

int cmd_train(const TrainArgs& a, std::ostream& out) {
  Store store(a.db);
  TrainConfig config;
  config.seed = a.seed;
  config.epochs = a.epochs;
  config.learning_rate = a.learning_rate;
  config.batch_size = a.batch;
  if (!a.hidden.empty()) config.hidden = a.hidden;
  const auto model = train_plant_model(store, a.plant, config);
  fs::path where;
  if (!a.out.empty()) {
    save_model(model, a.out);
    where = a.out;
  } else {
    where = ModelRepository(model_dir_for(a.db, a.models)).save(model);
  }
  auto report = model.report();
  report["model_file"] = where.string();
  out << report.dump(2) << '\n';
  return 0;
}

struct DispatchArgs {
  std::string db = "hydat.db";
  std::vector<std::string> plants;
  std::string scenario;
  std::vector<std::string> model_files;
  std::string models;
  std::string out;
  double threshold = kDefaultEfficiencyThreshold;
  std::uint64_t seed = 42;
  double alpha = kDefaultDerateExponent;
  std::vector<std::string> links;
  std::vector<std::string> targets;
  std::string reference;
  std::string manifest;
};

int cmd_dispatch(const DispatchArgs& a, std::ostream& out) {
  Store store(a.db);
  DispatchRequest request;
  request.plants = a.plants;
  request.scenario = parse_scenario(a.scenario);
  request.threshold = a.threshold;
  request.seed = a.seed;
  request.alpha = a.alpha;
  for (const auto& l : a.links) {
    const auto colon = l.find(':');
    if (colon == std::string::npos || colon == 0 || colon + 1 == l.size()) {
      throw ValidationError("--link expects UPSTREAM:DOWNSTREAM, got '" + l + "'");
    }
    request.links.push_back({l.substr(0, colon), l.substr(colon + 1)});
  }
  for (const auto& t : a.targets) {
    const auto eq = t.rfind('=');
    if (eq == std::string::npos || eq == 0) throw ValidationError("--target expects PLANT=MW, got '" + t + "'");
    request.target_overrides[t.substr(0, eq)] = csv::parse_double(t.substr(eq + 1), 0, "--target");
  }
  if (!a.reference.empty()) {
    std::ifstream ref(a.reference, std::ios::binary);
    if (!ref) throw IoError("cannot open " + a.reference);
    request.reference_pgen = read_reference_pgen(ref);
  }

  std::map<std::string, TrainedPlantModel> models;
  for (const auto& f : a.model_files) {
    auto m = load_model(f);
    const std::string plant = m.plant;
    models.insert_or_assign(plant, std::move(m));
  }
  const ModelRepository repo(model_dir_for(a.db, a.models));
  for (const auto& p : a.plants) {
    if (!models.count(p)) models.emplace(p, repo.load(p));
  }

  const auto result = run_dispatch(store, models, request);
  if (a.out.empty()) {
    out << result.export_csv();
  } else {
    export_case(result.rows, a.out);
  }
  if (!a.manifest.empty()) write_text(a.manifest, result.manifest().dump(2) + "\n");
  return 0;
}

struct ExportArgs {
  std::string db = "hydat.db";
  std::string table;
  std::string plant;
  std::string out;
};

int cmd_export(const ExportArgs& a, std::ostream& out) {
  Store store(a.db);
  std::string text;
  if (a.table == "plant") {
    if (!a.plant.empty()) {
      text = to_csv(store.plant_samples(a.plant));
    } else {
      std::vector<PlantSample> all;
      for (const auto& p : store.plants()) {
        const auto s = store.plant_samples(p.project_name);
        all.insert(all.end(), s.begin(), s.end());
      }
      text = to_csv(all);
    }
  } else if (a.table == "unit") {
    std::vector<UnitSample> all;
    for (const auto& p : store.plants()) {
      if (!a.plant.empty() && p.project_name != a.plant) continue;
      const auto s = store.unit_samples_of(p.project_name);
      all.insert(all.end(), s.begin(), s.end());
    }
    text = to_csv(all);
  } else if (a.table == "static_plant") {
    text = to_csv(store.plants());
  } else if (a.table == "static_unit") {
    text = to_csv(a.plant.empty() ? store.units() : store.join_units_of(a.plant));
  } else {
    std::vector<EfficiencyPoint> all;
    for (const auto& u : a.plant.empty() ? store.units() : store.join_units_of(a.plant)) {
      const auto pts = store.efficiency_points(u.unit_id);
      all.insert(all.end(), pts.begin(), pts.end());
    }
    text = to_csv(all);
  }
  if (a.out.empty()) {
    out << text;
  } else {
    write_text(a.out, text);
  }
  return 0;
}

struct ServeArgs {
  std::string db = "hydat.db";
  std::string host = "0.0.0.0";
  int port = 8080;
  std::string models;
  std::size_t workers = 2;
};

int cmd_serve(const ServeArgs& a, std::ostream& out) {
  Store store(a.db);
  ServiceOptions options;
  options.workers = a.workers;
  Service service(store, ModelRepository(model_dir_for(a.db, a.models)), options);
  out << "listening on " << a.host << ':' << a.port << std::endl;
  if (!service.listen(a.host, a.port)) throw IoError("cannot listen on " + a.host + ":" + std::to_string(a.port));
  return 0;
}

}  // namespace

int run(const std::vector<std::string>& args, std::istream& in, std::ostream& out, std::ostream& err) {
  CLI::App app{"Hydropower dispatch pipeline: ingest, analyse, train, dispatch, serve", "hydat"};
  app.require_subcommand(1);

  IngestArgs ingest;
  auto* c_ingest = app.add_subcommand("ingest", "Load CSV files (or a stdin bundle) into the store");
  c_ingest->add_option("--db", ingest.db, "SQLite database file")->capture_default_str();
  c_ingest->add_option("files", ingest.files, "CSV files; each may hold several table sections");

  SynthArgs synth;
  auto* c_synth = app.add_subcommand("synth", "Write a synthetic two-plant cascade bundle");
  c_synth->add_option("--seed", synth.seed)->capture_default_str();
  c_synth->add_option("--hours", synth.hours)->capture_default_str()->check(CLI::PositiveNumber);
  c_synth->add_option("--lag", synth.lag, "Transport lag in hours")->capture_default_str();
  c_synth->add_option("--noise", synth.noise, "Downstream flow noise sigma")->capture_default_str()->check(CLI::NonNegativeNumber);
  c_synth->add_option("--start", synth.start, "First hour (UTC)")->capture_default_str();
  c_synth->add_option("--up", synth.up, "Upstream plant name")->capture_default_str();
  c_synth->add_option("--down", synth.down, "Downstream plant name")->capture_default_str();
  c_synth->add_option("--out", synth.out, "Output file instead of stdout");

  EfficiencyArgs eff;
  auto* c_eff = app.add_subcommand("efficiency", "Build and store efficiency curves");
  c_eff->add_option("--db", eff.db)->capture_default_str();
  c_eff->add_option("--unit", eff.units, "Unit id (repeatable)");
  c_eff->add_option("--plant", eff.plant, "All units of a plant");
  c_eff->add_option("--threshold", eff.threshold)->capture_default_str()->check(CLI::Range(0.0, 1.05));
  c_eff->add_option("--plot", eff.plot, "Directory for SVG curve plots");
  c_eff->add_option("--out", eff.out, "CSV file for the curve points");

  LagArgs lag;
  auto* c_lag = app.add_subcommand("lag", "Seasonal cross-correlation lag between two plants");
  c_lag->add_option("--db", lag.db)->capture_default_str();
  c_lag->add_option("--up", lag.up, "Upstream plant")->required();
  c_lag->add_option("--down", lag.down, "Downstream plant")->required();
  c_lag->add_option("--season", lag.season, "winter|spring|summer (default: all)");
  c_lag->add_option("--max-lag", lag.max_lag, "Largest lag in hours")->capture_default_str();
  c_lag->add_flag("--json", lag.json, "JSON report with the fitted link");

  TrainArgs train;
  auto* c_train = app.add_subcommand("train", "Train the unit-commitment model of a plant");
  c_train->add_option("--db", train.db)->capture_default_str();
  c_train->add_option("--plant", train.plant)->required();
  c_train->add_option("--seed", train.seed)->capture_default_str();
  c_train->add_option("--epochs", train.epochs)->capture_default_str()->check(CLI::PositiveNumber);
  c_train->add_option("--learning-rate", train.learning_rate)->capture_default_str()->check(CLI::PositiveNumber);
  c_train->add_option("--batch", train.batch)->capture_default_str()->check(CLI::PositiveNumber);
  c_train->add_option("--hidden", train.hidden, "Hidden layer widths")->delimiter(',');
  c_train->add_option("--out", train.out, "Model file (default: the model directory)");
  c_train->add_option("--models", train.models, "Model directory (default: <db>.models)");

  DispatchArgs disp;
  auto* c_disp = app.add_subcommand("dispatch", "Unit-level dispatch for a scenario");
  c_disp->add_option("--db", disp.db)->capture_default_str();
  c_disp->add_option("--plant", disp.plants, "Plant (repeatable)")->required();
  c_disp->add_option("--scenario", disp.scenario, "dry|avg|wet:winter|spring|summer or hist:START..END")->required();
  c_disp->add_option("--model", disp.model_files, "Model file (repeatable)");
  c_disp->add_option("--models", disp.models, "Model directory (default: <db>.models)");
  c_disp->add_option("--out", disp.out, "Planning-case CSV (default: stdout)");
  c_disp->add_option("--threshold", disp.threshold)->capture_default_str()->check(CLI::Range(0.0, 1.05));
  c_disp->add_option("--seed", disp.seed)->capture_default_str();
  c_disp->add_option("--alpha", disp.alpha, "Head derating exponent")->capture_default_str();
  c_disp->add_option("--link", disp.links, "Cascade link UPSTREAM:DOWNSTREAM (repeatable)");
  c_disp->add_option("--target", disp.targets, "User MW target PLANT=MW (repeatable)");
  c_disp->add_option("--reference", disp.reference, "CSV unit_id,pgen_mw of the reference case");
  c_disp->add_option("--manifest", disp.manifest, "Run manifest JSON file");

  ExportArgs exp;
  auto* c_exp = app.add_subcommand("export", "Write a store table as CSV");
  c_exp->add_option("--db", exp.db)->capture_default_str();
  c_exp->add_option("--table", exp.table)
      ->required()
      ->check(CLI::IsMember({"plant", "unit", "static_plant", "static_unit", "efficiency"}));
  c_exp->add_option("--plant", exp.plant, "Restrict to one plant");
  c_exp->add_option("--out", exp.out, "Output file (default: stdout)");

  ServeArgs serve;
  auto* c_serve = app.add_subcommand("serve", "Serve the JSON API");
  c_serve->add_option("--db", serve.db)->capture_default_str();
  c_serve->add_option("--host", serve.host)->capture_default_str();
  c_serve->add_option("--port", serve.port)->capture_default_str()->check(CLI::Range(1, 65535));
  c_serve->add_option("--models", serve.models, "Model directory (default: <db>.models)");
  c_serve->add_option("--workers", serve.workers)->capture_default_str()->check(CLI::PositiveNumber);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << '\n';
    const auto subs = app.get_subcommands();
    err << (subs.empty() ? app.help() : subs.front()->help());
    return 2;
  }

  try {
    if (c_ingest->parsed()) return cmd_ingest(ingest, in, out);
    if (c_synth->parsed()) return cmd_synth(synth, out);
    if (c_eff->parsed()) return cmd_efficiency(eff, out, err);
    if (c_lag->parsed()) return cmd_lag(lag, out, err);
    if (c_train->parsed()) return cmd_train(train, out);
    if (c_disp->parsed()) return cmd_dispatch(disp, out);
    if (c_exp->parsed()) return cmd_export(exp, out);
    if (c_serve->parsed()) return cmd_serve(serve, out);
  } catch (const Error& e) {
    err << "error: code=" << to_string(e.code()) << " message=" << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    err << "error: code=internal message=" << e.what() << '\n';
    return 1;
  }
  return 2;
}

}  // namespace hydat::cli
