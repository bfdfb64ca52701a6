#include "hydat/unitdispatch.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>

#include "hydat/error.hpp"
#include "hydat/hydrology.hpp"

namespace hydat {

namespace {

long long hour_key(Timestamp t) { return t.time_since_epoch().count() / 3600; }

std::size_t split_point(std::size_t n, double fraction) {
  if (n < 2) return n;
  auto k = static_cast<std::size_t>(std::floor(static_cast<double>(n) * fraction));
  return std::clamp<std::size_t>(k, 1, n - 1);
}

std::vector<std::vector<double>> input_rows(const std::vector<const TrainingRow*>& rows) {
  std::vector<std::vector<double>> out;
  out.reserve(rows.size());
  for (const auto* r : rows) out.emplace_back(r->inputs.begin(), r->inputs.end());
  return out;
}

void check_category(const std::vector<TrainingRow>& rows, std::size_t category) {
  for (const auto& r : rows) {
    if (category >= r.targets.size()) throw ValidationError("category index out of range");
  }
}

nlohmann::json interval_json(const ResidualInterval& ci) {
  return {{"q10", ci.q10},
          {"q90", ci.q90},
          {"width", ci.width()},
          {"target_mean", ci.target_mean},
          {"relative_width", ci.relative_width()}};
}

ResidualInterval interval_from(const nlohmann::json& j) {
  return {j.at("q10").get<double>(), j.at("q90").get<double>(), j.at("target_mean").get<double>()};
}

}  // namespace

std::size_t CategorySpec::unit_count() const {
  std::size_t n = 0;
  for (const auto& c : categories) n += c.unit_ids.size();
  return n;
}

std::optional<std::size_t> CategorySpec::category_of(const std::string& unit_id) const {
  for (std::size_t i = 0; i < categories.size(); ++i) {
    const auto& ids = categories[i].unit_ids;
    if (std::find(ids.begin(), ids.end(), unit_id) != ids.end()) return i;
  }
  return std::nullopt;
}

CategorySpec categorize_units(const std::vector<StaticUnit>& units, double tolerance) {
  if (units.empty()) throw ValidationError("cannot categorize an empty unit set");
  std::vector<const StaticUnit*> sorted;
  for (const auto& u : units) sorted.push_back(&u);
  std::stable_sort(sorted.begin(), sorted.end(), [](const StaticUnit* a, const StaticUnit* b) {
    if (a->nominal_pmax_mw != b->nominal_pmax_mw) return a->nominal_pmax_mw > b->nominal_pmax_mw;
    return a->unit_id < b->unit_id;
  });
  CategorySpec spec;
  spec.plant = units.front().project_name;
  for (const auto* u : sorted) {
    if (spec.categories.empty() ||
        (spec.categories.back().nominal_pmax_mw - u->nominal_pmax_mw) > tolerance * spec.categories.back().nominal_pmax_mw) {
      UnitCategory c;
      c.label = "C" + std::to_string(spec.categories.size() + 1);
      c.nominal_pmax_mw = u->nominal_pmax_mw;
      spec.categories.push_back(std::move(c));
    }
    spec.categories.back().unit_ids.push_back(u->unit_id);
  }
  for (auto& c : spec.categories) std::sort(c.unit_ids.begin(), c.unit_ids.end());
  return spec;
}

std::vector<TrainingRow> build_training_rows(const std::vector<PlantSample>& plant,
                                             const std::vector<UnitSample>& units, const CategorySpec& spec) {
  std::map<long long, std::vector<const UnitSample*>> by_hour;
  for (const auto& u : units) by_hour[hour_key(u.timestamp)].push_back(&u);

  std::vector<TrainingRow> rows;
  for (const auto& p : plant) {
    if (!p.total_mw || !p.head_ft || !p.storage_af) continue;
    const auto it = by_hour.find(hour_key(p.timestamp));
    if (it == by_hour.end()) continue;
    TrainingRow row;
    row.timestamp = p.timestamp;
    row.inputs = {*p.total_mw, *p.head_ft, *p.storage_af};
    row.targets.assign(spec.categories.size(), {});
    for (const auto* u : it->second) {
      if (!u->active()) continue;
      const auto c = spec.category_of(u->unit_id);
      if (!c) continue;
      auto& t = row.targets[*c];
      t.cat_mw += *u->mw;
      ++t.active_units;
    }
    for (auto& t : row.targets) {
      t.exist = t.active_units > 0;
      t.unit_mw = t.exist ? t.cat_mw / static_cast<double>(t.active_units) : 0.0;
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw InsufficientDataError("plant and unit records share no complete hour");
  std::sort(rows.begin(), rows.end(),
            [](const TrainingRow& a, const TrainingRow& b) { return a.timestamp < b.timestamp; });
  return rows;
}

SgdConfig TrainConfig::sgd(std::uint64_t seed_offset) const {
  return {seed + seed_offset, epochs, learning_rate, momentum, batch_size};
}

nlohmann::json TrainConfig::to_json() const {
  return {{"seed", seed},
          {"epochs", epochs},
          {"learning_rate", learning_rate},
          {"momentum", momentum},
          {"batch_size", batch_size},
          {"hidden", hidden},
          {"train_fraction", train_fraction},
          {"decision_threshold", decision_threshold}};
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
  TrainConfig c;
  c.seed = j.value("seed", c.seed);
  c.epochs = j.value("epochs", c.epochs);
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.momentum = j.value("momentum", c.momentum);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.hidden = j.value("hidden", c.hidden);
  c.train_fraction = j.value("train_fraction", c.train_fraction);
  c.decision_threshold = j.value("decision_threshold", c.decision_threshold);
  if (c.epochs == 0 || c.batch_size == 0) throw ValidationError("epochs and batch_size must be positive");
  if (!(c.learning_rate > 0.0)) throw ValidationError("learning_rate must be positive");
  if (!(c.train_fraction > 0.0 && c.train_fraction < 1.0)) throw ValidationError("train_fraction must lie in (0, 1)");
  if (!(c.decision_threshold > 0.0 && c.decision_threshold < 1.0)) {
    throw ValidationError("decision_threshold must lie in (0, 1)");
  }
  return c;
}

std::vector<std::size_t> layer_sizes(const TrainConfig& config, std::size_t outputs) {
  std::vector<std::size_t> sizes{3};
  sizes.insert(sizes.end(), config.hidden.begin(), config.hidden.end());
  sizes.push_back(outputs);
  return sizes;
}

ClassifierFit train_classifier(const std::vector<TrainingRow>& rows, std::size_t category, const TrainConfig& config,
                               const std::optional<Standardizer>& inputs, const EpochCallback& on_epoch) {
  check_category(rows, category);
  if (rows.size() < 2) throw InsufficientDataError("classifier needs at least two rows");
  std::vector<const TrainingRow*> all;
  for (const auto& r : rows) all.push_back(&r);
  const std::size_t cut = split_point(all.size(), config.train_fraction);
  const std::vector<const TrainingRow*> train(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(cut));
  const std::vector<const TrainingRow*> test(all.begin() + static_cast<std::ptrdiff_t>(cut), all.end());

  std::size_t positives = 0;
  for (const auto* r : train) positives += r->targets[category].exist ? 1 : 0;
  if (positives == 0 || positives == train.size()) {
    throw InsufficientDataError("training rows hold a single class for category " + std::to_string(category + 1) +
                                "; use a constant predictor");
  }

  ClassifierFit fit;
  fit.inputs = inputs ? *inputs : Standardizer::fit(input_rows(train));
  std::vector<std::vector<double>> x, y;
  for (const auto* r : train) {
    x.push_back(fit.inputs.apply(r->inputs));
    y.push_back({r->targets[category].exist ? 1.0 : 0.0});
  }
  fit.network = Mlp(layer_sizes(config, 1), Activation::logistic, config.seed);
  train_sgd(fit.network, x, y, Loss::binary_cross_entropy, config.sgd(), on_epoch);

  const auto& eval = test.empty() ? train : test;
  std::size_t correct = 0;
  for (const auto* r : eval) {
    const double p = fit.network.forward(fit.inputs.apply(r->inputs))[0];
    correct += ((p >= config.decision_threshold) == r->targets[category].exist) ? 1 : 0;
  }
  fit.accuracy = static_cast<double>(correct) / static_cast<double>(eval.size());
  fit.train_rows = train.size();
  fit.test_rows = test.size();
  return fit;
}

std::array<double, 2> RegressorFit::predict(const PlantInputs& x) const {
  const auto z = network.forward(inputs.apply(x));
  const auto y = outputs.invert(z);
  return {y[0], y[1]};
}

RegressorFit train_regressor(const std::vector<TrainingRow>& rows, std::size_t category, const TrainConfig& config,
                             const std::optional<Standardizer>& inputs, const EpochCallback& on_epoch) {
  check_category(rows, category);
  std::vector<const TrainingRow*> active;
  for (const auto& r : rows) {
    if (r.targets[category].exist) active.push_back(&r);
  }
  if (active.size() < kMinActiveRows) {
    throw InsufficientDataError("category " + std::to_string(category + 1) + " has " + std::to_string(active.size()) +
                                " active rows (need 50)");
  }
  const std::size_t cut = split_point(active.size(), config.train_fraction);
  const std::vector<const TrainingRow*> train(active.begin(), active.begin() + static_cast<std::ptrdiff_t>(cut));
  const std::vector<const TrainingRow*> test(active.begin() + static_cast<std::ptrdiff_t>(cut), active.end());

  RegressorFit fit;
  fit.inputs = inputs ? *inputs : Standardizer::fit(input_rows(train));
  std::vector<std::vector<double>> x, targets;
  for (const auto* r : train) {
    x.push_back(fit.inputs.apply(r->inputs));
    targets.push_back({r->targets[category].cat_mw, r->targets[category].unit_mw});
  }
  fit.outputs = Standardizer::fit(targets);
  std::vector<std::vector<double>> y;
  for (const auto& t : targets) y.push_back(fit.outputs.apply(t));
  fit.network = Mlp(layer_sizes(config, 2), Activation::identity, config.seed + 2);
  train_sgd(fit.network, x, y, Loss::mean_squared_error, config.sgd(2), on_epoch);

  const auto& eval = test.empty() ? train : test;
  for (std::size_t k = 0; k < 2; ++k) {
    std::vector<double> residuals;
    double mean = 0.0;
    for (const auto* r : eval) {
      const double truth = k == 0 ? r->targets[category].cat_mw : r->targets[category].unit_mw;
      residuals.push_back(fit.predict(r->inputs)[k] - truth);
      mean += truth;
    }
    fit.intervals[k].target_mean = mean / static_cast<double>(eval.size());
    fit.intervals[k].q10 = percentile(residuals, 10.0);
    fit.intervals[k].q90 = percentile(residuals, 90.0);
  }
  fit.train_rows = train.size();
  fit.test_rows = test.size();
  return fit;
}

std::optional<double> TrainedPlantModel::mean_accuracy() const {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& c : categories) {
    if (c.accuracy && c.classifier) {
      sum += *c.accuracy;
      ++n;
    }
  }
  if (n == 0) return std::nullopt;
  return sum / static_cast<double>(n);
}

nlohmann::json TrainedPlantModel::report() const {
  nlohmann::json cats = nlohmann::json::array();
  for (const auto& c : categories) {
    nlohmann::json j{{"label", c.category.label},
                     {"rows", c.rows},
                     {"active_rows", c.active_rows},
                     {"classifier", c.classifier ? "network" : "constant"},
                     {"regressor", c.regressor ? "network" : "constant"},
                     {"notes", c.notes}};
    j["accuracy"] = c.accuracy ? nlohmann::json(*c.accuracy) : nlohmann::json(nullptr);
    if (c.intervals) {
      j["ci80"] = {{"cat_mw", interval_json((*c.intervals)[0])}, {"unit_mw", interval_json((*c.intervals)[1])}};
    } else {
      j["ci80"] = nullptr;
    }
    cats.push_back(std::move(j));
  }
  const auto acc = mean_accuracy();
  return {{"plant", plant},
          {"rows", rows},
          {"accuracy", acc ? nlohmann::json(*acc) : nlohmann::json(nullptr)},
          {"categories", cats}};
}

nlohmann::json TrainedPlantModel::to_json() const {
  nlohmann::json cats = nlohmann::json::array();
  for (const auto& c : categories) {
    nlohmann::json j{{"label", c.category.label},
                     {"nominal_pmax_mw", c.category.nominal_pmax_mw},
                     {"unit_ids", c.category.unit_ids},
                     {"rows", c.rows},
                     {"active_rows", c.active_rows},
                     {"notes", c.notes}};
    if (c.classifier) {
      j["classifier"] = {{"network", c.classifier->to_json()}};
    } else {
      j["classifier"] = {{"constant_probability", c.constant_probability}};
    }
    if (c.regressor) {
      j["regressor"] = {{"network", c.regressor->to_json()}, {"output_normalization", c.regressor_outputs.to_json()}};
    } else {
      j["regressor"] = {{"constant_outputs", c.constant_outputs}};
    }
    j["accuracy"] = c.accuracy ? nlohmann::json(*c.accuracy) : nlohmann::json(nullptr);
    if (c.intervals) {
      j["ci80"] = nlohmann::json::array({interval_json((*c.intervals)[0]), interval_json((*c.intervals)[1])});
    } else {
      j["ci80"] = nullptr;
    }
    cats.push_back(std::move(j));
  }
  return {{"format", kModelFormat},
          {"version", kModelFormatVersion},
          {"plant", plant},
          {"rows", rows},
          {"config", config.to_json()},
          {"input_normalization", inputs.to_json()},
          {"categories", cats},
          {"report", report()}};
}

TrainedPlantModel TrainedPlantModel::from_json(const nlohmann::json& j) {
  if (!j.is_object() || j.value("format", std::string{}) != kModelFormat) {
    throw IncompatibleError("not a hydat model file");
  }
  const int version = j.at("version").get<int>();
  if (version != kModelFormatVersion) {
    throw IncompatibleError("model file version " + std::to_string(version) + " is not supported (expected " +
                            std::to_string(kModelFormatVersion) + ")");
  }
  try {
    TrainedPlantModel m;
    m.plant = j.at("plant").get<std::string>();
    m.rows = j.at("rows").get<std::size_t>();
    m.config = TrainConfig::from_json(j.at("config"));
    m.inputs = Standardizer::from_json(j.at("input_normalization"));
    m.spec.plant = m.plant;
    for (const auto& cj : j.at("categories")) {
      CategoryModel c;
      c.category.label = cj.at("label").get<std::string>();
      c.category.nominal_pmax_mw = cj.at("nominal_pmax_mw").get<double>();
      c.category.unit_ids = cj.at("unit_ids").get<std::vector<std::string>>();
      c.rows = cj.at("rows").get<std::size_t>();
      c.active_rows = cj.at("active_rows").get<std::size_t>();
      c.notes = cj.at("notes").get<std::vector<std::string>>();
      const auto& cls = cj.at("classifier");
      if (cls.contains("network")) {
        c.classifier = Mlp::from_json(cls.at("network"));
      } else {
        c.constant_probability = cls.at("constant_probability").get<double>();
      }
      const auto& reg = cj.at("regressor");
      if (reg.contains("network")) {
        c.regressor = Mlp::from_json(reg.at("network"));
        c.regressor_outputs = Standardizer::from_json(reg.at("output_normalization"));
      } else {
        c.constant_outputs = reg.at("constant_outputs").get<std::array<double, 2>>();
      }
      if (!cj.at("accuracy").is_null()) c.accuracy = cj.at("accuracy").get<double>();
      if (!cj.at("ci80").is_null()) {
        c.intervals = std::array<ResidualInterval, 2>{interval_from(cj.at("ci80")[0]), interval_from(cj.at("ci80")[1])};
      }
      m.spec.categories.push_back(c.category);
      m.categories.push_back(std::move(c));
    }
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw IncompatibleError(std::string("malformed model file: ") + e.what());
  }
}

TrainedPlantModel train_plant_model(const std::vector<StaticUnit>& units, const std::vector<PlantSample>& plant,
                                    const std::vector<UnitSample>& unit_samples, const TrainConfig& config,
                                    const TrainProgress& progress) {
  TrainedPlantModel model;
  model.spec = categorize_units(units);
  model.plant = model.spec.plant;
  model.config = config;
  const auto rows = build_training_rows(plant, unit_samples, model.spec);
  model.rows = rows.size();

  std::vector<std::vector<double>> train_inputs;
  const std::size_t cut = split_point(rows.size(), config.train_fraction);
  for (std::size_t i = 0; i < cut; ++i) train_inputs.emplace_back(rows[i].inputs.begin(), rows[i].inputs.end());
  model.inputs = Standardizer::fit(train_inputs);

  const std::size_t stages = 2 * model.spec.categories.size();
  std::size_t stage = 0;
  auto report = [&](const std::string& what) {
    return [&, what](std::size_t epoch, std::size_t epochs, double) {
      if (progress) {
        const double within = static_cast<double>(epoch) / static_cast<double>(std::max<std::size_t>(1, epochs));
        progress((static_cast<double>(stage) + within) / static_cast<double>(stages), what);
      }
    };
  };

  for (std::size_t k = 0; k < model.spec.categories.size(); ++k) {
    CategoryModel cm;
    cm.category = model.spec.categories[k];
    cm.rows = rows.size();
    std::size_t positives = 0;
    for (const auto& r : rows) positives += r.targets[k].exist ? 1 : 0;
    cm.active_rows = positives;

    // Each category trains from its own seed so categories are independent.
    TrainConfig cc = config;
    cc.seed = config.seed + 1000 * k;
    try {
      auto fit = train_classifier(rows, k, cc, model.inputs, report(cm.category.label + " classifier"));
      cm.classifier = std::move(fit.network);
      cm.accuracy = fit.accuracy;
    } catch (const InsufficientDataError& e) {
      cm.constant_probability = static_cast<double>(positives) / static_cast<double>(rows.size());
      std::size_t correct = 0;
      for (std::size_t i = cut; i < rows.size(); ++i) {
        correct += ((cm.constant_probability >= config.decision_threshold) == rows[i].targets[k].exist) ? 1 : 0;
      }
      if (rows.size() > cut) cm.accuracy = static_cast<double>(correct) / static_cast<double>(rows.size() - cut);
      cm.notes.push_back(std::string("constant classifier: ") + e.what());
    }
    ++stage;
    try {
      auto fit = train_regressor(rows, k, cc, model.inputs, report(cm.category.label + " regressor"));
      cm.regressor = std::move(fit.network);
      cm.regressor_outputs = std::move(fit.outputs);
      cm.intervals = fit.intervals;
    } catch (const InsufficientDataError& e) {
      double cat = 0.0, unit = 0.0;
      for (const auto& r : rows) {
        if (!r.targets[k].exist) continue;
        cat += r.targets[k].cat_mw;
        unit += r.targets[k].unit_mw;
      }
      if (positives > 0) cm.constant_outputs = {cat / static_cast<double>(positives), unit / static_cast<double>(positives)};
      cm.notes.push_back(std::string("constant regressor: ") + e.what());
    }
    ++stage;
    model.categories.push_back(std::move(cm));
  }
  if (progress) progress(1.0, "done");
  return model;
}

TrainedPlantModel train_plant_model(const Store& store, const std::string& plant, const TrainConfig& config,
                                    const TrainProgress& progress) {
  const auto units = store.join_units_of(plant);
  if (units.empty()) throw NotFoundError("plant '" + plant + "' has no units");
  return train_plant_model(units, store.plant_samples(plant), store.unit_samples_of(plant), config, progress);
}

void save_model(const TrainedPlantModel& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write model file " + path.string());
  out << model.to_json().dump(1) << '\n';
  if (!out) throw IoError("failed writing model file " + path.string());
}

TrainedPlantModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read model file " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw IncompatibleError("model file " + path.string() + " is not JSON: " + e.what());
  }
  return TrainedPlantModel::from_json(j);
}

CategoryPrediction decide_category(const std::string& label, double probability, double cat_mw, double unit_mw,
                                   std::size_t category_size, double threshold) {
  CategoryPrediction p;
  p.label = label;
  p.probability = probability;
  p.exist = probability >= threshold && category_size > 0;
  if (!p.exist) return p;
  p.cat_mw = std::max(0.0, cat_mw);
  p.unit_mw = std::max(0.0, unit_mw);
  double count = static_cast<double>(category_size);
  if (p.unit_mw > 0.0) count = std::round(p.cat_mw / p.unit_mw);
  p.active_units = static_cast<std::size_t>(std::clamp(count, 1.0, static_cast<double>(category_size)));
  return p;
}

PlantPrediction predict_categories(const TrainedPlantModel& model, const PlantInputs& inputs,
                                   std::optional<double> threshold) {
  static const char* names[] = {"total_mw", "head_ft", "storage_af"};
  PlantPrediction out;
  for (std::size_t i = 0; i < 3; ++i) {
    const double z = (inputs[i] - model.inputs.mean[i]) / model.inputs.stddev[i];
    if (std::abs(z) > 3.0) {
      char buf[160];
      std::snprintf(buf, sizeof buf, "%s = %.3f is %.2f sigma from the training mean", names[i], inputs[i], z);
      out.warnings.emplace_back(buf);
    }
  }
  const double cut = threshold.value_or(model.config.decision_threshold);
  const auto x = model.inputs.apply(inputs);
  for (const auto& c : model.categories) {
    const double p = c.classifier ? c.classifier->forward(x)[0] : c.constant_probability;
    std::array<double, 2> y = c.constant_outputs;
    if (p >= cut && c.regressor) {
      const auto z = c.regressor_outputs.invert(c.regressor->forward(x));
      y = {z[0], z[1]};
    }
    out.categories.push_back(decide_category(c.category.label, p, y[0], y[1], c.category.unit_ids.size(), cut));
  }
  return out;
}

}  // namespace hydat
