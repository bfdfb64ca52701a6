#pragma once

#include <array>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hydat/datastore.hpp"
#include "hydat/mlp.hpp"

namespace hydat {

inline constexpr double kCategoryTolerance = 0.01;
inline constexpr std::size_t kMinActiveRows = 50;
inline constexpr int kModelFormatVersion = 1;
inline constexpr const char* kModelFormat = "hydat-model";

struct UnitCategory {
  std::string label;  // C1, C2, ... in descending nominal power
  double nominal_pmax_mw = 0.0;
  std::vector<std::string> unit_ids;

  bool operator==(const UnitCategory&) const = default;
};

struct CategorySpec {
  std::string plant;
  std::vector<UnitCategory> categories;

  std::size_t unit_count() const;
  /// Index of the unit's category; nullopt for a foreign unit.
  std::optional<std::size_t> category_of(const std::string& unit_id) const;
  bool operator==(const CategorySpec&) const = default;
};

/// Groups units whose nominal power lies within `tolerance` (relative) of the
/// largest member of the group. Throws ValidationError for an empty set.
CategorySpec categorize_units(const std::vector<StaticUnit>& units, double tolerance = kCategoryTolerance);

using PlantInputs = std::array<double, 3>;  // total_mw, head_ft, storage_af

struct CategoryTarget {
  bool exist = false;
  double cat_mw = 0.0;
  double unit_mw = 0.0;  // mean over active units
  std::size_t active_units = 0;
};

struct TrainingRow {
  Timestamp timestamp;
  PlantInputs inputs{};
  std::vector<CategoryTarget> targets;  // one per category of the spec
};

/// One row per hour present in both tables with all three plant inputs
/// known. A unit without a sample in that hour counts as inactive.
/// Throws InsufficientDataError when the join is empty.
std::vector<TrainingRow> build_training_rows(const std::vector<PlantSample>& plant,
                                             const std::vector<UnitSample>& units, const CategorySpec& spec);

struct TrainConfig {
  std::uint64_t seed = 42;
  std::size_t epochs = 200;
  double learning_rate = 1e-3;
  double momentum = 0.9;
  std::size_t batch_size = 32;
  std::vector<std::size_t> hidden = {32, 32, 16, 8};
  double train_fraction = 0.8;  // chronological: the first rows train
  double decision_threshold = 0.5;

  SgdConfig sgd(std::uint64_t seed_offset = 0) const;
  nlohmann::json to_json() const;
  static TrainConfig from_json(const nlohmann::json& j);
};

/// Layer sizes for `outputs` outputs: 3, hidden..., outputs.
std::vector<std::size_t> layer_sizes(const TrainConfig& config, std::size_t outputs);

using TrainProgress = std::function<void(double fraction, const std::string& stage)>;

struct ClassifierFit {
  Mlp network;
  Standardizer inputs;
  double accuracy = 0.0;  // held-out
  std::size_t train_rows = 0;
  std::size_t test_rows = 0;
};

/// Binary cross-entropy training on the category's exist flag. Input
/// statistics come from `inputs` when given, else from the training split.
/// Throws InsufficientDataError when the training split holds a single class.
ClassifierFit train_classifier(const std::vector<TrainingRow>& rows, std::size_t category, const TrainConfig& config,
                               const std::optional<Standardizer>& inputs = std::nullopt,
                               const EpochCallback& on_epoch = {});

/// Residual spread of one regressor output on held-out rows.
struct ResidualInterval {
  double q10 = 0.0;
  double q90 = 0.0;
  double target_mean = 0.0;
  double width() const { return q90 - q10; }
  double relative_width() const { return target_mean != 0.0 ? width() / std::abs(target_mean) : 0.0; }
};

struct RegressorFit {
  Mlp network;  // outputs: standardized (cat_mw, unit_mw)
  Standardizer inputs;
  Standardizer outputs;
  std::array<ResidualInterval, 2> intervals{};  // cat_mw, unit_mw
  std::size_t train_rows = 0;
  std::size_t test_rows = 0;

  std::array<double, 2> predict(const PlantInputs& x) const;
};

/// Mean-squared-error training on rows where the category exists. Throws
/// InsufficientDataError below 50 such rows.
RegressorFit train_regressor(const std::vector<TrainingRow>& rows, std::size_t category, const TrainConfig& config,
                             const std::optional<Standardizer>& inputs = std::nullopt,
                             const EpochCallback& on_epoch = {});

struct CategoryModel {
  UnitCategory category;
  // Exactly one of network / constant is used per stage.
  std::optional<Mlp> classifier;
  double constant_probability = 0.0;
  std::optional<Mlp> regressor;
  Standardizer regressor_outputs;
  std::array<double, 2> constant_outputs{};  // mean (cat_mw, unit_mw) when no regressor
  std::optional<double> accuracy;
  std::optional<std::array<ResidualInterval, 2>> intervals;
  std::size_t rows = 0;
  std::size_t active_rows = 0;
  std::vector<std::string> notes;
};

struct TrainedPlantModel {
  std::string plant;
  CategorySpec spec;
  TrainConfig config;
  Standardizer inputs;  // from the training split of all rows
  std::vector<CategoryModel> categories;
  std::size_t rows = 0;

  /// Mean held-out accuracy over categories with a trained classifier.
  std::optional<double> mean_accuracy() const;
  nlohmann::json report() const;
  nlohmann::json to_json() const;
  static TrainedPlantModel from_json(const nlohmann::json& j);
};

/// Full two-step training for every category of a plant. A single-class
/// category gets a constant probability and a category with too few active
/// rows gets the mean outputs; both are noted in the report.
TrainedPlantModel train_plant_model(const std::vector<StaticUnit>& units, const std::vector<PlantSample>& plant,
                                    const std::vector<UnitSample>& unit_samples, const TrainConfig& config,
                                    const TrainProgress& progress = {});
TrainedPlantModel train_plant_model(const Store& store, const std::string& plant, const TrainConfig& config,
                                    const TrainProgress& progress = {});

void save_model(const TrainedPlantModel& model, const std::filesystem::path& path);
/// Throws IncompatibleError for another format or version, IoError when unreadable.
TrainedPlantModel load_model(const std::filesystem::path& path);

struct CategoryPrediction {
  std::string label;
  double probability = 0.0;
  bool exist = false;
  double cat_mw = 0.0;
  double unit_mw = 0.0;
  std::size_t active_units = 0;
};

/// Thresholds the probability and derives the active count as
/// round(cat_mw / unit_mw) clamped to [1, size]. A negative cat_mw is
/// clamped to zero.
CategoryPrediction decide_category(const std::string& label, double probability, double cat_mw, double unit_mw,
                                   std::size_t category_size, double threshold = 0.5);

struct PlantPrediction {
  std::vector<CategoryPrediction> categories;
  std::vector<std::string> warnings;  // inputs outside 3 sigma of training
};

PlantPrediction predict_categories(const TrainedPlantModel& model, const PlantInputs& inputs,
                                   std::optional<double> threshold = std::nullopt);

}  // namespace hydat
