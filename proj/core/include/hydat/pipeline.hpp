#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hydat/datastore.hpp"
#include "hydat/dispatch.hpp"
#include "hydat/hydrology.hpp"
#include "hydat/unitdispatch.hpp"

namespace hydat {

/// Trained models kept as one JSON file per plant under a directory.
class ModelRepository {
 public:
  explicit ModelRepository(std::filesystem::path dir) : dir_(std::move(dir)) {}

  const std::filesystem::path& dir() const { return dir_; }
  std::filesystem::path path_for(const std::string& plant) const;
  bool has(const std::string& plant) const;
  TrainedPlantModel load(const std::string& plant) const;
  std::filesystem::path save(const TrainedPlantModel& model) const;

 private:
  std::filesystem::path dir_;
};

/// Default model directory for a database file: "<db>.models".
std::filesystem::path default_model_dir(const std::filesystem::path& db_path);

struct LinkSpec {
  std::string upstream;
  std::string downstream;
};

struct DispatchRequest {
  std::vector<std::string> plants;
  HydroScenario scenario = SyntheticCondition{};
  double threshold = kDefaultEfficiencyThreshold;
  std::uint64_t seed = 42;
  double alpha = kDefaultDerateExponent;
  std::size_t max_lag_hours = kDefaultMaxLagHours;
  std::vector<LinkSpec> links;
  /// Reference Pgen per unit_id from an existing planning case. Units not
  /// listed use their mean observed output over the scenario window.
  std::map<std::string, double> reference_pgen;
  /// User MW targets per plant, replacing the historical window mean.
  std::map<std::string, double> target_overrides;
};

struct PlantRun {
  std::string project;
  Timestamp window_start;
  Timestamp window_end;
  PlantTarget initial;
  PlantTarget target;
  double capacity_mw = 0.0;
  PlantPrediction prediction;
  std::map<std::string, double> unserved_mw;
  CorrectionLog correction;
};

struct DispatchResult {
  DispatchRequest request;
  std::vector<CascadeLink> links;
  std::vector<PlantRun> plants;
  std::vector<DispatchRow> rows;
  std::vector<nlohmann::json> model_info;

  std::string export_csv() const { return case_csv(rows); }
  nlohmann::json manifest() const;
};

nlohmann::json to_json(const CorrectionLog& log);
nlohmann::json to_json(const CascadeLink& link);
nlohmann::json to_json(const DispatchRow& row);

/// Targets from scenario-window means, optional cascade recalibration, model
/// prediction, allocation, efficiency correction and planning-case rows.
/// Throws NotFoundError for an unknown plant or a plant without a model.
DispatchResult run_dispatch(const Store& store, const std::map<std::string, TrainedPlantModel>& models,
                            const DispatchRequest& request);

/// Reads `unit_id,pgen_mw` rows.
std::map<std::string, double> read_reference_pgen(std::istream& in);

}  // namespace hydat
