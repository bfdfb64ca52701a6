#pragma once

#include <filesystem>
#include <istream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "hydat/efficiency.hpp"
#include "hydat/interdependency.hpp"
#include "hydat/unitdispatch.hpp"

namespace hydat {

inline constexpr double kDefaultDerateExponent = 1.5;

/// Head-derated unit capacity: nominal * min(1, (head / rated)^alpha).
/// Throws DomainError for a nonpositive head or rated head.
double pmax_available(double nominal_mw, double head_ft, double rated_head_ft,
                      double alpha = kDefaultDerateExponent);

enum class TargetSource { user, historical, recalibrated };
std::string_view to_string(TargetSource s) noexcept;

struct PlantTarget {
  std::string project;
  double target_mw = 0.0;
  double head_ft = 0.0;
  double storage_af = 0.0;
  TargetSource source = TargetSource::historical;

  bool operator==(const PlantTarget&) const = default;
};

/// Walks the link graph in topological order and replaces each downstream
/// target with its link's prediction from the upstream target and head,
/// clamped to [0, capacity_mw[downstream]] (no upper clamp when absent).
/// With several incoming links the one with the highest R^2 wins. Links
/// touching a plant without a target are ignored. Throws CycleError.
std::vector<PlantTarget> recalibrate_cascade(const std::vector<PlantTarget>& targets,
                                             const std::vector<CascadeLink>& links,
                                             const std::map<std::string, double>& capacity_mw = {});

struct CategoryAllocation {
  std::vector<double> unit_mw;  // per active unit, in input order
  double unserved_mw = 0.0;     // sum(unit_mw) + unserved_mw == cat_mw
};

/// Splits cat_mw equally, clamps at each unit's pmax_available and hands the
/// surplus to the unclamped units until nothing changes. Throws
/// InconsistencyError for positive cat_mw with no units.
CategoryAllocation allocate_category(double cat_mw, const std::vector<double>& pmax_available_mw);

struct UnitDispatch {
  std::string unit_id;
  std::string category;
  double mw = 0.0;
  double pmax_available_mw = 0.0;
  bool active = false;

  bool operator==(const UnitDispatch&) const = default;
};

struct UnitAllocation {
  std::vector<UnitDispatch> units;  // every unit of the spec, ordered by unit_id
  std::map<std::string, double> unserved_mw;  // per category label
};

/// Commits prediction.active_units units per category, preferring the highest
/// pmax_available and then the smallest unit_id, and loads them with
/// allocate_category. Units missing from `pmax_available_mw` cannot be
/// committed.
UnitAllocation allocate_units(const std::vector<CategoryPrediction>& predictions, const CategorySpec& spec,
                              const std::map<std::string, double>& pmax_available_mw);

struct CorrectionAction {
  std::string unit_id;
  std::string action;  // shift_to_band, absorb, deactivate, redistribute
  double before_mw = 0.0;
  double after_mw = 0.0;
};

struct CorrectionLog {
  std::vector<CorrectionAction> actions;
  std::vector<std::string> warnings;
  double target_mw = 0.0;    // sum of the input dispatch
  double final_mw = 0.0;     // sum of the corrected dispatch
  double residual_mw = 0.0;  // target_mw - final_mw
  std::vector<std::string> unresolved;  // active units still outside their band
  std::vector<std::string> unchecked;   // active units without a curve or band
};

struct CorrectionResult {
  std::vector<UnitDispatch> units;
  CorrectionLog log;
};

/// Efficient MW range of a unit: the band's flow edges mapped through the
/// curve's flow-to-power regression, capped at pmax_available.
struct MwBand {
  double low_mw = 0.0;
  double high_mw = 0.0;
};
std::optional<MwBand> mw_band(const EfficiencyCurve& curve, double threshold, double pmax_available_mw);

/// Moves active units whose implied flow leaves the efficient band to the
/// nearest band edge and lets in-band units absorb the MW change in
/// proportion to their headroom. When that fails the least-loaded offender is
/// switched off and its category redistributed; at most one round per unit.
/// `curves` maps unit_id to the curve at the operating head.
CorrectionResult validate_and_correct(std::vector<UnitDispatch> units,
                                      const std::map<std::string, EfficiencyCurve>& curves, double threshold);

struct DispatchRow {
  std::string project;
  std::string unit_id;
  double pgen_ref_mw = 0.0;
  double pmax_nominal_mw = 0.0;
  double head_ft = 0.0;
  double pgen_calculated_mw = 0.0;
  double pmax_available_mw = 0.0;

  bool operator==(const DispatchRow&) const = default;
};

inline constexpr std::string_view kCaseHeader =
    "Project,Unit ID,Pgen (MW),Pmax (MW),Head (ft),Pgen calculated (MW),Pmax available (MW)";

/// Planning-case CSV, rows sorted by (project, unit_id), values to 2 decimals.
std::string case_csv(std::vector<DispatchRow> rows);
void export_case(const std::vector<DispatchRow>& rows, const std::filesystem::path& path);
std::vector<DispatchRow> read_case(std::istream& in);

}  // namespace hydat
