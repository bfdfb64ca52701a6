#pragma once

#include <filesystem>
#include <istream>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <vector>

#include "hydat/time.hpp"

struct sqlite3;

namespace hydat {

/// Units above this output count as committed.
inline constexpr double kActivityThresholdMw = 0.5;

/// One hourly hydrology record for a plant. Missing telemetry stays empty.
struct PlantSample {
  std::string project_name;
  Timestamp timestamp;
  std::optional<double> flow_cfs;
  std::optional<double> head_ft;
  std::optional<double> storage_af;
  std::optional<double> spill_cfs;
  std::optional<double> total_mw;

  bool operator==(const PlantSample&) const = default;
};

struct UnitSample {
  std::string unit_id;
  Timestamp timestamp;
  std::optional<double> mw;

  bool active() const noexcept { return mw && *mw > kActivityThresholdMw; }
  bool operator==(const UnitSample&) const = default;
};

struct StaticPlant {
  std::string project_name;
  double latitude = 0.0;
  double longitude = 0.0;
  long long area_number = 0;
  double rated_head_ft = 0.0;

  bool operator==(const StaticPlant&) const = default;
};

struct StaticUnit {
  std::string project_name;
  std::string bus_name;
  long long bus_number = 0;
  std::string id;
  std::string unit_id;
  double nominal_pmax_mw = 0.0;
  std::optional<std::string> scada_bus_number;
  std::optional<std::string> scada_bus_id;

  bool operator==(const StaticUnit&) const = default;
};

struct EfficiencyPoint {
  std::string unit_id;
  double flow_cfs = 0.0;
  double head_ft = 0.0;
  double power_mw = 0.0;
  double efficiency = 0.0;
  bool estimated = false;

  bool operator==(const EfficiencyPoint&) const = default;
};

/// `"<bus_number>-<id>"`. Throws ValidationError on an empty id.
std::string derive_unit_id(long long bus_number, std::string_view id);

void validate(const PlantSample& s);
void validate(const StaticPlant& p);
void validate(const StaticUnit& u);

/// Exact CSV headers accepted by ingestion and written by export.
namespace headers {
inline constexpr std::string_view plant = "project_name,timestamp,flow_cfs,head_ft,storage_af,spill_cfs,total_mw";
inline constexpr std::string_view unit = "unit_id,timestamp,mw";
inline constexpr std::string_view static_plant = "project_name,latitude,longitude,area_number,rated_head_ft";
inline constexpr std::string_view static_unit =
    "project_name,bus_name,bus_number,id,nominal_pmax_mw,scada_bus_number,scada_bus_id";
inline constexpr std::string_view efficiency = "unit_id,flow_cfs,head_ft,power_mw,efficiency,estimated";
}  // namespace headers

enum class TableKind { plant, unit, static_plant, static_unit, efficiency };

std::optional<TableKind> table_for_header(std::string_view header_line);

struct IngestSummary {
  TableKind table;
  std::size_t rows = 0;
};

/// Single-file SQLite store holding the six tables Plant_Data, Unit_Data,
/// Static_Plant_Data, Static_Unit_Data, Efficiency_Raw_Data and
/// Efficiency_Estimated_Data. Writes take an exclusive lock; reads share.
class Store {
 public:
  /// Opens or creates the database. ":memory:" gives a private in-memory store.
  explicit Store(const std::filesystem::path& path);
  ~Store();
  Store(const Store&) = delete;
  Store& operator=(const Store&) = delete;

  // Ingestion. Each call is one transaction: on error nothing is written.
  // The returned count is the number of distinct keys written (duplicate keys
  // within the input collapse, last row wins).
  std::size_t ingest_plant_csv(const std::filesystem::path& path);
  std::size_t ingest_unit_csv(const std::filesystem::path& path);
  std::size_t ingest_static_plant_csv(const std::filesystem::path& path);
  std::size_t ingest_static_unit_csv(const std::filesystem::path& path);
  std::size_t ingest_plant_csv(std::istream& in);
  std::size_t ingest_unit_csv(std::istream& in);
  std::size_t ingest_static_plant_csv(std::istream& in);
  std::size_t ingest_static_unit_csv(std::istream& in);
  std::size_t ingest_efficiency_csv(std::istream& in);

  /// Reads a stream holding one or more CSV sections, each introduced by one of
  /// the table headers, and routes every section to its table.
  std::vector<IngestSummary> ingest_bundle(std::istream& in);

  void upsert(const std::vector<StaticPlant>& plants);
  void upsert(const std::vector<StaticUnit>& units);
  void upsert(const std::vector<PlantSample>& samples);
  void upsert(const std::vector<UnitSample>& samples);
  /// Replaces every stored point of the unit at the points' head.
  void replace_efficiency(const std::string& unit_id, const std::vector<EfficiencyPoint>& points);
  void erase_plant_hours(const std::string& project, Timestamp start, Timestamp end);

  // Queries.
  std::vector<StaticPlant> plants() const;
  std::optional<StaticPlant> plant(const std::string& project) const;
  std::vector<StaticUnit> units() const;
  std::optional<StaticUnit> unit(const std::string& unit_id) const;
  /// Units of a plant ordered by unit_id; empty for an unknown plant.
  std::vector<StaticUnit> join_units_of(const std::string& project) const;

  bool has_plant_data(const std::string& project) const;
  /// Samples with start <= t < end in ascending time. Throws NotFoundError for
  /// a project with neither static nor time-series records.
  std::vector<PlantSample> query_plant_window(const std::string& project, Timestamp start,
                                              Timestamp end) const;
  std::vector<PlantSample> plant_samples(const std::string& project) const;
  std::optional<std::pair<Timestamp, Timestamp>> plant_time_range(const std::string& project) const;

  std::vector<UnitSample> query_unit_window(const std::string& unit_id, Timestamp start,
                                            Timestamp end) const;
  /// All unit samples of a plant's units, ordered by (timestamp, unit_id).
  std::vector<UnitSample> unit_samples_of(const std::string& project) const;
  std::vector<UnitSample> unit_samples_of(const std::string& project, Timestamp start,
                                          Timestamp end) const;

  std::vector<EfficiencyPoint> efficiency_points(const std::string& unit_id) const;

  std::size_t count_plant_rows() const;
  std::size_t count_unit_rows() const;

 private:
  void exec(const char* sql) const;
  void require_units_exist(const std::vector<std::string>& unit_ids) const;
  template <typename Rows>
  void write(const Rows& rows);
  void upsert_locked(const std::vector<PlantSample>& samples);
  void upsert_locked(const std::vector<UnitSample>& samples);
  void upsert_locked(const std::vector<StaticPlant>& plants);
  void upsert_locked(const std::vector<StaticUnit>& units);

  sqlite3* db_ = nullptr;
  mutable std::shared_mutex mutex_;
};

// Stateless CSV parsing, shared by the store and by tests.
std::vector<PlantSample> parse_plant_csv(std::istream& in);
std::vector<UnitSample> parse_unit_csv(std::istream& in);
std::vector<StaticPlant> parse_static_plant_csv(std::istream& in);
std::vector<StaticUnit> parse_static_unit_csv(std::istream& in);
std::vector<EfficiencyPoint> parse_efficiency_csv(std::istream& in);

std::string to_csv(const std::vector<PlantSample>& samples);
std::string to_csv(const std::vector<UnitSample>& samples);
std::string to_csv(const std::vector<StaticPlant>& plants);
std::string to_csv(const std::vector<StaticUnit>& units);
std::string to_csv(const std::vector<EfficiencyPoint>& points);

}  // namespace hydat
