#include "hydat/datastore.hpp"

#include <sqlite3.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <mutex>
#include <set>
#include <sstream>

#include "hydat/csv.hpp"
#include "hydat/error.hpp"

namespace hydat {

namespace {

constexpr const char* kSchema = R"sql(
CREATE TABLE IF NOT EXISTS Static_Plant_Data (
  project_name  TEXT PRIMARY KEY,
  latitude      REAL NOT NULL,
  longitude     REAL NOT NULL,
  area_number   INTEGER NOT NULL,
  rated_head_ft REAL NOT NULL
);
CREATE TABLE IF NOT EXISTS Static_Unit_Data (
  unit_id          TEXT PRIMARY KEY,
  project_name     TEXT NOT NULL,
  bus_name         TEXT NOT NULL,
  bus_number       INTEGER NOT NULL,
  id               TEXT NOT NULL,
  nominal_pmax_mw  REAL NOT NULL,
  scada_bus_number TEXT,
  scada_bus_id     TEXT
);
CREATE INDEX IF NOT EXISTS Static_Unit_Data_project ON Static_Unit_Data(project_name);
CREATE TABLE IF NOT EXISTS Plant_Data (
  project_name TEXT NOT NULL,
  timestamp    TEXT NOT NULL,
  flow_cfs     REAL,
  head_ft      REAL,
  storage_af   REAL,
  spill_cfs    REAL,
  total_mw     REAL,
  PRIMARY KEY (project_name, timestamp)
);
CREATE TABLE IF NOT EXISTS Unit_Data (
  unit_id   TEXT NOT NULL,
  timestamp TEXT NOT NULL,
  mw        REAL,
  active    INTEGER NOT NULL,
  PRIMARY KEY (unit_id, timestamp)
);
CREATE TABLE IF NOT EXISTS Efficiency_Raw_Data (
  unit_id    TEXT NOT NULL,
  flow_cfs   REAL NOT NULL,
  head_ft    REAL NOT NULL,
  power_mw   REAL NOT NULL,
  efficiency REAL NOT NULL,
  PRIMARY KEY (unit_id, head_ft, flow_cfs)
);
CREATE TABLE IF NOT EXISTS Efficiency_Estimated_Data (
  unit_id    TEXT NOT NULL,
  flow_cfs   REAL NOT NULL,
  head_ft    REAL NOT NULL,
  power_mw   REAL NOT NULL,
  efficiency REAL NOT NULL,
  PRIMARY KEY (unit_id, head_ft, flow_cfs)
);
)sql";

class Statement {
 public:
  Statement(sqlite3* db, const char* sql) : db_(db) {
    if (sqlite3_prepare_v2(db, sql, -1, &stmt_, nullptr) != SQLITE_OK) {
      throw IoError(std::string("sqlite prepare failed: ") + sqlite3_errmsg(db));
    }
  }
  ~Statement() { sqlite3_finalize(stmt_); }
  Statement(const Statement&) = delete;
  Statement& operator=(const Statement&) = delete;

  Statement& bind(int i, const std::string& v) {
    check(sqlite3_bind_text(stmt_, i, v.c_str(), static_cast<int>(v.size()), SQLITE_TRANSIENT));
    return *this;
  }
  Statement& bind(int i, double v) {
    check(sqlite3_bind_double(stmt_, i, v));
    return *this;
  }
  Statement& bind(int i, long long v) {
    check(sqlite3_bind_int64(stmt_, i, v));
    return *this;
  }
  Statement& bind(int i, const std::optional<double>& v) {
    if (v) return bind(i, *v);
    check(sqlite3_bind_null(stmt_, i));
    return *this;
  }
  Statement& bind(int i, const std::optional<std::string>& v) {
    if (v) return bind(i, *v);
    check(sqlite3_bind_null(stmt_, i));
    return *this;
  }

  /// True while rows remain.
  bool step() {
    const int rc = sqlite3_step(stmt_);
    if (rc == SQLITE_ROW) return true;
    if (rc == SQLITE_DONE) return false;
    throw IoError(std::string("sqlite step failed: ") + sqlite3_errmsg(db_));
  }
  void run() {
    step();
    reset();
  }
  void reset() {
    sqlite3_reset(stmt_);
    sqlite3_clear_bindings(stmt_);
  }

  std::string text(int col) const {
    const auto* p = sqlite3_column_text(stmt_, col);
    return p ? std::string(reinterpret_cast<const char*>(p)) : std::string();
  }
  std::optional<std::string> optional_text(int col) const {
    if (sqlite3_column_type(stmt_, col) == SQLITE_NULL) return std::nullopt;
    return text(col);
  }
  double real(int col) const { return sqlite3_column_double(stmt_, col); }
  long long integer(int col) const { return sqlite3_column_int64(stmt_, col); }
  std::optional<double> optional_real(int col) const {
    if (sqlite3_column_type(stmt_, col) == SQLITE_NULL) return std::nullopt;
    return real(col);
  }

 private:
  void check(int rc) const {
    if (rc != SQLITE_OK) throw IoError(std::string("sqlite bind failed: ") + sqlite3_errmsg(db_));
  }
  sqlite3* db_;
  sqlite3_stmt* stmt_ = nullptr;
};

class Transaction {
 public:
  explicit Transaction(sqlite3* db) : db_(db) { sqlite3_exec(db_, "BEGIN IMMEDIATE", nullptr, nullptr, nullptr); }
  ~Transaction() {
    if (!done_) sqlite3_exec(db_, "ROLLBACK", nullptr, nullptr, nullptr);
  }
  void commit() {
    char* err = nullptr;
    if (sqlite3_exec(db_, "COMMIT", nullptr, nullptr, &err) != SQLITE_OK) {
      std::string msg = err ? err : "commit failed";
      sqlite3_free(err);
      throw IoError(msg);
    }
    done_ = true;
  }

 private:
  sqlite3* db_;
  bool done_ = false;
};

struct Line {
  std::size_t number;
  std::string text;
};

std::string strip_bom(std::string s) {
  if (s.size() >= 3 && static_cast<unsigned char>(s[0]) == 0xEF &&
      static_cast<unsigned char>(s[1]) == 0xBB && static_cast<unsigned char>(s[2]) == 0xBF) {
    s.erase(0, 3);
  }
  return s;
}

std::vector<Line> read_lines(std::istream& in) {
  std::vector<Line> lines;
  std::string text;
  std::size_t number = 0;
  while (std::getline(in, text)) {
    ++number;
    if (!text.empty() && text.back() == '\r') text.pop_back();
    if (number == 1) text = strip_bom(std::move(text));
    if (csv::trim(text).empty()) continue;
    lines.push_back({number, std::move(text)});
  }
  return lines;
}

std::string line_tag(std::size_t line) { return "line " + std::to_string(line) + ": "; }

/// Body rows of a section whose first line must equal `header`.
std::vector<std::pair<std::size_t, std::vector<std::string>>> section_rows(
    const std::vector<Line>& lines, std::string_view header) {
  std::vector<std::pair<std::size_t, std::vector<std::string>>> rows;
  if (lines.empty()) throw ValidationError("missing CSV header '" + std::string(header) + "'");
  if (csv::trim(lines.front().text) != header) {
    throw ValidationError(line_tag(lines.front().number) + "expected header '" + std::string(header) +
                          "', got '" + lines.front().text + "'");
  }
  const std::size_t columns = csv::split_record(header).size();
  for (std::size_t i = 1; i < lines.size(); ++i) {
    auto fields = csv::split_record(lines[i].text);
    if (fields.size() != columns) {
      throw ValidationError(line_tag(lines[i].number) + "expected " + std::to_string(columns) +
                            " columns, got " + std::to_string(fields.size()));
    }
    rows.emplace_back(lines[i].number, std::move(fields));
  }
  return rows;
}

Timestamp parse_hour(const std::string& field, std::size_t line) {
  Timestamp t;
  try {
    t = parse_timestamp(csv::trim(field));
  } catch (const ValidationError& e) {
    throw ValidationError(line_tag(line) + e.what());
  }
  if (!is_hour_aligned(t)) {
    throw ValidationError(line_tag(line) + "timestamp " + field + " is not on a whole hour");
  }
  return t;
}

template <typename T>
void with_line(std::size_t line, const T& record) {
  try {
    validate(record);
  } catch (const ValidationError& e) {
    throw ValidationError(line_tag(line) + e.what());
  }
}

std::vector<PlantSample> parse_plant_lines(const std::vector<Line>& lines) {
  std::vector<PlantSample> out;
  for (auto& [line, f] : section_rows(lines, headers::plant)) {
    PlantSample s;
    s.project_name = csv::trim(f[0]);
    s.timestamp = parse_hour(f[1], line);
    s.flow_cfs = csv::parse_optional_double(f[2], line, "flow_cfs");
    s.head_ft = csv::parse_optional_double(f[3], line, "head_ft");
    s.storage_af = csv::parse_optional_double(f[4], line, "storage_af");
    s.spill_cfs = csv::parse_optional_double(f[5], line, "spill_cfs");
    s.total_mw = csv::parse_optional_double(f[6], line, "total_mw");
    with_line(line, s);
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<UnitSample> parse_unit_lines(const std::vector<Line>& lines) {
  std::vector<UnitSample> out;
  for (auto& [line, f] : section_rows(lines, headers::unit)) {
    UnitSample s;
    s.unit_id = csv::trim(f[0]);
    if (s.unit_id.empty()) throw ValidationError(line_tag(line) + "unit_id is empty");
    s.timestamp = parse_hour(f[1], line);
    s.mw = csv::parse_optional_double(f[2], line, "mw");
    if (s.mw && *s.mw < 0.0) throw ValidationError(line_tag(line) + "mw must be >= 0");
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<StaticPlant> parse_static_plant_lines(const std::vector<Line>& lines) {
  std::vector<StaticPlant> out;
  for (auto& [line, f] : section_rows(lines, headers::static_plant)) {
    StaticPlant p;
    p.project_name = csv::trim(f[0]);
    p.latitude = csv::parse_double(f[1], line, "latitude");
    p.longitude = csv::parse_double(f[2], line, "longitude");
    p.area_number = csv::parse_integer(f[3], line, "area_number");
    p.rated_head_ft = csv::parse_double(f[4], line, "rated_head_ft");
    with_line(line, p);
    out.push_back(std::move(p));
  }
  return out;
}

std::optional<std::string> optional_field(const std::string& field) {
  auto t = csv::trim(field);
  if (t.empty() || t == "-") return std::nullopt;
  return t;
}

std::vector<StaticUnit> parse_static_unit_lines(const std::vector<Line>& lines) {
  std::vector<StaticUnit> out;
  for (auto& [line, f] : section_rows(lines, headers::static_unit)) {
    StaticUnit u;
    u.project_name = csv::trim(f[0]);
    u.bus_name = csv::trim(f[1]);
    u.bus_number = csv::parse_integer(f[2], line, "bus_number");
    u.id = csv::trim(f[3]);
    u.nominal_pmax_mw = csv::parse_double(f[4], line, "nominal_pmax_mw");
    u.scada_bus_number = optional_field(f[5]);
    u.scada_bus_id = optional_field(f[6]);
    try {
      u.unit_id = derive_unit_id(u.bus_number, u.id);
    } catch (const ValidationError& e) {
      throw ValidationError(line_tag(line) + e.what());
    }
    with_line(line, u);
    out.push_back(std::move(u));
  }
  return out;
}

bool parse_flag(const std::string& field, std::size_t line) {
  const auto t = csv::trim(field);
  if (t == "1" || t == "true") return true;
  if (t == "0" || t == "false") return false;
  throw ValidationError(line_tag(line) + "estimated must be 0/1 or true/false");
}

std::vector<EfficiencyPoint> parse_efficiency_lines(const std::vector<Line>& lines) {
  std::vector<EfficiencyPoint> out;
  for (auto& [line, f] : section_rows(lines, headers::efficiency)) {
    EfficiencyPoint p;
    p.unit_id = csv::trim(f[0]);
    p.flow_cfs = csv::parse_double(f[1], line, "flow_cfs");
    p.head_ft = csv::parse_double(f[2], line, "head_ft");
    p.power_mw = csv::parse_double(f[3], line, "power_mw");
    p.efficiency = csv::parse_double(f[4], line, "efficiency");
    p.estimated = parse_flag(f[5], line);
    if (p.efficiency <= 0.0 || p.efficiency > 1.05) {
      throw ValidationError(line_tag(line) + "efficiency outside (0, 1.05]");
    }
    out.push_back(std::move(p));
  }
  return out;
}

template <typename T, typename KeyFn>
std::vector<T> last_wins(std::vector<T> rows, KeyFn key) {
  std::map<decltype(key(rows.front())), std::size_t> index;
  std::vector<T> out;
  for (auto& r : rows) {
    auto k = key(r);
    auto it = index.find(k);
    if (it == index.end()) {
      index.emplace(std::move(k), out.size());
      out.push_back(std::move(r));
    } else {
      out[it->second] = std::move(r);
    }
  }
  return out;
}

std::vector<PlantSample> dedup(std::vector<PlantSample> v) {
  if (v.empty()) return v;
  return last_wins(std::move(v), [](const PlantSample& s) { return std::make_pair(s.project_name, s.timestamp); });
}
std::vector<UnitSample> dedup(std::vector<UnitSample> v) {
  if (v.empty()) return v;
  return last_wins(std::move(v), [](const UnitSample& s) { return std::make_pair(s.unit_id, s.timestamp); });
}
std::vector<StaticPlant> dedup(std::vector<StaticPlant> v) {
  if (v.empty()) return v;
  return last_wins(std::move(v), [](const StaticPlant& p) { return p.project_name; });
}
std::vector<StaticUnit> dedup(std::vector<StaticUnit> v) {
  if (v.empty()) return v;
  return last_wins(std::move(v), [](const StaticUnit& u) { return u.unit_id; });
}

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  return in;
}

PlantSample read_plant_row(const Statement& st) {
  PlantSample s;
  s.project_name = st.text(0);
  s.timestamp = parse_timestamp(st.text(1));
  s.flow_cfs = st.optional_real(2);
  s.head_ft = st.optional_real(3);
  s.storage_af = st.optional_real(4);
  s.spill_cfs = st.optional_real(5);
  s.total_mw = st.optional_real(6);
  return s;
}

StaticUnit read_unit_row(const Statement& st) {
  StaticUnit u;
  u.unit_id = st.text(0);
  u.project_name = st.text(1);
  u.bus_name = st.text(2);
  u.bus_number = st.integer(3);
  u.id = st.text(4);
  u.nominal_pmax_mw = st.real(5);
  u.scada_bus_number = st.optional_text(6);
  u.scada_bus_id = st.optional_text(7);
  return u;
}

constexpr const char* kUnitColumns =
    "unit_id, project_name, bus_name, bus_number, id, nominal_pmax_mw, scada_bus_number, scada_bus_id";

std::string opt(const std::optional<double>& v) { return v ? csv::exact(*v) : std::string(); }

}  // namespace

std::string derive_unit_id(long long bus_number, std::string_view id) {
  if (id.empty()) throw ValidationError("unit identifier must not be empty");
  return std::to_string(bus_number) + "-" + std::string(id);
}

void validate(const PlantSample& s) {
  if (s.project_name.empty()) throw ValidationError("project_name is empty");
  if (!is_hour_aligned(s.timestamp)) throw ValidationError("timestamp is not on a whole hour");
  if (s.flow_cfs && *s.flow_cfs < 0.0) throw ValidationError("flow_cfs must be >= 0");
  if (s.spill_cfs && *s.spill_cfs < 0.0) throw ValidationError("spill_cfs must be >= 0");
  if (s.head_ft && *s.head_ft <= 0.0) throw ValidationError("head_ft must be > 0");
  if (s.storage_af && *s.storage_af < 0.0) throw ValidationError("storage_af must be >= 0");
  if (s.total_mw && *s.total_mw < 0.0) throw ValidationError("total_mw must be >= 0");
}

void validate(const StaticPlant& p) {
  if (p.project_name.empty()) throw ValidationError("project_name is empty");
  if (p.latitude < -90.0 || p.latitude > 90.0) throw ValidationError("latitude outside [-90, 90]");
  if (p.longitude < -180.0 || p.longitude > 180.0) throw ValidationError("longitude outside [-180, 180]");
  if (!(p.rated_head_ft > 0.0)) throw ValidationError("rated_head_ft must be > 0");
}

void validate(const StaticUnit& u) {
  if (u.project_name.empty()) throw ValidationError("project_name is empty");
  if (u.unit_id != derive_unit_id(u.bus_number, u.id)) {
    throw ValidationError("unit_id '" + u.unit_id + "' does not match bus_number-id");
  }
  if (!(u.nominal_pmax_mw > 0.0)) throw ValidationError("nominal_pmax_mw must be > 0");
}

std::optional<TableKind> table_for_header(std::string_view header_line) {
  const std::string h = csv::trim(header_line);
  if (h == headers::plant) return TableKind::plant;
  if (h == headers::unit) return TableKind::unit;
  if (h == headers::static_plant) return TableKind::static_plant;
  if (h == headers::static_unit) return TableKind::static_unit;
  if (h == headers::efficiency) return TableKind::efficiency;
  return std::nullopt;
}

std::vector<PlantSample> parse_plant_csv(std::istream& in) { return parse_plant_lines(read_lines(in)); }
std::vector<UnitSample> parse_unit_csv(std::istream& in) { return parse_unit_lines(read_lines(in)); }
std::vector<StaticPlant> parse_static_plant_csv(std::istream& in) {
  return parse_static_plant_lines(read_lines(in));
}
std::vector<StaticUnit> parse_static_unit_csv(std::istream& in) {
  return parse_static_unit_lines(read_lines(in));
}
std::vector<EfficiencyPoint> parse_efficiency_csv(std::istream& in) {
  return parse_efficiency_lines(read_lines(in));
}

std::string to_csv(const std::vector<PlantSample>& samples) {
  std::string out = std::string(headers::plant) + "\n";
  for (const auto& s : samples) {
    out += csv::join({s.project_name, format_timestamp(s.timestamp), opt(s.flow_cfs), opt(s.head_ft),
                      opt(s.storage_af), opt(s.spill_cfs), opt(s.total_mw)});
    out += "\n";
  }
  return out;
}

std::string to_csv(const std::vector<UnitSample>& samples) {
  std::string out = std::string(headers::unit) + "\n";
  for (const auto& s : samples) {
    out += csv::join({s.unit_id, format_timestamp(s.timestamp), opt(s.mw)}) + "\n";
  }
  return out;
}

std::string to_csv(const std::vector<StaticPlant>& plants) {
  std::string out = std::string(headers::static_plant) + "\n";
  for (const auto& p : plants) {
    out += csv::join({p.project_name, csv::exact(p.latitude), csv::exact(p.longitude),
                      std::to_string(p.area_number), csv::exact(p.rated_head_ft)}) +
           "\n";
  }
  return out;
}

std::string to_csv(const std::vector<StaticUnit>& units) {
  std::string out = std::string(headers::static_unit) + "\n";
  for (const auto& u : units) {
    out += csv::join({u.project_name, u.bus_name, std::to_string(u.bus_number), u.id,
                      csv::exact(u.nominal_pmax_mw), u.scada_bus_number.value_or(""),
                      u.scada_bus_id.value_or("")}) +
           "\n";
  }
  return out;
}

std::string to_csv(const std::vector<EfficiencyPoint>& points) {
  std::string out = std::string(headers::efficiency) + "\n";
  for (const auto& p : points) {
    out += csv::join({p.unit_id, csv::exact(p.flow_cfs), csv::exact(p.head_ft), csv::exact(p.power_mw),
                      csv::exact(p.efficiency), p.estimated ? "1" : "0"}) +
           "\n";
  }
  return out;
}

Store::Store(const std::filesystem::path& path) {
  const int flags = SQLITE_OPEN_READWRITE | SQLITE_OPEN_CREATE | SQLITE_OPEN_FULLMUTEX;
  if (sqlite3_open_v2(path.string().c_str(), &db_, flags, nullptr) != SQLITE_OK) {
    std::string msg = db_ ? sqlite3_errmsg(db_) : "out of memory";
    sqlite3_close(db_);
    throw IoError("cannot open store " + path.string() + ": " + msg);
  }
  sqlite3_busy_timeout(db_, 5000);
  exec(kSchema);
}

Store::~Store() { sqlite3_close(db_); }

void Store::exec(const char* sql) const {
  char* err = nullptr;
  if (sqlite3_exec(db_, sql, nullptr, nullptr, &err) != SQLITE_OK) {
    std::string msg = err ? err : "sqlite error";
    sqlite3_free(err);
    throw IoError(msg);
  }
}

void Store::require_units_exist(const std::vector<std::string>& unit_ids) const {
  std::set<std::string> orphans;
  Statement st(db_, "SELECT 1 FROM Static_Unit_Data WHERE unit_id = ?1");
  for (const auto& id : std::set<std::string>(unit_ids.begin(), unit_ids.end())) {
    st.bind(1, id);
    if (!st.step()) orphans.insert(id);
    st.reset();
  }
  if (!orphans.empty()) {
    std::string list;
    for (const auto& id : orphans) list += (list.empty() ? "" : ", ") + id;
    throw ValidationError("unknown unit_id (no Static_Unit_Data record): " + list);
  }
}

void Store::upsert_locked(const std::vector<StaticPlant>& plants) {
  Statement st(db_,
               "INSERT OR REPLACE INTO Static_Plant_Data VALUES (?1, ?2, ?3, ?4, ?5)");
  for (const auto& p : plants) {
    validate(p);
    st.bind(1, p.project_name).bind(2, p.latitude).bind(3, p.longitude).bind(4, p.area_number).bind(5, p.rated_head_ft);
    st.run();
  }
}

void Store::upsert_locked(const std::vector<StaticUnit>& units) {
  std::set<std::string> missing;
  {
    Statement q(db_, "SELECT 1 FROM Static_Plant_Data WHERE project_name = ?1");
    for (const auto& u : units) {
      q.bind(1, u.project_name);
      if (!q.step()) missing.insert(u.project_name);
      q.reset();
    }
  }
  if (!missing.empty()) {
    std::string list;
    for (const auto& p : missing) list += (list.empty() ? "" : ", ") + p;
    throw ValidationError("unknown project_name (no Static_Plant_Data record): " + list);
  }
  Statement st(db_, "INSERT OR REPLACE INTO Static_Unit_Data VALUES (?1, ?2, ?3, ?4, ?5, ?6, ?7, ?8)");
  for (const auto& u : units) {
    validate(u);
    st.bind(1, u.unit_id).bind(2, u.project_name).bind(3, u.bus_name).bind(4, u.bus_number).bind(5, u.id);
    st.bind(6, u.nominal_pmax_mw).bind(7, u.scada_bus_number).bind(8, u.scada_bus_id);
    st.run();
  }
}

void Store::upsert_locked(const std::vector<PlantSample>& samples) {
  Statement st(db_, "INSERT OR REPLACE INTO Plant_Data VALUES (?1, ?2, ?3, ?4, ?5, ?6, ?7)");
  for (const auto& s : samples) {
    validate(s);
    st.bind(1, s.project_name).bind(2, format_timestamp(s.timestamp)).bind(3, s.flow_cfs).bind(4, s.head_ft);
    st.bind(5, s.storage_af).bind(6, s.spill_cfs).bind(7, s.total_mw);
    st.run();
  }
}

void Store::upsert_locked(const std::vector<UnitSample>& samples) {
  std::vector<std::string> ids;
  ids.reserve(samples.size());
  for (const auto& s : samples) ids.push_back(s.unit_id);
  require_units_exist(ids);
  Statement st(db_, "INSERT OR REPLACE INTO Unit_Data VALUES (?1, ?2, ?3, ?4)");
  for (const auto& s : samples) {
    if (!is_hour_aligned(s.timestamp)) throw ValidationError("unit timestamp is not on a whole hour");
    if (s.mw && *s.mw < 0.0) throw ValidationError("mw must be >= 0");
    st.bind(1, s.unit_id).bind(2, format_timestamp(s.timestamp)).bind(3, s.mw).bind(4, static_cast<long long>(s.active()));
    st.run();
  }
}

template <typename Rows>
void Store::write(const Rows& rows) {
  std::unique_lock lock(mutex_);
  Transaction tx(db_);
  upsert_locked(rows);
  tx.commit();
}

void Store::upsert(const std::vector<StaticPlant>& plants) { write(plants); }
void Store::upsert(const std::vector<StaticUnit>& units) { write(units); }
void Store::upsert(const std::vector<PlantSample>& samples) { write(samples); }
void Store::upsert(const std::vector<UnitSample>& samples) { write(samples); }

std::size_t Store::ingest_plant_csv(std::istream& in) {
  auto rows = dedup(parse_plant_csv(in));
  upsert(rows);
  return rows.size();
}
std::size_t Store::ingest_unit_csv(std::istream& in) {
  auto rows = dedup(parse_unit_csv(in));
  upsert(rows);
  return rows.size();
}
std::size_t Store::ingest_static_plant_csv(std::istream& in) {
  auto rows = dedup(parse_static_plant_csv(in));
  upsert(rows);
  return rows.size();
}
std::size_t Store::ingest_static_unit_csv(std::istream& in) {
  auto rows = dedup(parse_static_unit_csv(in));
  upsert(rows);
  return rows.size();
}
std::size_t Store::ingest_efficiency_csv(std::istream& in) {
  auto points = parse_efficiency_csv(in);
  std::map<std::string, std::vector<EfficiencyPoint>> by_unit;
  for (auto& p : points) by_unit[p.unit_id].push_back(p);
  for (const auto& [unit, pts] : by_unit) replace_efficiency(unit, pts);
  return points.size();
}

std::size_t Store::ingest_plant_csv(const std::filesystem::path& path) {
  auto in = open_input(path);
  return ingest_plant_csv(in);
}
std::size_t Store::ingest_unit_csv(const std::filesystem::path& path) {
  auto in = open_input(path);
  return ingest_unit_csv(in);
}
std::size_t Store::ingest_static_plant_csv(const std::filesystem::path& path) {
  auto in = open_input(path);
  return ingest_static_plant_csv(in);
}
std::size_t Store::ingest_static_unit_csv(const std::filesystem::path& path) {
  auto in = open_input(path);
  return ingest_static_unit_csv(in);
}

std::vector<IngestSummary> Store::ingest_bundle(std::istream& in) {
  const auto lines = read_lines(in);
  std::vector<std::pair<TableKind, std::vector<Line>>> sections;
  for (const auto& line : lines) {
    if (auto kind = table_for_header(line.text)) {
      sections.emplace_back(*kind, std::vector<Line>{line});
    } else if (sections.empty()) {
      throw ValidationError(line_tag(line.number) + "unrecognized CSV header '" + line.text + "'");
    } else {
      sections.back().second.push_back(line);
    }
  }
  // Parse every section before writing so a bad row anywhere aborts the batch.
  std::vector<IngestSummary> summary;
  std::vector<StaticPlant> plants;
  std::vector<StaticUnit> units;
  std::vector<PlantSample> plant_rows;
  std::vector<UnitSample> unit_rows;
  std::vector<EfficiencyPoint> eff_rows;
  for (const auto& [kind, section] : sections) {
    std::size_t n = 0;
    switch (kind) {
      case TableKind::static_plant: {
        auto v = parse_static_plant_lines(section);
        n = v.size();
        plants.insert(plants.end(), v.begin(), v.end());
        break;
      }
      case TableKind::static_unit: {
        auto v = parse_static_unit_lines(section);
        n = v.size();
        units.insert(units.end(), v.begin(), v.end());
        break;
      }
      case TableKind::plant: {
        auto v = parse_plant_lines(section);
        n = v.size();
        plant_rows.insert(plant_rows.end(), v.begin(), v.end());
        break;
      }
      case TableKind::unit: {
        auto v = parse_unit_lines(section);
        n = v.size();
        unit_rows.insert(unit_rows.end(), v.begin(), v.end());
        break;
      }
      case TableKind::efficiency: {
        auto v = parse_efficiency_lines(section);
        n = v.size();
        eff_rows.insert(eff_rows.end(), v.begin(), v.end());
        break;
      }
    }
    summary.push_back({kind, n});
  }
  {
    std::unique_lock lock(mutex_);
    Transaction tx(db_);
    upsert_locked(dedup(std::move(plants)));
    upsert_locked(dedup(std::move(units)));
    upsert_locked(dedup(std::move(plant_rows)));
    upsert_locked(dedup(std::move(unit_rows)));
    tx.commit();
  }
  if (!eff_rows.empty()) {
    std::map<std::string, std::vector<EfficiencyPoint>> by_unit;
    for (auto& p : eff_rows) by_unit[p.unit_id].push_back(p);
    for (const auto& [unit, pts] : by_unit) replace_efficiency(unit, pts);
  }
  return summary;
}

void Store::replace_efficiency(const std::string& unit_id, const std::vector<EfficiencyPoint>& points) {
  std::unique_lock lock(mutex_);
  require_units_exist({unit_id});
  Transaction tx(db_);
  std::set<double> heads;
  for (const auto& p : points) {
    if (p.unit_id != unit_id) throw ValidationError("efficiency point for a different unit");
    if (!(p.efficiency > 0.0)) throw ValidationError("efficiency must be > 0");
    heads.insert(p.head_ft);
  }
  for (const char* table : {"Efficiency_Raw_Data", "Efficiency_Estimated_Data"}) {
    const std::string del = std::string("DELETE FROM ") + table + " WHERE unit_id = ?1 AND head_ft = ?2";
    Statement st(db_, del.c_str());
    for (double h : heads) {
      st.bind(1, unit_id).bind(2, h);
      st.run();
    }
  }
  Statement raw(db_, "INSERT OR REPLACE INTO Efficiency_Raw_Data VALUES (?1, ?2, ?3, ?4, ?5)");
  Statement est(db_, "INSERT OR REPLACE INTO Efficiency_Estimated_Data VALUES (?1, ?2, ?3, ?4, ?5)");
  for (const auto& p : points) {
    auto& st = p.estimated ? est : raw;
    st.bind(1, p.unit_id).bind(2, p.flow_cfs).bind(3, p.head_ft).bind(4, p.power_mw).bind(5, p.efficiency);
    st.run();
  }
  tx.commit();
}

void Store::erase_plant_hours(const std::string& project, Timestamp start, Timestamp end) {
  std::unique_lock lock(mutex_);
  Statement st(db_, "DELETE FROM Plant_Data WHERE project_name = ?1 AND timestamp >= ?2 AND timestamp < ?3");
  st.bind(1, project).bind(2, format_timestamp(start)).bind(3, format_timestamp(end));
  st.run();
}

std::vector<StaticPlant> Store::plants() const {
  std::shared_lock lock(mutex_);
  std::vector<StaticPlant> out;
  Statement st(db_, "SELECT project_name, latitude, longitude, area_number, rated_head_ft "
                    "FROM Static_Plant_Data ORDER BY project_name");
  while (st.step()) out.push_back({st.text(0), st.real(1), st.real(2), st.integer(3), st.real(4)});
  return out;
}

std::optional<StaticPlant> Store::plant(const std::string& project) const {
  std::shared_lock lock(mutex_);
  Statement st(db_, "SELECT project_name, latitude, longitude, area_number, rated_head_ft "
                    "FROM Static_Plant_Data WHERE project_name = ?1");
  st.bind(1, project);
  if (!st.step()) return std::nullopt;
  return StaticPlant{st.text(0), st.real(1), st.real(2), st.integer(3), st.real(4)};
}

std::vector<StaticUnit> Store::units() const {
  std::shared_lock lock(mutex_);
  std::vector<StaticUnit> out;
  const std::string sql = std::string("SELECT ") + kUnitColumns + " FROM Static_Unit_Data ORDER BY unit_id";
  Statement st(db_, sql.c_str());
  while (st.step()) out.push_back(read_unit_row(st));
  return out;
}

std::optional<StaticUnit> Store::unit(const std::string& unit_id) const {
  std::shared_lock lock(mutex_);
  const std::string sql = std::string("SELECT ") + kUnitColumns + " FROM Static_Unit_Data WHERE unit_id = ?1";
  Statement st(db_, sql.c_str());
  st.bind(1, unit_id);
  if (!st.step()) return std::nullopt;
  return read_unit_row(st);
}

std::vector<StaticUnit> Store::join_units_of(const std::string& project) const {
  std::shared_lock lock(mutex_);
  std::vector<StaticUnit> out;
  const std::string sql = std::string("SELECT ") + kUnitColumns +
                          " FROM Static_Unit_Data WHERE project_name = ?1 ORDER BY unit_id";
  Statement st(db_, sql.c_str());
  st.bind(1, project);
  while (st.step()) out.push_back(read_unit_row(st));
  return out;
}

bool Store::has_plant_data(const std::string& project) const {
  std::shared_lock lock(mutex_);
  Statement st(db_, "SELECT 1 FROM Plant_Data WHERE project_name = ?1 LIMIT 1");
  st.bind(1, project);
  if (st.step()) return true;
  Statement st2(db_, "SELECT 1 FROM Static_Plant_Data WHERE project_name = ?1");
  st2.bind(1, project);
  return st2.step();
}

std::vector<PlantSample> Store::query_plant_window(const std::string& project, Timestamp start,
                                                   Timestamp end) const {
  if (start > end) throw ValidationError("window start is after end");
  if (!has_plant_data(project)) throw NotFoundError("unknown project '" + project + "'");
  std::shared_lock lock(mutex_);
  std::vector<PlantSample> out;
  Statement st(db_, "SELECT * FROM Plant_Data WHERE project_name = ?1 AND timestamp >= ?2 AND timestamp < ?3 "
                    "ORDER BY timestamp");
  st.bind(1, project).bind(2, format_timestamp(start)).bind(3, format_timestamp(end));
  while (st.step()) out.push_back(read_plant_row(st));
  return out;
}

std::vector<PlantSample> Store::plant_samples(const std::string& project) const {
  if (!has_plant_data(project)) throw NotFoundError("unknown project '" + project + "'");
  std::shared_lock lock(mutex_);
  std::vector<PlantSample> out;
  Statement st(db_, "SELECT * FROM Plant_Data WHERE project_name = ?1 ORDER BY timestamp");
  st.bind(1, project);
  while (st.step()) out.push_back(read_plant_row(st));
  return out;
}

std::optional<std::pair<Timestamp, Timestamp>> Store::plant_time_range(const std::string& project) const {
  std::shared_lock lock(mutex_);
  Statement st(db_, "SELECT MIN(timestamp), MAX(timestamp) FROM Plant_Data WHERE project_name = ?1");
  st.bind(1, project);
  if (!st.step() || !st.optional_text(0)) return std::nullopt;
  return std::make_pair(parse_timestamp(st.text(0)), parse_timestamp(st.text(1)));
}

std::vector<UnitSample> Store::query_unit_window(const std::string& unit_id, Timestamp start,
                                                 Timestamp end) const {
  std::shared_lock lock(mutex_);
  std::vector<UnitSample> out;
  Statement st(db_, "SELECT unit_id, timestamp, mw FROM Unit_Data WHERE unit_id = ?1 AND timestamp >= ?2 "
                    "AND timestamp < ?3 ORDER BY timestamp");
  st.bind(1, unit_id).bind(2, format_timestamp(start)).bind(3, format_timestamp(end));
  while (st.step()) out.push_back({st.text(0), parse_timestamp(st.text(1)), st.optional_real(2)});
  return out;
}

std::vector<UnitSample> Store::unit_samples_of(const std::string& project) const {
  std::shared_lock lock(mutex_);
  std::vector<UnitSample> out;
  Statement st(db_, "SELECT d.unit_id, d.timestamp, d.mw FROM Unit_Data d JOIN Static_Unit_Data s "
                    "ON d.unit_id = s.unit_id WHERE s.project_name = ?1 ORDER BY d.timestamp, d.unit_id");
  st.bind(1, project);
  while (st.step()) out.push_back({st.text(0), parse_timestamp(st.text(1)), st.optional_real(2)});
  return out;
}

std::vector<UnitSample> Store::unit_samples_of(const std::string& project, Timestamp start,
                                               Timestamp end) const {
  std::shared_lock lock(mutex_);
  std::vector<UnitSample> out;
  Statement st(db_, "SELECT d.unit_id, d.timestamp, d.mw FROM Unit_Data d JOIN Static_Unit_Data s "
                    "ON d.unit_id = s.unit_id WHERE s.project_name = ?1 AND d.timestamp >= ?2 "
                    "AND d.timestamp < ?3 ORDER BY d.timestamp, d.unit_id");
  st.bind(1, project).bind(2, format_timestamp(start)).bind(3, format_timestamp(end));
  while (st.step()) out.push_back({st.text(0), parse_timestamp(st.text(1)), st.optional_real(2)});
  return out;
}

std::vector<EfficiencyPoint> Store::efficiency_points(const std::string& unit_id) const {
  std::shared_lock lock(mutex_);
  std::vector<EfficiencyPoint> out;
  Statement st(db_, "SELECT unit_id, flow_cfs, head_ft, power_mw, efficiency, 0 FROM Efficiency_Raw_Data "
                    "WHERE unit_id = ?1 UNION ALL SELECT unit_id, flow_cfs, head_ft, power_mw, efficiency, 1 "
                    "FROM Efficiency_Estimated_Data WHERE unit_id = ?1 ORDER BY 3, 2");
  st.bind(1, unit_id);
  while (st.step()) {
    out.push_back({st.text(0), st.real(1), st.real(2), st.real(3), st.real(4), st.integer(5) != 0});
  }
  return out;
}

std::size_t Store::count_plant_rows() const {
  std::shared_lock lock(mutex_);
  Statement st(db_, "SELECT COUNT(*) FROM Plant_Data");
  st.step();
  return static_cast<std::size_t>(st.integer(0));
}

std::size_t Store::count_unit_rows() const {
  std::shared_lock lock(mutex_);
  Statement st(db_, "SELECT COUNT(*) FROM Unit_Data");
  st.step();
  return static_cast<std::size_t>(st.integer(0));
}

}  // namespace hydat
