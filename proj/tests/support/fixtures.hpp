#pragma once

#include <atomic>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <unistd.h>

#include "hydat/datastore.hpp"
#include "hydat/hydrology.hpp"

namespace hydat::testing {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag = "hydat") {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            (tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

inline SyntheticCascade small_cascade(std::size_t hours = 2000, std::uint64_t seed = 42) {
  SyntheticCascadeConfig config;
  config.seed = seed;
  config.hours = hours;
  return generate_synthetic_cascade(config);
}

inline void load_cascade(Store& store, const SyntheticCascade& c) {
  std::istringstream in(to_bundle_csv(c));
  store.ingest_bundle(in);
}

inline PlantSample plant_sample(const std::string& project, Timestamp t, double flow, double head,
                                double storage = 1000.0, double total_mw = 100.0) {
  return PlantSample{project, t, flow, head, storage, 0.0, total_mw};
}

}  // namespace hydat::testing

#include "hydat/random.hpp"
#include "hydat/unitdispatch.hpp"

namespace hydat::testing {

/// Head-dependent commitment cut used by the classifier fixture.
inline double rule_cut_mw(double head_ft) { return 400.0 + 8.0 * (head_ft - 300.0); }

/// Hourly rows with iid inputs; category 0 exists iff total_mw exceeds the
/// head-dependent cut. Category 1 is always on and follows a noise-free
/// linear function of the inputs.
inline std::vector<TrainingRow> rule_rows(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<TrainingRow> rows;
  const auto t0 = make_timestamp(2015, 1, 1);
  for (std::size_t i = 0; i < n; ++i) {
    TrainingRow r;
    r.timestamp = t0 + Hours(i);
    r.inputs = {rng.uniform(0.0, 1000.0), rng.uniform(280.0, 330.0), rng.uniform(3.0e6, 4.5e6)};
    const bool on = r.inputs[0] > rule_cut_mw(r.inputs[1]);
    CategoryTarget c0;
    if (on) c0 = {true, 0.6 * r.inputs[0], 0.3 * r.inputs[0], 2};
    const double cat = 200.0 + 0.5 * r.inputs[0] + 2.0 * (r.inputs[1] - 300.0) + 2.0e-5 * (r.inputs[2] - 3.0e6);
    CategoryTarget c1{true, cat, cat / 3.0, 3};
    r.targets = {c0, c1};
    rows.push_back(std::move(r));
  }
  return rows;
}

}  // namespace hydat::testing
