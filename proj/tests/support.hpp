#pragma once

#include "fairsep/dataset.hpp"
#include "oracle.hpp"

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include <filesystem>
#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace testing {

inline std::filesystem::path data_dir() { return FAIRSEP_DATA_DIR; }

inline fairsep::Table toy8() {
  return fairsep::load_csv(data_dir() / "toy8.csv", fairsep::Schema::load(data_dir() / "toy8_schema.json"));
}

// Fixed prediction vector used by the frozen TOY8 expectations.
inline fairsep::VecXd toy8_predictions() {
  fairsep::VecXd h(8);
  h << 1, 0, 1, 1, 0, 1, 1, 0;
  return h;
}

inline fairsep::Schema oracle_schema() {
  return fairsep::Schema::from_json(nlohmann::json::parse(R"({
    "columns": [
      {"name": "s", "kind": "protected"},
      {"name": "a", "kind": "categorical"},
      {"name": "xp", "kind": "numerical", "tags": ["privilege"]},
      {"name": "xe", "kind": "numerical", "tags": ["effort"]},
      {"name": "y", "kind": "target"}
    ]})"));
}

inline fairsep::Table to_table(const std::vector<oracle::Row>& rows) {
  std::ostringstream csv;
  csv << "s,a,xp,xe,y\n";
  for (const auto& r : rows) csv << fmt::format("{},{},{},{},{}\n", r.s, r.a, r.xp, r.xe, r.y);
  std::istringstream in(csv.str());
  return fairsep::read_csv(in, oracle_schema());
}

inline fairsep::VecXd scores_of(const std::vector<oracle::Row>& rows) {
  fairsep::VecXd h(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) h[static_cast<Eigen::Index>(i)] = rows[i].h;
  return h;
}

// Small random table: both groups present, coarse value grids so that ties,
// empty subgroups and threshold boundaries all occur.
inline std::vector<oracle::Row> random_rows(std::mt19937_64& rng, std::size_t max_rows = 32, bool soft = false) {
  std::uniform_int_distribution<std::size_t> len(2, max_rows);
  std::uniform_int_distribution<int> coin(0, 1), cat(0, 2), cap(0, 4), hours(1, 6);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const std::size_t n = len(rng);
  std::vector<oracle::Row> rows(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto& r = rows[i];
    r.s = i == 0 ? "F" : i == 1 ? "M" : (coin(rng) ? "F" : "M");
    r.a = std::string(1, static_cast<char>('A' + cat(rng)));
    r.xp = 1000.0 * cap(rng);
    r.xe = 10.0 * hours(rng);
    r.y = coin(rng);
    r.h = soft ? std::round(unit(rng) * 64.0) / 64.0 : coin(rng);
  }
  return rows;
}

}  // namespace testing
