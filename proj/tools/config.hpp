// SPDX-License-Identifier: Apache-2.0
//
// Run configuration: one JSON file, arrays referenced by path relative to it.
#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "hma/geometry.hpp"
#include "hma/measures.hpp"

namespace hma::cli {

enum class ProblemKind { MongeAmpere, Einstein, Semidiscrete, Approximate };

const char* to_string(ProblemKind k);

struct RunConfig {
  std::filesystem::path base_dir;
  nlohmann::json raw;

  HessianModel model = HessianModel::unit_torus(1);
  ProblemKind kind = ProblemKind::MongeAmpere;
  double lambda = -1.0;
  int approx_atoms = 0;

  std::vector<int> grid;
  std::vector<int> dual_grid;
  int radius = -1;
  std::optional<double> tol;
  int max_iters = -1;
  std::uint64_t seed = 0;
  bool seeded_init = false;  // random smooth initial iterate for grid solves
  int threads = 0;

  std::filesystem::path out_dir = "hma_out";
  std::vector<std::string> formats = {"json", "svg"};
  std::optional<Box> window;
};

struct Overrides {
  std::optional<std::filesystem::path> out;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  std::optional<int> radius;
  std::optional<double> tol;
};

/// Parses and validates; throws ConfigError naming the offending field.
RunConfig load_config(const std::filesystem::path& path, const Overrides& ov = {});
RunConfig parse_config(const nlohmann::json& j, const std::filesystem::path& base_dir, const Overrides& ov = {});

/// Measures named by their config key ("mu", "nu", "mu0").
GridDensity primal_measure(const RunConfig& c, const std::string& key);
GridDensity dual_measure(const RunConfig& c, const std::string& key);
AtomicMeasure atomic_measure(const RunConfig& c, const std::string& key);
/// Section u to approximate (problem.section), before convexification.
GridSection approximation_target(const RunConfig& c);

}  // namespace hma::cli
