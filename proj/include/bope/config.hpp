#ifndef BOPE_CONFIG_HPP
#define BOPE_CONFIG_HPP

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "bope/loop.hpp"

namespace bope {

/// Reads a run configuration (YAML; JSON is accepted as a subset) on top of
/// `defaults`. Every key is optional. Unknown keys, wrong types and invalid
/// values raise ConfigError with the 1-based source line.
///
///   problem: DTLZ2
///   utility: Linear
///   utility_params: {theta: [3.5, 6.5]}
///   iterations: 20
///   seed: 0
///   algorithm: BopeMonne            # Random | KnownUtility
///   dm: {model: Gaussian, sigma: 0.1}
///   ensemble: {size: 8, hidden: [100, 10], activation: swish, monotonic: true}
///   acquisition: {raw_samples: 256, restarts: 12, pair_selection: IEUBO}
RunConfig parse_run_config(std::string_view text, const RunConfig& defaults = {});
RunConfig load_run_config(const std::filesystem::path& path);

/// Applies one `dotted.key=value` override, e.g. `dm.sigma=0.5`.
void apply_override(RunConfig& cfg, std::string_view assignment);

struct BenchCell {
  std::string problem;
  std::string algorithm;
  std::string condition;
  std::uint64_t seed = 0;
  RunConfig config;
};

/// problems × algorithms × conditions × seeds. Top-level run keys form the
/// base configuration; each named condition overrides it.
///
///   iterations: 20
///   problems: [DTLZ2, ZDT1]
///   algorithms: [BopeMonne, Random]
///   seeds: [0, 1, 2]               # or a count: seeds: 3
///   conditions:
///     ieubo: {acquisition: {pair_selection: IEUBO}}
///     eubo: {acquisition: {pair_selection: EUBO}}
struct BenchMatrix {
  RunConfig base;
  std::vector<std::string> problems;
  std::vector<Algorithm> algorithms;
  std::vector<std::uint64_t> seeds;
  std::vector<std::pair<std::string, RunConfig>> conditions;  // never empty after parsing

  std::vector<BenchCell> cells() const;
};

/// An empty problem, algorithm or seed list is a ConfigError.
BenchMatrix parse_bench_matrix(std::string_view text);
BenchMatrix load_bench_matrix(const std::filesystem::path& path);

/// Canonical JSON form of a configuration, readable by parse_run_config.
std::string run_config_to_json(const RunConfig& cfg);

}  // namespace bope

#endif  // BOPE_CONFIG_HPP
