#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "undercut/engine.hpp"
#include "undercut/strategy.hpp"
#include "undercut/trace.hpp"

namespace undercut {

struct ExperimentConfig {
  PowerDistribution powers;
  ChainParams params;
  std::vector<double> honest_fractions{0.0, 0.1, 0.2, 0.3, 0.4, 0.5};
  std::vector<int> depths{1};
  AvoidanceConfig avoidance;
  int repetitions = 50;
  std::uint64_t base_seed = 1;
  int grid = 100;
  unsigned jobs = 1;
  /// Every miner honest, the undercutter included (fair-share baseline).
  bool all_honest = false;

  void validate() const;
};

struct CellSummary {
  int depth = 1;
  double honest_fraction = 0.0;
  std::string avoidance;
  double mean_share = 0.0;     // undercutter's mean share of main-chain fees
  double ci_half_width = 0.0;  // 1.96 sd / sqrt(repetitions)
  std::size_t attacks = 0;     // summed over repetitions
  std::array<std::size_t, kBranchCount> branch_counts{};
  std::vector<double> shares;              // undercutter share per repetition
  std::vector<std::size_t> attacks_per_run;
  std::vector<MinerProfile> miners;        // population of the cell (earned left 0)
  std::vector<double> miner_mean_shares;   // parallel to miners

  double ci_low() const noexcept { return mean_share - ci_half_width; }
  double ci_high() const noexcept { return mean_share + ci_half_width; }
};

struct ExperimentSummary {
  std::vector<CellSummary> cells;
};

/// Seed of one run. Avoidance is deliberately not an input so runs with and
/// without avoidance are paired.
std::uint64_t run_seed(std::uint64_t base, int depth, double honest_fraction, int repetition);

/// Runs repetitions x cells seeded simulations (cells ordered by depth, then
/// honest fraction). Output does not depend on config.jobs.
ExperimentSummary run_experiment(const ExperimentConfig& config,
                                 std::span<const TraceRecord> trace);

/// One CSV row of the results file.
struct ResultRow {
  int depth = 1;
  double honest_fraction = 0.0;
  std::string avoidance;
  double mean_share = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  std::size_t attacks = 0;

  friend bool operator==(const ResultRow&, const ResultRow&) = default;
};

std::vector<ResultRow> result_rows(const ExperimentSummary& summary);

/// Header depth,honest_fraction,avoidance,mean_share,ci_low,ci_high,attacks
/// and one row per cell; doubles use the shortest round-trip form.
void emit_results(const ExperimentSummary& summary, std::ostream& out);
void emit_results(const ExperimentSummary& summary, const std::filesystem::path& path);

std::vector<ResultRow> parse_results(std::istream& in);

}  // namespace undercut
