#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "undercut/mempool.hpp"

namespace undercut {

/// A trace row is a transaction with its arrival timestamp.
using TraceRecord = Transaction;

enum class TraceFormat { kCsv, kJsonLines };

/// .jsonl / .json / .ndjson select JSON lines; anything else is CSV.
TraceFormat format_for_path(const std::filesystem::path& path);

/// Parses, validates and sorts (stable, by timestamp then id) a trace.
/// `source` names the input in error messages.
std::vector<TraceRecord> parse_trace(std::istream& in, TraceFormat format,
                                     std::string_view source = "<stream>");
std::vector<TraceRecord> load_trace(const std::filesystem::path& path, TraceFormat format);
std::vector<TraceRecord> load_trace(const std::filesystem::path& path);

void write_trace(std::ostream& out, const std::vector<TraceRecord>& records, TraceFormat format);
void write_trace(const std::filesystem::path& path, const std::vector<TraceRecord>& records,
                 TraceFormat format);

struct FeeDistribution {
  enum class Kind { kUniform, kPareto };
  Kind kind = Kind::kUniform;
  double a = 1000.0;  // uniform: low; pareto: shape
  double b = 5000.0;  // uniform: high; pareto: scale

  static FeeDistribution uniform(double low, double high) { return {Kind::kUniform, low, high}; }
  static FeeDistribution pareto(double shape, double scale) { return {Kind::kPareto, shape, scale}; }

  /// Mean of the continuous distribution (before rounding); +inf for shape <= 1.
  double mean() const;
};

struct SynthConfig {
  double rate = 1.0;        // transactions per second
  double duration = 3600.0; // seconds
  double start_time = 0.0;
  FeeDistribution fees;
  Size min_size = 200;
  Size max_size = 1000;
  std::uint64_t seed = 1;
};

/// Poisson arrivals with i.i.d. uniform integer sizes and rounded fees.
/// Ids run from 1 in arrival order.
std::vector<TraceRecord> synthesize_trace(const SynthConfig& config);

/// Trace used when no file is given: about 5,000 pareto-fee transactions
/// over 30 block intervals, sized so demand slightly exceeds capacity.
SynthConfig default_synth_config(const ChainParams& params, std::uint64_t seed);

enum class MinerKind { kHonest, kRational, kUndercutter };

std::string_view to_string(MinerKind kind);
MinerKind parse_miner_kind(std::string_view text);

struct PowerEntry {
  int id = 0;
  double power = 0.0;
  MinerKind kind = MinerKind::kRational;
};

struct PowerDistribution {
  std::vector<PowerEntry> entries;

  /// Powers sum to 1 within 1e-9, ids are unique, and exactly one entry is
  /// the undercutter with power below 0.5.
  void validate() const;
  const PowerEntry& undercutter() const;
};

/// Lines of `miner_id, power, kind`; blank lines and `#` comments ignored.
PowerDistribution parse_power_file(std::istream& in, std::string_view source = "<stream>");
PowerDistribution load_power_file(const std::filesystem::path& path);

struct Preset {
  std::string name;
  PowerDistribution powers;
  ChainParams params;
};

/// bitcoin16, bitcoin-hypothetical45 or monero. Miners are numbered from 1
/// in descending power; the undercutter is miner 1.
Preset preset(std::string_view name);
std::vector<std::string> preset_names();

}  // namespace undercut
