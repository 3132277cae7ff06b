// Command-line front end: single runs, parameter sweeps, synthetic traces and
// the analytical condition checker.

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "undercut/engine.hpp"
#include "undercut/error.hpp"
#include "undercut/experiment.hpp"
#include "undercut/probability.hpp"
#include "undercut/strategy.hpp"
#include "undercut/trace.hpp"

namespace {

using namespace undercut;

struct CommonOptions {
  std::string trace;
  std::string preset = "bitcoin16";
  std::string powers_file;
  std::string depth = "1";
  std::string honest = "0";
  std::string avoidance = "off";
  std::uint64_t seed = 1;
  std::optional<double> interval;
  std::optional<std::int64_t> block_limit;
  std::optional<double> negligible;
  int grid = 100;
  std::string output;
};

struct SweepOptions {
  int repetitions = 50;
  unsigned jobs = 1;
};

struct SynthOptions {
  std::string output;
  double rate = 0.0;
  double duration = 0.0;
  std::string fees = "pareto:1.5:1000";
  std::int64_t min_size = 0;
  std::int64_t max_size = 0;
  std::uint64_t seed = 1;
  std::string preset = "bitcoin16";
};

struct CheckOptions {
  double bu = 0.2;
  double bh = 0.5;
  double gamma = 0.3;
  int depth = 1;
  double negligible = 0.01;
};

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

template <typename T>
std::vector<T> parse_list(const std::string& text, const char* flag) {
  std::vector<T> out;
  std::stringstream ss(text);
  for (std::string item; std::getline(ss, item, ',');) {
    std::istringstream is(item);
    T v{};
    if (!(is >> v) || !(is >> std::ws).eof()) {
      throw CLI::ValidationError(flag, "cannot parse '" + item + "'");
    }
    out.push_back(v);
  }
  if (out.empty()) throw CLI::ValidationError(flag, "expects at least one value");
  return out;
}

void add_common(CLI::App* cmd, CommonOptions& o, bool list_values) {
  cmd->add_option("--trace", o.trace,
                  "Transaction trace (CSV id,timestamp,size,fee or .jsonl); "
                  "default: synthetic pareto-fee trace");
  auto* preset = cmd->add_option("--preset", o.preset,
                                 "Power preset: bitcoin16, bitcoin-hypothetical45, monero")
                     ->capture_default_str();
  auto* powers = cmd->add_option("--powers-file", o.powers_file,
                                 "Power distribution file of 'miner_id, power, kind' lines");
  preset->excludes(powers);
  powers->excludes(preset);
  cmd->add_option("--depth", o.depth,
                  list_values ? "Safe depths, comma separated from {1,2}" : "Safe depth (1 or 2)")
      ->capture_default_str();
  cmd->add_option("--honest", o.honest,
                  list_values ? "Honest power fractions, comma separated"
                              : "Honest power fraction")
      ->capture_default_str();
  cmd->add_option("--avoidance", o.avoidance, "Avoidance: off, experimental, exact, strict=<f>")
      ->capture_default_str();
  cmd->add_option("--seed", o.seed, "Base random seed")->capture_default_str();
  cmd->add_option("--interval", o.interval,
                  "Block interval in seconds (default: preset, 600 or 120)");
  cmd->add_option("--block-limit", o.block_limit,
                  "Block size limit (default: preset, 1000000 or 300000)");
  cmd->add_option("--negligible", o.negligible, "Negligible gamma threshold (default: 0.01)");
  cmd->add_option("--grid", o.grid, "Grid points for rational shift search")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  cmd->add_option("--output", o.output,
                  list_values ? "Results CSV path (default: stdout)"
                              : "Per-miner earnings CSV path (default: stdout table only)");
}

struct Setup {
  PowerDistribution powers;
  ChainParams params;
  std::vector<TraceRecord> trace;
};

Setup load_setup(const CommonOptions& o) {
  Setup s;
  if (!o.powers_file.empty()) {
    s.powers = load_power_file(o.powers_file);
    s.params = preset(o.preset).params;
  } else {
    auto p = preset(o.preset);
    s.powers = std::move(p.powers);
    s.params = p.params;
  }
  if (o.interval) s.params.block_interval = *o.interval;
  if (o.block_limit) s.params.block_size_limit = *o.block_limit;
  if (o.negligible) s.params.negligible_fee_threshold = *o.negligible;
  s.params.validate();
  s.trace = o.trace.empty() ? synthesize_trace(default_synth_config(s.params, o.seed))
                            : load_trace(o.trace);
  return s;
}

int cmd_run(const CommonOptions& o) {
  const auto s = load_setup(o);
  RunConfig rc;
  rc.params = s.params;
  rc.safe_depth = parse_list<int>(o.depth, "--depth").at(0);
  rc.avoidance = parse_avoidance(o.avoidance);
  rc.seed = o.seed;
  rc.grid = o.grid;
  const double honest = parse_list<double>(o.honest, "--honest").at(0);
  const auto result = run(s.trace, build_population(s.powers, honest), rc);

  std::printf("%-6s %-12s %-10s %-16s %s\n", "miner", "kind", "power", "earned", "share");
  for (std::size_t i = 0; i < result.miners.size(); ++i) {
    const auto& m = result.miners[i];
    std::printf("%-6d %-12s %-10s %-16lld %s\n", m.id, std::string(to_string(m.kind)).c_str(),
                fmt(m.power).c_str(), static_cast<long long>(m.earned),
                fmt(result.share(i)).c_str());
  }
  std::printf("blocks %zu, main-chain fees %lld of %lld, attacks %zu, forks won %zu, lost %zu\n",
              result.main_chain.size(), static_cast<long long>(result.main_chain_fee),
              static_cast<long long>(result.trace_fee), result.attacks, result.forks_won,
              result.forks_lost);
  if (!o.output.empty()) {
    std::ofstream out(o.output);
    if (!out) throw Error(ErrorCode::kIo, "cannot write '" + o.output + "'");
    out << "miner,kind,power,earned,share\n";
    for (std::size_t i = 0; i < result.miners.size(); ++i) {
      const auto& m = result.miners[i];
      out << m.id << ',' << to_string(m.kind) << ',' << fmt(m.power) << ',' << m.earned << ','
          << fmt(result.share(i)) << '\n';
    }
  }
  return 0;
}

int cmd_sweep(const CommonOptions& o, const SweepOptions& w) {
  const auto s = load_setup(o);
  ExperimentConfig c;
  c.powers = s.powers;
  c.params = s.params;
  c.depths = parse_list<int>(o.depth, "--depth");
  c.honest_fractions = parse_list<double>(o.honest, "--honest");
  c.avoidance = parse_avoidance(o.avoidance);
  c.repetitions = w.repetitions;
  c.base_seed = o.seed;
  c.grid = o.grid;
  c.jobs = w.jobs;
  const auto summary = run_experiment(c, s.trace);
  if (o.output.empty()) {
    emit_results(summary, std::cout);
  } else {
    emit_results(summary, std::filesystem::path(o.output));
  }
  return 0;
}

FeeDistribution parse_fees(const std::string& text) {
  const auto parts = [&] {
    std::vector<std::string> out;
    std::stringstream ss(text);
    for (std::string p; std::getline(ss, p, ':');) out.push_back(p);
    return out;
  }();
  if (parts.size() == 3) {
    try {
      const double a = std::stod(parts[1]);
      const double b = std::stod(parts[2]);
      if (parts[0] == "uniform") return FeeDistribution::uniform(a, b);
      if (parts[0] == "pareto") return FeeDistribution::pareto(a, b);
    } catch (const std::exception&) {
    }
  }
  throw CLI::ValidationError("--fees", "expected uniform:<lo>:<hi> or pareto:<shape>:<scale>");
}

int cmd_synth(const SynthOptions& o) {
  const auto params = preset(o.preset).params;
  auto c = default_synth_config(params, o.seed);
  if (o.rate > 0.0) c.rate = o.rate;
  if (o.duration > 0.0) c.duration = o.duration;
  if (o.min_size > 0) c.min_size = o.min_size;
  if (o.max_size > 0) c.max_size = o.max_size;
  if (c.max_size < c.min_size) c.max_size = c.min_size;
  c.fees = parse_fees(o.fees);
  const auto trace = synthesize_trace(c);
  write_trace(std::filesystem::path(o.output), trace, format_for_path(o.output));
  std::printf("wrote %zu transactions to %s\n", trace.size(), o.output.c_str());
  return 0;
}

int cmd_check(const CheckOptions& o) {
  const auto split = PowerSplit::from(o.bu, o.bh);
  const Branch branch = o.depth == 1 ? classify_d1(split, o.gamma, o.negligible)
                                     : classify_d2(split, o.gamma, o.negligible, false);
  if (branch == Branch::kStay) {
    std::printf("stay\n");
  } else {
    std::printf("undercut (branch %d)\n", branch_number(branch, o.depth));
  }
  std::printf("rationale: %s\n", std::string(to_string(branch)).c_str());
  if (o.depth == 1) {
    std::printf("limited bound bu/(1-bu): %s\n", fmt(limited_bound_d1(o.bu)).c_str());
    std::printf("sufficient bound: %s\n", fmt(sufficient_bound_d1(o.bu, o.bh)).c_str());
    const int join = rational_join_d1(split, o.gamma);
    std::printf("rational join: %d (threshold %s)\n", join,
                fmt(join_threshold_d1(o.bu, o.bh)).c_str());
    if (o.bu > 0.0) {
      const auto r = expected_returns_d1(split, o.gamma, join * split.rational);
      std::printf("expected return attack %s, baseline %s\n", fmt(r.attack_return).c_str(),
                  fmt(r.baseline_return).c_str());
    }
    std::printf("fork win probability at the tie: %s\n",
                fmt(win_prob_d1(o.bu, join * split.rational)).c_str());
  } else {
    std::printf("limited bound: %s\n", fmt(limited_bound_d2(o.bu)).c_str());
    std::printf("sufficient bound: %s\n", fmt(sufficient_bound_d2(o.bu, o.bh)).c_str());
    std::printf("rational shift at tie: %d (threshold %s)\n", rational_shift_d2_tie(split, o.gamma),
                fmt(shift_threshold_d2_tie(o.bu, o.bh)).c_str());
    if (o.bu > 0.0) {
      const auto r = expected_returns_d2(split, o.gamma);
      std::printf("expected return attack %s, baseline %s\n", fmt(r.attack_return).c_str(),
                  fmt(r.baseline_return).c_str());
    }
    const RacePoint tie{o.bu, 2, 0};
    std::printf("fork win probability at the tie: series %s, random walk %s\n",
                fmt(win_prob_series(tie)).c_str(), fmt(race_win_prob(tie)).c_str());
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Undercutting attack simulator and analytical checker"};
  app.require_subcommand(1);

  CommonOptions run_opts;
  auto* run_cmd = app.add_subcommand("run", "Run one seeded simulation and print per-miner earnings");
  add_common(run_cmd, run_opts, false);

  CommonOptions sweep_opts;
  sweep_opts.honest = "0,0.1,0.2,0.3,0.4,0.5";
  SweepOptions sweep_extra;
  auto* sweep_cmd = app.add_subcommand("sweep", "Run a parameter sweep and write the results CSV");
  add_common(sweep_cmd, sweep_opts, true);
  sweep_cmd->add_option("--repetitions", sweep_extra.repetitions, "Repetitions per cell")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  sweep_cmd->add_option("--jobs", sweep_extra.jobs, "Worker threads (output is identical for any value)")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);

  SynthOptions synth_opts;
  auto* synth_cmd = app.add_subcommand("synth", "Write a synthetic transaction trace");
  synth_cmd->add_option("--output", synth_opts.output, "Trace path (.csv or .jsonl)")->required();
  synth_cmd->add_option("--rate", synth_opts.rate,
                        "Arrivals per second (default: 5000 over the duration)");
  synth_cmd->add_option("--duration", synth_opts.duration,
                        "Trace span in seconds (default: 30 block intervals)");
  synth_cmd->add_option("--fees", synth_opts.fees, "Fee distribution uniform:<lo>:<hi> or pareto:<shape>:<scale>")
      ->capture_default_str();
  synth_cmd->add_option("--min-size", synth_opts.min_size, "Smallest size (default: block limit / 300)");
  synth_cmd->add_option("--max-size", synth_opts.max_size, "Largest size (default: block limit / 100)");
  synth_cmd->add_option("--seed", synth_opts.seed, "Random seed")->capture_default_str();
  synth_cmd->add_option("--preset", synth_opts.preset, "Preset supplying block interval and limit")
      ->capture_default_str();

  CheckOptions check_opts;
  auto* check_cmd = app.add_subcommand("check", "Evaluate the analytical undercutting conditions");
  check_cmd->add_option("--bu", check_opts.bu, "Undercutter power")->capture_default_str();
  check_cmd->add_option("--bh", check_opts.bh, "Honest power")->capture_default_str();
  check_cmd->add_option("--gamma", check_opts.gamma, "Next bandwidth-set fee over head fee")
      ->capture_default_str();
  check_cmd->add_option("--depth", check_opts.depth, "Safe depth (1 or 2)")
      ->capture_default_str()
      ->check(CLI::IsMember({1, 2}));
  check_cmd->add_option("--negligible", check_opts.negligible, "Negligible gamma threshold")
      ->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    std::cout << (app.get_subcommands().empty() ? app.help() : app.get_subcommands().front()->help());
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    std::cout << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n\n" << app.help();
    return 2;
  }

  try {
    if (run_cmd->parsed()) return cmd_run(run_opts);
    if (sweep_cmd->parsed()) return cmd_sweep(sweep_opts, sweep_extra);
    if (synth_cmd->parsed()) return cmd_synth(synth_opts);
    if (check_cmd->parsed()) return cmd_check(check_opts);
  } catch (const CLI::ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const Error& e) {
    std::cerr << "error (" << to_string(e.code()) << "): " << e.what() << '\n';
    return e.code() == ErrorCode::kInvalidArgument ? 2 : 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}
