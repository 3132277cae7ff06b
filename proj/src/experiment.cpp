#include "undercut/experiment.hpp"

#include <atomic>
#include <bit>
#include <charconv>
#include <cmath>
#include <exception>
#include <fstream>
#include <sstream>
#include <thread>

#include "undercut/error.hpp"
#include "undercut/random.hpp"

namespace undercut {

namespace {

std::string format_double(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

std::string cell_name(int depth, double honest, int rep) {
  return "depth " + std::to_string(depth) + ", honest " + format_double(honest) +
         ", repetition " + std::to_string(rep);
}

}  // namespace

void ExperimentConfig::validate() const {
  powers.validate();
  params.validate();
  if (repetitions < 1) throw Error(ErrorCode::kInvalidArgument, "repetitions must be positive");
  if (grid < 1) throw Error(ErrorCode::kInvalidArgument, "grid must be positive");
  if (depths.empty() || honest_fractions.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "depths and honest fractions must be non-empty");
  }
  for (int d : depths) {
    if (d != 1 && d != 2) throw Error(ErrorCode::kInvalidArgument, "depth must be 1 or 2");
  }
  const double bu = powers.undercutter().power;
  for (double h : honest_fractions) {
    if (!(h >= 0.0 && h + bu <= 1.0 + 1e-12)) {
      throw Error(ErrorCode::kInvalidArgument,
                  "honest fraction " + format_double(h) + " plus undercutter power exceeds 1");
    }
  }
}

std::uint64_t run_seed(std::uint64_t base, int depth, double honest_fraction, int repetition) {
  return derive_seed(base, static_cast<std::uint64_t>(depth),
                     std::bit_cast<std::uint64_t>(honest_fraction),
                     static_cast<std::uint64_t>(repetition));
}

ExperimentSummary run_experiment(const ExperimentConfig& config,
                                 std::span<const TraceRecord> trace) {
  config.validate();
  const int undercutter_id = config.powers.undercutter().id;
  const auto reps = static_cast<std::size_t>(config.repetitions);

  ExperimentSummary summary;
  for (int depth : config.depths) {
    for (double h : config.honest_fractions) {
      CellSummary cell;
      cell.depth = depth;
      cell.honest_fraction = h;
      cell.avoidance = to_string(config.avoidance);
      cell.miners = config.all_honest ? all_honest_population(config.powers)
                                      : build_population(config.powers, h);
      summary.cells.push_back(std::move(cell));
    }
  }

  const std::size_t tasks = summary.cells.size() * reps;
  std::vector<RunResult> results(tasks);
  std::vector<std::exception_ptr> errors(tasks);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t t = next++; t < tasks; t = next++) {
      const auto& cell = summary.cells[t / reps];
      const int rep = static_cast<int>(t % reps);
      try {
        RunConfig rc;
        rc.params = config.params;
        rc.safe_depth = cell.depth;
        rc.avoidance = config.avoidance;
        rc.grid = config.grid;
        rc.seed = run_seed(config.base_seed, cell.depth, cell.honest_fraction, rep);
        results[t] = run(trace, cell.miners, rc);
      } catch (const Error& e) {
        errors[t] = std::make_exception_ptr(
            Error(e.code(), cell_name(cell.depth, cell.honest_fraction, rep) + ": " + e.what()));
      } catch (...) {
        errors[t] = std::current_exception();
      }
    }
  };
  const unsigned jobs = std::max(1U, std::min<unsigned>(config.jobs, static_cast<unsigned>(tasks)));
  if (jobs <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned j = 0; j < jobs; ++j) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  for (std::size_t c = 0; c < summary.cells.size(); ++c) {
    auto& cell = summary.cells[c];
    cell.miner_mean_shares.assign(cell.miners.size(), 0.0);
    for (std::size_t r = 0; r < reps; ++r) {
      const auto& res = results[c * reps + r];
      double share = 0.0;
      for (std::size_t i = 0; i < res.miners.size(); ++i) {
        const double s = res.share(i);
        cell.miner_mean_shares[i] += s / static_cast<double>(reps);
        if (res.miners[i].id == undercutter_id) share += s;
      }
      cell.shares.push_back(share);
      cell.attacks_per_run.push_back(res.attacks);
      cell.attacks += res.attacks;
      for (std::size_t b = 0; b < kBranchCount; ++b) cell.branch_counts[b] += res.branch_counts[b];
    }
    double mean = 0.0;
    for (double s : cell.shares) mean += s;
    mean /= static_cast<double>(reps);
    double var = 0.0;
    for (double s : cell.shares) var += (s - mean) * (s - mean);
    var = reps > 1 ? var / static_cast<double>(reps - 1) : 0.0;
    cell.mean_share = mean;
    cell.ci_half_width = 1.96 * std::sqrt(var) / std::sqrt(static_cast<double>(reps));
  }
  return summary;
}

std::vector<ResultRow> result_rows(const ExperimentSummary& summary) {
  std::vector<ResultRow> rows;
  for (const auto& c : summary.cells) {
    rows.push_back({c.depth, c.honest_fraction, c.avoidance, c.mean_share, c.ci_low(),
                    c.ci_high(), c.attacks});
  }
  return rows;
}

void emit_results(const ExperimentSummary& summary, std::ostream& out) {
  out << "depth,honest_fraction,avoidance,mean_share,ci_low,ci_high,attacks\n";
  for (const auto& r : result_rows(summary)) {
    out << r.depth << ',' << format_double(r.honest_fraction) << ',' << r.avoidance << ','
        << format_double(r.mean_share) << ',' << format_double(r.ci_low) << ','
        << format_double(r.ci_high) << ',' << r.attacks << '\n';
  }
}

void emit_results(const ExperimentSummary& summary, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kIo, "cannot write '" + path.string() + "'");
  emit_results(summary, out);
  if (!out) throw Error(ErrorCode::kIo, "failed writing '" + path.string() + "'");
}

namespace {

template <typename T>
bool parse_field(const std::string& text, T& out) {
  const auto r = std::from_chars(text.data(), text.data() + text.size(), out);
  return r.ec == std::errc{} && r.ptr == text.data() + text.size();
}

}  // namespace

std::vector<ResultRow> parse_results(std::istream& in) {
  std::vector<ResultRow> rows;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || (number == 1 && line.rfind("depth,", 0) == 0)) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) f.push_back(cell);
    ResultRow r;
    if (f.size() != 7 || !parse_field(f[0], r.depth) || !parse_field(f[1], r.honest_fraction) ||
        !parse_field(f[3], r.mean_share) || !parse_field(f[4], r.ci_low) ||
        !parse_field(f[5], r.ci_high) || !parse_field(f[6], r.attacks)) {
      throw Error(ErrorCode::kMalformedRow, "results line " + std::to_string(number) + " is malformed");
    }
    r.avoidance = f[2];
    rows.push_back(std::move(r));
  }
  return rows;
}

}  // namespace undercut
