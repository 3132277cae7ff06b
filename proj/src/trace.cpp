#include "undercut/trace.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>
#include <unordered_set>

#include "json.hpp"
#include "undercut/error.hpp"
#include "undercut/random.hpp"

namespace undercut {

namespace {

std::string where(std::string_view source, std::size_t line) {
  return std::string(source) + ":" + std::to_string(line) + ": ";
}

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    out.push_back(trim(line.substr(start, comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

template <typename T>
bool parse_number(std::string_view text, T& out) {
  if (text.empty()) return false;
  const auto r = std::from_chars(text.data(), text.data() + text.size(), out);
  return r.ec == std::errc{} && r.ptr == text.data() + text.size();
}

void validate_record(const TraceRecord& r, std::string_view source, std::size_t line) {
  if (r.size <= 0) {
    throw Error(ErrorCode::kNonPositiveSize,
                where(source, line) + "transaction " + std::to_string(r.id) +
                    " has non-positive size " + std::to_string(r.size));
  }
  if (r.fee < 0) {
    throw Error(ErrorCode::kMalformedRow, where(source, line) + "negative fee");
  }
  if (!std::isfinite(r.arrival_time)) {
    throw Error(ErrorCode::kMalformedRow, where(source, line) + "timestamp is not finite");
  }
}

TraceRecord parse_csv_row(std::string_view line, std::string_view source, std::size_t number) {
  const auto fields = split_commas(line);
  TraceRecord r;
  if (fields.size() != 4 || !parse_number(fields[0], r.id) ||
      !parse_number(fields[1], r.arrival_time) || !parse_number(fields[2], r.size) ||
      !parse_number(fields[3], r.fee)) {
    throw Error(ErrorCode::kMalformedRow,
                where(source, number) + "expected id,timestamp,size,fee but got '" +
                    std::string(line) + "'");
  }
  return r;
}

TraceRecord parse_json_row(std::string_view line, std::string_view source, std::size_t number) {
  try {
    const auto j = nlohmann::json::parse(line);
    TraceRecord r;
    r.id = j.at("id").get<TxId>();
    r.arrival_time = j.at("timestamp").get<double>();
    r.size = j.at("size").get<Size>();
    r.fee = j.at("fee").get<Fee>();
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kMalformedRow, where(source, number) + e.what());
  }
}

std::string format_double(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open '" + path.string() + "'");
  return in;
}

}  // namespace

TraceFormat format_for_path(const std::filesystem::path& path) {
  const auto ext = path.extension().string();
  if (ext == ".jsonl" || ext == ".json" || ext == ".ndjson") return TraceFormat::kJsonLines;
  return TraceFormat::kCsv;
}

std::vector<TraceRecord> parse_trace(std::istream& in, TraceFormat format,
                                     std::string_view source) {
  std::vector<TraceRecord> records;
  std::unordered_set<TxId> seen;
  std::string raw;
  std::size_t number = 0;
  bool header_allowed = format == TraceFormat::kCsv;
  while (std::getline(in, raw)) {
    ++number;
    const auto line = trim(raw);
    if (line.empty()) continue;
    if (header_allowed) {
      header_allowed = false;
      if (line.substr(0, 2) == "id") continue;
    }
    auto r = format == TraceFormat::kCsv ? parse_csv_row(line, source, number)
                                         : parse_json_row(line, source, number);
    validate_record(r, source, number);
    if (!seen.insert(r.id).second) {
      throw Error(ErrorCode::kDuplicateId,
                  where(source, number) + "duplicate transaction id " + std::to_string(r.id));
    }
    records.push_back(r);
  }
  std::stable_sort(records.begin(), records.end(), [](const auto& a, const auto& b) {
    if (a.arrival_time != b.arrival_time) return a.arrival_time < b.arrival_time;
    return a.id < b.id;
  });
  return records;
}

std::vector<TraceRecord> load_trace(const std::filesystem::path& path, TraceFormat format) {
  auto in = open_input(path);
  return parse_trace(in, format, path.string());
}

std::vector<TraceRecord> load_trace(const std::filesystem::path& path) {
  return load_trace(path, format_for_path(path));
}

void write_trace(std::ostream& out, const std::vector<TraceRecord>& records, TraceFormat format) {
  if (format == TraceFormat::kCsv) {
    out << "id,timestamp,size,fee\n";
    for (const auto& r : records) {
      out << r.id << ',' << format_double(r.arrival_time) << ',' << r.size << ',' << r.fee << '\n';
    }
    return;
  }
  for (const auto& r : records) {
    nlohmann::json j = {{"id", r.id}, {"timestamp", r.arrival_time}, {"size", r.size}, {"fee", r.fee}};
    out << j.dump() << '\n';
  }
}

void write_trace(const std::filesystem::path& path, const std::vector<TraceRecord>& records,
                 TraceFormat format) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kIo, "cannot write '" + path.string() + "'");
  write_trace(out, records, format);
  if (!out) throw Error(ErrorCode::kIo, "failed writing '" + path.string() + "'");
}

double FeeDistribution::mean() const {
  if (kind == Kind::kUniform) return 0.5 * (a + b);
  if (a <= 1.0) return std::numeric_limits<double>::infinity();
  return a * b / (a - 1.0);
}

std::vector<TraceRecord> synthesize_trace(const SynthConfig& c) {
  if (c.rate < 0.0 || c.duration < 0.0) {
    throw Error(ErrorCode::kInvalidArgument, "rate and duration must be non-negative");
  }
  if (c.min_size <= 0 || c.max_size < c.min_size) {
    throw Error(ErrorCode::kInvalidArgument, "size range must satisfy 0 < min <= max");
  }
  const auto& f = c.fees;
  if (f.kind == FeeDistribution::Kind::kUniform ? !(f.a >= 0.0 && f.b >= f.a)
                                                : !(f.a > 0.0 && f.b > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "invalid fee distribution parameters");
  }

  std::vector<TraceRecord> out;
  if (c.rate == 0.0) return out;
  Rng rng(c.seed);
  std::exponential_distribution<double> gap(c.rate);
  std::uniform_int_distribution<Size> size(c.min_size, c.max_size);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  double t = c.start_time;
  const double end = c.start_time + c.duration;
  TxId id = 1;
  while (true) {
    t += gap(rng);
    if (t > end) break;
    double fee = 0.0;
    if (f.kind == FeeDistribution::Kind::kUniform) {
      fee = f.a + (f.b - f.a) * unit(rng);
    } else {
      const double u = 1.0 - unit(rng);  // (0, 1]
      fee = f.b * std::pow(u, -1.0 / f.a);
    }
    TraceRecord r;
    r.id = id++;
    r.arrival_time = t;
    r.size = size(rng);
    r.fee = static_cast<Fee>(std::llround(fee));
    out.push_back(r);
  }
  return out;
}

SynthConfig default_synth_config(const ChainParams& params, std::uint64_t seed) {
  SynthConfig c;
  c.duration = 30.0 * params.block_interval;
  c.rate = 5000.0 / c.duration;
  c.fees = FeeDistribution::pareto(1.5, 1000.0);
  c.min_size = std::max<Size>(1, params.block_size_limit / 300);
  c.max_size = std::max<Size>(c.min_size, params.block_size_limit / 100);
  c.seed = seed;
  return c;
}

std::string_view to_string(MinerKind kind) {
  switch (kind) {
    case MinerKind::kHonest: return "honest";
    case MinerKind::kRational: return "rational";
    case MinerKind::kUndercutter: return "undercutter";
  }
  return "?";
}

MinerKind parse_miner_kind(std::string_view text) {
  if (text == "honest") return MinerKind::kHonest;
  if (text == "rational") return MinerKind::kRational;
  if (text == "undercutter") return MinerKind::kUndercutter;
  throw Error(ErrorCode::kInvalidArgument, "unknown miner kind '" + std::string(text) + "'");
}

void PowerDistribution::validate() const {
  double sum = 0.0;
  int undercutters = 0;
  std::unordered_set<int> ids;
  for (const auto& e : entries) {
    if (!(e.power >= 0.0 && e.power <= 1.0)) {
      throw Error(ErrorCode::kInvalidArgument, "miner power must lie in [0, 1]");
    }
    if (!ids.insert(e.id).second) {
      throw Error(ErrorCode::kInvalidArgument, "duplicate miner id " + std::to_string(e.id));
    }
    sum += e.power;
    if (e.kind == MinerKind::kUndercutter) {
      ++undercutters;
      if (!(e.power < 0.5)) {
        throw Error(ErrorCode::kInvalidArgument, "undercutter power must be below 0.5");
      }
    }
  }
  if (std::abs(sum - 1.0) > 1e-9) {
    throw Error(ErrorCode::kInvalidArgument, "miner powers sum to " + format_double(sum));
  }
  if (undercutters != 1) {
    throw Error(ErrorCode::kInvalidArgument, "power distribution needs exactly one undercutter");
  }
}

const PowerEntry& PowerDistribution::undercutter() const {
  for (const auto& e : entries) {
    if (e.kind == MinerKind::kUndercutter) return e;
  }
  throw Error(ErrorCode::kInvalidArgument, "power distribution has no undercutter");
}

PowerDistribution parse_power_file(std::istream& in, std::string_view source) {
  PowerDistribution d;
  std::string raw;
  std::size_t number = 0;
  while (std::getline(in, raw)) {
    ++number;
    auto line = std::string_view(raw);
    line = trim(line.substr(0, line.find('#')));
    if (line.empty()) continue;
    const auto fields = split_commas(line);
    PowerEntry e;
    if (fields.size() != 3 || !parse_number(fields[0], e.id) ||
        !parse_number(fields[1], e.power)) {
      throw Error(ErrorCode::kMalformedRow,
                  where(source, number) + "expected 'miner_id, power, kind'");
    }
    try {
      e.kind = parse_miner_kind(fields[2]);
    } catch (const Error& err) {
      throw Error(ErrorCode::kMalformedRow, where(source, number) + err.what());
    }
    d.entries.push_back(e);
  }
  d.validate();
  return d;
}

PowerDistribution load_power_file(const std::filesystem::path& path) {
  auto in = open_input(path);
  return parse_power_file(in, path.string());
}

namespace {

// 16 pools between 0.6% and 17.6%: p_j = 0.006 + 0.17 (j/15)^k with k chosen
// so the powers sum to 1.
std::vector<double> bitcoin16_powers() {
  constexpr int kPools = 16;
  auto total = [](double k) {
    double s = 0.0;
    for (int j = 0; j < kPools; ++j) s += 0.006 + 0.17 * std::pow(j / 15.0, k);
    return s;
  };
  double lo = 0.5;
  double hi = 10.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (total(mid) > 1.0 ? lo : hi) = mid;
  }
  const double k = 0.5 * (lo + hi);
  std::vector<double> p;
  for (int j = kPools - 1; j >= 0; --j) p.push_back(0.006 + 0.17 * std::pow(j / 15.0, k));
  return p;
}

PowerDistribution with_undercutter(const std::vector<double>& base, double undercutter) {
  PowerDistribution d;
  const double rest = 1.0 - base.front();
  const double scale = (1.0 - undercutter) / rest;
  for (std::size_t i = 0; i < base.size(); ++i) {
    PowerEntry e;
    e.id = static_cast<int>(i) + 1;
    e.power = i == 0 ? undercutter : base[i] * scale;
    e.kind = i == 0 ? MinerKind::kUndercutter : MinerKind::kRational;
    d.entries.push_back(e);
  }
  return d;
}

}  // namespace

std::vector<std::string> preset_names() {
  return {"bitcoin16", "bitcoin-hypothetical45", "monero"};
}

Preset preset(std::string_view name) {
  const auto base = bitcoin16_powers();
  Preset p;
  p.name = std::string(name);
  if (name == "bitcoin16") {
    p.powers = with_undercutter(base, base.front());
  } else if (name == "bitcoin-hypothetical45") {
    p.powers = with_undercutter(base, 0.45);
  } else if (name == "monero") {
    p.powers = with_undercutter(base, 0.35);
    p.params.block_interval = 120.0;
    p.params.block_size_limit = 300'000;
  } else {
    throw Error(ErrorCode::kUnknownPreset, "unknown preset '" + std::string(name) + "'");
  }
  p.powers.validate();
  return p;
}

}  // namespace undercut
