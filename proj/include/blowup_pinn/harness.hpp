#pragma once

// Experiment campaigns: per-run training and bound evaluation, delta/width
// sweeps, the timing study, CSV persistence and summary statistics.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <istream>
#include <limits>
#include <map>
#include <mutex>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "blowup_pinn/bounds.hpp"
#include "blowup_pinn/checkpoint.hpp"
#include "blowup_pinn/optimizer.hpp"
#include "blowup_pinn/problems.hpp"
#include "blowup_pinn/sampling.hpp"

namespace blowup_pinn {

inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// ---------------------------------------------------------------------------
// Run records

/// One trained model. Not-applicable bound columns are NaN; a failed run has
/// loss_final = NaN.
struct RunRecord {
  std::string run_id;
  ProblemKind problem = ProblemKind::burgers1d;
  double delta = 0.0;
  int width = 0;
  int depth = 0;
  std::uint64_t seed = 0;
  std::int64_t iters = 0;
  double lr = 0.0;
  int n_int = 0;
  int n_tb = 0;
  int n_sb = 0;
  Scheme scheme = Scheme::random;
  double loss_final = kNaN;
  double loss_best = kNaN;
  double train_seconds = 0.0;
  double lhs_t1 = kNaN;
  double rhs_t1 = kNaN;
  double lhs_t2 = kNaN;
  double rhs_t2 = kNaN;
  double rhs_b1 = kNaN;
  std::string checkpoint;

  bool failed() const { return std::isnan(loss_final); }
};

inline constexpr const char* kRunsHeader =
    "run_id,problem,delta,width,depth,seed,iters,lr,n_int,n_tb,n_sb,scheme,loss_final,loss_best,train_seconds,"
    "lhs_t1,rhs_t1,lhs_t2,rhs_t2,rhs_b1,checkpoint";

inline constexpr const char* kSummaryHeader = "sweep_id,width,metric,value";

namespace detail {

// NaN cells are written empty.
inline std::string cell(double v) { return std::isnan(v) ? std::string() : format_value(v); }

inline void check_text_cell(const std::string& s, const char* what) {
  if (s.find_first_of(",\"\n\r") != std::string::npos)
    throw std::invalid_argument(std::string(what) + " must not contain commas, quotes or newlines: '" + s + "'");
}

inline std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

inline double parse_double_cell(const std::string& s) {
  if (s.empty() || s == "nan") return kNaN;
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  if (s == "inf") return std::numeric_limits<double>::infinity();
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end != s.c_str() + s.size()) throw std::invalid_argument("not a number: '" + s + "'");
  return v;
}

inline std::int64_t parse_int_cell(const std::string& s) {
  std::size_t pos = 0;
  const long long v = std::stoll(s, &pos);
  if (pos != s.size()) throw std::invalid_argument("not an integer: '" + s + "'");
  return v;
}

inline std::uint64_t parse_uint_cell(const std::string& s) {
  if (s.empty() || s[0] == '-') throw std::invalid_argument("not an unsigned integer: '" + s + "'");
  std::size_t pos = 0;
  const unsigned long long v = std::stoull(s, &pos);
  if (pos != s.size()) throw std::invalid_argument("not an unsigned integer: '" + s + "'");
  return v;
}

inline std::mutex& file_mutex() {
  static std::mutex m;
  return m;
}

}  // namespace detail

inline std::string to_csv_row(const RunRecord& r) {
  detail::check_text_cell(r.run_id, "run_id");
  detail::check_text_cell(r.checkpoint, "checkpoint path");
  std::ostringstream os;
  os << r.run_id << ',' << to_string(r.problem) << ',' << detail::cell(r.delta) << ',' << r.width << ',' << r.depth
     << ',' << r.seed << ',' << r.iters << ',' << detail::cell(r.lr) << ',' << r.n_int << ',' << r.n_tb << ','
     << r.n_sb << ',' << to_string(r.scheme) << ',' << detail::cell(r.loss_final) << ',' << detail::cell(r.loss_best)
     << ',' << detail::cell(r.train_seconds) << ',' << detail::cell(r.lhs_t1) << ',' << detail::cell(r.rhs_t1) << ','
     << detail::cell(r.lhs_t2) << ',' << detail::cell(r.rhs_t2) << ',' << detail::cell(r.rhs_b1) << ','
     << r.checkpoint;
  return os.str();
}

/// Parses one runs.csv data row; errors mention `line_number`.
inline RunRecord parse_csv_row(const std::string& line, std::size_t line_number) {
  const auto f = detail::split_csv(line);
  auto fail = [&](const std::string& what) -> void {
    throw std::runtime_error("runs.csv line " + std::to_string(line_number) + ": " + what);
  };
  if (f.size() != 21) fail("expected 21 fields, found " + std::to_string(f.size()));
  RunRecord r;
  try {
    r.run_id = f[0];
    r.problem = parse_problem_kind(f[1]);
    r.delta = detail::parse_double_cell(f[2]);
    r.width = static_cast<int>(detail::parse_int_cell(f[3]));
    r.depth = static_cast<int>(detail::parse_int_cell(f[4]));
    r.seed = detail::parse_uint_cell(f[5]);
    r.iters = detail::parse_int_cell(f[6]);
    r.lr = detail::parse_double_cell(f[7]);
    r.n_int = static_cast<int>(detail::parse_int_cell(f[8]));
    r.n_tb = static_cast<int>(detail::parse_int_cell(f[9]));
    r.n_sb = static_cast<int>(detail::parse_int_cell(f[10]));
    r.scheme = parse_scheme(f[11]);
    r.loss_final = detail::parse_double_cell(f[12]);
    r.loss_best = detail::parse_double_cell(f[13]);
    r.train_seconds = detail::parse_double_cell(f[14]);
    r.lhs_t1 = detail::parse_double_cell(f[15]);
    r.rhs_t1 = detail::parse_double_cell(f[16]);
    r.lhs_t2 = detail::parse_double_cell(f[17]);
    r.rhs_t2 = detail::parse_double_cell(f[18]);
    r.rhs_b1 = detail::parse_double_cell(f[19]);
    r.checkpoint = f[20];
  } catch (const std::runtime_error&) {
    throw;
  } catch (const std::exception& e) {
    fail(e.what());
  }
  return r;
}

/// Field-wise equality with NaN == NaN.
inline bool same_record(const RunRecord& a, const RunRecord& b, bool include_timing = true) {
  auto eq = [](double x, double y) { return (std::isnan(x) && std::isnan(y)) || x == y; };
  return a.run_id == b.run_id && a.problem == b.problem && eq(a.delta, b.delta) && a.width == b.width &&
         a.depth == b.depth && a.seed == b.seed && a.iters == b.iters && eq(a.lr, b.lr) && a.n_int == b.n_int &&
         a.n_tb == b.n_tb && a.n_sb == b.n_sb && a.scheme == b.scheme && eq(a.loss_final, b.loss_final) &&
         eq(a.loss_best, b.loss_best) && (!include_timing || eq(a.train_seconds, b.train_seconds)) &&
         eq(a.lhs_t1, b.lhs_t1) && eq(a.rhs_t1, b.rhs_t1) && eq(a.lhs_t2, b.lhs_t2) && eq(a.rhs_t2, b.rhs_t2) &&
         eq(a.rhs_b1, b.rhs_b1) && a.checkpoint == b.checkpoint;
}

/// Appends rows to a runs CSV, writing the header first if the file is new or
/// empty. Serialised by a process-wide mutex; each call is one write.
inline void append_records(const std::filesystem::path& file, const std::vector<RunRecord>& records) {
  std::string block;
  for (const auto& r : records) block += to_csv_row(r) + '\n';
  std::lock_guard lock(detail::file_mutex());
  std::error_code ec;
  const bool fresh = !std::filesystem::exists(file, ec) || std::filesystem::file_size(file, ec) == 0;
  if (file.has_parent_path()) std::filesystem::create_directories(file.parent_path());
  std::ofstream os(file, std::ios::app | std::ios::binary);
  if (!os) throw std::runtime_error("cannot open '" + file.string() + "' for appending");
  if (fresh) block = std::string(kRunsHeader) + '\n' + block;
  os.write(block.data(), static_cast<std::streamsize>(block.size()));
  os.flush();
  if (!os) throw std::runtime_error("write to '" + file.string() + "' failed");
}

inline std::vector<RunRecord> read_records(std::istream& is) {
  std::vector<RunRecord> out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(is, line)) {
    ++n;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (n == 1) {
      if (line != kRunsHeader) throw std::runtime_error("runs.csv line 1: unexpected header");
      continue;
    }
    if (line.empty()) continue;
    out.push_back(parse_csv_row(line, n));
  }
  return out;
}

inline std::vector<RunRecord> load_records_file(const std::filesystem::path& file) {
  std::ifstream is(file);
  if (!is) throw std::runtime_error("cannot open '" + file.string() + "'");
  return read_records(is);
}

/// Records from <dir>/runs.csv; a directory without that file yields none.
inline std::vector<RunRecord> load_records(const std::filesystem::path& dir) {
  const auto file = dir / "runs.csv";
  if (!std::filesystem::exists(file)) return {};
  return load_records_file(file);
}

inline void persist(const std::vector<RunRecord>& records, const std::filesystem::path& dir) {
  append_records(dir / "runs.csv", records);
}

// ---------------------------------------------------------------------------
// Summaries

struct SummaryRow {
  std::string sweep_id;
  std::string width;  // integer width or "all"
  std::string metric;
  double value = 0.0;
};

inline void write_summary(const std::vector<SummaryRow>& rows, std::ostream& os) {
  os << kSummaryHeader << '\n';
  for (const auto& r : rows) {
    detail::check_text_cell(r.sweep_id, "sweep_id");
    os << r.sweep_id << ',' << r.width << ',' << r.metric << ',' << format_value(r.value) << '\n';
  }
}

inline void save_summary(const std::vector<SummaryRow>& rows, const std::filesystem::path& file) {
  std::lock_guard lock(detail::file_mutex());
  if (file.has_parent_path()) std::filesystem::create_directories(file.parent_path());
  std::ofstream os(file);
  if (!os) throw std::runtime_error("cannot open '" + file.string() + "' for writing");
  write_summary(rows, os);
}

inline std::vector<SummaryRow> read_summary(std::istream& is) {
  std::vector<SummaryRow> out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(is, line)) {
    ++n;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (n == 1) {
      if (line != kSummaryHeader) throw std::runtime_error("summary.csv line 1: unexpected header");
      continue;
    }
    if (line.empty()) continue;
    const auto f = detail::split_csv(line);
    if (f.size() != 4) throw std::runtime_error("summary.csv line " + std::to_string(n) + ": expected 4 fields");
    try {
      out.push_back({f[0], f[1], f[2], detail::parse_double_cell(f[3])});
    } catch (const std::exception& e) {
      throw std::runtime_error("summary.csv line " + std::to_string(n) + ": " + e.what());
    }
  }
  return out;
}

enum class SweepKind { delta, width, timing };

inline std::string to_string(SweepKind k) {
  switch (k) {
    case SweepKind::delta: return "delta";
    case SweepKind::width: return "width";
    case SweepKind::timing: return "timing";
  }
  return "unknown";
}

inline SweepKind parse_sweep_kind(std::string_view s) {
  if (s == "delta") return SweepKind::delta;
  if (s == "width") return SweepKind::width;
  if (s == "timing") return SweepKind::timing;
  throw std::invalid_argument("unknown sweep kind '" + std::string(s) + "' (delta | width | timing)");
}

namespace detail {

inline std::map<int, std::vector<const RunRecord*>> by_width(const std::vector<RunRecord>& records) {
  std::map<int, std::vector<const RunRecord*>> out;
  for (const auto& r : records) out[r.width].push_back(&r);
  return out;
}

inline void push_counts(std::vector<SummaryRow>& rows, const std::string& id, const std::string& width,
                        const std::vector<const RunRecord*>& group) {
  const auto failed = std::count_if(group.begin(), group.end(), [](const RunRecord* r) { return r->failed(); });
  rows.push_back({id, width, "n_runs", static_cast<double>(group.size() - failed)});
  rows.push_back({id, width, "n_failed", static_cast<double>(failed)});
}

// Pearson over the finite pairs; omitted when undefined.
inline void push_pearson(std::vector<SummaryRow>& rows, const std::string& id, const std::string& width,
                         const std::string& metric, const std::vector<double>& xs, const std::vector<double>& ys) {
  std::vector<double> a, b;
  for (std::size_t i = 0; i < xs.size(); ++i)
    if (std::isfinite(xs[i]) && std::isfinite(ys[i])) {
      a.push_back(xs[i]);
      b.push_back(ys[i]);
    }
  try {
    rows.push_back({id, width, metric, pearson(a, b)});
  } catch (const std::invalid_argument&) {
  }
}

}  // namespace detail

/// Per width: Pearson(lhs, rhs) across runs. 1D uses the T2 pair (raw as
/// pearson_lhs_rhs, log-log as pearson_log_lhs_rhs); 2D uses the T1 pair,
/// which is already on a log scale. Failed runs are excluded and counted.
inline std::vector<SummaryRow> summarize_delta_sweep(const std::string& sweep_id, const std::vector<RunRecord>& records) {
  std::vector<SummaryRow> rows;
  for (const auto& [width, group] : detail::by_width(records)) {
    const std::string w = std::to_string(width);
    detail::push_counts(rows, sweep_id, w, group);
    std::vector<double> lhs, rhs, log_lhs, log_rhs;
    int violations = 0;
    for (const RunRecord* r : group) {
      if (r->failed()) continue;
      const bool t1 = r->problem == ProblemKind::burgers2d;
      const double l = t1 ? r->lhs_t1 : r->lhs_t2;
      const double h = t1 ? r->rhs_t1 : r->rhs_t2;
      lhs.push_back(l);
      rhs.push_back(h);
      log_lhs.push_back(t1 ? kNaN : std::log(l));
      log_rhs.push_back(t1 ? kNaN : std::log(h));
      if (std::isfinite(l) && h - l < -1e-9 * std::max(1.0, std::abs(h))) ++violations;
    }
    detail::push_pearson(rows, sweep_id, w, "pearson_lhs_rhs", lhs, rhs);
    detail::push_pearson(rows, sweep_id, w, "pearson_log_lhs_rhs", log_lhs, log_rhs);
    rows.push_back({sweep_id, w, "dominance_violations", static_cast<double>(violations)});
  }
  return rows;
}

/// Per width: mean, std and median of the T2 rhs over seeds; overall
/// Spearman(median rhs, width) when at least two widths have data.
inline std::vector<SummaryRow> summarize_width_sweep(const std::string& sweep_id, const std::vector<RunRecord>& records) {
  std::vector<SummaryRow> rows;
  std::vector<double> widths, medians;
  for (const auto& [width, group] : detail::by_width(records)) {
    const std::string w = std::to_string(width);
    detail::push_counts(rows, sweep_id, w, group);
    std::vector<double> rhs;
    for (const RunRecord* r : group)
      if (!r->failed() && std::isfinite(r->rhs_t2)) rhs.push_back(r->rhs_t2);
    if (rhs.empty()) continue;
    rows.push_back({sweep_id, w, "rhs_mean", mean(rhs)});
    rows.push_back({sweep_id, w, "rhs_std", stddev(rhs)});
    rows.push_back({sweep_id, w, "rhs_median", median(rhs)});
    widths.push_back(width);
    medians.push_back(median(rhs));
  }
  try {
    rows.push_back({sweep_id, "all", "spearman_rhs_width", spearman(medians, widths)});
  } catch (const std::invalid_argument&) {
  }
  return rows;
}

/// Per width: coefficient of variation of training wall time across runs.
inline std::vector<SummaryRow> summarize_timing(const std::string& sweep_id, const std::vector<RunRecord>& records) {
  std::vector<SummaryRow> rows;
  for (const auto& [width, group] : detail::by_width(records)) {
    const std::string w = std::to_string(width);
    detail::push_counts(rows, sweep_id, w, group);
    std::vector<double> secs;
    for (const RunRecord* r : group)
      if (!r->failed()) secs.push_back(r->train_seconds);
    if (secs.empty()) continue;
    rows.push_back({sweep_id, w, "train_seconds_mean", mean(secs)});
    rows.push_back({sweep_id, w, "timing_cv", secs.size() < 2 ? 0.0 : coefficient_of_variation(secs)});
  }
  return rows;
}

inline std::vector<SummaryRow> summarize(SweepKind kind, const std::string& sweep_id,
                                         const std::vector<RunRecord>& records) {
  switch (kind) {
    case SweepKind::delta: return summarize_delta_sweep(sweep_id, records);
    case SweepKind::width: return summarize_width_sweep(sweep_id, records);
    case SweepKind::timing: return summarize_timing(sweep_id, records);
  }
  return {};
}

inline std::optional<double> find_metric(const std::vector<SummaryRow>& rows, const std::string& metric,
                                         const std::string& width = "") {
  for (const auto& r : rows)
    if (r.metric == metric && (width.empty() || r.width == width)) return r.value;
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Sweep specification and config files

struct SweepSpec {
  std::string sweep_id = "sweep";
  SweepKind kind = SweepKind::delta;
  ProblemKind problem = ProblemKind::burgers1d;
  std::vector<double> deltas{0.1, 0.3, 0.5, 0.7, 0.9, 0.95};
  std::vector<int> widths{30};
  std::vector<int> depths{6};
  std::vector<std::uint64_t> seeds{0};
  std::int64_t iterations = 20000;
  double lr = 1e-4;
  CollocationCounts counts;
  Scheme scheme = Scheme::random;
  double delta_margin = kDefaultDeltaMargin;
  int integration_order = 0;  // 0: 64 (1D) / 32 (2D)
  int sup_resolution = 0;     // 0: 512 (1D) / 128 (2D)
  bool unsquared_tb = false;
  AlphaConfig alpha;
  std::string output_dir = "sweep_out";
  int workers = 0;  // 0: hardware threads (or BLOWUP_PINN_WORKERS)
  bool checkpoints = true;
};

/// Default collocation counts for a problem: 4096/256/256 (1D), 16384/1024/1024 (2D).
inline CollocationCounts default_counts(ProblemKind kind) {
  return kind == ProblemKind::burgers1d ? CollocationCounts{4096, 256, 256} : CollocationCounts{16384, 1024, 1024};
}

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == ',' || c == ' ' || c == '\t') {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (!cur.empty()) out.push_back(cur);
  if (out.empty()) throw std::invalid_argument("empty list");
  return out;
}

inline bool parse_bool(const std::string& s) {
  if (s == "1" || s == "true" || s == "yes" || s == "on") return true;
  if (s == "0" || s == "false" || s == "no" || s == "off") return false;
  throw std::invalid_argument("not a boolean: '" + s + "'");
}

template <class T>
std::string join(const std::vector<T>& xs) {
  std::string out;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i) out += ',';
    if constexpr (std::is_floating_point_v<T>)
      out += format_value(xs[i]);
    else
      out += std::to_string(xs[i]);
  }
  return out;
}

}  // namespace detail

/// Keys accepted in sweep config files (and echoed into config.txt).
inline const std::vector<std::string>& sweep_config_keys() {
  static const std::vector<std::string> keys{
      "sweep_id",      "sweep",       "problem",      "deltas",         "widths",          "depths",
      "seeds",         "iters",       "lr",           "n_int",          "n_tb",            "n_sb",
      "scheme",        "delta_margin", "integration_order", "sup_resolution", "unsquared_tb", "alpha_tb",
      "alpha_int",     "alpha_sb",    "cquad_tb",     "cquad_int",      "cquad_sb_left",   "cquad_sb_right",
      "output_dir",    "workers",     "checkpoints"};
  return keys;
}

/// Applies one key = value entry. Unknown keys and bad values throw
/// std::invalid_argument naming the key.
inline void apply_config_entry(SweepSpec& s, const std::string& key, const std::string& value) {
  using detail::parse_double_cell;
  using detail::parse_int_cell;
  try {
    if (key == "sweep_id") {
      detail::check_text_cell(value, "sweep_id");
      s.sweep_id = value;
    } else if (key == "sweep") {
      s.kind = parse_sweep_kind(value);
    } else if (key == "problem") {
      s.problem = parse_problem_kind(value);
    } else if (key == "deltas") {
      s.deltas.clear();
      for (const auto& v : detail::split_list(value)) s.deltas.push_back(parse_double_cell(v));
    } else if (key == "widths") {
      s.widths.clear();
      for (const auto& v : detail::split_list(value)) s.widths.push_back(static_cast<int>(parse_int_cell(v)));
    } else if (key == "depths") {
      s.depths.clear();
      for (const auto& v : detail::split_list(value)) s.depths.push_back(static_cast<int>(parse_int_cell(v)));
    } else if (key == "seeds") {
      s.seeds.clear();
      for (const auto& v : detail::split_list(value)) s.seeds.push_back(detail::parse_uint_cell(v));
    } else if (key == "iters") {
      s.iterations = parse_int_cell(value);
    } else if (key == "lr") {
      s.lr = parse_double_cell(value);
    } else if (key == "n_int") {
      s.counts.n_int = static_cast<int>(parse_int_cell(value));
    } else if (key == "n_tb") {
      s.counts.n_tb = static_cast<int>(parse_int_cell(value));
    } else if (key == "n_sb") {
      s.counts.n_sb = static_cast<int>(parse_int_cell(value));
    } else if (key == "scheme") {
      s.scheme = parse_scheme(value);
    } else if (key == "delta_margin") {
      s.delta_margin = parse_double_cell(value);
    } else if (key == "integration_order") {
      s.integration_order = static_cast<int>(parse_int_cell(value));
    } else if (key == "sup_resolution") {
      s.sup_resolution = static_cast<int>(parse_int_cell(value));
    } else if (key == "unsquared_tb") {
      s.unsquared_tb = detail::parse_bool(value);
    } else if (key == "alpha_tb") {
      s.alpha.alpha_tb = parse_double_cell(value);
    } else if (key == "alpha_int") {
      s.alpha.alpha_int = parse_double_cell(value);
    } else if (key == "alpha_sb") {
      s.alpha.alpha_sb = parse_double_cell(value);
    } else if (key == "cquad_tb") {
      s.alpha.cquad_tb = parse_double_cell(value);
    } else if (key == "cquad_int") {
      s.alpha.cquad_int = parse_double_cell(value);
    } else if (key == "cquad_sb_left") {
      s.alpha.cquad_sb_left = parse_double_cell(value);
    } else if (key == "cquad_sb_right") {
      s.alpha.cquad_sb_right = parse_double_cell(value);
    } else if (key == "output_dir") {
      s.output_dir = value;
    } else if (key == "workers") {
      s.workers = static_cast<int>(parse_int_cell(value));
    } else if (key == "checkpoints") {
      s.checkpoints = detail::parse_bool(value);
    } else {
      throw std::invalid_argument("unknown config key '" + key + "'");
    }
  } catch (const std::invalid_argument& e) {
    if (std::string(e.what()).rfind("unknown config key", 0) == 0) throw;
    throw std::invalid_argument("config key '" + key + "': " + e.what());
  } catch (const std::out_of_range&) {
    throw std::invalid_argument("config key '" + key + "': value out of range");
  }
}

/// Parses `key = value` lines; '#' starts a comment. Returns the keys seen.
inline std::set<std::string> parse_sweep_config(std::istream& is, SweepSpec& spec) {
  std::set<std::string> seen;
  std::string line;
  std::size_t n = 0;
  while (std::getline(is, line)) {
    ++n;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("config line " + std::to_string(n) + ": expected 'key = value'");
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string value = detail::trim(line.substr(eq + 1));
    try {
      apply_config_entry(spec, key, value);
    } catch (const std::invalid_argument& e) {
      throw std::invalid_argument("config line " + std::to_string(n) + ": " + e.what());
    }
    seen.insert(key);
  }
  return seen;
}

inline std::set<std::string> load_sweep_config(const std::filesystem::path& file, SweepSpec& spec) {
  std::ifstream is(file);
  if (!is) throw std::runtime_error("cannot open config file '" + file.string() + "'");
  return parse_sweep_config(is, spec);
}

/// Effective configuration in the config-file format.
inline void write_sweep_config(const SweepSpec& s, std::ostream& os) {
  os << "sweep_id = " << s.sweep_id << '\n'
     << "sweep = " << to_string(s.kind) << '\n'
     << "problem = " << to_string(s.problem) << '\n'
     << "deltas = " << detail::join(s.deltas) << '\n'
     << "widths = " << detail::join(s.widths) << '\n'
     << "depths = " << detail::join(s.depths) << '\n'
     << "seeds = " << detail::join(s.seeds) << '\n'
     << "iters = " << s.iterations << '\n'
     << "lr = " << format_value(s.lr) << '\n'
     << "n_int = " << s.counts.n_int << '\n'
     << "n_tb = " << s.counts.n_tb << '\n'
     << "n_sb = " << s.counts.n_sb << '\n'
     << "scheme = " << to_string(s.scheme) << '\n'
     << "delta_margin = " << format_value(s.delta_margin) << '\n'
     << "integration_order = " << s.integration_order << '\n'
     << "sup_resolution = " << s.sup_resolution << '\n'
     << "unsquared_tb = " << (s.unsquared_tb ? "true" : "false") << '\n'
     << "alpha_tb = " << format_value(s.alpha.alpha_tb) << '\n'
     << "alpha_int = " << format_value(s.alpha.alpha_int) << '\n'
     << "alpha_sb = " << format_value(s.alpha.alpha_sb) << '\n'
     << "cquad_tb = " << format_value(s.alpha.cquad_tb) << '\n'
     << "cquad_int = " << format_value(s.alpha.cquad_int) << '\n'
     << "cquad_sb_left = " << format_value(s.alpha.cquad_sb_left) << '\n'
     << "cquad_sb_right = " << format_value(s.alpha.cquad_sb_right) << '\n'
     << "output_dir = " << s.output_dir << '\n'
     << "workers = " << s.workers << '\n'
     << "checkpoints = " << (s.checkpoints ? "true" : "false") << '\n';
}

/// Rejects specs that cannot run: empty grids, deltas outside the admissible
/// interval, non-positive sizes.
inline void validate(const SweepSpec& s) {
  auto need = [](bool ok, const std::string& what) {
    if (!ok) throw std::invalid_argument("sweep spec: " + what);
  };
  need(!s.deltas.empty() && !s.widths.empty() && !s.depths.empty() && !s.seeds.empty(),
       "deltas, widths, depths and seeds must be non-empty");
  for (double d : s.deltas) {
    try {
      with_problem(s.problem, d, s.delta_margin, [](const auto&) { return 0; });
    } catch (const InvalidDelta& e) {
      throw std::invalid_argument(std::string("sweep spec: ") + e.what());
    }
  }
  for (int w : s.widths) need(w >= 1, "widths must be positive");
  for (int d : s.depths) need(d >= 1, "depths must be positive");
  need(s.iterations >= 0, "iters must be >= 0");
  need(s.lr > 0.0, "lr must be positive");
  need(s.counts.n_int > 0 && s.counts.n_tb > 0 && s.counts.n_sb > 0, "collocation counts must be positive");
  need(s.integration_order >= 0 && s.sup_resolution >= 0, "grid sizes must be >= 0");
  if (s.kind == SweepKind::width) need(s.widths.size() >= 2, "width sweep needs at least two widths");
}

// ---------------------------------------------------------------------------
// Single runs

struct RunConfig {
  ProblemKind problem = ProblemKind::burgers1d;
  double delta = 0.5;
  double delta_margin = kDefaultDeltaMargin;
  TrainConfig train;
  CollocationCounts counts;
  Scheme scheme = Scheme::random;
  int integration_order = 0;
  int sup_resolution = 0;
  bool unsquared_tb = false;
  AlphaConfig alpha;
  bool evaluate_bounds = true;
  std::string run_id = "run";
  std::string checkpoint_path;  // empty: no checkpoint written
};

struct RunOutcome {
  RunRecord record;
  std::optional<Theorem1Report> t1;
  std::optional<Theorem2Report> t2;
  std::optional<TheoremB1Report> b1;
  TrainResult training;
  std::string error;
};

/// Samples, trains, evaluates the applicable bounds on the best iterate and
/// writes its checkpoint. Failures (divergence, non-finite bound terms) are
/// recorded rather than thrown; invalid configuration still throws.
inline RunOutcome execute_run(const RunConfig& cfg) {
  return with_problem(cfg.problem, cfg.delta, cfg.delta_margin, [&](const auto& problem) {
    using P = std::decay_t<decltype(problem)>;
    RunOutcome out;
    RunRecord& rec = out.record;
    rec.run_id = cfg.run_id;
    rec.problem = cfg.problem;
    rec.delta = cfg.delta;
    rec.width = cfg.train.width;
    rec.depth = cfg.train.depth;
    rec.seed = cfg.train.seed;
    rec.iters = cfg.train.iterations;
    rec.lr = cfg.train.lr;
    rec.scheme = cfg.scheme;

    const CollocationSet set = sample_collocation(problem, cfg.counts, cfg.scheme, cfg.train.seed);
    rec.n_int = set.n_int();
    rec.n_tb = set.n_tb();
    rec.n_sb = set.n_sb();

    out.training = train(problem, set, cfg.train);
    rec.train_seconds = out.training.train_seconds;
    rec.loss_best = out.training.best.loss;
    rec.loss_final = out.training.final_loss;
    if (out.training.diverged) {
      out.error = out.training.failure;
      rec.loss_final = kNaN;
      return out;
    }

    const NetworkParams& best = out.training.best.params;
    const NetworkSurrogate surrogate(best);
    const int order = cfg.integration_order > 0 ? cfg.integration_order : default_integration_order<P>();
    const int sup = cfg.sup_resolution > 0 ? cfg.sup_resolution : default_sup_resolution<P>();
    auto evaluate = [&] {
      const IntegrationGrids grids = gauss_legendre_grids(problem, order, sup);
      if constexpr (P::space_dim == 1) {
        Theorem2Options opt;
        opt.unsquared_initial = cfg.unsquared_tb;
        out.t2 = theorem2_bound(problem, surrogate, grids, opt);
        rec.lhs_t2 = out.t2->lhs;
        rec.rhs_t2 = out.t2->rhs;
        if (set.has_quadrature_weights()) {
          out.b1 = theoremB1_bound(problem, surrogate, set, cfg.alpha, sup);
          rec.rhs_b1 = out.b1->rhs;
        }
      } else {
        out.t1 = theorem1_bound(problem, surrogate, grids);
        rec.lhs_t1 = out.t1->lhs;
        rec.rhs_t1 = out.t1->rhs;
      }
    };
    if (cfg.evaluate_bounds) {
      try {
        evaluate();
      } catch (const std::runtime_error& e) {
        out.error = std::string("bound evaluation: ") + e.what();
        rec.loss_final = kNaN;
      }
    }

    if (!cfg.checkpoint_path.empty()) {
      const std::filesystem::path parent = std::filesystem::path(cfg.checkpoint_path).parent_path();
      if (!parent.empty()) std::filesystem::create_directories(parent);
      save_checkpoint({best, cfg.train.seed, out.training.best.iteration}, cfg.checkpoint_path);
      rec.checkpoint = cfg.checkpoint_path;
    }
    return out;
  });
}

/// Throws std::invalid_argument unless `params` maps space-time points of
/// `Problem` to its velocity components.
template <class Problem>
void check_network_shape(const NetworkParams& params) {
  if (params.input_dim() != Problem::space_dim + 1 || params.output_dim() != Problem::space_dim)
    throw std::invalid_argument("network has " + std::to_string(params.input_dim()) + " inputs and " +
                                std::to_string(params.output_dim()) + " outputs; " + std::string(Problem::name()) +
                                " needs " + std::to_string(Problem::space_dim + 1) + " and " +
                                std::to_string(Problem::space_dim));
}

/// Exact solution (and optionally a network) on a uniform space-time grid with
/// `nx` nodes per spatial axis and `nt` in time, endpoints included. Columns:
/// coordinates, exact components, then network components when given.
template <class Problem>
void write_solution_grid(const Problem& problem, int nx, int nt, const NetworkParams* network, std::ostream& os) {
  if (nx < 2 || nt < 2) throw std::invalid_argument("export grid needs at least 2 nodes per axis");
  if (network) check_network_shape<Problem>(*network);
  constexpr int d = Problem::space_dim;
  const Box box = problem.space_time_box();
  std::vector<int> n(d + 1, nx);
  n[d] = nt;
  Eigen::Index total = 1;
  for (int a = 0; a <= d; ++a) total *= n[a];
  Matrix pts(d + 1, total);
  for (Eigen::Index i = 0; i < total; ++i) {
    Eigen::Index rem = i;
    for (int a = d; a >= 0; --a) {
      const Eigen::Index k = rem % n[a];
      rem /= n[a];
      pts(a, i) = k + 1 == n[a] ? box.upper[a] : box.lower[a] + (box.upper[a] - box.lower[a]) * k / (n[a] - 1);
    }
  }
  const JetBatch exact = problem.exact_jet(pts, false);
  JetBatch approx;
  if (network) approx = evaluate_batch(*network, pts, false);

  auto comp = [](const char* stem, int c) { return std::string(stem) + (d > 1 ? std::to_string(c + 1) : ""); };
  for (int a = 0; a < d; ++a) os << comp("x", a) << ',';
  os << 't';
  for (int c = 0; c < d; ++c) os << ',' << comp("u", c) << "_exact";
  if (network)
    for (int c = 0; c < d; ++c) os << ',' << comp("u", c) << "_net";
  os << '\n';
  for (Eigen::Index i = 0; i < total; ++i) {
    for (int a = 0; a <= d; ++a) os << (a ? "," : "") << format_value(pts(a, i));
    for (int c = 0; c < d; ++c) os << ',' << format_value(exact.value(c, i));
    if (network)
      for (int c = 0; c < d; ++c) os << ',' << format_value(approx.value(c, i));
    os << '\n';
  }
}

// ---------------------------------------------------------------------------
// Sweeps

/// Worker count: explicit value if > 0, else BLOWUP_PINN_WORKERS, else the
/// number of hardware threads.
inline int resolve_workers(int requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("BLOWUP_PINN_WORKERS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) return static_cast<int>(v);
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

inline std::string make_run_id(const std::string& sweep_id, double delta, int width, int depth, std::uint64_t seed) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "%s/d%.6g-w%d-L%d-s%llu", sweep_id.c_str(), delta, width, depth,
                static_cast<unsigned long long>(seed));
  return buf;
}

/// Runs of a spec in grid order: delta, then width, depth, seed.
inline std::vector<RunConfig> expand(const SweepSpec& s) {
  std::vector<RunConfig> out;
  for (double delta : s.deltas)
    for (int width : s.widths)
      for (int depth : s.depths)
        for (std::uint64_t seed : s.seeds) {
          RunConfig c;
          c.problem = s.problem;
          c.delta = delta;
          c.delta_margin = s.delta_margin;
          c.train.width = width;
          c.train.depth = depth;
          c.train.seed = seed;
          c.train.iterations = s.iterations;
          c.train.lr = s.lr;
          c.counts = s.counts;
          c.scheme = s.scheme;
          c.integration_order = s.integration_order;
          c.sup_resolution = s.sup_resolution;
          c.unsquared_tb = s.unsquared_tb;
          c.alpha = s.alpha;
          c.run_id = make_run_id(s.sweep_id, delta, width, depth, seed);
          if (s.checkpoints) {
            std::string file = c.run_id.substr(s.sweep_id.size() + 1) + ".ckpt";
            c.checkpoint_path = (std::filesystem::path(s.output_dir) / "checkpoints" / s.sweep_id / file).string();
          }
          out.push_back(std::move(c));
        }
  return out;
}

struct SweepResult {
  std::vector<RunRecord> records;  // grid order
  std::vector<SummaryRow> summary;
  std::vector<std::string> errors;
  std::size_t failed() const {
    return static_cast<std::size_t>(std::count_if(records.begin(), records.end(), [](const RunRecord& r) { return r.failed(); }));
  }
};

/// Executes every run of `spec`, appending each record to <output_dir>/runs.csv
/// as it completes, then writes summary.csv and config.txt. Timing sweeps run
/// sequentially so wall times are not distorted by contention.
inline SweepResult run_sweep(const SweepSpec& spec, std::function<void(const RunRecord&)> on_record = {}) {
  validate(spec);
  const std::filesystem::path dir(spec.output_dir);
  std::filesystem::create_directories(dir);
  {
    std::ofstream cfg(dir / "config.txt");
    write_sweep_config(spec, cfg);
  }
  const std::vector<RunConfig> runs = expand(spec);
  SweepResult result;
  result.records.resize(runs.size());
  std::vector<std::string> errors(runs.size());

  const int workers = spec.kind == SweepKind::timing ? 1 : std::min<int>(resolve_workers(spec.workers), static_cast<int>(runs.size()));
  std::atomic<std::size_t> next{0};
  std::mutex callback_mutex;
  std::exception_ptr first_error;
  auto worker = [&] {
    try {
      for (std::size_t i = next++; i < runs.size(); i = next++) {
        RunOutcome out = execute_run(runs[i]);
        append_records(dir / "runs.csv", {out.record});
        result.records[i] = out.record;
        errors[i] = out.error;
        if (on_record) {
          std::lock_guard lock(callback_mutex);
          on_record(out.record);
        }
      }
    } catch (...) {
      std::lock_guard lock(callback_mutex);
      if (!first_error) first_error = std::current_exception();
      next = runs.size();
    }
  };
  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (first_error) std::rethrow_exception(first_error);
  for (std::size_t i = 0; i < runs.size(); ++i)
    if (!errors[i].empty()) result.errors.push_back(result.records[i].run_id + ": " + errors[i]);

  result.summary = summarize(spec.kind, spec.sweep_id, result.records);
  save_summary(result.summary, dir / "summary.csv");
  return result;
}

inline SweepResult delta_sweep(SweepSpec spec) {
  spec.kind = SweepKind::delta;
  return run_sweep(spec);
}

inline SweepResult width_sweep(SweepSpec spec) {
  spec.kind = SweepKind::width;
  return run_sweep(spec);
}

inline SweepResult timing_study(SweepSpec spec) {
  spec.kind = SweepKind::timing;
  return run_sweep(spec);
}

/// Records belonging to `sweep_id` (run ids carry the sweep id as prefix).
inline std::vector<RunRecord> records_of_sweep(const std::vector<RunRecord>& all, const std::string& sweep_id) {
  std::vector<RunRecord> out;
  const std::string prefix = sweep_id + "/";
  for (const auto& r : all)
    if (r.run_id.rfind(prefix, 0) == 0) out.push_back(r);
  return out;
}

}  // namespace blowup_pinn
