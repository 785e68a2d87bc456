// Command-line front end: train, bound, sweep, report.
//
// Exit codes: 0 success, 1 usage error, 2 runtime error, 3 sweep with some
// (but not all) runs failed.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "blowup_pinn/harness.hpp"

namespace bp = blowup_pinn;
namespace fs = std::filesystem;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitRuntime = 2;
constexpr int kExitPartial = 3;

struct UsageError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// A CLI option that overrides a config-file key when given.
struct Overlay {
  CLI::Option* option;
  std::string key;
  bool is_flag = false;
};

struct SpecFlags {
  std::string config;
  std::string sweep_kind = "delta";
  std::string sweep_id;
  std::string problem = "burgers1d";
  double delta = 0.5;
  std::vector<double> deltas;
  double delta_margin = bp::kDefaultDeltaMargin;
  int width = 30;
  int depth = 6;
  std::uint64_t seed = 0;
  std::vector<int> widths;
  std::vector<int> depths;
  std::vector<std::uint64_t> seeds;
  std::int64_t iters = 20000;
  double lr = 1e-4;
  int n_int = 0;
  int n_tb = 0;
  int n_sb = 0;
  std::string scheme = "random";
  int integration_order = 0;
  int sup_resolution = 0;
  bool unsquared_tb = false;
  double alpha_tb = 2.0, alpha_int = 2.0, alpha_sb = 2.0;
  double cquad_tb = 0.0, cquad_int = 0.0, cquad_sb_left = 0.0, cquad_sb_right = 0.0;
  std::string out;
  int workers = 0;
  bool no_checkpoints = false;
  std::vector<Overlay> overlays;
};

template <class T>
CLI::Option* overlay(CLI::App& app, SpecFlags& f, const std::string& name, T& var, const std::string& key,
                     const std::string& help) {
  CLI::Option* o = app.add_option(name, var, help)->capture_default_str();
  f.overlays.push_back({o, key});
  return o;
}

const std::vector<std::string> kSchemes{"random", "grid", "gauss-legendre"};
const std::vector<std::string> kProblems{"burgers1d", "burgers2d"};

void add_problem_flags(CLI::App& app, SpecFlags& f, bool list) {
  overlay(app, f, "--problem", f.problem, "problem", "PDE instance")->check(CLI::IsMember(kProblems));
  if (list)
    overlay(app, f, "--deltas", f.deltas, "deltas", "distances to blow-up, comma separated [dimensionless]")
        ->delimiter(',');
  else
    overlay(app, f, "--delta", f.delta, "deltas",
            "distance from the final time to blow-up; 0 < delta < 1 (1D), < 1/sqrt(2) (2D) [dimensionless]");
  overlay(app, f, "--delta-margin", f.delta_margin, "delta_margin",
          "minimum distance of delta from the ends of its admissible interval [dimensionless]");
}

void add_training_flags(CLI::App& app, SpecFlags& f, bool list) {
  if (list) {
    overlay(app, f, "--widths", f.widths, "widths", "hidden-layer widths, comma separated [neurons]")->delimiter(',');
    overlay(app, f, "--depths", f.depths, "depths", "affine layer counts, comma separated [layers]")->delimiter(',');
    overlay(app, f, "--seeds", f.seeds, "seeds", "run seeds, comma separated")->delimiter(',');
  } else {
    overlay(app, f, "--width", f.width, "widths", "hidden-layer width [neurons]");
    overlay(app, f, "--depth", f.depth, "depths", "number of affine layers, tanh between them [layers]");
    overlay(app, f, "--seed", f.seed, "seeds", "seed for weight initialisation and collocation sampling");
  }
  overlay(app, f, "--iters", f.iters, "iters", "Adam steps [iterations]");
  overlay(app, f, "--lr", f.lr, "lr", "Adam learning rate [dimensionless]");
  const std::string counts = " (0 = problem default: 4096/256/256 in 1D, 16384/1024/1024 in 2D) [points]";
  overlay(app, f, "--n-int", f.n_int, "n_int", "interior collocation points" + counts);
  overlay(app, f, "--n-tb", f.n_tb, "n_tb", "initial-time collocation points" + counts);
  overlay(app, f, "--n-sb", f.n_sb, "n_sb", "collocation points per spatial boundary face" + counts);
  overlay(app, f, "--scheme", f.scheme, "scheme", "collocation scheme")->check(CLI::IsMember(kSchemes));
}

void add_bound_flags(CLI::App& app, SpecFlags& f) {
  overlay(app, f, "--integration-order", f.integration_order, "integration_order",
          "Gauss-Legendre nodes per axis for bound integrals (0 = 64 in 1D, 32 in 2D) [nodes]");
  overlay(app, f, "--sup-resolution", f.sup_resolution, "sup_resolution",
          "uniform nodes per axis for sup-norm estimates (0 = 512 in 1D, 128 in 2D) [nodes]");
  f.overlays.push_back(
      {app.add_flag("--unsquared-tb", f.unsquared_tb, "use the unsquared initial residual term in the 1D bound"),
       "unsquared_tb", true});
  overlay(app, f, "--alpha-tb", f.alpha_tb, "alpha_tb", "quadrature convergence rate, initial rule [dimensionless]");
  overlay(app, f, "--alpha-int", f.alpha_int, "alpha_int", "quadrature convergence rate, interior rule [dimensionless]");
  overlay(app, f, "--alpha-sb", f.alpha_sb, "alpha_sb", "quadrature convergence rate, boundary rule [dimensionless]");
  overlay(app, f, "--cquad-tb", f.cquad_tb, "cquad_tb", "quadrature error constant, initial rule");
  overlay(app, f, "--cquad-int", f.cquad_int, "cquad_int", "quadrature error constant, interior rule");
  overlay(app, f, "--cquad-sb-left", f.cquad_sb_left, "cquad_sb_left", "quadrature error constant, left boundary");
  overlay(app, f, "--cquad-sb-right", f.cquad_sb_right, "cquad_sb_right", "quadrature error constant, right boundary");
}

std::string joined_results(const CLI::Option* o) {
  std::string out;
  for (const auto& r : o->results()) {
    if (!out.empty()) out += ',';
    out += r;
  }
  return out;
}

// Defaults, then config file, then explicit flags.
bp::SweepSpec resolve_spec(const SpecFlags& f, bp::SweepSpec spec) {
  std::set<std::string> seen;
  if (!f.config.empty()) {
    if (!fs::exists(f.config)) throw UsageError("config file '" + f.config + "' does not exist");
    seen = bp::load_sweep_config(f.config, spec);
  }
  for (const auto& ov : f.overlays) {
    if (ov.option->count() == 0) continue;
    bp::apply_config_entry(spec, ov.key, ov.is_flag ? "true" : joined_results(ov.option));
    seen.insert(ov.key);
  }
  const auto defaults = bp::default_counts(spec.problem);
  if (!seen.count("n_int") || spec.counts.n_int == 0) spec.counts.n_int = defaults.n_int;
  if (!seen.count("n_tb") || spec.counts.n_tb == 0) spec.counts.n_tb = defaults.n_tb;
  if (!seen.count("n_sb") || spec.counts.n_sb == 0) spec.counts.n_sb = defaults.n_sb;
  return spec;
}

void print_record(const bp::RunRecord& r, std::ostream& os) {
  os << "run_id        = " << r.run_id << '\n'
     << "loss_final    = " << bp::format_value(r.loss_final) << '\n'
     << "loss_best     = " << bp::format_value(r.loss_best) << '\n'
     << "train_seconds = " << bp::format_value(r.train_seconds) << '\n';
  if (!std::isnan(r.rhs_t1)) os << "lhs_t1        = " << bp::format_value(r.lhs_t1) << "\nrhs_t1        = " << bp::format_value(r.rhs_t1) << '\n';
  if (!std::isnan(r.rhs_t2)) os << "lhs_t2        = " << bp::format_value(r.lhs_t2) << "\nrhs_t2        = " << bp::format_value(r.rhs_t2) << '\n';
  if (!std::isnan(r.rhs_b1)) os << "rhs_b1        = " << bp::format_value(r.rhs_b1) << '\n';
  if (!r.checkpoint.empty()) os << "checkpoint    = " << r.checkpoint << '\n';
}

// ---------------------------------------------------------------------------
// train

struct TrainExtra {
  bool quiet = false;
  bool skip_bounds = false;
};

int cmd_train(const SpecFlags& f, const TrainExtra& extra) {
  bp::SweepSpec base;
  base.output_dir = "train_out";
  base.sweep_id = "train";
  bp::SweepSpec spec = resolve_spec(f, base);
  if (spec.deltas.size() != 1 || spec.widths.size() != 1 || spec.depths.size() != 1 || spec.seeds.size() != 1)
    throw UsageError("train takes a single delta, width, depth and seed");
  spec.kind = bp::SweepKind::delta;
  bp::validate(spec);

  bp::RunConfig cfg = bp::expand(spec).front();
  cfg.evaluate_bounds = !extra.skip_bounds;
  if (!extra.quiet) {
    const std::int64_t iters = cfg.train.iterations;
    cfg.train.on_progress = [iters](std::int64_t it, double loss) {
      if (it % 1000 == 0 || it == iters) std::fprintf(stderr, "iter %lld  loss %.6e\n", static_cast<long long>(it), loss);
    };
  }

  const fs::path dir(spec.output_dir);
  fs::create_directories(dir);
  {
    std::ofstream os(dir / "config.txt");
    bp::write_sweep_config(spec, os);
  }
  const bp::RunOutcome out = bp::execute_run(cfg);
  bp::persist({out.record}, dir);
  {
    std::ofstream hist(dir / "history.csv");
    hist << "iteration,loss\n";
    for (const auto& h : out.training.history) hist << h.iteration << ',' << bp::format_value(h.loss) << '\n';
  }
  print_record(out.record, std::cout);
  if (!out.error.empty()) {
    std::cerr << "error: " << out.error << '\n';
    return kExitRuntime;
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------
// bound

struct BoundFlags {
  std::string checkpoint;
  std::string surrogate = "checkpoint";
  std::string theorem = "auto";
  std::string out;
};

template <class Report>
void emit_report(const Report& r, const std::string& title, const std::string& tag, const std::string& out_dir) {
  bp::write_report_text(r, title, std::cout);
  if (out_dir.empty()) return;
  fs::create_directories(out_dir);
  std::ofstream csv(fs::path(out_dir) / ("bound_" + tag + ".csv"));
  bp::write_report_csv(r, csv);
  std::ofstream txt(fs::path(out_dir) / ("bound_" + tag + ".txt"));
  bp::write_report_text(r, title, txt);
  if (!csv || !txt) throw std::runtime_error("cannot write bound report to '" + out_dir + "'");
}

void print_verdict(double lhs, double rhs, double margin, bool dominates) {
  std::cout << "lhs       = " << bp::format_value(lhs) << '\n'
            << "rhs       = " << bp::format_value(rhs) << '\n'
            << "margin    = " << bp::format_value(margin) << '\n'
            << "dominates = " << (dominates ? "yes" : "no") << '\n';
}

int cmd_bound(const SpecFlags& f, const BoundFlags& b) {
  bp::SweepSpec base;
  base.scheme = bp::Scheme::gauss_legendre;
  bp::SweepSpec spec = resolve_spec(f, base);
  if (spec.deltas.size() != 1) throw UsageError("bound takes a single delta");
  const bool exact = b.surrogate == "exact";
  if (!exact && b.checkpoint.empty()) throw UsageError("--checkpoint is required unless --surrogate exact");
  std::optional<bp::Checkpoint> ck;
  if (!exact) ck = bp::load_checkpoint(b.checkpoint);

  return bp::with_problem(spec.problem, spec.deltas[0], spec.delta_margin, [&](const auto& problem) -> int {
    using P = std::decay_t<decltype(problem)>;
    if (ck) bp::check_network_shape<P>(ck->params);
    std::string theorem = b.theorem;
    if (theorem == "auto") theorem = P::space_dim == 1 ? "t2" : "t1";
    const int order = spec.integration_order > 0 ? spec.integration_order : bp::default_integration_order<P>();
    const int sup = spec.sup_resolution > 0 ? spec.sup_resolution : bp::default_sup_resolution<P>();

    auto run = [&](const auto& surrogate) -> int {
      if (theorem == "t1") {
        const auto r = bp::theorem1_bound(problem, surrogate, bp::gauss_legendre_grids(problem, order, sup));
        emit_report(r, "log-risk bound (" + std::string(P::name()) + ")", "t1", b.out);
        print_verdict(r.lhs, r.rhs, r.margin(), r.dominates());
        return kExitOk;
      }
      if constexpr (P::space_dim == 1) {
        if (theorem == "t2") {
          bp::Theorem2Options opt;
          opt.unsquared_initial = spec.unsquared_tb;
          const auto r = bp::theorem2_bound(problem, surrogate, bp::gauss_legendre_grids(problem, order, sup), opt);
          emit_report(r, "generalization bound (burgers1d)", "t2", b.out);
          print_verdict(r.lhs, r.rhs, r.rhs - r.lhs, r.rhs >= r.lhs);
          return kExitOk;
        }
        const auto set = bp::sample_collocation(problem, spec.counts, spec.scheme, spec.seeds.front());
        const auto r = bp::theoremB1_bound(problem, surrogate, set, spec.alpha, sup);
        emit_report(r, "quadrature-explicit bound (burgers1d)", "b1", b.out);
        print_verdict(r.lhs, r.rhs, r.rhs - r.lhs, r.rhs >= r.lhs);
        return kExitOk;
      } else {
        throw UsageError("theorem '" + theorem + "' applies to burgers1d only");
      }
    };
    if (exact) return run(bp::ExactSurrogate{problem});
    return run(bp::NetworkSurrogate(ck->params));
  });
}

// ---------------------------------------------------------------------------
// sweep

int cmd_sweep(const SpecFlags& f) {
  if (f.config.empty()) throw UsageError("sweep requires --config");
  bp::SweepSpec base;
  base.output_dir = "sweep_out";
  bp::SweepSpec spec = resolve_spec(f, base);
  if (f.no_checkpoints) spec.checkpoints = false;
  bp::validate(spec);
  const std::size_t total = bp::expand(spec).size();
  std::size_t done = 0;
  std::fprintf(stderr, "%s sweep '%s': %zu runs, %d workers\n", bp::to_string(spec.kind).c_str(),
               spec.sweep_id.c_str(), total,
               spec.kind == bp::SweepKind::timing ? 1 : bp::resolve_workers(spec.workers));
  const auto result = bp::run_sweep(spec, [&](const bp::RunRecord& r) {
    ++done;
    std::fprintf(stderr, "[%zu/%zu] %s  loss_best %.4e  %.1f s%s\n", done, total, r.run_id.c_str(), r.loss_best,
                 r.train_seconds, r.failed() ? "  FAILED" : "");
  });
  bp::write_summary(result.summary, std::cout);
  for (const auto& e : result.errors) std::cerr << "run failed: " << e << '\n';
  const std::size_t failed = result.failed();
  if (failed == 0) return kExitOk;
  std::cerr << failed << " of " << result.records.size() << " runs failed\n";
  return failed == result.records.size() ? kExitRuntime : kExitPartial;
}

// ---------------------------------------------------------------------------
// report

struct ReportFlags {
  std::string dir;
  std::string sweep_id;
  std::string kind;
  std::string out;
  std::string export_grid;
  std::string checkpoint;
  int nx = 101;
  int nt = 101;
};

int cmd_report(const SpecFlags& f, const ReportFlags& r) {
  if (r.dir.empty() && r.export_grid.empty()) throw UsageError("report needs --dir and/or --export-grid");

  if (!r.export_grid.empty()) {
    std::optional<bp::Checkpoint> ck;
    if (!r.checkpoint.empty()) ck = bp::load_checkpoint(r.checkpoint);
    const auto kind = bp::parse_problem_kind(f.problem);
    bp::with_problem(kind, f.delta, f.delta_margin, [&](const auto& problem) {
      std::ofstream os(r.export_grid);
      if (!os) throw std::runtime_error("cannot open '" + r.export_grid + "' for writing");
      bp::write_solution_grid(problem, r.nx, r.nt, ck ? &ck->params : nullptr, os);
      return 0;
    });
    std::cerr << "wrote " << r.export_grid << '\n';
  }

  if (!r.dir.empty()) {
    if (!fs::is_directory(r.dir)) throw UsageError("'" + r.dir + "' is not a directory");
    bp::SweepSpec echoed;
    bool have_echo = false;
    if (fs::exists(fs::path(r.dir) / "config.txt")) {
      bp::load_sweep_config(fs::path(r.dir) / "config.txt", echoed);
      have_echo = true;
    }
    if (r.kind.empty() && !have_echo) throw UsageError("no config.txt in '" + r.dir + "'; pass --kind");
    const bp::SweepKind kind = r.kind.empty() ? echoed.kind : bp::parse_sweep_kind(r.kind);
    const std::string id = !r.sweep_id.empty() ? r.sweep_id : have_echo ? echoed.sweep_id : std::string();
    const auto all = bp::load_records(r.dir);
    const auto records = id.empty() ? all : bp::records_of_sweep(all, id);
    if (records.empty()) throw std::runtime_error("no runs found in '" + r.dir + "'");
    const auto rows = bp::summarize(kind, id.empty() ? "all" : id, records);
    if (r.out == "-") {
      bp::write_summary(rows, std::cout);
    } else {
      const fs::path out = r.out.empty() ? fs::path(r.dir) / "summary.csv" : fs::path(r.out);
      bp::save_summary(rows, out);
      bp::write_summary(rows, std::cout);
    }
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "Train PINNs on inviscid Burgers' problems with finite-time blow-up and evaluate generalization bounds.\n"
      "Exit codes: 0 success, 1 usage error, 2 runtime error, 3 sweep with partial failures.\n"
      "Environment: BLOWUP_PINN_WORKERS sets the default worker count."};
  app.require_subcommand(1);
  app.get_formatter()->column_width(42);

  SpecFlags train_f, bound_f, sweep_f, report_f;
  TrainExtra train_x;
  BoundFlags bound_x;
  ReportFlags report_x;

  CLI::App* train = app.add_subcommand("train", "train one network and evaluate its bounds");
  train->add_option("--config", train_f.config, "key = value file; flags override its entries");
  add_problem_flags(*train, train_f, false);
  add_training_flags(*train, train_f, false);
  add_bound_flags(*train, train_f);
  overlay(*train, train_f, "--out", train_f.out = "train_out", "output_dir",
          "output directory (checkpoints, runs.csv, history.csv, config.txt)");
  train->add_flag("--quiet", train_x.quiet, "suppress progress output");
  train->add_flag("--skip-bounds", train_x.skip_bounds, "train only; leave bound columns empty");

  CLI::App* bound = app.add_subcommand("bound", "evaluate a bound for a checkpoint or the exact solution");
  bound->add_option("--config", bound_f.config, "key = value file; flags override its entries");
  add_problem_flags(*bound, bound_f, false);
  bound->add_option("--checkpoint", bound_x.checkpoint, "checkpoint file written by train or sweep");
  bound->add_option("--surrogate", bound_x.surrogate, "function to bound: a checkpoint or the exact solution")
      ->capture_default_str()
      ->check(CLI::IsMember({"checkpoint", "exact"}));
  bound->add_option("--theorem", bound_x.theorem,
                    "t1: log-risk bound (2D; needs a 1/sqrt(2) time window), t2: 1D bound, b1: 1D bound with quadrature terms, "
                    "auto: t2 for 1D and t1 for 2D")
      ->capture_default_str()
      ->check(CLI::IsMember({"auto", "t1", "t2", "b1"}));
  bound_f.scheme = "gauss-legendre";
  overlay(*bound, bound_f, "--scheme", bound_f.scheme, "scheme", "collocation scheme for b1")
      ->check(CLI::IsMember(kSchemes));
  overlay(*bound, bound_f, "--n-int", bound_f.n_int, "n_int", "b1 interior points (0 = problem default) [points]");
  overlay(*bound, bound_f, "--n-tb", bound_f.n_tb, "n_tb", "b1 initial-time points (0 = problem default) [points]");
  overlay(*bound, bound_f, "--n-sb", bound_f.n_sb, "n_sb", "b1 points per boundary face (0 = problem default) [points]");
  overlay(*bound, bound_f, "--seed", bound_f.seed, "seeds", "seed for b1 collocation sampling");
  add_bound_flags(*bound, bound_f);
  bound->add_option("--out", bound_x.out, "directory for bound_<theorem>.csv and .txt (default: print only)");

  CLI::App* sweep = app.add_subcommand("sweep", "run a delta sweep, width sweep or timing study from a config file");
  sweep->add_option("--config", sweep_f.config, "key = value sweep specification (required)");
  overlay(*sweep, sweep_f, "--sweep", sweep_f.sweep_kind, "sweep", "campaign kind")
      ->check(CLI::IsMember({"delta", "width", "timing"}));
  overlay(*sweep, sweep_f, "--sweep-id", sweep_f.sweep_id, "sweep_id", "prefix of run ids and checkpoint folder");
  add_problem_flags(*sweep, sweep_f, true);
  add_training_flags(*sweep, sweep_f, true);
  add_bound_flags(*sweep, sweep_f);
  overlay(*sweep, sweep_f, "--out", sweep_f.out = "sweep_out", "output_dir",
          "output directory (runs.csv, summary.csv, config.txt, checkpoints/)");
  overlay(*sweep, sweep_f, "--workers", sweep_f.workers, "workers",
          "parallel training runs (0 = BLOWUP_PINN_WORKERS or hardware threads; timing studies always use 1)");
  sweep->add_flag("--no-checkpoints", sweep_f.no_checkpoints, "do not write per-run checkpoints");

  CLI::App* report = app.add_subcommand("report", "re-summarize persisted runs and export solution grids");
  report->add_option("--dir", report_x.dir, "sweep output directory containing runs.csv");
  report->add_option("--sweep-id", report_x.sweep_id, "sweep to summarize (default: from config.txt)");
  report->add_option("--kind", report_x.kind, "summary kind (default: from config.txt)")
      ->check(CLI::IsMember({"delta", "width", "timing"}));
  report->add_option("--out", report_x.out, "summary destination (default: <dir>/summary.csv; '-' for stdout only)");
  report->add_option("--export-grid", report_x.export_grid,
                     "write exact (and, with --checkpoint, network) solution values on a uniform grid to this CSV");
  report->add_option("--checkpoint", report_x.checkpoint, "network to tabulate alongside the exact solution");
  report->add_option("--problem", report_f.problem, "PDE instance for --export-grid")
      ->capture_default_str()
      ->check(CLI::IsMember(kProblems));
  report->add_option("--delta", report_f.delta, "delta for --export-grid [dimensionless]")->capture_default_str();
  report->add_option("--delta-margin", report_f.delta_margin, "admissibility margin for delta [dimensionless]")
      ->capture_default_str();
  report->add_option("--nx", report_x.nx, "grid nodes per spatial axis [nodes]")->capture_default_str();
  report->add_option("--nt", report_x.nt, "grid nodes in time [nodes]")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (train->parsed()) return cmd_train(train_f, train_x);
    if (bound->parsed()) return cmd_bound(bound_f, bound_x);
    if (sweep->parsed()) return cmd_sweep(sweep_f);
    if (report->parsed()) return cmd_report(report_f, report_x);
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitUsage;
}
