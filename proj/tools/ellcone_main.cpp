#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "ellcone/analyzer.hpp"

namespace fs = std::filesystem;
using namespace ellcone;

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string hex(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%a", v);
  return buf;
}

void print_cone(std::ostream& os, const Cone& c) {
  const int n = c.dim();
  os << "  base Q (row-major, hex):";
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) os << " " << hex(c.base().Q()(i, j));
  os << "\n  base c:";
  for (int i = 0; i < n; ++i) os << " " << hex(c.base().c()[i]);
  os << "\n";
  for (int k = 0; k < c.counters(); ++k) {
    const CounterSlot& s = c.slots()[k];
    os << "  counter " << k << ": beta=" << s.beta << " lambda=" << s.lambda
       << " extrapolated=" << (s.extrapolated ? "yes" : "no") << " delta=(";
    for (int i = 0; i < n; ++i) os << (i ? " " : "") << s.delta[i];
    os << ")\n";
  }
}

struct RunOutcome {
  int exit_code = 1;
  AnalysisResult result;
  double wall_ms = 0.0;
  std::string error;
};

RunOutcome run_analysis(const std::string& path, const AnalyzerConfig& cfg) {
  RunOutcome out;
  try {
    lang::Program prog = lang::parse(read_file(path));
    auto t0 = std::chrono::steady_clock::now();
    out.result = analyze(prog, cfg);
    auto t1 = std::chrono::steady_clock::now();
    out.wall_ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
    out.exit_code = out.result.complete ? 0 : 2;
  } catch (const std::exception& e) {
    out.error = e.what();
    out.exit_code = 1;
  }
  return out;
}

int cmd_analyze(const std::string& path, const std::string& out_path,
                const AnalyzerConfig& cfg) {
  RunOutcome run = run_analysis(path, cfg);
  if (run.exit_code == 1) {
    std::cerr << "error: " << run.error << "\n";
    return 1;
  }
  const AnalysisResult& res = run.result;
  std::cout << "analysis of " << path << "\n";
  std::cout << "status: " << (res.complete ? "fully certified" : "partial")
            << "\n";
  if (!res.diagnostics.empty())
    std::cout << "note: " << res.diagnostics << "\n";
  std::cout << "wall time: " << run.wall_ms << " ms\n";
  std::cout << "certificate steps: " << res.master.size() << "\n";
  std::cout << "solver calls: " << res.stats.solver_calls
            << ", interval checks: " << res.stats.lmi_checks
            << ", paddings: " << res.stats.paddings << "\n";
  for (const auto& [name, iv] : res.counter_bounds) {
    std::cout << "counter " << name << " in [" << iv.lo << ", " << iv.hi
              << "]" << (iv.horizon_relative ? " (horizon-relative)" : "")
              << "\n";
  }
  for (const LoopSummary& l : res.loops) {
    std::cout << "loop " << l.counter << " @p" << l.point_id << ": "
              << (l.stabilized ? "stabilized" : "did not stabilize")
              << ", widenings " << l.widens << ", post-fixpoint recheck "
              << (l.fixpoint_recheck ? "ok" : "failed")
              << (l.lyapunov_policy
                      ? (l.lyapunov_infeasible ? ", Lyapunov infeasible"
                                               : ", Lyapunov base")
                      : ", bootstrap base")
              << "\n";
    if (l.invariant) print_cone(std::cout, *l.invariant);
  }
  if (res.final_state) {
    std::cout << "final state:\n";
    print_cone(std::cout, *res.final_state);
  } else {
    std::cout << "final state: top (no information)\n";
  }
  if (!out_path.empty()) {
    std::ofstream out(out_path, std::ios::binary);
    if (!out) {
      std::cerr << "error: cannot write " << out_path << "\n";
      return 1;
    }
    out << cert::serialize(res.master);
    std::cout << "certificate written to " << out_path << "\n";
  }
  return run.exit_code;
}

int cmd_bench(const std::string& dir, const std::string& out_path,
              const std::string& plot_path, const AnalyzerConfig& cfg) {
  if (!fs::is_directory(dir)) {
    std::cerr << "error: no such corpus directory: " << dir << "\n";
    return 1;
  }
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ".ec")
      files.push_back(e.path());
  std::sort(files.begin(), files.end());

  std::ostringstream table;
  table << "program\tdim\twall_ms\tstatus\tcounters\tcert_steps\twidenings\n";
  struct PlotPoint {
    int dim;
    double ms;
  };
  std::vector<PlotPoint> points;
  for (const fs::path& f : files) {
    RunOutcome run = run_analysis(f.string(), cfg);
    int dim = 0;
    long widens = 0;
    size_t steps = 0;
    std::string status = "error";
    if (run.exit_code != 1) {
      const AnalysisResult& r = run.result;
      if (r.final_state)
        dim = r.final_state->dim();
      else if (!r.points.empty() && r.points.front().state)
        dim = r.points.front().state->dim();
      for (const LoopSummary& l : r.loops) widens += l.widens;
      steps = r.master.size();
      status = run.exit_code == 0 ? "certified" : "partial";
      points.push_back({dim, run.wall_ms});
    }
    table << f.filename().string() << "\t" << dim << "\t" << run.wall_ms
          << "\t" << status << "\t" << run.result.counter_bounds.size()
          << "\t" << steps << "\t" << widens << "\n";
  }
  std::cout << table.str();
  if (!out_path.empty()) {
    std::ofstream out(out_path, std::ios::binary);
    if (!out) {
      std::cerr << "error: cannot write " << out_path << "\n";
      return 1;
    }
    out << table.str();
  }
  if (!plot_path.empty()) {
    // Minimal static SVG: analysis time against dimension.
    double max_ms = 1.0;
    int max_dim = 1;
    for (const PlotPoint& p : points) {
      max_ms = std::max(max_ms, p.ms);
      max_dim = std::max(max_dim, p.dim);
    }
    std::ofstream svg(plot_path, std::ios::binary);
    if (!svg) {
      std::cerr << "error: cannot write " << plot_path << "\n";
      return 1;
    }
    const int W = 480, H = 320, M = 48;
    svg << "<svg xmlns='http://www.w3.org/2000/svg' width='" << W
        << "' height='" << H << "'>\n";
    svg << "<rect width='100%' height='100%' fill='white'/>\n";
    svg << "<line x1='" << M << "' y1='" << H - M << "' x2='" << W - M / 2
        << "' y2='" << H - M << "' stroke='black'/>\n";
    svg << "<line x1='" << M << "' y1='" << H - M << "' x2='" << M << "' y2='"
        << M / 2 << "' stroke='black'/>\n";
    svg << "<text x='" << W / 2 << "' y='" << H - 8
        << "' font-size='12' text-anchor='middle'>dimension</text>\n";
    svg << "<text x='14' y='" << H / 2
        << "' font-size='12' transform='rotate(-90 14 " << H / 2
        << ")' text-anchor='middle'>time (ms)</text>\n";
    for (const PlotPoint& p : points) {
      double x = M + (double(p.dim) / max_dim) * (W - 1.5 * M);
      double y = (H - M) - (p.ms / max_ms) * (H - 1.5 * M);
      svg << "<circle cx='" << x << "' cy='" << y
          << "' r='4' fill='steelblue'/>\n";
    }
    svg << "</svg>\n";
    std::cout << "plot written to " << plot_path << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ellipsoidal-cone invariant analyzer"};
  app.require_subcommand(1);

  AnalyzerConfig cfg;
  int pad_max = cfg.domain.pad_attempts;
  double epsilon = cfg.domain.affine_eps;
  double solver_tol = cfg.domain.solver.tol;
  int solver_iters = cfg.domain.solver.max_iterations;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--epsilon", epsilon, "regularizer for affine images");
    sub->add_option("--pad-max", pad_max, "max ratio-padding attempts");
    sub->add_option("--widen-delay", cfg.widen_delay,
                    "plain joins before widening");
    sub->add_option("--beta-cap", cfg.beta_cap,
                    "widenings before slopes open to infinity");
    sub->add_option("--bootstrap-iters", cfg.bootstrap_iters,
                    "iterates joined into the base ellipsoid");
    sub->add_option("--horizon", cfg.horizon,
                    "counter bound for unbounded loops");
    sub->add_option("--solver-tol", solver_tol, "interior-point tolerance");
    sub->add_option("--solver-max-iters", solver_iters,
                    "interior-point iteration budget");
  };

  std::string path, out_path, plot_path;
  CLI::App* analyze_cmd =
      app.add_subcommand("analyze", "analyze a program and emit a certificate");
  analyze_cmd->add_option("file", path, "program source")->required();
  analyze_cmd->add_option("--out", out_path, "certificate output file");
  add_common(analyze_cmd);

  CLI::App* bench_cmd =
      app.add_subcommand("bench", "run a corpus and print a report table");
  bench_cmd->add_option("dir", path, "corpus directory")->required();
  bench_cmd->add_option("--out", out_path, "report output file");
  bench_cmd->add_option("--plot", plot_path, "SVG time-vs-dimension chart");
  add_common(bench_cmd);

  CLI11_PARSE(app, argc, argv);

  cfg.domain.pad_attempts = pad_max;
  cfg.domain.affine_eps = epsilon;
  cfg.domain.solver.tol = solver_tol;
  cfg.domain.solver.max_iterations = solver_iters;

  try {
    if (app.got_subcommand(analyze_cmd))
      return cmd_analyze(path, out_path, cfg);
    return cmd_bench(path, out_path, plot_path, cfg);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
