#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ellcone/cone.hpp"
#include "ellcone/program.hpp"

namespace ellcone {

struct AnalyzerConfig {
  DomainConfig domain;
  int widen_delay = 2;
  int beta_cap = 3;
  int bootstrap_iters = 3;
  double horizon = 1000.0;
  double init_radius = 0.5;  // ball around point inits
};

/// Per-program-point abstract state; absent means top (no information),
/// which is how budget or certification failures stay visible.
struct PointState {
  int point_id = -1;
  std::string label;
  std::optional<Cone> state;
};

struct LoopSummary {
  int point_id = -1;
  std::string counter;
  long widens = 0;
  bool stabilized = false;
  bool fixpoint_recheck = false;
  bool lyapunov_policy = false;
  bool lyapunov_infeasible = false;
  bool horizon_relative = false;
  double bound_upper = 0.0;
  double bootstrap_volume = 0.0;  // det(Q)^(-1/2) proxy of the base
  std::optional<Cone> invariant;
};

struct AnalysisResult {
  std::vector<PointState> points;
  std::vector<LoopSummary> loops;
  std::map<std::string, lang::CounterInterval> counter_bounds;
  cert::Certificate master;
  OpStats stats;
  std::optional<Cone> final_state;
  bool complete = true;  // false when any point is top
  std::string diagnostics;
};

AnalysisResult analyze(const lang::Program& p, const AnalyzerConfig& cfg);

}  // namespace ellcone
