#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <cmath>

#include "ellcone/analyzer.hpp"
#include "ellcone/interval.hpp"

namespace ellcone {

namespace lang = ellcone::lang;

namespace {

double volume_proxy(const Mat& Q) {
  Eigen::SelfAdjointEigenSolver<Mat> es(Q);
  double logdet = 0.0;
  for (int i = 0; i < es.eigenvalues().size(); ++i)
    logdet += std::log(std::max(es.eigenvalues()[i], 1e-300));
  return std::exp(-0.5 * logdet);
}

void prefix_claims(cert::Certificate& c, const std::string& prefix) {
  for (cert::Step& s : c.steps) s.claim = prefix + " | " + s.claim;
}

struct Ctx {
  const AnalyzerConfig& cfg;
  AnalysisResult& out;
  std::vector<double> bound_stack;  // upper bound per active counter
  const Mat* hint = nullptr;        // current loop's base shape
  bool collect = true;              // record points and certificates

  void mark_top(const std::string& why) {
    out.complete = false;
    if (out.diagnostics.empty()) out.diagnostics = why;
  }

  void record(int point_id, std::string label,
              const std::optional<Cone>& st) {
    if (!collect) return;
    out.points.push_back({point_id, std::move(label), st});
  }

  void add_cert(cert::Certificate c, const std::string& prefix) {
    if (!collect) return;
    prefix_claims(c, prefix);
    out.master.append(std::move(c));
  }
};

std::optional<Cone> exec_stmts(Ctx& ctx, std::optional<Cone> state,
                               const std::vector<lang::Statement>& stmts);

std::optional<Cone> exec_loop(Ctx& ctx, std::optional<Cone> state,
                              const lang::Statement& s);

std::optional<Cone> exec_stmt(Ctx& ctx, std::optional<Cone> state,
                              const lang::Statement& s) {
  const std::string tag = "p" + std::to_string(s.point_id);
  switch (s.kind) {
    case lang::Statement::Kind::Nop:
      return state;
    case lang::Statement::Kind::Assign: {
      if (!state) {
        ctx.record(s.point_id, tag + " assign (top)", std::nullopt);
        return std::nullopt;
      }
      ConeOpResult r = cone_affine(*state, s.A, s.b, ctx.cfg.domain, ctx.hint);
      ctx.out.stats.absorb(r.stats);
      if (!r.result) {
        ctx.mark_top(tag + ": " + r.failure);
        ctx.record(s.point_id, tag + " assign (top)", std::nullopt);
        return std::nullopt;
      }
      ctx.add_cert(std::move(r.cert), tag + " assign");
      ctx.record(s.point_id, tag + " assign", r.result);
      return r.result;
    }
    case lang::Statement::Kind::Choose: {
      if (!state) {
        ctx.record(s.point_id, tag + " choose (top)", std::nullopt);
        return std::nullopt;
      }
      std::vector<Cone> results;
      for (const auto& block : s.branches) {
        std::optional<Cone> b = exec_stmts(ctx, state, block);
        if (!b) {
          ctx.record(s.point_id, tag + " choose (top)", std::nullopt);
          return std::nullopt;
        }
        results.push_back(std::move(*b));
      }
      ConeOpResult j = cone_join(results, ctx.cfg.domain);
      ctx.out.stats.absorb(j.stats);
      if (!j.result) {
        ctx.mark_top(tag + ": " + j.failure);
        ctx.record(s.point_id, tag + " choose (top)", std::nullopt);
        return std::nullopt;
      }
      ctx.add_cert(std::move(j.cert), tag + " choose");
      ctx.record(s.point_id, tag + " choose", j.result);
      return j.result;
    }
    case lang::Statement::Kind::Loop:
      return exec_loop(ctx, std::move(state), s);
  }
  return std::nullopt;
}

std::optional<Cone> exec_stmts(Ctx& ctx, std::optional<Cone> state,
                               const std::vector<lang::Statement>& stmts) {
  for (const lang::Statement& s : stmts) state = exec_stmt(ctx, std::move(state), s);
  return state;
}

/// Flattens a loop body into affine branch maps when it is a plain
/// Choose over assignment sequences (or one straight-line sequence).
std::optional<std::vector<std::pair<Mat, Vec>>> branch_maps(
    const std::vector<lang::Statement>& body, int n) {
  auto compose_block =
      [&](const std::vector<lang::Statement>& block)
      -> std::optional<std::pair<Mat, Vec>> {
    Mat A = Mat::Identity(n, n);
    Vec b = Vec::Zero(n);
    for (const lang::Statement& st : block) {
      if (st.kind == lang::Statement::Kind::Nop) continue;
      if (st.kind != lang::Statement::Kind::Assign) return std::nullopt;
      A = st.A * A;
      b = st.A * b + st.b;
    }
    return std::make_pair(A, b);
  };

  std::vector<std::pair<Mat, Vec>> out;
  if (body.size() == 1 && body[0].kind == lang::Statement::Kind::Choose) {
    for (const auto& block : body[0].branches) {
      auto m = compose_block(block);
      if (!m) return std::nullopt;
      out.push_back(std::move(*m));
    }
    return out;
  }
  auto m = compose_block(body);
  if (!m) return std::nullopt;
  out.push_back(std::move(*m));
  return out;
}

std::optional<Cone> exec_loop(Ctx& ctx, std::optional<Cone> state,
                              const lang::Statement& s) {
  const std::string tag = "p" + std::to_string(s.point_id) + " loop " +
                          s.counter;
  LoopSummary summary;
  summary.point_id = s.point_id;
  summary.counter = s.counter;
  summary.bound_upper = s.bound ? *s.bound : ctx.cfg.horizon;
  summary.horizon_relative = !s.bound.has_value();

  auto give_up = [&](const std::string& why) -> std::optional<Cone> {
    ctx.mark_top(tag + ": " + why);
    if (ctx.collect) {
      ctx.out.loops.push_back(summary);
      ctx.record(s.point_id, tag + " (top)", std::nullopt);
    }
    return std::nullopt;
  };

  if (!state) return give_up("entered with no information");
  const int n = state->dim();
  Cone entry = add_counter(*state, 0.0, /*known_exact=*/true);
  const int idx = entry.counters() - 1;

  auto maps = branch_maps(s.body, n);

  // Base ellipsoid policy: a common Lyapunov shape when every branch
  // is affine with non-identity matrix, otherwise a bootstrap join of
  // the first iterates.
  Ellipsoid base = entry.base();
  double preset_beta = -1.0;
  cert::Certificate base_cert;
  if (maps) {
    bool any_identity = false;
    for (auto& [A, b] : *maps)
      if (A == Mat::Identity(n, n)) any_identity = true;
    if (!any_identity) {
      summary.lyapunov_policy = true;
      std::vector<Mat> As;
      for (auto& [A, b] : *maps) As.push_back(A);
      // Half the maximal margin buys a much rounder shape.
      LyapunovResult ly = lyapunov_base(As, ctx.cfg.domain, 0.5);
      ctx.out.stats.absorb(ly.stats);
      if (!ly.feasible) {
        summary.lyapunov_infeasible = true;
        return give_up("no common Lyapunov shape for the loop body");
      }
      // Scale the shape to contain the entry states.
      Eigen::GeneralizedSelfAdjointEigenSolver<Mat> ges(ly.Q,
                                                        entry.base().Q());
      double s2 = std::max(ges.eigenvalues().maxCoeff(), 1e-12) * (1.0 + 1e-6);
      auto cand = Ellipsoid::make(ly.Q / s2, entry.base().c());
      if (!cand) return give_up("Lyapunov base not certifiable");
      double pad = ctx.cfg.domain.pad_eps0;
      bool ok = false;
      for (int attempt = 0; attempt <= ctx.cfg.domain.pad_attempts;
           ++attempt) {
        IncludeResult inc = includes(entry.base(), *cand, ctx.cfg.domain);
        ctx.out.stats.absorb(inc.stats);
        if (inc.included) {
          base_cert.append(std::move(inc.cert));
          ok = true;
          break;
        }
        cand = inflate(*cand, 1.0 + pad);
        pad *= 2.0;
      }
      if (!ok) return give_up("entry not contained in the Lyapunov base");
      base = *cand;

      // Certified decrease margin for the final (rescaled) shape, then
      // the slope threshold that makes the cone invariant.
      double eps = ly.margin;
      cert::Certificate lyap_steps;
      for (int attempt = 0; attempt < 10 && eps > 0.0; ++attempt) {
        lyap_steps = cert::Certificate{};
        bool all = true;
        for (size_t ai = 0; ai < As.size(); ++ai) {
          cert::Step st;
          st.tag = "lyapunov";
          st.claim = "Lyapunov decrease for branch " + std::to_string(ai);
          std::vector<double> qrow(base.Q().data(),
                                   base.Q().data() + size_t(n) * n);
          st.add_matrix("Q", n, n, qrow);
          std::vector<double> arow;
          for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) arow.push_back(As[ai](i, j));
          st.add_matrix("A", n, n, arow);
          st.add_scalar("eps", eps);
          std::string why;
          ++ctx.out.stats.lmi_checks;
          if (cert::replay_step(st, &why) != cert::StepVerdict::Certified) {
            all = false;
            break;
          }
          lyap_steps.steps.push_back(std::move(st));
        }
        if (all) break;
        lyap_steps = cert::Certificate{};
        eps *= 1.0 - 1e-5 * std::pow(4.0, attempt);
      }
      if (lyap_steps.empty())
        return give_up("Lyapunov margin lost under base rescaling");
      base_cert.append(std::move(lyap_steps));

      preset_beta = 0.0;
      for (auto& [A, b] : *maps) {
        StableBetaResult sb = min_stable_beta(base.Q(), base.c(), A, b,
                                              Vec::Zero(n), eps);
        base_cert.append(std::move(sb.cert));
        preset_beta = std::max(preset_beta, sb.beta0);
      }
      preset_beta = 1.05 * preset_beta + 1e-9;
    } else {
      // Bootstrap: join the first iterates to get an ellipsoidal shape.
      Ellipsoid e = entry.base();
      cert::Certificate steps;
      for (int t = 0; t < ctx.cfg.bootstrap_iters; ++t) {
        std::vector<Ellipsoid> parts{e};
        for (auto& [A, b] : *maps) {
          AffineResult im =
              affine_image(e, A, b, ctx.cfg.domain.affine_eps, ctx.cfg.domain);
          ctx.out.stats.absorb(im.stats);
          if (!im.result) return give_up("bootstrap image failed");
          steps.append(std::move(im.cert));
          parts.push_back(std::move(*im.result));
        }
        JoinResult j = join(parts, ctx.cfg.domain);
        ctx.out.stats.absorb(j.stats);
        if (!j.result) return give_up("bootstrap join failed");
        steps.append(std::move(j.cert));
        e = *j.result;
      }
      base = e;
      base_cert = std::move(steps);
    }
  }
  summary.bootstrap_volume = volume_proxy(base.Q());

  // Rebasing the cone changes what a slope means; port the outer
  // counters' openings onto the new form.
  std::vector<CounterSlot> slots = entry.slots();
  if (base.Q() != entry.base().Q()) {
    SlotPortResult ported =
        port_slots_to_base(entry.base().Q(), base.Q(), slots);
    ctx.out.stats.absorb(ported.stats);
    if (!ported.ok) return give_up("slope porting onto the loop base failed");
    slots = std::move(ported.slots);
    base_cert.append(std::move(ported.cert));
  }
  if (preset_beta > 0.0) slots[idx].beta = preset_beta;
  Cone inv(base, slots);

  ctx.bound_stack.push_back(summary.bound_upper);
  Vec upper(inv.counters());
  for (int i = 0; i < inv.counters(); ++i) upper[i] = ctx.bound_stack[i];

  const Mat* saved_hint = ctx.hint;
  const bool saved_collect = ctx.collect;

  // The loop transfer splits over the top-level nondeterminism: each
  // variant is checked against the invariant separately, which keeps
  // the stabilization test free of the join's shape growth. The joined
  // iterate is only built to feed the widening.
  std::vector<const std::vector<lang::Statement>*> variants;
  static const std::vector<lang::Statement> kEmpty;
  if (s.body.size() == 1 &&
      s.body[0].kind == lang::Statement::Kind::Choose) {
    for (const auto& block : s.body[0].branches) variants.push_back(&block);
  } else {
    variants.push_back(&s.body);
  }

  // Runs the body variants from `from`; returns per-variant iterates
  // (nullopt on information loss) and optionally their certificates.
  auto run_variants = [&](const Cone& from, bool collect)
      -> std::optional<std::vector<Cone>> {
    Mat hint = from.base().Q();
    ctx.hint = &hint;
    ctx.collect = collect && saved_collect;
    std::vector<Cone> outs;
    for (const auto* block : variants) {
      std::optional<Cone> o = exec_stmts(ctx, from, *block);
      if (!o) {
        ctx.hint = saved_hint;
        ctx.collect = saved_collect;
        return std::nullopt;
      }
      outs.push_back(std::move(*o));
    }
    ctx.hint = saved_hint;
    ctx.collect = saved_collect;
    return outs;
  };

  auto variants_included = [&](const std::vector<Cone>& outs, const Cone& in,
                               bool collect) -> bool {
    bool all = true;
    for (const Cone& o : outs) {
      Cone next = counter_increment(o, idx, 1.0);
      ConeIncludeResult chk =
          cone_includes_bounded(next, in, upper, ctx.cfg.domain);
      ctx.out.stats.absorb(chk.stats);
      if (!chk.included) {
        all = false;
        break;
      }
      if (collect) ctx.add_cert(std::move(chk.cert), tag + " post-fixpoint");
    }
    return all;
  };

  long post_delay_widens = 0;
  bool stable = false;
  const int max_iters = ctx.cfg.widen_delay + ctx.cfg.beta_cap + 4;
  for (int iter = 0; iter < max_iters; ++iter) {
    auto outs = run_variants(inv, /*collect=*/false);
    if (!outs) {
      ctx.bound_stack.pop_back();
      return give_up("loop body lost information");
    }
    if (variants_included(*outs, inv, /*collect=*/false)) {
      stable = true;
      break;
    }
    ConeOpResult merged = cone_join(*outs, ctx.cfg.domain);
    ctx.out.stats.absorb(merged.stats);
    if (!merged.result) {
      ctx.bound_stack.pop_back();
      return give_up("loop body join failed: " + merged.failure);
    }
    Cone next = counter_increment(*merged.result, idx, 1.0);
    const bool in_delay = iter < ctx.cfg.widen_delay;
    bool cap = false;
    if (!in_delay) {
      cap = post_delay_widens >= ctx.cfg.beta_cap;
      ++post_delay_widens;
    }
    ConeOpResult w = widen(inv, next, cap, ctx.cfg.domain,
                           /*shift_to_slope=*/summary.lyapunov_policy);
    ctx.out.stats.absorb(w.stats);
    if (!w.result) {
      ctx.bound_stack.pop_back();
      return give_up("widening failed: " + w.failure);
    }
    inv = *w.result;
  }
  summary.widens = post_delay_widens;
  summary.stabilized = stable;
  if (!stable) {
    ctx.bound_stack.pop_back();
    return give_up("fixpoint iteration did not stabilize");
  }

  // Independent post-fixpoint pass: one more abstract iteration with
  // certificate collection on; its per-branch inclusion checks are the
  // recheck and land in the master certificate.
  ctx.add_cert(std::move(base_cert), tag + " base");
  {
    auto outs = run_variants(inv, /*collect=*/true);
    if (!outs) {
      ctx.bound_stack.pop_back();
      return give_up("post-fixpoint pass lost information");
    }
    if (ctx.collect && !outs->empty()) {
      const double lam0 = (*outs)[0].slots()[idx].lambda;
      cert::Certificate inc_step;
      inc_step.steps.push_back(counter_increment_step(
          lam0, 1.0, add_round_down(lam0, 1.0)));
      ctx.add_cert(std::move(inc_step), tag + " increment");
    }
    summary.fixpoint_recheck =
        variants_included(*outs, inv, /*collect=*/true);
  }
  summary.invariant = inv;
  ctx.record(s.point_id, tag + " head invariant", inv);

  ConeOpResult exit = remove_counter(inv, idx, inv.slots()[idx].lambda,
                                     inv.slots()[idx].extrapolated
                                         ? summary.bound_upper
                                         : inv.slots()[idx].lambda,
                                     ctx.cfg.domain);
  ctx.out.stats.absorb(exit.stats);
  ctx.bound_stack.pop_back();
  if (ctx.collect) ctx.out.loops.push_back(summary);
  if (!exit.result) return give_up("counter removal failed: " + exit.failure);
  ctx.add_cert(std::move(exit.cert), tag + " exit");
  ctx.record(s.point_id, tag + " exit", exit.result);
  return exit.result;
}

std::optional<Cone> initial_state(const lang::Program& p, Ctx& ctx) {
  const int n = int(p.vars.size());
  Vec lo = p.has_init ? p.init_lo : Vec::Zero(n);
  Vec hi = p.has_init ? p.init_hi : Vec::Zero(n);
  const double r0 = ctx.cfg.init_radius;

  std::vector<int> boxdims;
  for (int i = 0; i < n; ++i)
    if (lo[i] < hi[i]) boxdims.push_back(i);
  if (boxdims.empty()) {
    Ellipsoid ball = Ellipsoid::ball(lo, r0);
    return Cone(ball, {});
  }
  if (boxdims.size() > 6) {
    ctx.mark_top("init box has too many extended dimensions");
    return std::nullopt;
  }
  // Hypercube init: balls at the vertices, folded through the join.
  std::vector<Ellipsoid> corners;
  for (long mask = 0; mask < (1L << boxdims.size()); ++mask) {
    Vec v = lo;
    for (size_t k = 0; k < boxdims.size(); ++k)
      if (mask & (1L << k)) v[boxdims[k]] = hi[boxdims[k]];
    corners.push_back(Ellipsoid::ball(v, r0));
  }
  JoinResult j = join(corners, ctx.cfg.domain);
  ctx.out.stats.absorb(j.stats);
  if (!j.result) {
    ctx.mark_top("init box join failed");
    return std::nullopt;
  }
  ctx.add_cert(std::move(j.cert), "init box");
  return Cone(*j.result, {});
}

}  // namespace

AnalysisResult analyze(const lang::Program& p, const AnalyzerConfig& cfg) {
  AnalysisResult out;
  out.counter_bounds = lang::counter_intervals(p, cfg.horizon);
  Ctx ctx{cfg, out, {}, nullptr, true};
  std::optional<Cone> st = initial_state(p, ctx);
  ctx.record(-1, "init", st);
  st = exec_stmts(ctx, std::move(st), p.body);
  out.final_state = st;
  if (!st) out.complete = false;
  return out;
}

}  // namespace ellcone
