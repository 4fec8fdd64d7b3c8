#pragma once

#include <functional>
#include <random>
#include <vector>

#include "ellcone/program.hpp"

// Concrete executor of the loop language for Monte-Carlo soundness
// oracles: nondeterministic choices drawn uniformly, loop heads
// reported with the full counter stack.
namespace testsupport {

using ellcone::Vec;

struct SimHooks {
  // point_id of the loop, x state, counter stack (outer first).
  std::function<void(int, const Vec&, const std::vector<double>&)> at_loop_head;
  std::function<void(const Vec&)> at_end;
};

template <class Rng>
class Simulator {
 public:
  Simulator(const ellcone::lang::Program& p, Rng& rng, int max_steps,
            SimHooks hooks)
      : p_(p), rng_(rng), max_steps_(max_steps), hooks_(std::move(hooks)) {}

  void run() {
    const int n = int(p_.vars.size());
    x_ = Vec::Zero(n);
    if (p_.has_init) {
      std::uniform_real_distribution<double> unit(0.0, 1.0);
      for (int i = 0; i < n; ++i)
        x_[i] = p_.init_lo[i] +
                unit(rng_) * (p_.init_hi[i] - p_.init_lo[i]);
    }
    steps_ = 0;
    aborted_ = false;
    run_stmts(p_.body);
    if (!aborted_ && hooks_.at_end) hooks_.at_end(x_);
  }

 private:
  void run_stmts(const std::vector<ellcone::lang::Statement>& stmts) {
    for (const auto& s : stmts) {
      if (aborted_) return;
      run_stmt(s);
    }
  }

  void run_stmt(const ellcone::lang::Statement& s) {
    using K = ellcone::lang::Statement::Kind;
    switch (s.kind) {
      case K::Nop:
        return;
      case K::Assign:
        x_ = s.A * x_ + s.b;
        return;
      case K::Choose: {
        std::uniform_int_distribution<size_t> pick(0, s.branches.size() - 1);
        run_stmts(s.branches[pick(rng_)]);
        return;
      }
      case K::Loop: {
        counters_.push_back(0.0);
        for (long t = 0;; ++t) {
          counters_.back() = double(t);
          if (hooks_.at_loop_head) hooks_.at_loop_head(s.point_id, x_, counters_);
          if (s.bound && t >= long(*s.bound)) break;
          if (steps_ >= max_steps_) {
            if (!s.bound) aborted_ = true;  // never exits concretely
            break;
          }
          ++steps_;
          run_stmts(s.body);
          if (aborted_) break;
        }
        counters_.pop_back();
        return;
      }
    }
  }

  const ellcone::lang::Program& p_;
  Rng& rng_;
  int max_steps_;
  SimHooks hooks_;
  Vec x_;
  std::vector<double> counters_;
  long steps_ = 0;
  bool aborted_ = false;
};

}  // namespace testsupport
