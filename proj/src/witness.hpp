#pragma once

#include <functional>

#include "ellcone/ellipsoid.hpp"

// Internal: solver-assisted search for S-procedure witnesses.
//
// Solves  min beta  s.t.  beta*E + lam*Fin - Target >= shift*I, lam >= 0
// then walks the spec'd neighborhood grid around the solver's point and
// finally re-solves for a maximal interior margin. try_cert builds and
// replays the actual certificate step for a candidate pair; the first
// certified pair wins.
namespace ellcone::detail {

struct SprocSearch {
  const Mat& Fin;
  const Mat& Target;
  const DomainConfig& cfg;
  OpStats& stats;
  // When true, only candidates with beta <= 0 are meaningful (inclusion
  // claims); the margin fallback then constrains beta accordingly.
  bool need_beta_nonpos = true;
};

bool search_sproc_witness(const SprocSearch& in,
                          const std::function<bool(double lam, double beta)>& try_cert,
                          double* lam_out, double* beta_out);

}  // namespace ellcone::detail
