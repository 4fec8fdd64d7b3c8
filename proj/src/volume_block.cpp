#include "ellcone/sdp.hpp"

namespace ellcone::sdp {

VolumeBlock build_volume_block(Problem& p, const Problem::SymVar& X) {
  const int n = X.n;
  VolumeBlock out;
  out.t = p.scalar("vol_t");

  // Lower triangular factor: diagonal entries plus strict lower part.
  out.delta_diag.reserve(n);
  std::vector<std::vector<VarId>> lower(n);
  for (int i = 0; i < n; ++i) {
    lower[i].resize(i + 1);
    for (int j = 0; j < i; ++j)
      lower[i][j] =
          p.scalar("vol_L_" + std::to_string(i) + "_" + std::to_string(j));
    lower[i][i] = p.scalar("vol_d_" + std::to_string(i));
    out.delta_diag.push_back(lower[i][i]);
  }

  // [[X, Delta],[Delta^T, diag(Delta)]] >= 0 caps prod(delta_i) by det(X).
  MatExpr big(2 * n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j <= i; ++j) big.add_term(X(i, j), i, j, 1.0);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j <= i; ++j) big.add_term(lower[i][j], i, n + j, 1.0);
  for (int i = 0; i < n; ++i) big.add_term(lower[i][i], n + i, n + i, 1.0);
  p.require_psd(std::move(big));

  if (n == 1) {
    // The chain formulas leave no u slots; the root block degenerates
    // to [[delta_1, t],[t, 1]].
    MatExpr root(2);
    root.add_term(out.delta_diag[0], 0, 0, 1.0);
    root.add_term(out.t, 0, 1, 1.0);
    root.add_const(1, 1, 1.0);
    p.require_psd(std::move(root));
    out.level = 0;
    out.chain_len = 0;
    out.free_u = 0;
    return out;
  }

  int level = 0;
  while ((1 << level) < n) ++level;  // n <= 2^l < 2n
  const int pow_l = 1 << level;
  const int chain_len = 2 * pow_l - 2;
  out.level = level;
  out.chain_len = chain_len;

  // u slot i (1-based): free node, a delta tie-in, or the constant 1.
  struct Slot {
    VarId var;       // invalid when constant
    double constant = 0.0;
  };
  std::vector<Slot> u(chain_len + 1);
  for (int i = 1; i <= chain_len; ++i) {
    if (i >= pow_l - 1 && i < pow_l - 1 + n) {
      u[i].var = out.delta_diag[i - (pow_l - 1)];
    } else if (i >= pow_l - 1 + n) {
      u[i].constant = 1.0;
    } else {
      u[i].var = p.scalar("vol_u_" + std::to_string(i));
      ++out.free_u;
    }
  }
  auto put = [&](MatExpr& e, int r, int c, const Slot& s) {
    if (s.var.valid())
      e.add_term(s.var, r, c, 1.0);
    else
      e.add_const(r, c, s.constant);
  };

  MatExpr root(2);
  put(root, 0, 0, u[1]);
  root.add_term(out.t, 0, 1, 1.0);
  put(root, 1, 1, u[2]);
  p.require_psd(std::move(root));

  for (int i = 1; i <= pow_l - 2; ++i) {
    MatExpr node(2);
    put(node, 0, 0, u[2 * i + 1]);
    put(node, 0, 1, u[i]);
    put(node, 1, 1, u[2 * i + 2]);
    p.require_psd(std::move(node));
  }
  return out;
}

}  // namespace ellcone::sdp
