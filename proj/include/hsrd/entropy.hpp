#pragma once

#include <limits>

#include "hsrd/qstate.hpp"
#include "hsrd/sdp.hpp"

namespace hsrd {

using Names = std::vector<std::string>;

inline constexpr double default_sdp_tol = 1e-7;

// f(x) = -log(1 - sqrt(1 - x^2))
inline double f_eps(double x) {
  if (!(x > 0) || x > 1) throw domain_error("f_eps: argument must lie in (0, 1]");
  return -std::log2(1 - std::sqrt(1 - x * x));
}

namespace detail {

inline void check_partition(const Names &A, const Names &B) {
  for (auto &a : A)
    for (auto &b : B)
      if (a == b) throw layout_error("target and conditioning share register " + a);
}

struct Bipartite {
  CMatrix rho;
  int dA, dB;
};

inline Bipartite bipartite(const LabeledState &s, const Names &A, const Names &B) {
  check_partition(A, B);
  Names order = A;
  order.insert(order.end(), B.begin(), B.end());
  LabeledState m = s.ordered(order);
  return {m.matrix, int(s.layout.dim_of(A)), int(s.layout.dim_of(B))};
}

inline CMatrix trace_second(const CMatrix &rho, int dA, int dB) {
  CMatrix r = CMatrix::Zero(dA, dA);
  for (int a = 0; a < dA; ++a)
    for (int a2 = 0; a2 < dA; ++a2)
      for (int b = 0; b < dB; ++b) r(a, a2) += rho(a * dB + b, a2 * dB + b);
  return r;
}
inline CMatrix trace_first(const CMatrix &rho, int dA, int dB) {
  CMatrix r = CMatrix::Zero(dB, dB);
  for (int a = 0; a < dA; ++a) r += rho.block(a * dB, a * dB, dB, dB);
  return r;
}

inline void require_solved(const SdpSolution &s, const SdpProblem &p) {
  if (s.status == SdpStatus::optimal) return;
  // stalled near the optimum is good enough
  if (s.status == SdpStatus::max_iterations && s.gap <= 1e-5 * std::max(1.0, std::abs(s.value)) &&
      s.primal_residual <= 1e-5 && s.dual_residual <= 1e-5)
    return;
  throw solver_error(std::string("entropy SDP ended with status ") + to_string(s.status) +
                         " (gap " + std::to_string(s.gap) + ")",
                     p.dump());
}

// 2^{-H_min^eps(A|B)} of rho on A (x) B, i.e. the optimal Tr Y.
inline double hmin_guess_value(const CMatrix &rho_in, int dA, int dB, double eps, double tol) {
  if (eps < 0 || eps >= 1) throw domain_error("smoothing parameter must lie in [0, 1)");
  // restrict to supp(rho_A) (x) supp(rho_B); the program is invariant under
  // this compression
  CMatrix VA = support_basis(trace_second(rho_in, dA, dB));
  CMatrix VB = support_basis(trace_first(rho_in, dA, dB));
  if (VA.cols() == 0 || VB.cols() == 0) throw not_a_state_error("conditional entropy of the zero operator");
  CMatrix V = detail::kron(VA, VB);
  CMatrix rho = V.adjoint() * rho_in * V;
  rho = 0.5 * (rho + rho.adjoint()).eval();
  const int a = int(VA.cols()), b = int(VB.cols()), d = a * b;

  SdpProblem p;
  const int Y = p.add_hermitian("Y", b);
  p.add_trace_objective(Y);
  const int dom = p.add_block("I(x)Y - rho", d);
  p.place_kron_identity(dom, Y, a);
  if (eps == 0) {
    p.add_constant_matrix(dom, 0, -rho);
  } else {
    const double t = std::sqrt(1 - eps * eps);
    const double tr = rho.trace().real();
    auto e = hermitian_eig(rho);
    int r = 0;
    while (r < d && e.eigenvalues(r) > support_threshold * e.eigenvalues(0)) ++r;
    CMatrix U = e.eigenvectors.leftCols(r);
    const int R = p.add_hermitian("rho_hat", d);
    const int Xg = p.add_general("X", r, d);
    p.place(dom, R, 0, 0, -1.0);
    // [[Lambda, X],[X^dagger, rho_hat]] >= 0  with  X_full = U X
    const int fid = p.add_block("fidelity", r + d);
    for (int k = 0; k < r; ++k) p.add_constant(fid, k, k, e.eigenvalues(k));
    p.place(fid, Xg, 0, r);
    p.place(fid, R, r, r);
    const int fb = p.add_block("Re Tr X >= t", 1);
    p.add_constant(fb, 0, 0, -t);
    p.add_re_trace(fb, 0, Xg, U);
    if (1 - tr > 1e-12) {
      // generalized fidelity: + sqrt((1 - Tr rho)(1 - Tr rho_hat))
      const int s = p.add_scalar("s");
      const int g = p.add_block("subnormal", 2);
      p.add_constant(g, 0, 0, 1 - tr);
      p.add_constant(g, 1, 1, 1.0);
      p.place(g, s, 0, 1);
      for (int k = 0; k < d; ++k)
        for (auto &tm : p.element(R, k, k)) p.add_entry(g, tm.first, 1, 1, -tm.second);
      p.place(fb, s, 0, 0);
    } else {
      const int tb = p.add_block("Tr rho_hat <= 1", 1);
      p.add_constant(tb, 0, 0, 1.0);
      for (int k = 0; k < d; ++k)
        for (auto &tm : p.element(R, k, k)) p.add_entry(tb, tm.first, 0, 0, -tm.second);
    }
  }
  SdpSolution sol = solve(p, tol);
  require_solved(sol, p);
  return sol.value;
}

inline double hmin_core(const CMatrix &rho, int dA, int dB, double eps, double tol = default_sdp_tol) {
  return -std::log2(hmin_guess_value(rho, dA, dB, eps, tol));
}

// rho on A (x) B  ->  marginal on A (x) M of a purification with mirror M
inline std::pair<CMatrix, int> purified_complement(const CMatrix &rho, int dA, int dB) {
  auto e = hermitian_eig(rho);
  const int d = dA * dB;
  int r = 0;
  while (r < d && e.eigenvalues(r) > support_threshold * e.eigenvalues(0) && e.eigenvalues(r) > 0) ++r;
  if (r == 0) throw not_a_state_error("purification of the zero operator");
  // psi[a, b, k] = sqrt(l_k) v_k[a b]
  CMatrix out = CMatrix::Zero(dA * r, dA * r);
  for (int b = 0; b < dB; ++b) {
    CMatrix Mb(dA, r);  // rows a, cols k
    for (int a = 0; a < dA; ++a)
      for (int k = 0; k < r; ++k) Mb(a, k) = std::sqrt(e.eigenvalues(k)) * e.eigenvectors(a * dB + b, k);
    CVector v = Eigen::Map<CVector>(RowMajorCMatrix(Mb).data(), dA * r);
    out += v * v.adjoint();
  }
  return {out, r};
}

inline double hmax_core(const CMatrix &rho, int dA, int dB, double eps, double tol = default_sdp_tol) {
  auto pc = purified_complement(rho, dA, dB);
  return -hmin_core(pc.first, dA, pc.second, eps, tol);
}

}  // namespace detail

inline double smooth_hmin(const LabeledState &s, const Names &A, const Names &B, double eps,
                          double tol = default_sdp_tol) {
  auto bp = detail::bipartite(s, A, B);
  return detail::hmin_core(bp.rho, bp.dA, bp.dB, eps, tol);
}

inline double hmin_cond(const LabeledState &s, const Names &A, const Names &B, double tol = default_sdp_tol) {
  return smooth_hmin(s, A, B, 0.0, tol);
}

inline double smooth_hmax(const LabeledState &s, const Names &A, const Names &B, double eps,
                          double tol = default_sdp_tol) {
  auto bp = detail::bipartite(s, A, B);
  return detail::hmax_core(bp.rho, bp.dA, bp.dB, eps, tol);
}

inline double hmax_cond(const LabeledState &s, const Names &A, const Names &B, double tol = default_sdp_tol) {
  return smooth_hmax(s, A, B, 0.0, tol);
}

// log of the smallest rank of a projection capturing weight >= 1 - eps
inline double hmax_prime_of(const CMatrix &rho, double eps) {
  if (eps < 0 || eps >= 1) throw domain_error("hmax_prime: eps must lie in [0, 1)");
  auto ev = hermitian_eig(rho).eigenvalues;
  const double top = ev.size() ? ev(0) : 0.0;
  double cum = 0;
  const double need = 1 - eps - 1e-12;
  for (long k = 0; k < ev.size(); ++k) {
    if (!(ev(k) > support_threshold * top)) return std::log2(double(std::max<long>(k, 1)));
    cum += ev(k);
    if (cum >= need) return std::log2(double(k + 1));
  }
  return std::log2(double(std::max<long>(ev.size(), 1)));
}

inline double hmax_prime(const LabeledState &s, const Names &A, double eps) {
  return hmax_prime_of(s.ordered(A).matrix, eps);
}

inline double h_star(const LabeledState &s, const Names &A, const Names &B, double iota, double kappa,
                     double tol = default_sdp_tol) {
  return std::max(smooth_hmin(s, A, B, iota, tol), smooth_hmax(s, A, B, kappa, tol));
}

// H_min^eps(A|B) - H_min^eps(A|BC)
inline double i_min_tilde(const LabeledState &s, const Names &A, const Names &C, const Names &B, double eps,
                          double tol = default_sdp_tol) {
  Names BC = B;
  BC.insert(BC.end(), C.begin(), C.end());
  return smooth_hmin(s, A, B, eps, tol) - smooth_hmin(s, A, BC, eps, tol);
}

inline double von_neumann_h(const LabeledState &s, const Names &A, const Names &B = {}) {
  Names AB = A;
  AB.insert(AB.end(), B.begin(), B.end());
  detail::check_partition(A, B);
  const double hab = von_neumann_bits(s.marginal(AB).matrix);
  const double hb = B.empty() ? 0.0 : von_neumann_bits(s.marginal(B).matrix);
  return hab - hb;
}

inline double von_neumann_mi(const LabeledState &s, const Names &A, const Names &B) {
  return von_neumann_h(s, A) - von_neumann_h(s, A, B);
}

struct FixedHmin {
  double value = 0;
  bool minus_infinity = false;
};

// -log lambda_max((1 (x) sigma)^{-1/2} rho (1 (x) sigma)^{-1/2}) on the support of 1 (x) sigma
inline FixedHmin hmin_cond_fixed(const LabeledState &s, const Names &A, const Names &B, const CMatrix &sigma) {
  auto bp = detail::bipartite(s, A, B);
  if (sigma.rows() != bp.dB) throw shape_error("hmin_cond_fixed: sigma has wrong dimension");
  CMatrix Is = detail::kron(CMatrix::Identity(bp.dA, bp.dA), sigma);
  CMatrix P = support_projector(Is);
  CMatrix Q = CMatrix::Identity(P.rows(), P.cols()) - P;
  const double scale = std::max(1e-300, bp.rho.norm());
  if ((Q * bp.rho * Q).norm() > 1e-9 * scale) return {0, true};
  CMatrix Ih = inv_sqrtm_psd(Is);
  CMatrix m = Ih * bp.rho * Ih;
  const double top = hermitian_eig(0.5 * (m + m.adjoint())).eigenvalues(0);
  return {-std::log2(top), false};
}

struct CqBlock {
  double p;
  CMatrix rho;  // normalized state on A (x) B
  int dA, dB;
};

// -log sum_k p_k 2^{-H_min(A|B)_k}
inline double hmin_cond_cq_oracle(const std::vector<CqBlock> &blocks, double tol = default_sdp_tol) {
  double s = 0, ptot = 0;
  for (auto &b : blocks) {
    ptot += b.p;
    if (b.p == 0) continue;
    s += b.p * std::pow(2.0, -detail::hmin_core(b.rho, b.dA, b.dB, 0.0, tol));
  }
  if (ptot > 1 + 1e-9) throw validation_error("cq oracle: weights exceed 1");
  return -std::log2(s);
}

// assembled CQ state sum_k p_k rho_k (x) |k><k| on A (x) B (x) K
inline LabeledState assemble_cq(const std::vector<CqBlock> &blocks) {
  const int dA = blocks.at(0).dA, dB = blocks.at(0).dB, K = int(blocks.size());
  CMatrix m = CMatrix::Zero(dA * dB * K, dA * dB * K);
  for (int k = 0; k < K; ++k) m += detail::kron(blocks[k].p * blocks[k].rho, projector(basis_vector(K, k)));
  return {m, RegisterLayout({{"A", dA, Kind::quantum}, {"B", dB, Kind::quantum}, {"K", K, Kind::classical}})};
}

struct FqaepRow {
  int n;
  double hmin_per_copy, hmax_per_copy, von_neumann;
};

// per-copy smooth entropies of rho^{(x) n}; a trend report only
inline std::vector<FqaepRow> fqaep_trend(const LabeledState &s, const Names &A, const Names &B, double eps,
                                         int nmax = 3) {
  auto bp = detail::bipartite(s, A, B);
  std::vector<FqaepRow> rows;
  CMatrix cur = CMatrix::Ones(1, 1);
  const double h = von_neumann_h(s, A, B);
  for (int n = 1; n <= nmax; ++n) {
    // rho^{(x) n} rearranged as A^n (x) B^n
    CMatrix prod = kron(cur, bp.rho);
    std::vector<Register> regs;
    Names order;
    for (int k = 0; k < n; ++k) {
      regs.push_back({"A" + std::to_string(k), bp.dA});
      regs.push_back({"B" + std::to_string(k), bp.dB});
    }
    for (int k = 0; k < n; ++k) order.push_back("A" + std::to_string(k));
    for (int k = 0; k < n; ++k) order.push_back("B" + std::to_string(k));
    CMatrix r = reorder(prod, RegisterLayout(regs), order);
    const int dAn = int(std::pow(bp.dA, n)), dBn = int(std::pow(bp.dB, n));
    rows.push_back({n, detail::hmin_core(r, dAn, dBn, eps) / n, detail::hmax_core(r, dAn, dBn, eps) / n, h});
    cur = prod;
  }
  return rows;
}

}  // namespace hsrd
