#pragma once

#include <numeric>

#include "hsrd/entropy.hpp"

namespace hsrd {

// sum_j |j><j| (x) U_j on Z (x) C
struct BlockUnitary {
  int J = 1, dC = 1;
  std::vector<CMatrix> blocks;

  CMatrix matrix() const {
    CMatrix m = CMatrix::Zero(long(J) * dC, long(J) * dC);
    for (int j = 0; j < J; ++j) m.block(long(j) * dC, long(j) * dC, dC, dC) = blocks[j];
    return m;
  }
};

// G_sigma = sum_j |sigma(j)><j|
struct Permutation {
  std::vector<int> sigma;

  int size() const { return int(sigma.size()); }
  CMatrix matrix() const {
    const int J = size();
    CMatrix m = CMatrix::Zero(J, J);
    for (int j = 0; j < J; ++j) m(sigma[j], j) = 1;
    return m;
  }
  static Permutation identity(int J) {
    Permutation p;
    p.sigma.resize(J);
    std::iota(p.sigma.begin(), p.sigma.end(), 0);
    return p;
  }
};

inline BlockUnitary sample_block_unitary(int J, int dC, Rng &rng) {
  if (J < 1 || dC < 1) throw dimension_error("sample_block_unitary: J and d_C must be >= 1");
  BlockUnitary u;
  u.J = J;
  u.dC = dC;
  for (int j = 0; j < J; ++j) u.blocks.push_back(sample_haar_unitary(dC, rng));
  return u;
}

// Fisher-Yates
inline Permutation sample_permutation(int J, Rng &rng) {
  Permutation p = Permutation::identity(J);
  for (int i = J - 1; i > 0; --i) std::swap(p.sigma[i], p.sigma[rng.below(i + 1)]);
  return p;
}

// op (out x in) on registers `on`; result lists the other registers first and
// then `out`.
inline LabeledState act(const LabeledState &s, const CMatrix &op, const Names &on, const std::vector<Register> &out) {
  Names rest = s.layout.complement(on);
  Names order = rest;
  order.insert(order.end(), on.begin(), on.end());
  const long din = s.layout.dim_of(on), dr = s.layout.dim_of(rest);
  long dout = 1;
  for (auto &r : out) dout *= r.dim;
  if (op.cols() != din || op.rows() != dout) throw shape_error("act: operator shape mismatch");
  CMatrix m = reorder(s.matrix, s.layout, order);
  // with `on` least significant, left multiplication by op is a reshape away
  auto left = [&](const CMatrix &a) {
    const long cols = a.cols();
    Eigen::Map<const CMatrix> q(a.data(), din, dr * cols);
    CMatrix r = op * q;
    return CMatrix(Eigen::Map<CMatrix>(r.data(), dout * dr, cols));
  };
  CMatrix A = left(m);            // (op (x) 1) rho
  CMatrix B = left(A.adjoint());  // (op (x) 1) rho^dag (op (x) 1)^dag
  std::vector<Register> regs;
  for (auto &n : rest) regs.push_back(s.layout.reg(n));
  for (auto &r : out) regs.push_back(r);
  return {CMatrix(B.adjoint()), RegisterLayout(regs)};
}

inline LabeledState act(const LabeledState &s, const CMatrix &op, const Names &on) {
  std::vector<Register> out;
  for (auto &n : on) out.push_back(s.layout.reg(n));
  return act(s, op, on, out);
}

inline void require_decoupling_layout(const LabeledState &psi) {
  for (auto n : {"Z", "C", "Z'"})
    if (!psi.layout.contains(n)) throw layout_error(std::string("decoupling state needs register ") + n);
  if (psi.layout.reg("Z").dim != psi.layout.reg("Z'").dim) throw layout_error("Z and Z' must have equal dimension");
}

inline Names s_hat(const LabeledState &psi) { return psi.layout.complement({"Z", "C"}); }

// E_U[U psi U^dag] = sum_j |j><j| (x) pi^C (x) Tr_C <j|psi|j>
inline LabeledState averaged_state(const LabeledState &psi) {
  require_decoupling_layout(psi);
  Names rest = s_hat(psi);
  Names order{"Z", "C"};
  order.insert(order.end(), rest.begin(), rest.end());
  CMatrix m = reorder(psi.matrix, psi.layout, order);
  const int J = psi.layout.reg("Z").dim, dC = psi.layout.reg("C").dim;
  const long dr = psi.layout.dim_of(rest), blk = long(dC) * dr;
  CMatrix out = CMatrix::Zero(m.rows(), m.cols());
  CMatrix pi = CMatrix::Identity(dC, dC) / double(dC);
  for (int j = 0; j < J; ++j) {
    CMatrix b = m.block(j * blk, j * blk, blk, blk);
    out.block(j * blk, j * blk, blk, blk) = detail::kron(pi, detail::trace_first(b, dC, int(dr)));
  }
  LabeledState r{out, psi.layout.ordered(order)};
  return r.ordered(psi.layout.names());
}

inline LabeledState apply_gu(const LabeledState &psi, const Permutation &g, const BlockUnitary *u) {
  LabeledState s = psi;
  if (u) s = act(s, u->matrix(), {"Z", "C"});
  return act(s, g.matrix(), {"Z"});
}

// Stinespring form of T: isometry (or contraction) V from Z (x) C into E (x) F;
// T keeps E, the complementary channel keeps F.
struct Stinespring {
  CMatrix V;
  std::vector<Register> E, F;

  long dE() const {
    long d = 1;
    for (auto &r : E) d *= r.dim;
    return d;
  }
  long dF() const {
    long d = 1;
    for (auto &r : F) d *= r.dim;
    return d;
  }
};

// register permutation as a map from `in` order to `order`
inline CMatrix permutation_operator(const RegisterLayout &in, const Names &order) {
  const long d = in.total_dim();
  CMatrix V = CMatrix::Zero(d, d);
  for (long c = 0; c < d; ++c) {
    CVector e = CVector::Zero(d);
    e(c) = 1;
    V.col(c) = reorder(e, in, order);
  }
  return V;
}

// sum_j sqrt(p_j) |j>^Z |phi_j>^{C S Env} |j>^{Z'}, Env traced out
inline LabeledState random_decoupling_state(int J, int dC, int dS, int env, Rng &rng) {
  if (J < 1 || dC < 1 || dS < 1 || env < 1) throw dimension_error("random_decoupling_state: dims must be >= 1");
  RegisterLayout L({{"Z", J}, {"C", dC}, {"S", dS}, {"Env", env}, {"Z'", J}});
  CVector v = CVector::Zero(L.total_dim());
  std::vector<double> p(J);
  double t = 0;
  for (auto &x : p) t += (x = 0.5 + rng.uniform());
  for (int j = 0; j < J; ++j) {
    CVector phi = sample_haar_state(dC * dS * env, rng);
    v += std::sqrt(p[j] / t) * kron_vec(kron_vec(basis_vector(J, j), phi), basis_vector(J, j));
  }
  LabeledState full{projector(v), L};
  return full.marginal({"Z", "C", "S", "Z'"});
}

// Haar isometry Z C -> E F
inline Stinespring random_stinespring(int dZC, int dE, int dF, Rng &rng) {
  if (long(dE) * dF < dZC) throw dimension_error("random_stinespring: output smaller than input");
  Stinespring s;
  s.V = sample_haar_unitary(dE * dF, rng).leftCols(dZC);
  s.E = {{"E", dE}};
  s.F = {{"F", dF}};
  return s;
}

// Tr_{Z_R C_R} with Z = Z_L Z_R and C = C_L C_R (left factors significant)
inline Stinespring partial_trace_channel(int JL, int JR, int dCL, int dCR) {
  Stinespring s;
  s.E = {{"ZL", JL, Kind::quantum}, {"CL", dCL, Kind::quantum}};
  s.F = {{"ZR", JR, Kind::quantum}, {"CR", dCR, Kind::quantum}};
  s.V = permutation_operator(RegisterLayout({{"ZL", JL}, {"ZR", JR}, {"CL", dCL}, {"CR", dCR}}),
                             {"ZL", "CL", "ZR", "CR"});
  return s;
}

inline LabeledState apply_stinespring(const LabeledState &s, const Stinespring &T) {
  std::vector<Register> out = T.E;
  out.insert(out.end(), T.F.begin(), T.F.end());
  LabeledState r = act(s, T.V, {"Z", "C"}, out);
  Names keep = r.layout.names();
  for (auto &f : T.F) keep.erase(std::find(keep.begin(), keep.end(), f.name));
  return r.marginal(keep);
}

// T o G_sigma as one map on Z (x) C
inline CMatrix t_after_g(const Stinespring &T, const Permutation &g, int dC) {
  return T.V * detail::kron(g.matrix(), CMatrix::Identity(dC, dC));
}

// || T G_sigma U psi - T G_sigma psi_av ||_1, with psi_av precomputed
inline double decoupling_lhs(const LabeledState &psi, const LabeledState &avg, const Permutation &g,
                             const BlockUnitary &u, const Stinespring &T) {
  LabeledState d = act(psi, u.matrix(), {"Z", "C"});
  d.matrix -= avg.ordered(d.layout.names()).matrix;
  std::vector<Register> out = T.E;
  out.insert(out.end(), T.F.begin(), T.F.end());
  LabeledState r = act(d, t_after_g(T, g, u.dC), {"Z", "C"}, out);
  Names keep = r.layout.names();
  for (auto &f : T.F) keep.erase(std::find(keep.begin(), keep.end(), f.name));
  return trace_norm(partial_trace(r.matrix, r.layout, keep));
}

inline double decoupling_lhs(const LabeledState &psi, const Permutation &g, const BlockUnitary &u,
                             const Stinespring &T) {
  require_decoupling_layout(psi);
  return decoupling_lhs(psi, averaged_state(psi), g, u, T);
}

struct DecouplingBound {
  double H_I = 0, H_II = 0;
  double bound = 0;  // 2^{-H_I/2} + 2^{-H_II/2} (second term only when d_C >= 2)
};

inline DecouplingBound decoupling_bound(const LabeledState &psi, const Stinespring &T, double eps = 0,
                                        double mu = 0) {
  require_decoupling_layout(psi);
  const int J = psi.layout.reg("Z").dim, dC = psi.layout.reg("C").dim;
  if (J < 2) throw dimension_error("decoupling bound needs J >= 2");
  Names S = s_hat(psi);
  LabeledState cpsi = dephase(psi, "Z");
  // Choi state of the complementary channel: Z C on the left, Z' C' fed to T^c
  CVector phi = CVector::Zero(long(J) * dC * J * dC);
  RegisterLayout choi_in({{"Z", J}, {"C", dC}, {"Zc", J}, {"Cc", dC}});
  for (int j = 0; j < J; ++j)
    for (int c = 0; c < dC; ++c) {
      const long idx = ((long(j) * dC + c) * J + j) * dC + c;
      phi(idx) = 1.0 / std::sqrt(double(J) * dC);
    }
  LabeledState Phi{projector(phi), choi_in};
  std::vector<Register> out = T.E;
  out.insert(out.end(), T.F.begin(), T.F.end());
  LabeledState tau = act(Phi, T.V, {"Zc", "Cc"}, out);
  Names keep{"Z", "C"}, Fn;
  for (auto &f : T.F) Fn.push_back(f.name);
  keep.insert(keep.end(), Fn.begin(), Fn.end());
  LabeledState ctau = dephase(tau.marginal(keep), "Z");
  DecouplingBound r;
  r.H_I = std::log2(double(J - 1)) + smooth_hmin(psi, {"Z", "C"}, S, eps) - smooth_hmax(ctau, {"Z", "C"}, Fn, mu);
  Names FZ = Fn;
  FZ.push_back("Z");
  r.H_II = smooth_hmin(cpsi, {"Z", "C"}, S, eps) - smooth_hmax(ctau, {"C"}, FZ, mu);
  r.bound = std::pow(2.0, -r.H_I / 2) + (dC >= 2 ? std::pow(2.0, -r.H_II / 2) : 0.0) +
            4 * (eps + mu + eps * mu);
  return r;
}

// ------------------------------------------------------------ partial trace

struct PartialTraceConfig {
  int JL = 1, JR = 1;    // Z = Z_L Z_R
  int dCL = 1, dCR = 1;  // C = C_L C_R
  double eps = 0, delta = 0;
  int samples = 200;
};

struct PartialTraceReport {
  double hmin = 0, hmin_dephased = 0;
  double lhs1 = 0, rhs1 = 0, lhs2 = 0, rhs2 = 0;
  bool cond1 = false, cond2 = true, conditions = false;
  double empirical_mean = 0;
  double bound = 0;  // 4 eps + 2 delta
};

inline PartialTraceReport verify_partial_trace_case(const LabeledState &psi, const PartialTraceConfig &cfg, Rng &rng) {
  require_decoupling_layout(psi);
  const int J = cfg.JL * cfg.JR, dC = cfg.dCL * cfg.dCR;
  if (psi.layout.reg("Z").dim != J || psi.layout.reg("C").dim != dC)
    throw layout_error("partial trace config does not match the state");
  if (!(cfg.delta > 0)) throw domain_error("delta must be > 0");
  Names S = s_hat(psi);
  PartialTraceReport r;
  r.hmin = smooth_hmin(psi, {"Z", "C"}, S, cfg.eps);
  r.lhs1 = std::log2(double(cfg.dCL) * cfg.dCL / (double(cfg.JR) * dC));
  r.rhs1 = r.hmin + std::log2(cfg.delta * cfg.delta / 2);
  r.cond1 = r.lhs1 <= r.rhs1;
  if (dC >= 2) {
    r.hmin_dephased = smooth_hmin(dephase(psi, "Z"), {"Z", "C"}, S, cfg.eps);
    r.lhs2 = std::log2(double(cfg.dCL) * cfg.dCL / dC);
    r.rhs2 = r.hmin_dephased + std::log2(cfg.delta * cfg.delta);
    r.cond2 = r.lhs2 <= r.rhs2;
  }
  r.conditions = r.cond1 && r.cond2;
  r.bound = 4 * cfg.eps + 2 * cfg.delta;
  Stinespring T = partial_trace_channel(cfg.JL, cfg.JR, cfg.dCL, cfg.dCR);
  LabeledState avg = averaged_state(psi);
  double sum = 0;
  for (int k = 0; k < cfg.samples; ++k) {
    Permutation g = sample_permutation(J, rng);
    sum += decoupling_lhs(psi, avg, g, sample_block_unitary(J, dC, rng), T);
  }
  r.empirical_mean = sum / cfg.samples;
  return r;
}

// --------------------------------------------------------- bi-decoupling

struct BiDecouplingConfig {
  int JL = 1, JR = 1;
  int dC1 = 1, dC2 = 1, dC3 = 1;
  Names S1, S2, S3;
  double eps = 0, delta = 0;
  bool force = false;  // search even when the dimension conditions fail
};

struct BiDecouplingResult {
  std::array<double, 4> lhs{}, rhs{};
  std::array<bool, 4> cond{};
  bool conditions = false;
  bool found = false;
  int tries = 0;
  Permutation sigma;
  BlockUnitary U;
  double d5 = 0, d6 = 0, target = 0;
};

namespace detail {

inline Names cat(Names a, const Names &b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

// channel keeping Z_L and one of C1, C2
inline Stinespring keep_one(int JL, int JR, int d1, int d2, int d3, bool keep_first) {
  RegisterLayout in({{"ZL", JL}, {"ZR", JR}, {"C1", d1}, {"C2", d2}, {"C3", d3}});
  Names order = keep_first ? Names{"ZL", "C1", "ZR", "C2", "C3"} : Names{"ZL", "C2", "ZR", "C1", "C3"};
  Stinespring s;
  s.E = {{"ZL", JL}, {keep_first ? "C1" : "C2", keep_first ? d1 : d2}};
  s.F = {{"ZR", JR}, {keep_first ? "C2" : "C1", keep_first ? d2 : d1}, {"C3", d3}};
  s.V = permutation_operator(in, order);
  return s;
}

}  // namespace detail

inline BiDecouplingResult find_bidecoupling_pair(const LabeledState &psi, const BiDecouplingConfig &cfg, int max_tries,
                                                 Rng &rng) {
  using detail::cat;
  require_decoupling_layout(psi);
  const int J = cfg.JL * cfg.JR, dC = cfg.dC1 * cfg.dC2 * cfg.dC3;
  if (psi.layout.reg("Z").dim != J || psi.layout.reg("C").dim != dC)
    throw layout_error("bi-decoupling config does not match the state");
  if (!(cfg.delta > 0)) throw domain_error("delta must be > 0");
  const Names Ch{"Z", "C"};
  const Names cond23 = cat(cat(Names{"Z'"}, cfg.S2), cfg.S3), cond13 = cat(cat(Names{"Z'"}, cfg.S1), cfg.S3);
  LabeledState p23 = psi.marginal(cat(Ch, cond23)), p13 = psi.marginal(cat(Ch, cond13));
  BiDecouplingResult r;
  const double l2h = std::log2(cfg.delta * cfg.delta / 2), l2 = std::log2(cfg.delta * cfg.delta);
  const double dd[2] = {double(cfg.dC1), double(cfg.dC2)};
  const LabeledState *parts[2] = {&p23, &p13};
  const Names *conds[2] = {&cond23, &cond13};
  for (int a = 0; a < 2; ++a) {
    r.lhs[2 * a] = std::log2(dd[a] * dd[a] / (double(cfg.JR) * dC));
    r.rhs[2 * a] = smooth_hmin(*parts[a], Ch, *conds[a], cfg.eps) + l2h;
    r.cond[2 * a] = r.lhs[2 * a] <= r.rhs[2 * a];
    if (dC >= 2) {
      r.lhs[2 * a + 1] = std::log2(dd[a] * dd[a] / dC);
      r.rhs[2 * a + 1] = smooth_hmin(dephase(*parts[a], "Z"), Ch, *conds[a], cfg.eps) + l2;
      r.cond[2 * a + 1] = r.lhs[2 * a + 1] <= r.rhs[2 * a + 1];
    } else {
      r.cond[2 * a + 1] = true;
    }
  }
  r.conditions = r.cond[0] && r.cond[1] && r.cond[2] && r.cond[3];
  r.target = 12 * cfg.eps + 6 * cfg.delta;
  // first pair: keep C1 on the S2 S3 side; second: keep C2 on the S1 S3 side
  if (!r.conditions && !cfg.force) return r;
  Stinespring T5 = detail::keep_one(cfg.JL, cfg.JR, cfg.dC1, cfg.dC2, cfg.dC3, true);
  Stinespring T6 = detail::keep_one(cfg.JL, cfg.JR, cfg.dC1, cfg.dC2, cfg.dC3, false);
  LabeledState a23 = averaged_state(p23), a13 = averaged_state(p13);
  for (int t = 1; t <= max_tries; ++t) {
    Permutation g = sample_permutation(J, rng);
    BlockUnitary u = sample_block_unitary(J, dC, rng);
    const double d5 = decoupling_lhs(p23, a23, g, u, T5);
    const double d6 = decoupling_lhs(p13, a13, g, u, T6);
    r.tries = t;
    if (d5 <= r.target && d6 <= r.target) {
      r.found = true;
      r.sigma = g;
      r.U = u;
      r.d5 = d5;
      r.d6 = d6;
      break;
    }
    r.d5 = d5;
    r.d6 = d6;
  }
  return r;
}

}  // namespace hsrd
