#pragma once

#include <array>
#include <set>

#include "hsrd/numkit.hpp"

namespace hsrd {

struct LabeledState {
  CMatrix matrix;
  RegisterLayout layout;

  LabeledState() = default;
  LabeledState(CMatrix m, RegisterLayout l) : matrix(std::move(m)), layout(std::move(l)) {
    if (matrix.rows() != layout.total_dim() || matrix.cols() != layout.total_dim())
      throw layout_error("state dimension does not match layout");
  }

  LabeledState marginal(const std::vector<std::string> &keep) const {
    return {partial_trace(matrix, layout, keep), layout.subset(keep)};
  }
  // marginal with registers in exactly the given order
  LabeledState ordered(const std::vector<std::string> &order) const {
    LabeledState m = marginal(order);
    return {reorder(m.matrix, m.layout, order), layout.ordered(order)};
  }
  double trace() const { return matrix.trace().real(); }
};

// PSD within -1e-9, Tr <= 1 + 1e-9, classical registers diagonal within 1e-9
inline void validate_state(const LabeledState &s) {
  require_substate(s.matrix, "LabeledState");
  for (auto &r : s.layout.registers()) {
    if (r.kind != Kind::classical || r.dim == 1) continue;
    auto m = reorder(s.matrix, s.layout, {r.name});
    const long rest = m.rows() / r.dim;
    for (int j = 0; j < r.dim; ++j)
      for (int k = 0; k < r.dim; ++k)
        if (j != k && m.block(j * rest, k * rest, rest, rest).cwiseAbs().maxCoeff() > 1e-9)
          throw not_a_state_error("classical register " + r.name + " is not diagonal");
  }
}

struct SourceEntry {
  int x = 0, y = 0, z = 0;
  double p = 0;
  CVector psi;  // on A (x) B (x) C (x) R
};

struct HybridSource {
  int dA = 1, dB = 1, dC = 1, dR = 1, dX = 1, dY = 1, dZ = 1;
  std::vector<SourceEntry> entries;

  long quantum_dim() const { return long(dA) * dB * dC * dR; }
  long total_dim() const { return long(dX) * dY * dZ * quantum_dim() * dX * dY * dZ; }
  int dim(const std::string &name) const {
    if (name == "A") return dA;
    if (name == "B") return dB;
    if (name == "C") return dC;
    if (name == "R") return dR;
    if (name == "X" || name == "X'") return dX;
    if (name == "Y" || name == "Y'") return dY;
    if (name == "Z" || name == "Z'") return dZ;
    throw layout_error("unknown source register " + name);
  }
};

// drops p = 0 entries and checks the remaining invariants
inline HybridSource validated(HybridSource s) {
  for (int d : {s.dA, s.dB, s.dC, s.dR, s.dX, s.dY, s.dZ})
    if (d < 1) throw validation_error("source dims must be >= 1");
  std::vector<SourceEntry> kept;
  std::set<std::array<int, 3>> seen;
  double total = 0;
  for (size_t k = 0; k < s.entries.size(); ++k) {
    auto &e = s.entries[k];
    const std::string tag = "entry " + std::to_string(k);
    if (!(e.p >= 0) || !std::isfinite(e.p)) throw validation_error(tag + ": probability must be >= 0");
    if (e.p == 0) continue;
    if (e.x < 0 || e.x >= s.dX || e.y < 0 || e.y >= s.dY || e.z < 0 || e.z >= s.dZ)
      throw validation_error(tag + ": classical index out of range");
    if (!seen.insert({e.x, e.y, e.z}).second) throw validation_error(tag + ": duplicate (x,y,z)");
    if (e.psi.size() != s.quantum_dim())
      throw validation_error(tag + ": psi has length " + std::to_string(e.psi.size()) + ", expected " +
                             std::to_string(s.quantum_dim()));
    if (!e.psi.allFinite()) throw validation_error(tag + ": psi has non-finite entries");
    if (std::abs(e.psi.norm() - 1) > 1e-9) throw validation_error(tag + ": psi is not normalized");
    total += e.p;
    kept.push_back(e);
  }
  if (kept.empty()) throw validation_error("source has no entries with p > 0");
  if (std::abs(total - 1) > 1e-9) throw validation_error("probabilities sum to " + std::to_string(total));
  s.entries = kept;
  return s;
}

struct RateTuple {
  double c = 0, q = 0, e = 0, e0 = 0;
};

inline void validate_rates(const RateTuple &t) {
  if (t.c < 0 || t.q < 0 || t.e0 < 0) throw validation_error("rate tuple needs c, q, e0 >= 0");
}

inline const std::vector<std::string> &source_register_names() {
  static const std::vector<std::string> n{"X", "Y", "Z", "A", "B", "C", "R", "X'", "Y'", "Z'"};
  return n;
}

// X,Y,Z classical; A,B,C,R quantum; X',Y',Z' (together T) classical copies
inline RegisterLayout source_layout(const HybridSource &s) {
  std::vector<Register> r;
  for (auto &n : source_register_names()) {
    const bool cl = !(n == "A" || n == "B" || n == "C" || n == "R");
    r.push_back({n, s.dim(n), cl ? Kind::classical : Kind::quantum});
  }
  return RegisterLayout(r);
}

inline std::vector<std::string> expand_names(const std::vector<std::string> &names) {
  std::vector<std::string> out;
  for (auto &n : names) {
    if (n == "T") {
      for (auto p : {"X'", "Y'", "Z'"}) out.push_back(p);
    } else {
      out.push_back(n);
    }
  }
  return out;
}

// Marginal of the source state on the named registers (layout order) without
// materializing the full state.
inline LabeledState source_marginal(const HybridSource &s, std::vector<std::string> names) {
  names = expand_names(names);
  const RegisterLayout full = source_layout(s);
  const RegisterLayout sub = full.subset(names);
  RegisterLayout qlayout({{"A", s.dA, Kind::quantum},
                          {"B", s.dB, Kind::quantum},
                          {"C", s.dC, Kind::quantum},
                          {"R", s.dR, Kind::quantum}});
  std::vector<std::string> qkeep;
  for (auto q : {"A", "B", "C", "R"})
    if (sub.contains(q)) qkeep.push_back(q);
  CMatrix out = CMatrix::Zero(sub.total_dim(), sub.total_dim());
  for (auto &e : s.entries) {
    CMatrix pre = CMatrix::Ones(1, 1), post = CMatrix::Ones(1, 1);
    const int vals[3] = {e.x, e.y, e.z};
    const char *cn[3] = {"X", "Y", "Z"};
    const char *pn[3] = {"X'", "Y'", "Z'"};
    for (int k = 0; k < 3; ++k)
      if (sub.contains(cn[k])) pre = detail::kron(pre, projector(basis_vector(s.dim(cn[k]), vals[k])));
    for (int k = 0; k < 3; ++k)
      if (sub.contains(pn[k])) post = detail::kron(post, projector(basis_vector(s.dim(pn[k]), vals[k])));
    CMatrix q = partial_trace(projector(e.psi), qlayout, qkeep);
    out += e.p * detail::kron(detail::kron(pre, q), post);
  }
  return {out, sub};
}

inline LabeledState build_source(const HybridSource &spec) {
  HybridSource s = validated(spec);
  check_cap(s.total_dim(), "build_source");
  return source_marginal(s, source_register_names());
}

// sum_xyz sqrt(p) |x y z> |psi_xyz> |x y z>^T
inline Ket build_purified_source(const HybridSource &spec) {
  HybridSource s = validated(spec);
  RegisterLayout layout = source_layout(s);
  CVector v = CVector::Zero(layout.total_dim());
  for (auto &e : s.entries) {
    CVector cls = kron_vec(kron_vec(basis_vector(s.dX, e.x), basis_vector(s.dY, e.y)), basis_vector(s.dZ, e.z));
    v += std::sqrt(e.p) * kron_vec(kron_vec(cls, e.psi), cls);
  }
  return Ket(v, layout);
}

inline CVector max_entangled(int r) {
  if (r < 1) throw dimension_error("max_entangled: rank must be >= 1");
  CVector v = CVector::Zero(long(r) * r);
  for (int i = 0; i < r; ++i) v(long(i) * r + i) = 1.0 / std::sqrt(double(r));
  return v;
}

inline CMatrix dephase_matrix(const CMatrix &m, const RegisterLayout &layout, const std::string &name) {
  const int idx = layout.index_of(name);
  const int d = layout[idx].dim;
  long inner = 1;
  for (size_t k = idx + 1; k < layout.size(); ++k) inner *= layout[k].dim;
  CMatrix r = m;
  for (long i = 0; i < r.rows(); ++i)
    for (long j = 0; j < r.cols(); ++j)
      if ((i / inner) % d != (j / inner) % d) r(i, j) = 0;
  return r;
}

inline LabeledState dephase(const LabeledState &s, const std::string &name) {
  LabeledState r{dephase_matrix(s.matrix, s.layout, name), s.layout};
  return r;
}

inline HybridSource n_copies(const HybridSource &spec, int n) {
  if (n < 1) throw domain_error("n_copies: n must be >= 1");
  HybridSource base = validated(spec);
  HybridSource cur = base;
  for (int k = 1; k < n; ++k) {
    HybridSource nx;
    nx.dA = cur.dA * base.dA;
    nx.dB = cur.dB * base.dB;
    nx.dC = cur.dC * base.dC;
    nx.dR = cur.dR * base.dR;
    nx.dX = cur.dX * base.dX;
    nx.dY = cur.dY * base.dY;
    nx.dZ = cur.dZ * base.dZ;
    check_cap(nx.total_dim(), "n_copies");
    RegisterLayout l1({{"A1", cur.dA}, {"B1", cur.dB}, {"C1", cur.dC}, {"R1", cur.dR},
                       {"A2", base.dA}, {"B2", base.dB}, {"C2", base.dC}, {"R2", base.dR}});
    for (auto &e1 : cur.entries)
      for (auto &e2 : base.entries) {
        SourceEntry e;
        e.x = e1.x * base.dX + e2.x;
        e.y = e1.y * base.dY + e2.y;
        e.z = e1.z * base.dZ + e2.z;
        e.p = e1.p * e2.p;
        e.psi = reorder(kron_vec(e1.psi, e2.psi), l1, {"A1", "A2", "B1", "B2", "C1", "C2", "R1", "R2"});
        nx.entries.push_back(e);
      }
    cur = nx;
  }
  if (n == 1) check_cap(cur.total_dim(), "n_copies");
  return cur;
}

// CP map given by Kraus operators between two layouts
struct Channel {
  RegisterLayout in, out;
  std::vector<CMatrix> kraus;  // each out_dim x in_dim

  CMatrix apply(const CMatrix &rho) const {
    CMatrix r = CMatrix::Zero(out.total_dim(), out.total_dim());
    for (auto &K : kraus) r += K * rho * K.adjoint();
    return r;
  }
  double tp_defect() const {
    CMatrix s = CMatrix::Zero(in.total_dim(), in.total_dim());
    for (auto &K : kraus) s += K.adjoint() * K;
    return (s - CMatrix::Identity(s.rows(), s.cols())).norm();
  }
};

// Apply a channel acting on some registers of a larger state.  Output
// registers replace the inputs; the result lists the channel outputs first.
inline LabeledState apply_channel(const LabeledState &s, const Channel &ch) {
  std::vector<std::string> in = ch.in.names();
  auto rest = s.layout.complement(in);
  std::vector<std::string> order = in;
  order.insert(order.end(), rest.begin(), rest.end());
  for (auto &n : in)
    if (s.layout.reg(n).dim != ch.in.reg(n).dim) throw layout_error("apply_channel: dim mismatch on " + n);
  CMatrix m = reorder(s.matrix, s.layout, order);
  const long dr = s.layout.dim_of(rest);
  CMatrix out = CMatrix::Zero(ch.out.total_dim() * dr, ch.out.total_dim() * dr);
  CMatrix I = CMatrix::Identity(dr, dr);
  for (auto &K : ch.kraus) {
    CMatrix KK = detail::kron(K, I);
    out += KK * m * KK.adjoint();
  }
  std::vector<Register> regs = ch.out.registers();
  for (auto &n : rest) regs.push_back(s.layout.reg(n));
  return {out, RegisterLayout(regs)};
}

}  // namespace hsrd
