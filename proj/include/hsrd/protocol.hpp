#pragma once

#include <functional>

#include "hsrd/decouple.hpp"
#include "hsrd/region.hpp"

namespace hsrd {

// Encoder: A X C Z EA -> A X Q M FA.  Decoder: B Y Q M EB -> B Y C Z FB.
// EA EB start in a maximally entangled state of rank dE; FA FB should end in
// one of rank dF.  M is classical.
struct RedistProtocol {
  std::string name;
  int dQ = 1, dM = 1, dE = 1, dF = 1;
  Channel encoder, decoder;

  RateTuple rates() const {
    return {std::log2(double(dM)), std::log2(double(dQ)), std::log2(double(dE)) - std::log2(double(dF)),
            std::log2(double(dF))};
  }
};

namespace detail {

inline RegisterLayout enc_in(const HybridSource &s, int dE) {
  return RegisterLayout({{"A", s.dA}, {"X", s.dX, Kind::classical}, {"C", s.dC}, {"Z", s.dZ, Kind::classical}, {"EA", dE}});
}
inline RegisterLayout enc_out(const HybridSource &s, int dQ, int dM, int dF) {
  return RegisterLayout(
      {{"A", s.dA}, {"X", s.dX, Kind::classical}, {"Q", dQ}, {"M", dM, Kind::classical}, {"FA", dF}});
}
inline RegisterLayout dec_in(const HybridSource &s, int dQ, int dM, int dE) {
  return RegisterLayout({{"B", s.dB}, {"Y", s.dY, Kind::classical}, {"Q", dQ}, {"M", dM, Kind::classical}, {"EB", dE}});
}
inline RegisterLayout dec_out(const HybridSource &s, int dF) {
  return RegisterLayout({{"B", s.dB}, {"Y", s.dY, Kind::classical}, {"C", s.dC}, {"Z", s.dZ, Kind::classical}, {"FB", dF}});
}

// Kraus matrix of a linear map given by its action on kets of `in`
template <class F>
CMatrix kraus_from(const RegisterLayout &in, const RegisterLayout &out, F f) {
  const long din = in.total_dim();
  CMatrix K = CMatrix::Zero(out.total_dim(), din);
  for (long c = 0; c < din; ++c) {
    Ket r = f(Ket(basis_vector(int(din), int(c)), in));
    if (r.layout.total_dim() != out.total_dim()) throw layout_error("kraus_from: output dimension mismatch");
    K.col(c) = r.reordered(out.names()).amp;
  }
  return K;
}

// same amplitudes, register `name` split into consecutive parts
inline Ket split(const Ket &k, const std::string &name, const std::vector<Register> &parts) {
  std::vector<Register> regs;
  long d = 1;
  for (auto &p : parts) d *= p.dim;
  if (d != k.layout.reg(name).dim) throw layout_error("split: dimensions do not multiply to " + name);
  for (auto &r : k.layout.registers()) {
    if (r.name == name) regs.insert(regs.end(), parts.begin(), parts.end());
    else regs.push_back(r);
  }
  return Ket(k.amp, RegisterLayout(regs));
}

// registers `names` merged (in that order, first significant) into one
inline Ket merge(const Ket &k, const Names &names, const Register &into) {
  Names order = k.layout.complement(names);
  order.insert(order.end(), names.begin(), names.end());
  Ket r = k.reordered(order);
  std::vector<Register> regs;
  for (size_t i = 0; i + names.size() < order.size(); ++i) regs.push_back(r.layout[i]);
  regs.push_back(into);
  return Ket(r.amp, RegisterLayout(regs));
}

inline Ket rename(const Ket &k, const std::string &from, const std::string &to) {
  std::vector<Register> regs = k.layout.registers();
  for (auto &r : regs)
    if (r.name == from) r.name = to;
  return Ket(k.amp, RegisterLayout(regs));
}

inline Ket with(const Ket &k, const Register &r, int value) {
  return k.tensor(Ket(basis_vector(r.dim, value), RegisterLayout({r})));
}

// Weyl operator X^a Z^b
inline CMatrix weyl(int t, int a, int b) {
  CMatrix W = CMatrix::Zero(t, t);
  for (int j = 0; j < t; ++j) W((j + a) % t, j) = std::polar(1.0, 2 * M_PI * double(b) * j / t);
  return W;
}

// <Phi_ab| = <Phi| (W_ab^dag (x) 1) as a 1 x t^2 row
inline CMatrix bell_bra(int t, int a, int b) {
  CVector phi = detail::kron(weyl(t, a, b), CMatrix::Identity(t, t)) * max_entangled(t);
  return phi.adjoint();
}

inline bool is_power_of_two(long d) { return d >= 1 && (d & (d - 1)) == 0; }

inline int ilog2(long d) {
  int k = 0;
  while ((1L << k) < d) ++k;
  return k;
}

}  // namespace detail

// ------------------------------------------------------------- validation

inline constexpr int m_probe_count = 20;

inline void validate_protocol(const HybridSource &s, const RedistProtocol &p, double tol = 1e-9) {
  using namespace detail;
  auto same = [](const RegisterLayout &a, const RegisterLayout &b) {
    if (a.size() != b.size()) return false;
    for (size_t i = 0; i < a.size(); ++i)
      if (a[i].name != b[i].name || a[i].dim != b[i].dim) return false;
    return true;
  };
  if (!same(p.encoder.in, enc_in(s, p.dE)) || !same(p.encoder.out, enc_out(s, p.dQ, p.dM, p.dF)))
    throw layout_error("encoder layout must be A X C Z EA -> A X Q M FA with the declared dims");
  if (!same(p.decoder.in, dec_in(s, p.dQ, p.dM, p.dE)) || !same(p.decoder.out, dec_out(s, p.dF)))
    throw layout_error("decoder layout must be B Y Q M EB -> B Y C Z FB with the declared dims");
  if (p.encoder.tp_defect() > tol) throw validation_error("encoder is not trace preserving");
  if (p.decoder.tp_defect() > tol) throw validation_error("decoder is not trace preserving");
  // M must come out classical: generic pure probes see any off-diagonal leak
  Rng rng(0x4d);
  const long din = p.encoder.in.total_dim(), dout = p.encoder.out.total_dim();
  const long inner = long(p.dF);
  for (int k = 0; k < m_probe_count; ++k) {
    CVector v = sample_haar_state(int(din), rng);
    CMatrix rho = CMatrix::Zero(dout, dout);
    for (auto &K : p.encoder.kraus) {
      CVector w = K * v;
      rho += w * w.adjoint();
    }
    double off = 0;
    for (long i = 0; i < dout; ++i)
      for (long j = 0; j < dout; ++j)
        if ((i / inner) % p.dM != (j / inner) % p.dM) off = std::max(off, std::abs(rho(i, j)));
    if (off > 1e-9) throw validation_error("encoder output is not diagonal on M");
  }
}

// ------------------------------------------------------------------ run

struct ProtocolReport {
  double error = 0;  // || D E (Psi_s (x) Phi_E) - Psi_s (x) Phi_F ||_1
  double budget = std::numeric_limits<double>::quiet_NaN();
  RateTuple rates;
  std::vector<std::uint64_t> seeds;
  int branches = 0;
};

inline ProtocolReport run_protocol(const HybridSource &spec, const RedistProtocol &p, bool validate = true) {
  HybridSource s = validated(spec);
  if (validate) validate_protocol(s, p);
  RegisterLayout q({{"A", s.dA}, {"B", s.dB}, {"C", s.dC}, {"R", s.dR}});
  const Names canon{"X", "Y", "Z", "A", "B", "C", "R", "FA", "FB"};
  ProtocolReport run;
  run.rates = p.rates();
  for (auto &e : s.entries) {
    Ket cls(kron_vec(kron_vec(basis_vector(s.dX, e.x), basis_vector(s.dY, e.y)), basis_vector(s.dZ, e.z)),
            RegisterLayout({{"X", s.dX}, {"Y", s.dY}, {"Z", s.dZ}}));
    Ket in = cls.tensor(Ket(e.psi, q)).tensor(Ket(max_entangled(p.dE), RegisterLayout({{"EA", p.dE}, {"EB", p.dE}})));
    Ket target =
        cls.tensor(Ket(e.psi, q)).tensor(Ket(max_entangled(p.dF), RegisterLayout({{"FA", p.dF}, {"FB", p.dF}})));
    std::vector<CVector> vs;
    for (auto &K : p.encoder.kraus) {
      Ket mid = in.apply(K, p.encoder.in.names(), p.encoder.out.registers());
      if (mid.amp.norm() < 1e-14) continue;
      for (auto &L : p.decoder.kraus) {
        Ket o = mid.apply(L, p.decoder.in.names(), p.decoder.out.registers());
        if (o.amp.norm() < 1e-14) continue;
        vs.push_back(o.reordered(canon).amp);
      }
    }
    run.branches += int(vs.size());
    // || sum v v^dag - t t^dag ||_1 through the Gram matrix of [v..., t]
    const long n = long(vs.size()) + 1;
    CMatrix Vm(target.amp.size(), n);
    for (size_t k = 0; k < vs.size(); ++k) Vm.col(k) = vs[k];
    Vm.col(n - 1) = target.reordered(canon).amp;
    CMatrix G = Vm.adjoint() * Vm;
    CMatrix Gh = sqrtm_psd(0.5 * (G + G.adjoint()));
    CMatrix D = CMatrix::Identity(n, n);
    D(n - 1, n - 1) = -1;
    run.error += e.p * trace_norm(Gh * D * Gh);
  }
  return run;
}

// ----------------------------------------------------------- simple ones

// (c, q, e, e0) = (log dZ, log dC, 0, 0)
inline RedistProtocol identity_protocol(const HybridSource &spec) {
  using namespace detail;
  HybridSource s = validated(spec);
  RedistProtocol p;
  p.name = "identity";
  p.dQ = s.dC;
  p.dM = s.dZ;
  p.encoder.in = enc_in(s, 1);
  p.encoder.out = enc_out(s, s.dC, s.dZ, 1);
  for (int z = 0; z < s.dZ; ++z)
    p.encoder.kraus.push_back(kraus_from(p.encoder.in, p.encoder.out, [&](const Ket &k) {
      Ket r = k.apply(projector(basis_vector(s.dZ, z)), {"Z"}, {{"Z", s.dZ}});
      return rename(rename(rename(r, "Z", "M"), "C", "Q"), "EA", "FA");
    }));
  p.decoder.in = dec_in(s, s.dC, s.dZ, 1);
  p.decoder.out = dec_out(s, 1);
  p.decoder.kraus.push_back(kraus_from(p.decoder.in, p.decoder.out, [&](const Ket &k) {
    return rename(rename(rename(k, "M", "Z"), "Q", "C"), "EB", "FB");
  }));
  return p;
}

// decoder discards Q M EB and prepares xi on C Z FB
inline RedistProtocol trace_and_replace(const RedistProtocol &base, const HybridSource &spec, const CVector &xi) {
  using namespace detail;
  HybridSource s = validated(spec);
  RedistProtocol p = base;
  p.name = base.name + "+trace-replace";
  const long dout = long(s.dC) * s.dZ * p.dF;
  if (xi.size() != dout) throw shape_error("trace_and_replace: xi must live on C Z FB");
  RegisterLayout xl({{"C", s.dC}, {"Z", s.dZ}, {"FB", p.dF}});
  const long dd = long(p.dQ) * p.dM * p.dE;
  p.decoder.kraus.clear();
  for (long k = 0; k < dd; ++k)
    p.decoder.kraus.push_back(kraus_from(p.decoder.in, p.decoder.out, [&](const Ket &in) {
      Ket r = in.apply(basis_vector(int(dd), int(k)).adjoint(), {"Q", "M", "EB"}, {});
      return r.tensor(Ket(xi, xl));
    }));
  return p;
}

// decoder followed by exp(-i theta H) on C
inline RedistProtocol with_output_rotation(const RedistProtocol &base, const CMatrix &H, double theta) {
  RedistProtocol p = base;
  p.name = base.name + "+rotated";
  const int dC = int(H.rows());
  auto e = hermitian_eig(0.5 * (H + H.adjoint()));
  RVector l = e.eigenvalues;
  CMatrix R = e.eigenvectors *
              l.unaryExpr([&](double v) { return std::polar(1.0, -theta * v); }).asDiagonal() *
              e.eigenvectors.adjoint();
  RegisterLayout out = p.decoder.out;
  for (auto &L : p.decoder.kraus) {
    const long rest = out.total_dim() / (out.reg("B").dim * out.reg("Y").dim * dC);
    const long left = out.reg("B").dim * out.reg("Y").dim;
    L = detail::kron(detail::kron(CMatrix::Identity(left, left), R), CMatrix::Identity(rest, rest)) * L;
  }
  return p;
}

// extra catalytic ebits that pass straight through
inline RedistProtocol with_catalyst(const RedistProtocol &base, const HybridSource &spec, int k) {
  if (k < 0) throw domain_error("with_catalyst: k must be >= 0");
  HybridSource s = validated(spec);
  const int t = 1 << k;
  RedistProtocol p = base;
  p.name = base.name + "+catalyst";
  p.dE *= t;
  p.dF *= t;
  p.encoder.in = detail::enc_in(s, p.dE);
  p.encoder.out = detail::enc_out(s, p.dQ, p.dM, p.dF);
  p.decoder.in = detail::dec_in(s, p.dQ, p.dM, p.dE);
  p.decoder.out = detail::dec_out(s, p.dF);
  CMatrix I = CMatrix::Identity(t, t);
  for (auto &K : p.encoder.kraus) K = detail::kron(K, I);
  for (auto &L : p.decoder.kraus) L = detail::kron(L, I);
  return p;
}

// k qubits of Q sent by teleportation: (c + 2k, q - k, e + k, e0)
inline RedistProtocol teleport_qubits(const RedistProtocol &base, const HybridSource &spec, int k) {
  using namespace detail;
  HybridSource s = validated(spec);
  const int t = 1 << k;
  if (k < 0 || base.dQ % t != 0) throw domain_error("teleport_qubits: Q must contain k qubits");
  RedistProtocol p;
  p.name = base.name + "+teleport";
  p.dQ = base.dQ / t;
  p.dM = base.dM * t * t;
  p.dE = base.dE * t;
  p.dF = base.dF;
  p.encoder.in = enc_in(s, p.dE);
  p.encoder.out = enc_out(s, p.dQ, p.dM, p.dF);
  p.decoder.in = dec_in(s, p.dQ, p.dM, p.dE);
  p.decoder.out = dec_out(s, p.dF);
  for (auto &K : base.encoder.kraus)
    for (int a = 0; a < t; ++a)
      for (int b = 0; b < t; ++b)
        p.encoder.kraus.push_back(kraus_from(p.encoder.in, p.encoder.out, [&](const Ket &in) {
          Ket r = split(in, "EA", {{"EAo", base.dE}, {"TA", t}});
          r = rename(r, "EAo", "EA");
          r = r.apply(K, base.encoder.in.names(), base.encoder.out.registers());
          r = split(r, "Q", {{"Qk", p.dQ}, {"Qt", t}});
          r = r.apply(bell_bra(t, a, b), {"Qt", "TA"}, {});
          r = with(r, {"M2", t * t}, a * t + b);
          r = merge(r, {"M", "M2"}, {"M", p.dM});
          return rename(r, "Qk", "Q");
        }));
  for (auto &L : base.decoder.kraus)
    for (int a = 0; a < t; ++a)
      for (int b = 0; b < t; ++b)
        p.decoder.kraus.push_back(kraus_from(p.decoder.in, p.decoder.out, [&](const Ket &in) {
          Ket r = split(in, "M", {{"Mo", base.dM}, {"M2", t * t}});
          r = r.apply(basis_vector(t * t, a * t + b).adjoint(), {"M2"}, {});
          r = split(r, "EB", {{"EBo", base.dE}, {"TB", t}});
          r = r.apply(weyl(t, a, b), {"TB"}, {{"Qt", t}});
          r = rename(rename(r, "Q", "Qk"), "Mo", "M");
          r = merge(r, {"Qk", "Qt"}, {"Q", base.dQ});
          r = rename(r, "EBo", "EB");
          return r.apply(L, base.decoder.in.names(), base.decoder.out.registers());
        }));
  return p;
}

// 2k classical bits of M sent by dense coding: (c - 2k, q + k, e + k, e0)
inline RedistProtocol dense_code_bits(const RedistProtocol &base, const HybridSource &spec, int k) {
  using namespace detail;
  HybridSource s = validated(spec);
  const int t = 1 << k;
  if (k < 0 || base.dM % (t * t) != 0) throw domain_error("dense_code_bits: M must contain 2k bits");
  RedistProtocol p;
  p.name = base.name + "+dense-coding";
  p.dQ = base.dQ * t;
  p.dM = base.dM / (t * t);
  p.dE = base.dE * t;
  p.dF = base.dF;
  p.encoder.in = enc_in(s, p.dE);
  p.encoder.out = enc_out(s, p.dQ, p.dM, p.dF);
  p.decoder.in = dec_in(s, p.dQ, p.dM, p.dE);
  p.decoder.out = dec_out(s, p.dF);
  for (auto &K : base.encoder.kraus)
    for (int a = 0; a < t; ++a)
      for (int b = 0; b < t; ++b)
        p.encoder.kraus.push_back(kraus_from(p.encoder.in, p.encoder.out, [&](const Ket &in) {
          Ket r = split(in, "EA", {{"EAo", base.dE}, {"DA", t}});
          r = rename(r, "EAo", "EA");
          r = r.apply(K, base.encoder.in.names(), base.encoder.out.registers());
          r = split(r, "M", {{"Mk", p.dM}, {"Md", t * t}});
          r = r.apply(basis_vector(t * t, a * t + b).adjoint(), {"Md"}, {});
          r = r.apply(weyl(t, a, b), {"DA"}, {{"Qd", t}});
          r = rename(r, "Mk", "M");
          r = rename(r, "Q", "Qo");
          return merge(r, {"Qo", "Qd"}, {"Q", p.dQ});
        }));
  for (auto &L : base.decoder.kraus)
    for (int a = 0; a < t; ++a)
      for (int b = 0; b < t; ++b)
        p.decoder.kraus.push_back(kraus_from(p.decoder.in, p.decoder.out, [&](const Ket &in) {
          Ket r = split(in, "Q", {{"Qo", base.dQ}, {"Qd", t}});
          r = split(r, "EB", {{"EBo", base.dE}, {"DB", t}});
          r = r.apply(bell_bra(t, a, b), {"Qd", "DB"}, {});
          r = with(r, {"Md", t * t}, a * t + b);
          r = rename(r, "M", "Mk");
          r = merge(r, {"Mk", "Md"}, {"M", base.dM});
          r = rename(rename(r, "Qo", "Q"), "EBo", "EB");
          return r.apply(L, base.decoder.in.names(), base.decoder.out.registers());
        }));
  return p;
}

// protocol-level counterpart of tpdc_extend for integral lambda, mu, e0 step;
// dense coding goes first
inline RedistProtocol tpdc_protocol(const RedistProtocol &base, const HybridSource &spec, int lambda, int mu,
                                    int extra_e0 = 0) {
  if (lambda < 0 || mu < 0 || extra_e0 < 0) throw domain_error("tpdc_protocol: negative step");
  RedistProtocol p = base;
  if (mu > 0) p = dense_code_bits(p, spec, mu);
  if (lambda > 0) p = teleport_qubits(p, spec, lambda);
  if (extra_e0 > 0) p = with_catalyst(p, spec, extra_e0);
  return p;
}

// ----------------------------------------------------------- construction

struct DimensionPlan {
  int dZL = 1, dZR = 1;           // Z = Z_L Z_R, Z_R carries M
  int dC1 = 1, dC2 = 1, dC3 = 1;  // C = C_1 C_2 C_3: E_B, F_A, Q
  RateTuple rates;
};

inline DimensionPlan dimension_plan(const HybridSource &spec, const RateTuple &t) {
  HybridSource s = validated(spec);
  validate_rates(t);
  auto integral = [](double v) { return std::abs(v - std::round(v)) <= 1e-9; };
  const double ee = t.e + t.e0;
  auto suggest = [&]() {
    const double lc = std::log2(double(s.dC));
    const double c = std::min(std::ceil(t.c - 1e-9), std::log2(double(s.dZ)));
    const double q = std::ceil(t.q - 1e-9), e0 = std::ceil(t.e0 - 1e-9);
    char buf[160];
    std::snprintf(buf, sizeof buf, " (nearest integral tuple: c=%g q=%g e=%g e0=%g)", c, q, lc - q - 2 * e0, e0);
    return std::string(buf);
  };
  if (!integral(t.c) || !integral(t.q) || !integral(t.e0) || !integral(ee))
    throw plan_error("rates must give integral qubit counts" + suggest());
  if (!detail::is_power_of_two(s.dZ) || !detail::is_power_of_two(s.dC))
    throw plan_error("construction needs d_Z and d_C to be powers of two");
  DimensionPlan p;
  p.rates = t;
  const int c = int(std::lround(t.c)), q = int(std::lround(t.q)), e0 = int(std::lround(t.e0)),
            e1 = int(std::lround(ee));
  if (e1 < 0) throw plan_error("e + e0 must be >= 0" + suggest());
  if ((1L << c) > s.dZ) throw plan_error("c exceeds log d_Z" + suggest());
  if (q + e0 + e1 != detail::ilog2(s.dC))
    throw plan_error("need q + e + 2 e0 = log d_C" + suggest());
  p.dZR = 1 << c;
  p.dZL = s.dZ / p.dZR;
  p.dC1 = 1 << e1;
  p.dC2 = 1 << e0;
  p.dC3 = 1 << q;
  return p;
}

// Psi_sigma: sum sqrt(p) |x y>|sigma(z)>^{ZL ZR} |z>^{Z''} |psi> |x y z>^T
inline Ket build_psi_sigma(const HybridSource &s, const DimensionPlan &plan, const Permutation &g) {
  RegisterLayout L({{"X", s.dX},     {"Y", s.dY},   {"ZL", plan.dZL}, {"ZR", plan.dZR}, {"Z''", s.dZ},
                    {"A", s.dA},     {"B", s.dB},   {"C''", s.dC},    {"R", s.dR},      {"X'", s.dX},
                    {"Y'", s.dY},    {"Z'", s.dZ}});
  CVector v = CVector::Zero(L.total_dim());
  for (auto &e : s.entries) {
    const int sz = g.sigma.at(e.z);
    CVector head = kron_vec(kron_vec(basis_vector(s.dX, e.x), basis_vector(s.dY, e.y)), basis_vector(s.dZ, sz));
    head = kron_vec(head, basis_vector(s.dZ, e.z));
    CVector tail = kron_vec(kron_vec(basis_vector(s.dX, e.x), basis_vector(s.dY, e.y)), basis_vector(s.dZ, e.z));
    v += std::sqrt(e.p) * kron_vec(kron_vec(head, e.psi), tail);
  }
  return Ket(v, L);
}

// G_sigma U Psi with Z split into ZL ZR and C into C1 C2 C3
inline Ket build_gu_psi(const HybridSource &s, const DimensionPlan &plan, const Permutation &g,
                        const BlockUnitary &u) {
  RegisterLayout L({{"X", s.dX}, {"Y", s.dY}, {"ZL", plan.dZL}, {"ZR", plan.dZR}, {"A", s.dA}, {"B", s.dB},
                    {"C1", plan.dC1}, {"C2", plan.dC2}, {"C3", plan.dC3}, {"R", s.dR}, {"X'", s.dX},
                    {"Y'", s.dY}, {"Z'", s.dZ}});
  RegisterLayout q({{"A", s.dA}, {"B", s.dB}, {"C", s.dC}, {"R", s.dR}});
  CVector v = CVector::Zero(L.total_dim());
  for (auto &e : s.entries) {
    Ket psi(e.psi, q);
    Ket rot = psi.apply(u.blocks.at(e.z), {"C"}, {{"C", s.dC}}).reordered({"A", "B", "C", "R"});
    CVector head = kron_vec(kron_vec(basis_vector(s.dX, e.x), basis_vector(s.dY, e.y)),
                            basis_vector(s.dZ, g.sigma.at(e.z)));
    CVector tail = kron_vec(kron_vec(basis_vector(s.dX, e.x), basis_vector(s.dY, e.y)), basis_vector(s.dZ, e.z));
    v += std::sqrt(e.p) * kron_vec(kron_vec(head, rot.amp), tail);
  }
  return Ket(v, L);
}

struct Purifications {
  Ket psi1;  // Psi_sigma (x) phi_1^{A1 C1}
  Ket psi2;  // Psi_sigma (x) phi_2^{B2 C2}
  Ket gu;    // G_sigma U Psi
};

inline Purifications build_purifications(const HybridSource &spec, const DimensionPlan &plan, const Permutation &g,
                                         const BlockUnitary &u) {
  HybridSource s = validated(spec);
  Ket ps = build_psi_sigma(s, plan, g);
  Purifications r;
  r.psi1 = ps.tensor(Ket(max_entangled(plan.dC1), RegisterLayout({{"A1", plan.dC1}, {"C1", plan.dC1}})));
  r.psi2 = ps.tensor(Ket(max_entangled(plan.dC2), RegisterLayout({{"B2", plan.dC2}, {"C2", plan.dC2}})));
  r.gu = build_gu_psi(s, plan, g, u);
  return r;
}

struct EncoderDecoder {
  RedistProtocol protocol;
  std::vector<double> enc_overlap, dec_overlap;  // per z_R block
  double completion_weight = 0;                   // trace deficit filled by the completion Kraus
};

// Uhlmann isometries controlled on Z_R, assembled into channels
inline EncoderDecoder derive_encoder_decoder(const HybridSource &spec, const DimensionPlan &plan, const Permutation &g,
                                             const BlockUnitary &u) {
  using namespace detail;
  HybridSource s = validated(spec);
  Purifications pur = build_purifications(s, plan, g, u);
  EncoderDecoder out;
  RedistProtocol &p = out.protocol;
  p.name = "constructed";
  p.dQ = plan.dC3;
  p.dM = plan.dZR;
  p.dE = plan.dC1;
  p.dF = plan.dC2;
  p.encoder.in = enc_in(s, p.dE);
  p.encoder.out = enc_out(s, p.dQ, p.dM, p.dF);
  p.decoder.in = dec_in(s, p.dQ, p.dM, p.dE);
  p.decoder.out = dec_out(s, p.dF);

  const Names enc_shared{"ZL", "C1", "B", "Y", "R", "X'", "Y'", "Z'"};
  const Names dec_shared{"ZL", "C2", "A", "X", "R", "X'", "Y'", "Z'"};
  auto with_order = [](const Ket &k, const Names &shared, const Names &comp) {
    Names o = shared;
    o.insert(o.end(), comp.begin(), comp.end());
    return k.reordered(o);
  };
  std::vector<CMatrix> V(plan.dZR), W(plan.dZR);
  for (int m = 0; m < plan.dZR; ++m) {
    Ket a = with_order(pur.psi1.fixed("ZR", m), enc_shared, {"A", "X", "C''", "Z''", "A1"});
    Ket b = with_order(pur.gu.fixed("ZR", m), enc_shared, {"A", "X", "C3", "C2"});
    UhlmannResult ue = uhlmann_isometry(a, b, enc_shared, true);
    V[m] = ue.map;  // (A X C3 C2) x (A X C'' Z'' A1)
    out.enc_overlap.push_back(ue.overlap);
    Ket b2 = with_order(pur.gu.fixed("ZR", m), dec_shared, {"B", "Y", "C3", "C1"});
    Ket a2 = with_order(pur.psi2.fixed("ZR", m), dec_shared, {"B", "Y", "C''", "Z''", "B2"});
    UhlmannResult ud = uhlmann_isometry(b2, a2, dec_shared, true);
    W[m] = ud.map;  // (B Y C'' Z'' B2) x (B Y C3 C1)
    out.dec_overlap.push_back(ud.overlap);
  }
  // encoder: dephase Z'', route to V_{sigma(z)_R}, emit M = sigma(z)_R
  const long dAX = long(s.dA) * s.dX;
  CMatrix S = CMatrix::Zero(p.encoder.in.total_dim(), p.encoder.in.total_dim());
  for (int z = 0; z < s.dZ; ++z) {
    const int m = g.sigma.at(z) % plan.dZR;
    CMatrix Pz = hsrd::kron(hsrd::kron(CMatrix::Identity(dAX * s.dC, dAX * s.dC), projector(basis_vector(s.dZ, z))),
                      CMatrix::Identity(plan.dC1, plan.dC1));
    CMatrix emb = hsrd::kron(CMatrix::Identity(dAX * plan.dC3, dAX * plan.dC3),
                       hsrd::kron(basis_vector(plan.dZR, m), CMatrix::Identity(plan.dC2, plan.dC2)));
    CMatrix K = emb * V[m] * Pz;
    S += K.adjoint() * K;
    p.encoder.kraus.push_back(K);
  }
  // completion: remaining weight goes to a fixed output with M = 0
  CMatrix defect = CMatrix::Identity(S.rows(), S.cols()) - S;
  auto de = hermitian_eig(0.5 * (defect + defect.adjoint()));
  for (long k = 0; k < de.eigenvalues.size(); ++k) {
    if (de.eigenvalues(k) <= 1e-12) continue;
    out.completion_weight += de.eigenvalues(k);
    CMatrix K = basis_vector(int(p.encoder.out.total_dim()), 0) * std::sqrt(de.eigenvalues(k)) *
                de.eigenvectors.col(k).adjoint();
    p.encoder.kraus.push_back(K);
  }
  // decoder: read M, apply W_m, drop Z_R
  const long dBY = long(s.dB) * s.dY;
  for (int m = 0; m < plan.dZR; ++m) {
    CMatrix sel = hsrd::kron(CMatrix::Identity(dBY * plan.dC3, dBY * plan.dC3),
                       hsrd::kron(basis_vector(plan.dZR, m).adjoint(), CMatrix::Identity(plan.dC1, plan.dC1)));
    p.decoder.kraus.push_back(W[m] * sel);
  }
  return out;
}

// decoupling view of the purified source: Z, C, Z' plus the side registers
inline LabeledState decoupling_source_state(const HybridSource &s) {
  Ket k = build_purified_source(s);
  return {projector(k.amp), k.layout};
}

struct ConstructedProtocol {
  DimensionPlan plan;
  double eps = 0, delta = 0;
  double predicted_error = 0;  // 4 sqrt(12 eps + 6 delta)
  BiDecouplingResult pair;
  EncoderDecoder ed;
  ProtocolReport report;
};

// smallest delta meeting every row of the single-smoothing proposition at t
inline double auto_delta(SourceEvaluator &ev, const RateTuple &t, double eps) {
  const HybridSource &s = ev.source();
  double ld = -inf;  // log2 delta
  auto need = [&](double lhs, double H, double extra) { ld = std::max(ld, (H - lhs + extra) / 2); };
  if (s.dC == 1) {
    const double H = std::max(ev.hmax(regs("Z"), regs("AX"), eps), ev.hmax(regs("Z"), regs("BY"), eps));
    need(t.c, H, 1);
  } else {
    need(t.c + t.q - t.e, ev.hmax(regs("CZ"), regs("AX"), eps), 1);
    need(t.q - t.e, ev.hmax(regs("C"), regs("AXYZ"), eps), 0);
    need(t.c + t.q + t.e, ev.hmax(regs("CZ"), regs("BY"), eps), 1);
    need(t.q + t.e, ev.hmax(regs("C"), regs("BXYZ"), eps), 0);
  }
  return std::pow(2.0, ld);
}

// delta <= 0 picks the smallest delta the proposition allows at t
inline ConstructedProtocol construct_protocol(const HybridSource &spec, const RateTuple &t, double eps,
                                              std::uint64_t seed, double delta = 0, int max_tries = 100) {
  HybridSource s = validated(spec);
  if (!(eps >= 0 && eps < 1)) throw domain_error("construct_protocol: eps must lie in [0, 1)");
  ConstructedProtocol cp;
  cp.plan = dimension_plan(s, t);
  cp.eps = eps;
  SourceEvaluator ev(s);
  cp.delta = delta > 0 ? delta : auto_delta(ev, t, eps);
  cp.predicted_error = 4 * std::sqrt(12 * eps + 6 * cp.delta);
  BiDecouplingConfig cfg;
  cfg.JL = cp.plan.dZL;
  cfg.JR = cp.plan.dZR;
  cfg.dC1 = cp.plan.dC1;
  cfg.dC2 = cp.plan.dC2;
  cfg.dC3 = cp.plan.dC3;
  cfg.S1 = {"A", "X"};
  cfg.S2 = {"B", "Y"};
  cfg.S3 = {"R", "X'", "Y'"};
  cfg.eps = eps;
  cfg.delta = cp.delta;
  cfg.force = true;
  Rng rng(seed);
  cp.pair = find_bidecoupling_pair(decoupling_source_state(s), cfg, max_tries, rng);
  if (!cp.pair.found) {
    cp.pair.sigma = sample_permutation(s.dZ, rng);
    cp.pair.U = sample_block_unitary(s.dZ, s.dC, rng);
  }
  cp.ed = derive_encoder_decoder(s, cp.plan, cp.pair.sigma, cp.pair.U);
  cp.report = run_protocol(s, cp.ed.protocol);
  cp.report.budget = cp.predicted_error;
  cp.report.seeds = {seed};
  return cp;
}

// ----------------------------------------------------------- projection

struct ProjectedSource {
  HybridSource source;  // C restricted to the kept eigenvectors, renormalized
  double weight = 1;    // Tr Pi Psi_s Pi
  CMatrix basis;        // d_C x k kept eigenvectors
  double distance = 0;  // purified distance to the original (subnormalized projection)
};

// projection of C onto the top 2^{Hmax'} eigenvectors at smoothing eps^2/8
inline ProjectedSource project_source(const HybridSource &spec, double eps) {
  HybridSource s = validated(spec);
  if (!(eps > 0 && eps < 1)) throw domain_error("project_source: eps must lie in (0, 1)");
  LabeledState rc = source_marginal(s, {"C"});
  const double hp = hmax_prime_of(rc.matrix, eps * eps / 8);
  const int k = int(std::lround(std::pow(2.0, hp)));
  auto e = hermitian_eig(rc.matrix);
  ProjectedSource r;
  r.basis = e.eigenvectors.leftCols(k);
  RegisterLayout q({{"A", s.dA}, {"B", s.dB}, {"C", s.dC}, {"R", s.dR}});
  HybridSource n = s;
  n.dC = k;
  n.entries.clear();
  double w = 0;
  std::vector<SourceEntry> raw;
  for (auto &en : s.entries) {
    Ket psi(en.psi, q);
    Ket pr = psi.apply(r.basis.adjoint(), {"C"}, {{"C", k}}).reordered({"A", "B", "C", "R"});
    const double nn = pr.amp.squaredNorm();
    if (nn <= 1e-300) continue;
    SourceEntry ne = en;
    ne.p = en.p * nn;
    ne.psi = pr.amp / std::sqrt(nn);
    w += ne.p;
    raw.push_back(ne);
  }
  for (auto &ne : raw) ne.p /= w;
  n.entries = raw;
  r.source = n;
  r.weight = w;
  // distance on the full space: embed back and compare the subnormalized state
  HybridSource emb = s;
  emb.entries.clear();
  CMatrix full = build_source(s).matrix;
  CMatrix proj = CMatrix::Zero(full.rows(), full.cols());
  for (auto &ne : raw) {
    Ket back = Ket(ne.psi, RegisterLayout({{"A", s.dA}, {"B", s.dB}, {"C", k}, {"R", s.dR}}))
                   .apply(r.basis, {"C"}, {{"C", s.dC}})
                   .reordered({"A", "B", "C", "R"});
    SourceEntry be = ne;
    be.psi = back.amp;
    be.p = ne.p * w;
    emb.entries.push_back(be);
  }
  proj = source_marginal(emb, source_register_names()).matrix;
  r.distance = purified_distance(full, proj);
  return r;
}

// --------------------------------------------------------------- audit

struct ConverseAudit {
  RateTuple rates;
  double delta = 0;  // measured error
  BoundReport report;
  std::vector<RowCheck> checks;
  bool satisfied = true;
  bool vacuous = false;  // delta >= 1: the converse says nothing
};

inline ConverseAudit audit_converse(SourceEvaluator &ev, const RedistProtocol &p, double eps) {
  ConverseAudit a;
  a.rates = p.rates();
  a.delta = run_protocol(ev.source(), p).error;
  if (a.delta >= 1) {
    a.vacuous = true;
    return a;
  }
  a.report = converse_bound(ev, eps, std::max(0.0, a.delta));
  a.checks = check_tuple(a.report, a.rates, 1e-6);
  a.satisfied = all_satisfied(a.checks);
  return a;
}

}  // namespace hsrd
