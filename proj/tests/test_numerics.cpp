#include <gtest/gtest.h>

#include "battery.hpp"

using namespace hsrd;
using namespace hsrd::testing;

namespace {

CMatrix diag2(double a, double b) {
  CMatrix m = CMatrix::Zero(2, 2);
  m(0, 0) = a;
  m(1, 1) = b;
  return m;
}

RVector sorted_desc(std::vector<double> v) {
  std::sort(v.begin(), v.end(), std::greater<>());
  return Eigen::Map<RVector>(v.data(), long(v.size()));
}

// s1/s2 match the python oracle
LabeledState oracle_s1() {
  CVector a(4), b(4);
  a << 1, 0.5, cplx(0, 0.2), 0.7;
  b << 0, 1, 1, -0.3;
  a.normalize();
  b.normalize();
  return make_state(0.7 * projector(a) + 0.3 * projector(b), {{"A", 2}, {"B", 2}});
}

LabeledState oracle_s2() {
  CVector a(6), b(6), c(6);
  a << 1, 0, 0.3, 0, cplx(0, 0.4), 0.5;
  b << 0.2, 1, 0, -0.5, 0, 0.1;
  c << 0, 0, 1, cplx(0, 1), 0, 0;
  a.normalize();
  b.normalize();
  c.normalize();
  return make_state(0.5 * projector(a) + 0.3 * projector(b) + 0.2 * projector(c), {{"A", 2}, {"B", 3}});
}

}  // namespace

// ---------------------------------------------------------------- numkit

TEST(Kron, IdentityAndProjector) {
  EXPECT_TRUE(kron(CMatrix::Identity(2, 2), CMatrix::Identity(2, 2)).isApprox(CMatrix::Identity(4, 4)));
  CMatrix p = kron(diag2(1, 0), diag2(0, 1));
  CMatrix want = CMatrix::Zero(4, 4);
  want(1, 1) = 1;
  EXPECT_TRUE(p.isApprox(want));
}

TEST(Kron, EigenvaluesMultiply) {
  Rng rng(11);
  for (int t = 0; t < 20; ++t) {
    CMatrix a = random_hermitian(2, rng), b = random_hermitian(2, rng);
    auto ea = eigenvalues(a), eb = eigenvalues(b);
    std::vector<double> prod;
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j) prod.push_back(ea(i) * eb(j));
    EXPECT_LT((eigenvalues(kron(a, b)) - sorted_desc(prod)).norm(), 1e-10);
  }
}

TEST(Kron, MixedProduct) {
  Rng rng(12);
  CMatrix a = ginibre(2, 2, rng), b = ginibre(3, 3, rng), c = ginibre(2, 2, rng), d = ginibre(3, 3, rng);
  EXPECT_LT((kron(a, b) * kron(c, d) - kron(a * c, b * d)).norm(), 1e-12);
}

TEST(Kron, CapExceeded) {
  EXPECT_THROW(kron(CMatrix::Identity(16, 16), CMatrix::Identity(8, 8)), dimension_error);
}

TEST(PartialTrace, BellMarginal) {
  RegisterLayout l({{"A", 2}, {"B", 2}});
  EXPECT_TRUE(partial_trace(phi2(), l, {"A"}).isApprox(0.5 * CMatrix::Identity(2, 2)));
}

TEST(PartialTrace, ProductAndComposition) {
  Rng rng(13);
  CMatrix r = sample_density(2, 2, rng), s = sample_density(3, 3, rng);
  RegisterLayout l({{"A", 2}, {"B", 3}});
  EXPECT_LT((partial_trace(kron(r, s), l, {"A"}) - r).norm(), 1e-12);

  auto st = random_mixed({{"A", 2}, {"B", 3}, {"C", 2}}, 3, rng);
  CMatrix direct = partial_trace(st.matrix, st.layout, {"A"});
  auto ab = st.marginal({"A", "B"});
  CMatrix composed = partial_trace(ab.matrix, ab.layout, {"A"});
  EXPECT_LT((direct - composed).norm(), 1e-12);
  EXPECT_NEAR(direct.trace().real(), 1.0, 1e-12);
  EXPECT_GT(eigenvalues(direct).minCoeff(), -1e-12);
}

TEST(PartialTrace, UnknownName) {
  RegisterLayout l({{"A", 2}, {"B", 2}});
  EXPECT_THROW(partial_trace(phi2(), l, {"Q"}), layout_error);
}

TEST(HermitianEig, Examples) {
  auto e = hermitian_eig(diag2(0.1, 0.9));
  EXPECT_NEAR(e.eigenvalues(0), 0.9, 1e-14);
  EXPECT_NEAR(e.eigenvalues(1), 0.1, 1e-14);
  CMatrix x(2, 2);
  x << 0, 1, 1, 0;
  auto ex = eigenvalues(x);
  EXPECT_NEAR(ex(0), 1, 1e-14);
  EXPECT_NEAR(ex(1), -1, 1e-14);
}

TEST(HermitianEig, RandomReconstruction) {
  Rng rng(14);
  for (int d : {1, 3, 8, 17}) {
    CMatrix m = random_hermitian(d, rng);
    auto e = hermitian_eig(m);
    EXPECT_NEAR(e.eigenvalues.sum(), m.trace().real(), 1e-10);
    CMatrix V = e.eigenvectors;
    EXPECT_LT((V * e.eigenvalues.cast<cplx>().asDiagonal() * V.adjoint() - m).norm(), 1e-10 * m.norm());
    EXPECT_LT((V.adjoint() * V - CMatrix::Identity(d, d)).norm(), 1e-10);
    for (int k = 1; k < d; ++k) EXPECT_GE(e.eigenvalues(k - 1), e.eigenvalues(k));
  }
}

TEST(HermitianEig, RejectsNonHermitian) {
  CMatrix m(2, 2);
  m << 0, 1, 0, 0;
  EXPECT_THROW(hermitian_eig(m), shape_error);
}

TEST(TraceNorm, Examples) {
  EXPECT_NEAR(trace_norm(diag2(1, -1)), 2, 1e-14);
  Rng rng(15);
  EXPECT_NEAR(trace_norm(sample_density(5, 2, rng)), 1, 1e-12);
}

TEST(TraceNorm, SingularValueOracle) {
  Rng rng(16);
  for (int t = 0; t < 20; ++t) {
    CMatrix m = ginibre(4, 4, rng);
    Eigen::BDCSVD<CMatrix> svd(m);
    EXPECT_NEAR(trace_norm(m), svd.singularValues().sum(), 1e-10);
    EXPECT_GE(trace_norm(m), std::abs(m.trace()) - 1e-12);
  }
}

TEST(Metrics, Examples) {
  Rng rng(17);
  CMatrix r = sample_density(3, 3, rng);
  EXPECT_NEAR(metrics(r, r).purified_distance, 0, 1e-6);
  EXPECT_NEAR(metrics(diag2(1, 0), diag2(0, 1)).purified_distance, 1, 1e-12);
  EXPECT_THROW(metrics(diag2(1.1, -0.1), diag2(1, 0)), not_a_state_error);
}

TEST(Metrics, SandwichOnRandomSubnormalized) {
  Rng rng(18);
  for (int t = 0; t < 500; ++t) {
    const int d = 2 + int(rng.below(3));
    CMatrix r = rng.uniform() * sample_density(d, 1 + int(rng.below(d)), rng);
    CMatrix s = rng.uniform() * sample_density(d, 1 + int(rng.below(d)), rng);
    auto m = metrics(r, s);
    const double tn = trace_norm(r - s);
    EXPECT_LE(0.5 * tn, m.purified_distance + 1e-9);
    EXPECT_LE(m.purified_distance, std::sqrt(2 * tn) + 1e-9);
    EXPECT_NEAR(m.purified_distance, std::sqrt(1 - m.generalized_fidelity * m.generalized_fidelity), 1e-12);
  }
}

TEST(Metrics, GentleMeasurement) {
  Rng rng(19);
  for (int t = 0; t < 100; ++t) {
    CMatrix r = sample_density(3, 3, rng);
    // 0 <= L <= I
    CMatrix U = sample_haar_unitary(3, rng);
    RVector w(3);
    for (int k = 0; k < 3; ++k) w(k) = 0.7 + 0.3 * rng.uniform();
    CMatrix L = U * w.cast<cplx>().asDiagonal() * U.adjoint();
    const double e = 1 - (L * r).trace().real();
    ASSERT_GE(e, 0);
    CMatrix sq = sqrtm_psd(L);
    CMatrix post = sq * r * sq;
    EXPECT_LE(trace_norm(r - post), 2 * std::sqrt(e) + 1e-9);
    EXPECT_LE(purified_distance(r, post), std::sqrt(2 * e) + 1e-9);
  }
}

TEST(Purify, Examples) {
  auto p = purify(diag2(1, 0));
  CVector want = CVector::Zero(4);
  want(0) = 1;
  EXPECT_NEAR(std::abs(p.psi.dot(want)), 1, 1e-12);

  auto q = purify(0.5 * CMatrix::Identity(2, 2));
  RegisterLayout l({{"S", 2}, {"M", 2}});
  EXPECT_LT((partial_trace(projector(q.psi), l, {"S"}) - 0.5 * CMatrix::Identity(2, 2)).norm(), 1e-12);
  EXPECT_LT((partial_trace(projector(q.psi), l, {"M"}) - 0.5 * CMatrix::Identity(2, 2)).norm(), 1e-12);
}

TEST(Purify, RoundTrip) {
  Rng rng(20);
  CMatrix r2 = sample_density(3, 2, rng);
  auto p2 = purify(r2);
  EXPECT_LT((partial_trace(projector(p2.psi), RegisterLayout({{"S", 3}, {"M", 3}}), {"S"}) - r2).norm(), 1e-10);
  for (int t = 0; t < 100; ++t) {
    const int d = 1 + int(rng.below(5));
    CMatrix r = (0.5 + 0.5 * rng.uniform()) * sample_density(d, 1 + int(rng.below(d)), rng);
    for (bool compact : {false, true}) {
      auto p = purify(r, compact);
      RegisterLayout l({{"S", d}, {"M", p.mirror_dim}});
      EXPECT_LT((partial_trace(projector(p.psi), l, {"S"}) - r).norm(), 1e-10);
    }
  }
}

TEST(Haar, Examples) {
  Rng a(21), b(21);
  CMatrix u1 = sample_haar_unitary(1, a);
  EXPECT_NEAR(std::abs(u1(0, 0)), 1, 1e-12);
  Rng c(22), d(22);
  EXPECT_EQ(sample_haar_unitary(4, c), sample_haar_unitary(4, d));
  EXPECT_THROW(sample_haar_unitary(0, b), dimension_error);
}

TEST(Haar, UnitaryAndFirstMoment) {
  Rng rng(23);
  double m = 0;
  for (int t = 0; t < 2000; ++t) {
    CMatrix u = sample_haar_unitary(4, rng);
    if (t < 50) {
      EXPECT_LT((u.adjoint() * u - CMatrix::Identity(4, 4)).norm(), 1e-12);
    }
    m += std::norm(u(0, 0));
  }
  EXPECT_NEAR(m / 2000, 0.25, 0.02);
}

TEST(Uhlmann, Examples) {
  Rng rng(24);
  CVector v = sample_haar_state(4, rng);
  Ket k(v, RegisterLayout({{"S", 2}, {"E", 2}}));
  EXPECT_NEAR(uhlmann_isometry(k, k, {"S"}).overlap, 1, 1e-10);

  CVector a = CVector::Zero(4), b = max_entangled(2);
  a(0) = 1;
  Ket ka(a, RegisterLayout({{"S", 2}, {"E", 2}})), kb(b, RegisterLayout({{"S", 2}, {"F", 2}}));
  EXPECT_NEAR(uhlmann_isometry(ka, kb, {"S"}).overlap, std::sqrt(0.5), 1e-10);

  Ket kc(sample_haar_state(6, rng), RegisterLayout({{"S", 3}, {"F", 2}}));
  EXPECT_THROW(uhlmann_isometry(ka, kc, {"S"}), layout_error);
}

TEST(Uhlmann, OverlapIsFidelity) {
  Rng rng(25);
  for (int t = 0; t < 100; ++t) {
    const int ds = 2 + int(rng.below(2)), ea = 1 + int(rng.below(3)), eb = ds + int(rng.below(2));
    Ket a(sample_haar_state(ds * ea, rng), RegisterLayout({{"S", ds}, {"E", ea}}));
    Ket b(sample_haar_state(ds * eb, rng), RegisterLayout({{"S", ds}, {"F", eb}}));
    auto u = uhlmann_isometry(a, b, {"S"});
    const double f = fidelity(a.reduced({"S"}), b.reduced({"S"}));
    EXPECT_NEAR(u.overlap, f, 1e-8);
    // apply the map and measure the overlap directly
    Ket va = a.apply(u.map, {"E"}, u.to.registers());
    CVector bv = reorder(b.amp, b.layout, va.layout.names());
    EXPECT_NEAR(std::abs(bv.dot(va.amp)), f, 1e-8);
  }
}

TEST(Philox, KnownAnswers) {
  using B = Philox4x32::block_type;
  EXPECT_EQ(Philox4x32::block({0, 0, 0, 0}, {0, 0}), (B{0x6627e8d5u, 0xe169c58du, 0xbc57ac4cu, 0x9b00dbd8u}));
  EXPECT_EQ(Philox4x32::block({0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu}, {0xffffffffu, 0xffffffffu}),
            (B{0x408f276du, 0x41c83b0eu, 0xa20bc7c6u, 0x6d5451fdu}));
  EXPECT_EQ(Philox4x32::block({0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u}, {0xa4093822u, 0x299f31d0u}),
            (B{0xd16cfe09u, 0x94fdccebu, 0x5001e420u, 0x24126ea1u}));
}

TEST(Philox, NormalMoments) {
  Rng rng(26);
  double s = 0, s2 = 0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    const double x = rng.normal();
    s += x;
    s2 += x * x;
  }
  EXPECT_NEAR(s / n, 0, 0.02);
  EXPECT_NEAR(s2 / n, 1, 0.02);
}

// ------------------------------------------------------------------- sdp

namespace {

void expect_kkt(const SdpSolution &s, double tol) {
  ASSERT_EQ(s.status, SdpStatus::optimal);
  EXPECT_LE(s.gap, tol * std::max(1.0, std::abs(s.value)));
  EXPECT_LE(s.primal_residual, tol);
  EXPECT_LE(s.dual_residual, tol);
}

SdpProblem trace_cover(const CMatrix &rho, int dA, int dB) {
  SdpProblem p;
  const int Y = p.add_hermitian("Y", dB);
  p.add_trace_objective(Y);
  const int b = p.add_block("I(x)Y - rho", dA * dB);
  p.place_kron_identity(b, Y, dA);
  p.add_constant_matrix(b, 0, -rho);
  return p;
}

// max Re Tr X s.t. [[r, X], [X^dag, s]] >= 0
SdpProblem fidelity_program(const CMatrix &r, const CMatrix &s) {
  const int d = int(r.rows());
  SdpProblem p;
  const int X = p.add_general("X", d, d);
  const int b = p.add_block("fid", 2 * d);
  p.add_constant_matrix(b, 0, r);
  p.add_constant_matrix(b, d, s);
  p.place(b, X, 0, d);
  for (int a = 0; a < d; ++a) p.add_objective(p.element(X, a, a)[0].first, -1.0);
  return p;
}

}  // namespace

TEST(Sdp, CoverDensityOperator) {
  Rng rng(30);
  auto s = solve(trace_cover(sample_density(3, 3, rng), 1, 3));
  expect_kkt(s, 1e-7);
  EXPECT_NEAR(s.value, 1, 1e-6);
}

TEST(Sdp, CoverBellState) {
  auto s = solve(trace_cover(phi2(), 2, 2));
  expect_kkt(s, 1e-7);
  EXPECT_NEAR(s.value, 2, 1e-6);
}

TEST(Sdp, ClassicalFidelity) {
  RVector p(3), q(3);
  p << 0.5, 0.3, 0.2;
  q << 0.1, 0.6, 0.3;
  auto s = solve(fidelity_program(p.cast<cplx>().asDiagonal(), q.cast<cplx>().asDiagonal()));
  expect_kkt(s, 1e-7);
  EXPECT_NEAR(-s.value, p.cwiseProduct(q).cwiseSqrt().sum(), 1e-6);
}

TEST(Sdp, FidelityMatchesClosedForm) {
  Rng rng(31);
  for (int t = 0; t < 10; ++t) {
    // full rank: the block LMI has no interior otherwise
    CMatrix r = sample_density(3, 3, rng), q = sample_density(3, 3, rng);
    auto s = solve(fidelity_program(r, q));
    expect_kkt(s, 1e-7);
    EXPECT_NEAR(-s.value, fidelity(r, q), 1e-6);
  }
}

TEST(Sdp, Deterministic) {
  Rng rng(32);
  auto p = trace_cover(sample_density(4, 2, rng), 2, 2);
  auto a = solve(p), b = solve(p);
  EXPECT_NEAR(a.value, b.value, 1e-9);
}

TEST(Sdp, Infeasible) {
  // y >= 1 and y <= 0
  SdpProblem p;
  const int y = p.add_scalar("y");
  const int b0 = p.add_block("lo", 1), b1 = p.add_block("hi", 1);
  p.place(b0, y, 0, 0);
  p.add_constant(b0, 0, 0, -1.0);
  p.place(b1, y, 0, 0, -1.0);
  p.add_objective(y, 1.0);
  EXPECT_EQ(solve(p).status, SdpStatus::infeasible);
}

TEST(Sdp, Guards) {
  SdpProblem p = trace_cover(phi2(), 2, 2);
  EXPECT_THROW(solve(p, 1e-10), domain_error);
  SdpProblem big;
  big.add_hermitian("Y", 64);
  big.add_block("b", 1);
  EXPECT_THROW(solve(big), dimension_error);
}

// ---------------------------------------------------------------- qstate

namespace {

HybridSource bell_cr() {
  HybridSource s;
  s.dC = s.dR = 2;
  s.entries.push_back({0, 0, 0, 1.0, max_entangled(2)});
  return s;
}

}  // namespace

TEST(Source, SingleBellEntry) {
  auto st = build_source(bell_cr());
  EXPECT_EQ(st.layout.names(), source_register_names());
  EXPECT_EQ(numerical_rank(st.matrix), 1);
  EXPECT_LT((st.marginal({"C", "R"}).matrix - phi2()).norm(), 1e-12);
}

TEST(Source, TwoOrthogonalLabels) {
  HybridSource s;
  s.dC = s.dZ = 2;
  s.entries.push_back({0, 0, 0, 0.5, basis_vector(2, 0)});
  s.entries.push_back({0, 0, 1, 0.5, basis_vector(2, 1)});
  auto st = build_source(s);
  EXPECT_EQ(numerical_rank(st.matrix), 2);
  EXPECT_NEAR(st.trace(), 1, 1e-12);
  validate_state(st);
}

TEST(Source, DephasingIsIdempotentOnRandomSources) {
  Rng rng(40);
  for (int t = 0; t < 20; ++t) {
    auto spec = random_source(rng, 1, 2, 2, 1, 1 + int(rng.below(2)), 1, 2);
    auto st = build_source(spec);
    validate_state(st);
    LabeledState d = st;
    for (auto n : {"X", "Y", "Z", "X'", "Y'", "Z'"}) d = dephase(d, n);
    EXPECT_LT((d.matrix - st.matrix).norm(), 1e-12);
  }
}

TEST(Source, PurifiedDephasesToSource) {
  Rng rng(41);
  for (int t = 0; t < 50; ++t) {
    auto spec = random_source(rng, 1, 1 + int(rng.below(2)), 2, 1, 1 + int(rng.below(2)), 1, 1 + int(rng.below(2)));
    auto k = build_purified_source(spec);
    LabeledState full{projector(k.amp), k.layout};
    for (auto n : {"X'", "Y'", "Z'"}) full = dephase(full, n);
    EXPECT_LT((full.matrix - build_source(spec).matrix).norm(), 1e-10);
  }
}

TEST(Source, PurifiedSingleAndPair) {
  auto k = build_purified_source(bell_cr());
  EXPECT_NEAR(k.amp.norm(), 1, 1e-12);
  EXPECT_LT((k.reduced({"C", "R"}) - phi2()).norm(), 1e-12);

  HybridSource s;
  s.dC = s.dZ = 2;
  s.entries.push_back({0, 0, 0, 0.25, basis_vector(2, 0)});
  s.entries.push_back({0, 0, 1, 0.75, basis_vector(2, 1)});
  auto kp = build_purified_source(s);
  auto amps = kp.amp.cwiseAbs();
  std::vector<double> nz;
  for (long i = 0; i < amps.size(); ++i)
    if (amps(i) > 1e-12) nz.push_back(amps(i));
  ASSERT_EQ(nz.size(), 2u);
  std::sort(nz.begin(), nz.end());
  EXPECT_NEAR(nz[0], 0.5, 1e-12);
  EXPECT_NEAR(nz[1], std::sqrt(0.75), 1e-12);
}

TEST(Source, ValidationErrors) {
  auto s = bell_cr();
  s.entries[0].p = 0.9;
  EXPECT_THROW(build_source(s), validation_error);
  s = bell_cr();
  s.entries[0].psi *= 1.1;
  EXPECT_THROW(build_source(s), validation_error);
  s = bell_cr();
  s.entries[0].z = 1;
  EXPECT_THROW(build_source(s), validation_error);
  s = bell_cr();
  s.entries.push_back(s.entries[0]);
  s.entries[0].p = s.entries[1].p = 0.5;
  EXPECT_THROW(build_source(s), validation_error);
  s = bell_cr();
  s.entries.push_back({0, 0, 0, 0.0, max_entangled(2)});
  EXPECT_EQ(validated(s).entries.size(), 1u);
}

TEST(Source, CapExceeded) {
  Rng rng(42);
  auto spec = random_source(rng, 2, 2, 2, 2, 1, 1, 2);  // 2*16*2 = 64
  EXPECT_NO_THROW(build_source(spec));
  spec = random_source(rng, 2, 2, 2, 2, 2, 1, 2);  // 256
  EXPECT_THROW(build_source(spec), dimension_error);
}

TEST(MaxEntangled, Marginals) {
  EXPECT_NEAR(std::abs(max_entangled(1)(0)), 1, 1e-15);
  RegisterLayout l({{"A", 2}, {"B", 2}});
  EXPECT_LT((partial_trace(phi2(), l, {"B"}) - 0.5 * CMatrix::Identity(2, 2)).norm(), 1e-12);
  RegisterLayout l4({{"A", 4}, {"B", 4}});
  EXPECT_NEAR(von_neumann_bits(partial_trace(projector(max_entangled(4)), l4, {"A"})), 2, 1e-12);
  EXPECT_THROW(max_entangled(0), dimension_error);
}

TEST(Dephase, Examples) {
  Rng rng(43);
  auto st = build_source(random_source(rng, 1, 2, 2, 1, 1, 1, 2));
  EXPECT_LT((dephase(st, "Z").matrix - st.matrix).norm(), 1e-14);

  auto bell = make_state(phi2(), {{"A", 2}, {"B", 2}});
  CMatrix want = CMatrix::Zero(4, 4);
  want(0, 0) = want(3, 3) = 0.5;
  EXPECT_LT((dephase(bell, "A").matrix - want).norm(), 1e-14);
  EXPECT_THROW(dephase(bell, "Q"), layout_error);

  for (int t = 0; t < 20; ++t) {
    auto r = random_mixed({{"A", 2}, {"B", 3}}, 3, rng);
    auto d = dephase(r, "B");
    EXPECT_NEAR(d.trace(), 1, 1e-12);
    EXPECT_LE((d.matrix * d.matrix).trace().real(), (r.matrix * r.matrix).trace().real() + 1e-12);
    EXPECT_LT((dephase(d, "B").matrix - d.matrix).norm(), 1e-14);
  }
}

TEST(NCopies, Examples) {
  auto one = n_copies(bell_cr(), 1);
  EXPECT_EQ(one.entries.size(), 1u);
  auto two = n_copies(bell_cr(), 2);
  EXPECT_EQ(two.dC, 4);
  EXPECT_EQ(two.dR, 4);
  EXPECT_NEAR(two.entries[0].p, 1, 1e-15);

  Rng rng(44);
  auto spec = random_source(rng, 1, 1, 2, 1, 1, 1, 2);
  auto sq = n_copies(spec, 2);
  EXPECT_EQ(sq.entries.size(), spec.entries.size() * spec.entries.size());
  const double h1 = von_neumann_h(build_source(spec), {"C"});
  const double h2 = von_neumann_h(build_source(sq), {"C"});
  EXPECT_NEAR(h2, 2 * h1, 1e-9);
  EXPECT_THROW(n_copies(spec, 4), dimension_error);
  EXPECT_THROW(n_copies(spec, 0), domain_error);
}

// --------------------------------------------------------------- entropy

TEST(Entropy, ClosedValues) {
  auto bell = make_state(phi2(), {{"A", 2}, {"B", 2}});
  EXPECT_NEAR(hmin_cond(bell, {"A"}, {"B"}), -1, 1e-6);
  EXPECT_NEAR(hmax_cond(bell, {"A"}, {"B"}), -1, 1e-6);
  Rng rng(50);
  auto prod = make_state(kron(0.5 * CMatrix::Identity(2, 2), sample_density(2, 2, rng)), {{"A", 2}, {"B", 2}});
  EXPECT_NEAR(hmin_cond(prod, {"A"}, {"B"}), 1, 1e-6);
  EXPECT_NEAR(hmax_cond(prod, {"A"}, {"B"}), 1, 1e-6);
  CMatrix cl = CMatrix::Zero(4, 4);
  cl(0, 0) = cl(3, 3) = 0.5;
  EXPECT_NEAR(hmin_cond(make_state(cl, {{"A", 2}, {"B", 2}}), {"A"}, {"B"}), 0, 1e-6);
  for (int d : {2, 3, 4})
    EXPECT_NEAR(hmin_cond(make_state(CMatrix::Identity(d, d) / d, {{"A", d}}), {"A"}, {}), std::log2(d), 1e-6);
  auto pure = make_state(projector(sample_haar_state(3, rng)), {{"A", 3}});
  EXPECT_NEAR(hmax_cond(pure, {"A"}, {}), 0, 1e-6);
}

TEST(Entropy, FrozenOracleValues) {
  auto s1 = oracle_s1(), s2 = oracle_s2();
  EXPECT_NEAR(hmin_cond(s1, {"A"}, {"B"}), -0.36446430, 1e-5);
  EXPECT_NEAR(hmax_cond(s1, {"A"}, {"B"}), 0.14838202, 1e-5);
  EXPECT_NEAR(smooth_hmin(s1, {"A"}, {"B"}, 0.1), -0.12572216, 1e-5);
  EXPECT_NEAR(smooth_hmax(s1, {"A"}, {"B"}, 0.1), -0.07331810, 1e-5);
  EXPECT_NEAR(hmin_cond(s2, {"A"}, {"B"}), -0.30729027, 1e-5);
  EXPECT_NEAR(hmax_cond(s2, {"A"}, {"B"}), 0.30197171, 1e-5);
  EXPECT_NEAR(smooth_hmin(s2, {"A"}, {"B"}, 0.1), -0.11311654, 1e-5);
  EXPECT_NEAR(smooth_hmax(s2, {"A"}, {"B"}, 0.1), 0.10759962, 1e-5);
}

TEST(Entropy, SmoothSingleQubit) {
  auto pure = make_state(diag2(1, 0), {{"A", 2}});
  auto mixed = make_state(0.5 * CMatrix::Identity(2, 2), {{"A", 2}});
  EXPECT_NEAR(smooth_hmin(pure, {"A"}, {}, 0.1), 0.0145, 1e-4);
  EXPECT_NEAR(smooth_hmin(pure, {"A"}, {}, 0.1), -std::log2(0.99), 1e-6);
  EXPECT_NEAR(smooth_hmin(mixed, {"A"}, {}, 0.1), 1.01449957, 1e-5);
  EXPECT_NEAR(smooth_hmin(mixed, {"A"}, {}, 0.12), 1.02092584, 1e-5);
  EXPECT_NEAR(smooth_hmin(mixed, {"A"}, {}, 0.0), hmin_cond(mixed, {"A"}, {}), 1e-9);
  EXPECT_THROW(smooth_hmin(mixed, {"A"}, {}, 1.0), domain_error);
}

TEST(Entropy, Fixed) {
  Rng rng(51);
  CMatrix sig = sample_density(2, 2, rng);
  auto st = make_state(kron(0.5 * CMatrix::Identity(2, 2), sig), {{"A", 2}, {"B", 2}});
  auto f = hmin_cond_fixed(st, {"A"}, {"B"}, sig);
  EXPECT_FALSE(f.minus_infinity);
  EXPECT_NEAR(f.value, 1, 1e-9);
  auto bell = make_state(phi2(), {{"A", 2}, {"B", 2}});
  EXPECT_TRUE(hmin_cond_fixed(bell, {"A"}, {"B"}, diag2(1, 0)).minus_infinity);
  for (int t = 0; t < 20; ++t) {
    auto r = random_mixed({{"A", 2}, {"B", 2}}, 2, rng);
    auto g = hmin_cond_fixed(r, {"A"}, {"B"}, sample_density(2, 2, rng));
    ASSERT_FALSE(g.minus_infinity);
    EXPECT_LE(g.value, hmin_cond(r, {"A"}, {"B"}) + 1e-6);
  }
}

TEST(Entropy, CqOracle) {
  Rng rng(52);
  CMatrix r = sample_density(4, 2, rng);
  const double h = detail::hmin_core(r, 2, 2, 0);
  EXPECT_NEAR(hmin_cond_cq_oracle({{1.0, r, 2, 2}}), h, 1e-7);
  // H_min = 0 and 1 blocks
  CMatrix zero = CMatrix::Zero(4, 4);
  zero(0, 0) = zero(3, 3) = 0.5;
  CMatrix one = CMatrix::Identity(4, 4) / 4;
  EXPECT_NEAR(hmin_cond_cq_oracle({{0.5, zero, 2, 2}, {0.5, one, 2, 2}}), -std::log2(0.75), 1e-6);
  for (int t = 0; t < 10; ++t) {
    std::vector<CqBlock> blocks;
    const int K = 2 + int(rng.below(2));
    auto p = battery::random_probs(K, rng);
    for (int k = 0; k < K; ++k) blocks.push_back({p[k], sample_density(4, 1 + int(rng.below(4)), rng), 2, 2});
    auto st = assemble_cq(blocks);
    EXPECT_NEAR(hmin_cond(st, {"A"}, {"B", "K"}), hmin_cond_cq_oracle(blocks), 1e-5);
  }
}

TEST(Entropy, HmaxPrime) {
  CMatrix r = diag2(0.9, 0.1);
  EXPECT_NEAR(hmax_prime_of(r, 0.05), 1, 1e-12);
  EXPECT_NEAR(hmax_prime_of(r, 0.15), 0, 1e-12);
  EXPECT_NEAR(hmax_prime_of(r, 0.0), 1, 1e-12);
  EXPECT_NEAR(hmax_prime_of(diag2(1, 0), 0.0), 0, 1e-12);
}

TEST(Entropy, HStarAndIMin) {
  auto bell = make_state(phi2(), {{"A", 2}, {"B", 2}});
  EXPECT_NEAR(h_star(bell, {"A"}, {"B"}, 0, 0), -1, 1e-6);
  Rng rng(53);
  auto prod = make_state(kron(0.5 * CMatrix::Identity(2, 2), sample_density(2, 2, rng)), {{"A", 2}, {"B", 2}});
  EXPECT_NEAR(h_star(prod, {"A"}, {"B"}, 0, 0), 1, 1e-6);
  auto r = random_mixed({{"A", 2}, {"B", 2}}, 2, rng);
  const double hs = h_star(r, {"A"}, {"B"}, 0.05, 0.05);
  EXPECT_GE(hs, smooth_hmin(r, {"A"}, {"B"}, 0.05) - 1e-9);
  EXPECT_GE(hs, smooth_hmax(r, {"A"}, {"B"}, 0.05) - 1e-9);

  auto p3 = make_state(kron(kron(sample_density(2, 2, rng), sample_density(2, 2, rng)), sample_density(2, 2, rng)),
                       {{"A", 2}, {"B", 2}, {"C", 2}});
  EXPECT_NEAR(i_min_tilde(p3, {"A"}, {"C"}, {"B"}, 0), 0, 1e-5);
  auto ac = make_state(phi2(), {{"A", 2}, {"C", 2}});
  EXPECT_NEAR(i_min_tilde(ac, {"A"}, {"C"}, {}, 0), 2, 1e-5);
}

TEST(Entropy, VonNeumann) {
  for (int d : {2, 3, 5})
    EXPECT_NEAR(von_neumann_h(make_state(CMatrix::Identity(d, d) / d, {{"A", d}}), {"A"}), std::log2(d), 1e-12);
  auto bell = make_state(phi2(), {{"A", 2}, {"B", 2}});
  EXPECT_NEAR(von_neumann_h(bell, {"A"}, {"B"}), -1, 1e-12);
  Rng rng(54);
  for (int t = 0; t < 50; ++t)
    EXPECT_GE(von_neumann_mi(random_mixed({{"A", 2}, {"B", 3}}, 2, rng), {"A"}, {"B"}), -1e-12);
}

TEST(Entropy, FEps) {
  EXPECT_NEAR(f_eps(1), 0, 1e-15);
  EXPECT_NEAR(f_eps(0.6), -std::log2(0.2), 1e-12);
  EXPECT_GT(f_eps(0.1), f_eps(0.5));
  EXPECT_THROW(f_eps(0), domain_error);
  EXPECT_THROW(f_eps(1.5), domain_error);
}

TEST(Entropy, Fqaep) {
  auto s = make_state(oracle_s1().matrix, {{"A", 2}, {"B", 2}});
  auto rows = fqaep_trend(s, {"A"}, {"B"}, 0.1, 2);
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[1].n, 2);
  EXPECT_NEAR(rows[0].hmin_per_copy, -0.12572216, 1e-5);
  EXPECT_NEAR(rows[0].hmax_per_copy, -0.07331810, 1e-5);
  for (auto &r : rows) EXPECT_NEAR(r.von_neumann, von_neumann_h(s, {"A"}, {"B"}), 1e-12);
}

// ------------------------------------------------------ entropy properties

TEST(EntropyProperty, Duality) {
  Rng rng(60);
  for (int t = 0; t < 10; ++t) {
    const int a = 2 + int(rng.below(2)), b = 2 + int(rng.below(2)), c = 2 + int(rng.below(2));
    auto s = random_pure({{"A", a}, {"B", b}, {"C", c}}, rng);
    for (double e : {0.0, 0.1})
      EXPECT_NEAR(smooth_hmax(s, {"A"}, {"B"}, e), -smooth_hmin(s, {"A"}, {"C"}, e), 1e-4);
  }
}

TEST(EntropyProperty, SmoothingMonotone) {
  Rng rng(61);
  for (int t = 0; t < 5; ++t) {
    auto s = random_mixed({{"A", 2}, {"B", 2}}, 2, rng);
    double lo = -1e9, hi = 1e9;
    for (double e : {0.0, 0.05, 0.1, 0.2}) {
      const double mn = smooth_hmin(s, {"A"}, {"B"}, e), mx = smooth_hmax(s, {"A"}, {"B"}, e);
      EXPECT_GE(mn, lo - 1e-6);
      EXPECT_LE(mx, hi + 1e-6);
      lo = mn;
      hi = mx;
    }
  }
}

TEST(EntropyProperty, VonNeumannSandwich) {
  Rng rng(62);
  for (int t = 0; t < 100; ++t) {
    auto s = random_mixed({{"A", 2}, {"B", 2}}, 1 + int(rng.below(4)), rng);
    const double h = von_neumann_h(s, {"A"}, {"B"});
    EXPECT_LE(hmin_cond(s, {"A"}, {"B"}), h + 1e-5);
    EXPECT_GE(hmax_cond(s, {"A"}, {"B"}), h - 1e-5);
  }
}

class Lemma : public ::testing::TestWithParam<int> {};

TEST_P(Lemma, RandomStates) {
  const auto &l = battery::lemmas()[GetParam()];
  Rng rng(70 + GetParam());
  for (int t = 0; t < 8; ++t) EXPECT_LE(l.check(rng), 1e-4) << l.name << " state " << t;
}

INSTANTIATE_TEST_SUITE_P(Battery, Lemma, ::testing::Range(0, int(battery::lemmas().size())),
                         [](const ::testing::TestParamInfo<int> &i) {
                           return std::string(battery::lemmas()[i.param].name);
                         });
