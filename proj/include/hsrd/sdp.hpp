#pragma once

#include <cstdio>
#include <cstdlib>
#include <map>
#include <sstream>
#include <tuple>

#include "hsrd/numkit.hpp"

namespace hsrd {

// Linear matrix inequality program over real parameters y:
//
//     minimize  c.y   subject to  F0_b + sum_i y_i F_{i,b}  >= 0  for every block b
//
// Matrix variables (Hermitian, general complex, scalar) are groups of real
// parameters; the helpers below place them into blocks.  The dual program is
//     maximize -<F0, X>  s.t.  <F_i, X> = c_i,  X >= 0.
class SdpProblem {
 public:
  enum class Shape { scalar, hermitian, general };
  struct Group {
    std::string name;
    Shape shape;
    int rows, cols;
    int offset, count;
  };
  struct Block {
    std::string name;
    int dim;
    CMatrix constant;
  };
  using Term = std::pair<int, cplx>;  // (parameter, coefficient)

  int add_scalar(const std::string &name) { return add_group(name, Shape::scalar, 1, 1, 1); }
  int add_hermitian(const std::string &name, int d) { return add_group(name, Shape::hermitian, d, d, d * d); }
  int add_general(const std::string &name, int rows, int cols) {
    return add_group(name, Shape::general, rows, cols, 2 * rows * cols);
  }

  int add_block(const std::string &name, int dim) {
    if (dim < 1) throw dimension_error("sdp block must have dim >= 1");
    blocks_.push_back({name, dim, CMatrix::Zero(dim, dim)});
    return int(blocks_.size()) - 1;
  }

  int num_params() const { return nparams_; }
  const std::vector<Group> &groups() const { return groups_; }
  const std::vector<Block> &blocks() const { return blocks_; }
  const RVector &objective() const { return objective_; }

  // element (a,b) of a group as a real-linear combination of parameters
  std::vector<Term> element(int g, int a, int b) const {
    const Group &G = groups_.at(g);
    switch (G.shape) {
      case Shape::scalar:
        return {{G.offset, 1.0}};
      case Shape::general: {
        const int k = G.offset + 2 * (a * G.cols + b);
        return {{k, 1.0}, {k + 1, cplx(0, 1)}};
      }
      case Shape::hermitian: {
        const int d = G.rows;
        if (a == b) return {{G.offset + a, 1.0}};
        const int lo = std::min(a, b), hi = std::max(a, b);
        // off-diagonal pairs enumerated row by row after the diagonal
        const int pair = lo * d - lo * (lo + 1) / 2 + (hi - lo - 1);
        const int k = G.offset + d + 2 * pair;
        return {{k, 1.0}, {k + 1, a < b ? cplx(0, 1) : cplx(0, -1)}};
      }
    }
    return {};
  }

  // Adds v at (r,c) and conj(v) at (c,r); diagonal entries keep the real part.
  void add_constant(int block, int r, int c, cplx v) {
    CMatrix &F = blocks_.at(block).constant;
    if (r == c) {
      F(r, r) += v.real();
    } else {
      F(r, c) += v;
      F(c, r) += std::conj(v);
    }
  }
  void add_constant_matrix(int block, int r0, const CMatrix &m) {
    for (int a = 0; a < m.rows(); ++a)
      for (int b = a; b < m.cols(); ++b) add_constant(block, r0 + a, r0 + b, m(a, b));
  }
  void add_constant_offdiag(int block, int r0, int c0, const CMatrix &m) {
    for (int a = 0; a < m.rows(); ++a)
      for (int b = 0; b < m.cols(); ++b) add_constant(block, r0 + a, c0 + b, m(a, b));
  }

  void add_entry(int block, int param, int r, int c, cplx v) {
    auto &mp = entries_.at(param);
    if (r == c) {
      mp[{block, r, r}] += v.real();
    } else {
      mp[{block, r, c}] += v;
      mp[{block, c, r}] += std::conj(v);
    }
  }

  // coef * G placed with its (0,0) entry at (r0, c0).  r0 == c0 places a
  // square group on the diagonal; otherwise the row and column ranges must be
  // disjoint and the adjoint is placed automatically.
  void place(int block, int g, int r0, int c0, cplx coef = 1.0) {
    const Group &G = groups_.at(g);
    const bool diag = (r0 == c0);
    for (int a = 0; a < G.rows; ++a)
      for (int b = (diag ? a : 0); b < G.cols; ++b)
        for (auto &t : element(g, a, b)) add_entry(block, t.first, r0 + a, c0 + b, coef * t.second);
  }

  // I_{d_left} (x) G on the diagonal starting at r0
  void place_kron_identity(int block, int g, int d_left, int r0 = 0, cplx coef = 1.0) {
    const int d = groups_.at(g).rows;
    for (int k = 0; k < d_left; ++k) place(block, g, r0 + k * d, r0 + k * d, coef);
  }

  // entry (r,r) += coef * Re Tr(M G) for a group G (M is cols x rows)
  void add_re_trace(int block, int r, int g, const CMatrix &M, double coef = 1.0) {
    const Group &G = groups_.at(g);
    for (int a = 0; a < G.rows; ++a)
      for (int b = 0; b < G.cols; ++b) {
        const cplx m = M(b, a);
        if (m == cplx(0)) continue;
        for (auto &t : element(g, a, b)) {
          const double re = (m * t.second).real();
          if (re != 0) add_entry(block, t.first, r, r, coef * re);
        }
      }
  }

  void add_objective(int param, double coef) { objective_(param) += coef; }
  void add_trace_objective(int g, double coef = 1.0) {
    const Group &G = groups_.at(g);
    for (int a = 0; a < G.rows; ++a)
      for (auto &t : element(g, a, a)) objective_(t.first) += coef * t.second.real();
  }

  // sparse coefficient lists, both triangles, per parameter
  struct Entry {
    int block, row, col;
    cplx value;
  };
  std::vector<std::vector<Entry>> coefficient_lists() const {
    std::vector<std::vector<Entry>> out(nparams_);
    for (int i = 0; i < nparams_; ++i)
      for (auto &kv : entries_[i])
        if (kv.second != cplx(0))
          out[i].push_back({std::get<0>(kv.first), std::get<1>(kv.first), std::get<2>(kv.first), kv.second});
    return out;
  }

  int total_block_dim() const {
    int n = 0;
    for (auto &b : blocks_) n += b.dim;
    return n;
  }

  std::string dump() const {
    std::ostringstream os;
    os << "SdpProblem params=" << nparams_ << " blocks=";
    for (auto &b : blocks_) os << b.name << "[" << b.dim << "] ";
    os << " groups=";
    for (auto &g : groups_) os << g.name << "(" << g.rows << "x" << g.cols << ") ";
    return os.str();
  }

 private:
  int add_group(const std::string &name, Shape s, int rows, int cols, int count) {
    groups_.push_back({name, s, rows, cols, nparams_, count});
    nparams_ += count;
    entries_.resize(nparams_);
    RVector obj = RVector::Zero(nparams_);
    obj.head(objective_.size()) = objective_;
    objective_ = obj;
    return int(groups_.size()) - 1;
  }

  std::vector<Group> groups_;
  std::vector<Block> blocks_;
  int nparams_ = 0;
  RVector objective_;
  std::vector<std::map<std::tuple<int, int, int>, cplx>> entries_;
};

// dense Schur complement is m x m
inline constexpr int max_sdp_params = 4000;

enum class SdpStatus { optimal, infeasible, max_iterations };

inline const char *to_string(SdpStatus s) {
  switch (s) {
    case SdpStatus::optimal: return "optimal";
    case SdpStatus::infeasible: return "infeasible";
    default: return "max-iterations";
  }
}

struct SdpSolution {
  double value = 0;  // c.y at the returned iterate
  double dual_value = 0;
  RVector y;
  std::vector<CMatrix> X;  // dual matrices per block
  std::vector<CMatrix> S;  // slack F0 + sum y F per block
  SdpStatus status = SdpStatus::max_iterations;
  double gap = 0;
  double primal_residual = 0;  // LMI side
  double dual_residual = 0;    // equality side <F_i,X> = c_i
  int iterations = 0;

  // assemble a matrix-valued group from the parameters
  CMatrix group_value(const SdpProblem &p, int g) const {
    const auto &G = p.groups().at(g);
    CMatrix m = CMatrix::Zero(G.rows, G.cols);
    for (int a = 0; a < G.rows; ++a)
      for (int b = 0; b < G.cols; ++b)
        for (auto &t : p.element(g, a, b)) m(a, b) += t.second * y(t.first);
    return m;
  }
};

namespace detail {

struct SpectralPD {
  CMatrix V;
  RVector l;
};

inline SpectralPD spectral(const CMatrix &m) {
  Eigen::SelfAdjointEigenSolver<CMatrix> es(0.5 * (m + m.adjoint()));
  return {es.eigenvectors(), es.eigenvalues()};
}

inline CMatrix spectral_apply(const SpectralPD &s, double (*f)(double)) {
  RVector g(s.l.size());
  for (long k = 0; k < g.size(); ++k) g(k) = f(std::max(s.l(k), 1e-300));
  return s.V * g.cast<cplx>().asDiagonal() * s.V.adjoint();
}

// largest alpha with M + alpha * D >= 0 (infinity if unbounded)
inline double max_step(const CMatrix &M, const CMatrix &D) {
  Eigen::LLT<CMatrix> llt(M);
  CMatrix T;
  if (llt.info() == Eigen::Success) {
    CMatrix Linv = llt.matrixL().solve(CMatrix::Identity(M.rows(), M.cols()));
    T = Linv * D * Linv.adjoint();
  } else {
    auto s = spectral(M);
    CMatrix is = spectral_apply(s, [](double x) { return 1.0 / std::sqrt(x); });
    T = is * D * is;
  }
  Eigen::SelfAdjointEigenSolver<CMatrix> es(0.5 * (T + T.adjoint()), Eigen::EigenvaluesOnly);
  const double lmin = es.eigenvalues()(0);
  return lmin < 0 ? -1.0 / lmin : 1e300;
}

inline double inner(const CMatrix &a, const CMatrix &b) {
  return (a.array() * b.transpose().array()).sum().real();  // Re Tr(a b)
}

}  // namespace detail

// iteration limit; HSRD_SDP_MAX_ITER overrides 200
inline int default_max_iter() {
  static const int n = [] {
    if (const char *s = std::getenv("HSRD_SDP_MAX_ITER")) {
      char *end = nullptr;
      long v = std::strtol(s, &end, 10);
      if (end != s && v > 0 && v < 100000) return int(v);
    }
    return 200;
  }();
  return n;
}

inline SdpSolution solve(const SdpProblem &p, double tol = 1e-7, int max_iter = default_max_iter()) {
  if (tol < 1e-9) throw domain_error("sdp solve: tolerance must be >= 1e-9");
  const int m = p.num_params();
  const int nb = int(p.blocks().size());
  const auto coef = p.coefficient_lists();
  const RVector &c = p.objective();
  if (m > max_sdp_params)
    throw dimension_error("sdp solve: " + std::to_string(m) + " parameters exceeds the limit of " +
                          std::to_string(max_sdp_params));

  // per block: list of (param, entries in that block)
  std::vector<std::vector<std::pair<int, std::vector<SdpProblem::Entry>>>> by_block(nb);
  for (int i = 0; i < m; ++i) {
    std::map<int, std::vector<SdpProblem::Entry>> per;
    for (auto &e : coef[i]) per[e.block].push_back(e);
    for (auto &kv : per) by_block[kv.first].push_back({i, kv.second});
  }

  auto apply_F = [&](const RVector &y, std::vector<CMatrix> &out) {
    out.resize(nb);
    for (int b = 0; b < nb; ++b) out[b] = p.blocks()[b].constant;
    for (int b = 0; b < nb; ++b)
      for (auto &pe : by_block[b])
        for (auto &e : pe.second) out[b](e.row, e.col) += y(pe.first) * e.value;
  };
  auto apply_Flin = [&](const RVector &y, std::vector<CMatrix> &out) {
    out.resize(nb);
    for (int b = 0; b < nb; ++b) out[b] = CMatrix::Zero(p.blocks()[b].dim, p.blocks()[b].dim);
    for (int b = 0; b < nb; ++b)
      for (auto &pe : by_block[b])
        for (auto &e : pe.second) out[b](e.row, e.col) += y(pe.first) * e.value;
  };
  auto adjoint_F = [&](const std::vector<CMatrix> &X) {
    RVector r = RVector::Zero(m);
    for (int b = 0; b < nb; ++b)
      for (auto &pe : by_block[b]) {
        double s = 0;
        for (auto &e : pe.second) s += (e.value * X[b](e.col, e.row)).real();
        r(pe.first) += s;
      }
    return r;
  };

  double normF0 = 0, normF = 0;
  for (auto &b : p.blocks()) normF0 += b.constant.squaredNorm();
  normF0 = std::sqrt(normF0);
  for (int i = 0; i < m; ++i) {
    double s = 0;
    for (auto &e : coef[i]) s += std::norm(e.value);
    normF = std::max(normF, std::sqrt(s));
  }
  const double normc = c.norm();
  int N = 0;
  for (auto &b : p.blocks()) N += b.dim;

  double xi = 1, eta = 1;
  for (int i = 0; i < m; ++i) {
    double s = 0;
    for (auto &e : coef[i]) s += std::norm(e.value);
    xi = std::max(xi, (1 + std::abs(c(i))) / (1 + std::sqrt(s)));
  }
  xi = std::max(xi, std::sqrt(double(N)));
  eta = std::max({1.0, normF0, normF, std::sqrt(double(N))});

  std::vector<CMatrix> X(nb), S(nb), Fy, Rd, W(nb), dX(nb), dS(nb), Sinv(nb), Rc(nb), tmp;
  for (int b = 0; b < nb; ++b) {
    const int d = p.blocks()[b].dim;
    X[b] = xi * CMatrix::Identity(d, d);
    S[b] = eta * CMatrix::Identity(d, d);
  }
  RVector y = RVector::Zero(m), dy;

  SdpSolution sol;
  sol.status = SdpStatus::max_iterations;
  static const bool trace = std::getenv("HSRD_SDP_TRACE") != nullptr;
  struct {
    double score = 1e300, gap = 0, rp = 0, rd = 0;
    RVector y;
    std::vector<CMatrix> X;
  } best;
  best.y = y;
  best.X = X;
  int stall = 0;

  auto finish = [&](SdpStatus st, int it) {
    sol.status = st;
    sol.iterations = it;
    sol.y = y;
    sol.X = X;
    apply_F(y, sol.S);
    sol.value = c.dot(y);
    double d = 0;
    for (int b = 0; b < nb; ++b) d -= detail::inner(p.blocks()[b].constant, X[b]);
    sol.dual_value = d;
    return sol;
  };

  for (int it = 0; it < max_iter; ++it) {
    apply_F(y, Fy);
    Rd.resize(nb);
    double rd = 0, gap = 0, dobj = 0;
    for (int b = 0; b < nb; ++b) {
      Rd[b] = Fy[b] - S[b];
      rd += Rd[b].squaredNorm();
      gap += detail::inner(X[b], S[b]);
      dobj -= detail::inner(p.blocks()[b].constant, X[b]);
    }
    rd = std::sqrt(rd);
    const RVector rp = c - adjoint_F(X);
    const double pobj = c.dot(y);
    const double mu = gap / N;
    const double rel_p = rd / (1 + normF0);
    const double rel_d = rp.norm() / (1 + normc);
    const double scale = std::max(1.0, std::abs(pobj));
    sol.gap = std::max(gap, std::abs(pobj - dobj));
    sol.primal_residual = rel_p;
    sol.dual_residual = rel_d;
    if (sol.gap <= tol * scale && rel_p <= tol && rel_d <= tol) return finish(SdpStatus::optimal, it);
    const double score = std::max(sol.gap / scale, std::max(rel_p, rel_d));
    if (score < best.score) {
      best = {score, sol.gap, rel_p, rel_d, y, X};
      stall = 0;
    } else if (++stall >= 30) {
      break;
    }

    double xnorm = 0;
    for (int b = 0; b < nb; ++b) xnorm = std::max(xnorm, X[b].norm());
    if (y.size() && (y.lpNorm<Eigen::Infinity>() > 1e10 || xnorm > 1e10)) return finish(SdpStatus::infeasible, it);

    // Nesterov-Todd scaling point W with W S W = X
    for (int b = 0; b < nb; ++b) {
      auto sx = detail::spectral(X[b]);
      CMatrix Xh = detail::spectral_apply(sx, [](double v) { return std::sqrt(v); });
      CMatrix T = Xh * S[b] * Xh;
      auto st = detail::spectral(T);
      CMatrix Tm = detail::spectral_apply(st, [](double v) { return 1.0 / std::sqrt(v); });
      W[b] = Xh * Tm * Xh;
      W[b] = 0.5 * (W[b] + W[b].adjoint()).eval();
      auto ss = detail::spectral(S[b]);
      Sinv[b] = detail::spectral_apply(ss, [](double v) { return 1.0 / v; });
    }

    // Schur complement M_ij = <F_i, W F_j W>
    Eigen::MatrixXd M = Eigen::MatrixXd::Zero(m, m);
    for (int b = 0; b < nb; ++b) {
      const CMatrix &Wb = W[b];
      const auto &lst = by_block[b];
      for (size_t u = 0; u < lst.size(); ++u) {
        const int i = lst[u].first;
        const auto &ei = lst[u].second;
        for (size_t v = u; v < lst.size(); ++v) {
          const int j = lst[v].first;
          const auto &ej = lst[v].second;
          cplx s = 0;
          for (auto &a : ei)
            for (auto &bb : ej) s += a.value * bb.value * Wb(a.col, bb.row) * Wb(bb.col, a.row);
          M(i, j) += s.real();
          if (i != j) M(j, i) += s.real();
        }
      }
    }
    Eigen::LLT<Eigen::MatrixXd> llt(M);
    if (llt.info() != Eigen::Success) {
      const double ridge = 1e-12 * std::max(1.0, M.diagonal().maxCoeff());
      M.diagonal().array() += ridge;
      llt.compute(M);
    }
    Eigen::LDLT<Eigen::MatrixXd> ldlt;
    const bool use_ldlt = llt.info() != Eigen::Success;
    if (use_ldlt) ldlt.compute(M);

    auto direction = [&](const std::vector<CMatrix> &Rcb) {
      std::vector<CMatrix> B(nb);
      for (int b = 0; b < nb; ++b) B[b] = Rcb[b] - W[b] * Rd[b] * W[b];
      RVector h = adjoint_F(B) - rp;
      dy = use_ldlt ? RVector(ldlt.solve(h)) : RVector(llt.solve(h));
      apply_Flin(dy, tmp);
      for (int b = 0; b < nb; ++b) {
        dS[b] = Rd[b] + tmp[b];
        dS[b] = 0.5 * (dS[b] + dS[b].adjoint()).eval();
        dX[b] = Rcb[b] - W[b] * dS[b] * W[b];
        dX[b] = 0.5 * (dX[b] + dX[b].adjoint()).eval();
      }
    };
    auto steps = [&](double &ap, double &ad) {
      ap = 1e300;
      ad = 1e300;
      for (int b = 0; b < nb; ++b) {
        ap = std::min(ap, detail::max_step(X[b], dX[b]));
        ad = std::min(ad, detail::max_step(S[b], dS[b]));
      }
    };

    // predictor
    for (int b = 0; b < nb; ++b) Rc[b] = -X[b];
    direction(Rc);
    double ap, ad;
    steps(ap, ad);
    ap = std::min(1.0, ap);
    ad = std::min(1.0, ad);
    double gaff = 0;
    for (int b = 0; b < nb; ++b) gaff += detail::inner(X[b] + ap * dX[b], S[b] + ad * dS[b]);
    double sigma = std::pow(std::max(0.0, gaff) / std::max(gap, 1e-300), 3);
    sigma = std::min(1.0, std::max(sigma, 0.0));

    // centering step (no second-order term)
    for (int b = 0; b < nb; ++b) Rc[b] = sigma * mu * Sinv[b] - X[b];
    direction(Rc);
    steps(ap, ad);
    const double gamma = 0.95;
    ap = std::min(1.0, gamma * ap);
    ad = std::min(1.0, gamma * ad);
    if (trace)
      std::fprintf(stderr, "it %3d pobj %.10g dobj %.10g gap %.3e rp %.3e rd %.3e ap %.3f ad %.3f sigma %.3e\n", it,
                   pobj, dobj, gap, rel_p, rel_d, ap, ad, sigma);
    for (int b = 0; b < nb; ++b) {
      X[b] += ap * dX[b];
      S[b] += ad * dS[b];
    }
    y += ad * dy;
  }
  // no convergence: hand back the best iterate seen
  y = best.y;
  X = best.X;
  sol = finish(SdpStatus::max_iterations, max_iter);
  sol.gap = best.gap;
  sol.primal_residual = best.rp;
  sol.dual_residual = best.rd;
  return sol;
}

}  // namespace hsrd
