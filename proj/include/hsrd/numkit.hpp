#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdlib>
#include <numeric>
#include <string>
#include <vector>

#include "hsrd/errors.hpp"
#include "hsrd/random.hpp"

namespace hsrd {

using cplx = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;
using RVector = Eigen::VectorXd;
using RowMajorCMatrix = Eigen::Matrix<cplx, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// relative cut below which eigenvalues count as zero
inline constexpr double support_threshold = 1e-10;

// Total dimension allowed for dense states.  HSRD_DIM_CAP overrides 64.
inline long dim_cap() {
  static const long cap = [] {
    if (const char *s = std::getenv("HSRD_DIM_CAP")) {
      char *end = nullptr;
      long v = std::strtol(s, &end, 10);
      if (end != s && v > 0) return v;
    }
    return 64L;
  }();
  return cap;
}

inline void check_cap(long dim, const char *what) {
  if (dim > dim_cap())
    throw dimension_error(std::string(what) + ": dimension " + std::to_string(dim) +
                          " exceeds cap " + std::to_string(dim_cap()));
}

inline double log2_safe(double x) { return std::log2(x); }

namespace detail {
inline CMatrix kron(const CMatrix &a, const CMatrix &b) {
  CMatrix r(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      r.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return r;
}
}  // namespace detail

inline CMatrix kron(const CMatrix &a, const CMatrix &b) {
  check_cap(std::max(a.rows() * b.rows(), a.cols() * b.cols()), "kron");
  return detail::kron(a, b);
}

inline CVector kron_vec(const CVector &a, const CVector &b) {
  CVector r(a.size() * b.size());
  for (Eigen::Index i = 0; i < a.size(); ++i) r.segment(i * b.size(), b.size()) = a(i) * b;
  return r;
}

inline CVector basis_vector(int d, int k) {
  CVector v = CVector::Zero(d);
  v(k) = 1.0;
  return v;
}

inline CMatrix projector(const CVector &v) { return v * v.adjoint(); }

inline bool is_hermitian(const CMatrix &m, double tol = 1e-10) {
  if (m.rows() != m.cols()) return false;
  const double scale = std::max(1.0, m.norm());
  return (m - m.adjoint()).norm() <= tol * scale;
}

// ---------------------------------------------------------------- layouts

enum class Kind { classical, quantum };

struct Register {
  std::string name;
  int dim = 1;
  Kind kind = Kind::quantum;
};

class RegisterLayout {
 public:
  RegisterLayout() = default;
  RegisterLayout(std::vector<Register> regs) : regs_(std::move(regs)) {
    for (size_t i = 0; i < regs_.size(); ++i) {
      if (regs_[i].dim < 1) throw layout_error("register " + regs_[i].name + " has dim < 1");
      for (size_t j = 0; j < i; ++j)
        if (regs_[j].name == regs_[i].name)
          throw layout_error("duplicate register name " + regs_[i].name);
    }
  }

  size_t size() const { return regs_.size(); }
  const Register &operator[](size_t i) const { return regs_[i]; }
  const std::vector<Register> &registers() const { return regs_; }

  bool contains(const std::string &name) const {
    for (auto &r : regs_)
      if (r.name == name) return true;
    return false;
  }
  int index_of(const std::string &name) const {
    for (size_t i = 0; i < regs_.size(); ++i)
      if (regs_[i].name == name) return int(i);
    throw layout_error("unknown subsystem " + name);
  }
  const Register &reg(const std::string &name) const { return regs_[index_of(name)]; }

  long total_dim() const {
    long d = 1;
    for (auto &r : regs_) d *= r.dim;
    return d;
  }
  long dim_of(const std::vector<std::string> &names) const {
    long d = 1;
    for (auto &n : names) d *= reg(n).dim;
    return d;
  }
  std::vector<int> dims() const {
    std::vector<int> d;
    for (auto &r : regs_) d.push_back(r.dim);
    return d;
  }
  std::vector<std::string> names() const {
    std::vector<std::string> n;
    for (auto &r : regs_) n.push_back(r.name);
    return n;
  }

  // registers named in `names`, kept in this layout's order
  RegisterLayout subset(const std::vector<std::string> &names) const {
    for (auto &n : names) index_of(n);
    std::vector<Register> out;
    for (auto &r : regs_)
      if (std::find(names.begin(), names.end(), r.name) != names.end()) out.push_back(r);
    return RegisterLayout(out);
  }
  // registers in exactly the given order
  RegisterLayout ordered(const std::vector<std::string> &names) const {
    std::vector<Register> out;
    for (auto &n : names) out.push_back(reg(n));
    return RegisterLayout(out);
  }
  std::vector<std::string> complement(const std::vector<std::string> &names) const {
    for (auto &n : names) index_of(n);
    std::vector<std::string> out;
    for (auto &r : regs_)
      if (std::find(names.begin(), names.end(), r.name) == names.end()) out.push_back(r.name);
    return out;
  }
  RegisterLayout concat(const RegisterLayout &o) const {
    auto r = regs_;
    r.insert(r.end(), o.regs_.begin(), o.regs_.end());
    return RegisterLayout(r);
  }

  bool operator==(const RegisterLayout &o) const {
    if (regs_.size() != o.regs_.size()) return false;
    for (size_t i = 0; i < regs_.size(); ++i)
      if (regs_[i].name != o.regs_[i].name || regs_[i].dim != o.regs_[i].dim) return false;
    return true;
  }

 private:
  std::vector<Register> regs_;
};

namespace detail {

// For a tensor with the given dims, return map[new_flat] = old_flat when the
// registers are rearranged so that new position k holds old register perm[k].
inline std::vector<long> permutation_map(const std::vector<int> &dims, const std::vector<int> &perm) {
  const size_t n = dims.size();
  std::vector<long> old_stride(n, 1);
  for (int k = int(n) - 2; k >= 0; --k) old_stride[k] = old_stride[k + 1] * dims[k + 1];
  long total = 1;
  for (int d : dims) total *= d;
  std::vector<long> map(total);
  std::vector<int> idx(n, 0);
  for (long f = 0; f < total; ++f) {
    long old = 0;
    for (size_t k = 0; k < n; ++k) old += idx[k] * old_stride[perm[k]];
    map[f] = old;
    for (int k = int(n) - 1; k >= 0; --k) {
      if (++idx[k] < dims[perm[k]]) break;
      idx[k] = 0;
    }
  }
  return map;
}

inline std::vector<int> perm_for(const RegisterLayout &layout, const std::vector<std::string> &order) {
  std::vector<int> perm;
  for (auto &n : order) perm.push_back(layout.index_of(n));
  if (perm.size() != layout.size()) {
    std::vector<int> seen(layout.size(), 0);
    for (int p : perm) seen[p] = 1;
    for (size_t i = 0; i < layout.size(); ++i)
      if (!seen[i]) perm.push_back(int(i));
  }
  return perm;
}

}  // namespace detail

// Rearrange registers of a square operator into `order` (registers not named
// are appended in their original order).
inline CMatrix reorder(const CMatrix &m, const RegisterLayout &layout, const std::vector<std::string> &order) {
  if (m.rows() != layout.total_dim() || m.cols() != layout.total_dim())
    throw layout_error("operator dimension does not match layout");
  auto map = detail::permutation_map(layout.dims(), detail::perm_for(layout, order));
  const long n = long(map.size());
  CMatrix r(n, n);
  for (long i = 0; i < n; ++i)
    for (long j = 0; j < n; ++j) r(i, j) = m(map[i], map[j]);
  return r;
}

inline CVector reorder(const CVector &v, const RegisterLayout &layout, const std::vector<std::string> &order) {
  if (v.size() != layout.total_dim()) throw layout_error("vector dimension does not match layout");
  auto map = detail::permutation_map(layout.dims(), detail::perm_for(layout, order));
  CVector r(v.size());
  for (size_t i = 0; i < map.size(); ++i) r(i) = v(map[i]);
  return r;
}

// Partial trace keeping `keep`; result registers follow layout order.
inline CMatrix partial_trace(const CMatrix &state, const RegisterLayout &layout,
                             const std::vector<std::string> &keep) {
  if (state.rows() != layout.total_dim() || state.cols() != layout.total_dim())
    throw layout_error("state dimension " + std::to_string(state.rows()) +
                       " does not match layout dimension " + std::to_string(layout.total_dim()));
  for (auto &k : keep) layout.index_of(k);
  std::vector<std::string> order;
  for (auto &r : layout.registers())
    if (std::find(keep.begin(), keep.end(), r.name) != keep.end()) order.push_back(r.name);
  const long dk = layout.dim_of(order);
  const long dt = layout.total_dim() / dk;
  auto map = detail::permutation_map(layout.dims(), detail::perm_for(layout, order));
  CMatrix r = CMatrix::Zero(dk, dk);
  for (long i = 0; i < dk; ++i)
    for (long j = 0; j < dk; ++j) {
      cplx s = 0;
      for (long t = 0; t < dt; ++t) s += state(map[i * dt + t], map[j * dt + t]);
      r(i, j) = s;
    }
  return r;
}

// ------------------------------------------------------------------ kets

// Pure vector with named registers (row-major tensor order).
struct Ket {
  CVector amp;
  RegisterLayout layout;

  Ket() = default;
  Ket(CVector a, RegisterLayout l) : amp(std::move(a)), layout(std::move(l)) {
    if (amp.size() != layout.total_dim()) throw layout_error("ket length does not match layout");
  }

  Ket reordered(const std::vector<std::string> &order) const {
    auto perm = detail::perm_for(layout, order);
    std::vector<Register> regs;
    for (int p : perm) regs.push_back(layout[p]);
    return Ket(reorder(amp, layout, order), RegisterLayout(regs));
  }

  // rows indexed by `rows` registers, columns by `cols` (all others must be in cols)
  RowMajorCMatrix as_matrix(const std::vector<std::string> &rows, const std::vector<std::string> &cols) const {
    std::vector<std::string> order = rows;
    order.insert(order.end(), cols.begin(), cols.end());
    if (order.size() != layout.size()) throw layout_error("as_matrix: registers must partition the layout");
    CVector v = reorder(amp, layout, order);
    const long dr = layout.dim_of(rows);
    return Eigen::Map<RowMajorCMatrix>(v.data(), dr, v.size() / dr);
  }

  CMatrix reduced(const std::vector<std::string> &keep) const {
    auto rest = layout.complement(keep);
    RowMajorCMatrix m = as_matrix(keep, rest);
    return m * m.adjoint();
  }

  // Apply a linear map (out_dim x in_dim) on registers `in`; the result has the
  // `out` registers first followed by the untouched registers.
  Ket apply(const CMatrix &op, const std::vector<std::string> &in, const std::vector<Register> &out) const {
    const long din = layout.dim_of(in);
    long dout = 1;
    for (auto &r : out) dout *= r.dim;
    if (op.cols() != din || op.rows() != dout) throw layout_error("apply: operator shape mismatch");
    auto rest = layout.complement(in);
    RowMajorCMatrix m = as_matrix(in, rest);
    RowMajorCMatrix r = op * m;
    std::vector<Register> regs = out;
    for (auto &n : rest) regs.push_back(layout.reg(n));
    return Ket(Eigen::Map<CVector>(r.data(), r.size()), RegisterLayout(regs));
  }

  Ket tensor(const Ket &o) const { return Ket(kron_vec(amp, o.amp), layout.concat(o.layout)); }

  // <value| on one register; the register is removed (result unnormalized)
  Ket fixed(const std::string &name, int value) const {
    std::vector<std::string> rest = layout.complement({name});
    RowMajorCMatrix m = as_matrix({name}, rest);
    if (value < 0 || value >= m.rows()) throw layout_error("fixed: value out of range for " + name);
    CVector v = m.row(value).transpose();
    return Ket(v, layout.subset(rest));
  }
};

// ------------------------------------------------------------- spectra

struct HermEigen {
  RVector eigenvalues;   // descending
  CMatrix eigenvectors;  // columns
};

inline HermEigen hermitian_eig(const CMatrix &m) {
  if (!is_hermitian(m, 1e-10)) throw shape_error("hermitian_eig: matrix is not Hermitian");
  CMatrix h = 0.5 * (m + m.adjoint());
  Eigen::SelfAdjointEigenSolver<CMatrix> es(h);
  const long n = h.rows();
  HermEigen out;
  out.eigenvalues.resize(n);
  out.eigenvectors.resize(n, n);
  for (long k = 0; k < n; ++k) {
    out.eigenvalues(k) = es.eigenvalues()(n - 1 - k);
    out.eigenvectors.col(k) = es.eigenvectors().col(n - 1 - k);
  }
  return out;
}

inline RVector eigenvalues(const CMatrix &m) { return hermitian_eig(m).eigenvalues; }

// f applied to the spectrum of a PSD matrix; eigenvalues below the support
// threshold (relative to the largest) are mapped to zero.
template <class F>
CMatrix psd_function(const CMatrix &m, F f) {
  auto e = hermitian_eig(m);
  const double top = std::max(0.0, e.eigenvalues.size() ? e.eigenvalues(0) : 0.0);
  RVector g(e.eigenvalues.size());
  for (long k = 0; k < g.size(); ++k) {
    const double l = e.eigenvalues(k);
    g(k) = (l > support_threshold * top && l > 0) ? f(l) : 0.0;
  }
  return e.eigenvectors * g.cast<cplx>().asDiagonal() * e.eigenvectors.adjoint();
}

inline CMatrix sqrtm_psd(const CMatrix &m) {
  return psd_function(m, [](double l) { return std::sqrt(l); });
}
inline CMatrix inv_sqrtm_psd(const CMatrix &m) {
  return psd_function(m, [](double l) { return 1.0 / std::sqrt(l); });
}
inline CMatrix support_projector(const CMatrix &m) {
  return psd_function(m, [](double) { return 1.0; });
}

// orthonormal basis (columns) of the support of a PSD matrix
inline CMatrix support_basis(const CMatrix &m) {
  auto e = hermitian_eig(m);
  const double top = e.eigenvalues.size() ? e.eigenvalues(0) : 0.0;
  long r = 0;
  while (r < e.eigenvalues.size() && e.eigenvalues(r) > support_threshold * top && e.eigenvalues(r) > 0) ++r;
  return e.eigenvectors.leftCols(r);
}

inline int numerical_rank(const CMatrix &m) { return int(support_basis(m).cols()); }

inline double trace_norm(const CMatrix &m) {
  if (m.rows() == m.cols() && is_hermitian(m, 1e-12)) {
    Eigen::SelfAdjointEigenSolver<CMatrix> es(0.5 * (m + m.adjoint()), Eigen::EigenvaluesOnly);
    return es.eigenvalues().cwiseAbs().sum();
  }
  Eigen::JacobiSVD<CMatrix> svd(m);
  return svd.singularValues().sum();
}

inline double von_neumann_bits(const CMatrix &rho) {
  auto ev = hermitian_eig(rho).eigenvalues;
  double h = 0;
  for (long k = 0; k < ev.size(); ++k)
    if (ev(k) > 1e-300) h -= ev(k) * std::log2(ev(k));
  return h;
}

// ------------------------------------------------------------- metrics

struct Metrics {
  double trace_distance;
  double generalized_fidelity;
  double purified_distance;
};

inline void require_substate(const CMatrix &m, const char *who) {
  if (!is_hermitian(m, 1e-9)) throw not_a_state_error(std::string(who) + ": not Hermitian");
  auto ev = hermitian_eig(m).eigenvalues;
  if (ev.size() && ev(ev.size() - 1) < -1e-9)
    throw not_a_state_error(std::string(who) + ": negative eigenvalue " + std::to_string(ev(ev.size() - 1)));
  if (m.trace().real() > 1 + 1e-9) throw not_a_state_error(std::string(who) + ": trace exceeds 1");
}

// ||sqrt(rho) sqrt(sigma)||_1
inline double fidelity(const CMatrix &rho, const CMatrix &sigma) {
  return trace_norm(sqrtm_psd(rho) * sqrtm_psd(sigma));
}

inline double generalized_fidelity(const CMatrix &rho, const CMatrix &sigma) {
  const double a = std::max(0.0, 1 - rho.trace().real());
  const double b = std::max(0.0, 1 - sigma.trace().real());
  return fidelity(rho, sigma) + std::sqrt(a * b);
}

inline Metrics metrics(const CMatrix &rho, const CMatrix &sigma) {
  if (rho.rows() != sigma.rows()) throw shape_error("metrics: dimension mismatch");
  require_substate(rho, "metrics(rho)");
  require_substate(sigma, "metrics(sigma)");
  Metrics m;
  m.trace_distance = 0.5 * trace_norm(rho - sigma);
  m.generalized_fidelity = std::min(1.0, generalized_fidelity(rho, sigma));
  m.purified_distance = std::sqrt(std::max(0.0, 1 - m.generalized_fidelity * m.generalized_fidelity));
  return m;
}

inline double purified_distance(const CMatrix &rho, const CMatrix &sigma) {
  return metrics(rho, sigma).purified_distance;
}

// ---------------------------------------------------------- purification

struct Purification {
  CVector psi;     // system (x) mirror, row-major
  int mirror_dim;  // equals the system dimension unless compact
};

// Schmidt basis is the eigenbasis of rho.  With compact = true the mirror only
// spans the support.
inline Purification purify(const CMatrix &rho, bool compact = false) {
  auto e = hermitian_eig(rho);
  const long d = rho.rows();
  const double top = e.eigenvalues.size() ? e.eigenvalues(0) : 0.0;
  long r = 0;
  while (r < d && e.eigenvalues(r) > support_threshold * top && e.eigenvalues(r) > 0) ++r;
  const long m = compact ? std::max<long>(r, 1) : d;
  CVector psi = CVector::Zero(d * m);
  for (long k = 0; k < r; ++k) {
    const double s = std::sqrt(e.eigenvalues(k));
    for (long i = 0; i < d; ++i) psi(i * m + k) += s * e.eigenvectors(i, k);
  }
  return {psi, int(m)};
}

// ---------------------------------------------------------------- Haar

inline CMatrix ginibre(int rows, int cols, Rng &rng) {
  CMatrix g(rows, cols);
  const double s = std::sqrt(0.5);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) {
      const double re = rng.normal(), im = rng.normal();
      g(i, j) = cplx(s * re, s * im);
    }
  return g;
}

inline CMatrix sample_haar_unitary(int d, Rng &rng) {
  if (d < 1) throw dimension_error("sample_haar_unitary: d must be >= 1");
  CMatrix g = ginibre(d, d, rng);
  Eigen::HouseholderQR<CMatrix> qr(g);
  CMatrix q = qr.householderQ();
  CMatrix r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (int k = 0; k < d; ++k) {
    const cplx rk = r(k, k);
    const double a = std::abs(rk);
    q.col(k) *= (a > 0 ? rk / a : cplx(1.0));
  }
  return q;
}

inline CVector sample_haar_state(int d, Rng &rng) {
  CVector v = ginibre(d, 1, rng).col(0);
  return v / v.norm();
}

// Random density operator: partial trace of a Haar pure state on d x env.
inline CMatrix sample_density(int d, int env, Rng &rng) {
  CMatrix g = ginibre(d, env, rng);
  CMatrix r = g * g.adjoint();
  return r / r.trace().real();
}

// --------------------------------------------------------------- Uhlmann

// Extend the columns of a partial isometry `v` (out x in) to a full isometry
// when out >= in.  Columns that vanish are replaced by orthonormal vectors
// orthogonal to the range.
inline CMatrix complete_isometry(const CMatrix &v) {
  const long out = v.rows(), in = v.cols();
  if (out < in) throw dimension_error("complete_isometry: output smaller than input");
  Eigen::JacobiSVD<CMatrix> svd(v, Eigen::ComputeFullU | Eigen::ComputeFullV);
  // v ~ u_r w_r^dagger on its support; remaining inputs go to unused outputs
  return svd.matrixU().leftCols(in) * svd.matrixV().adjoint();
}

struct UhlmannResult {
  CMatrix map;               // complement_b x complement_a
  RegisterLayout from;       // complement of shared in psi_a
  RegisterLayout to;         // complement of shared in psi_b
  double overlap = 0;        // |<psi_b| (1 (x) V) |psi_a>|
  int rank = 0;
  bool is_isometry = false;  // true when completed to a full isometry
};

inline UhlmannResult uhlmann_isometry(const Ket &psi_a, const Ket &psi_b, const std::vector<std::string> &shared,
                                      bool complete = true) {
  for (auto &n : shared) {
    if (psi_a.layout.reg(n).dim != psi_b.layout.reg(n).dim)
      throw layout_error("uhlmann_isometry: shared register " + n + " differs in dimension");
  }
  auto comp_a = psi_a.layout.complement(shared);
  auto comp_b = psi_b.layout.complement(shared);
  RowMajorCMatrix A = psi_a.as_matrix(shared, comp_a);
  RowMajorCMatrix B = psi_b.as_matrix(shared, comp_b);
  CMatrix O = A.transpose() * B.conjugate();  // comp_a x comp_b
  Eigen::JacobiSVD<CMatrix> svd(O, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const auto &s = svd.singularValues();
  UhlmannResult res;
  res.from = psi_a.layout.ordered(comp_a);
  res.to = psi_b.layout.ordered(comp_b);
  int r = 0;
  while (r < s.size() && s(r) > 1e-9) ++r;
  res.rank = r;
  res.overlap = s.head(r).sum();
  CMatrix U = svd.matrixU(), W = svd.matrixV();
  res.map = W.leftCols(r) * U.leftCols(r).adjoint();
  if (complete && O.cols() >= O.rows()) {
    // pair the remaining input directions with unused output directions
    res.map = W.leftCols(O.rows()) * U.adjoint();
    res.is_isometry = true;
  }
  return res;
}

}  // namespace hsrd
