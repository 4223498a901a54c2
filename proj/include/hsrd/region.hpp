#pragma once

#include <array>
#include <limits>
#include <map>
#include <optional>

#include "hsrd/entropy.hpp"

namespace hsrd {

inline constexpr double inf = std::numeric_limits<double>::infinity();

// "CZ|BY" style register strings; primes stick to the preceding letter
inline Names regs(const std::string &s) {
  Names out;
  for (size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '\'') {
      if (out.empty()) throw layout_error("bad register string " + s);
      out.back() += '\'';
    } else {
      out.push_back(std::string(1, s[i]));
    }
  }
  return out;
}

inline std::string join(const Names &n) {
  std::string s;
  for (auto &x : n) s += x;
  return s;
}

// Entropies of one source, cached by (quantity, registers, smoothing).
class SourceEvaluator {
 public:
  explicit SourceEvaluator(const HybridSource &s, double tol = default_sdp_tol) : src_(validated(s)), tol_(tol) {}

  const HybridSource &source() const { return src_; }
  long dim(const Names &n) const {
    long d = 1;
    for (auto &r : expand_names(n)) d *= src_.dim(r);
    return d;
  }

  // eps >= 1 puts the zero operator in the ball: +inf
  double hmin(const Names &A, const Names &B, double eps) {
    if (eps >= 1) return inf;
    if (dim(A) == 1) return eps == 0 ? 0.0 : -std::log2(1 - eps * eps);
    return cached("hmin", A, B, eps, [&](const LabeledState &s) { return smooth_hmin(s, A, B, eps, tol_); });
  }
  double hmax(const Names &A, const Names &B, double eps) {
    if (eps >= 1) return -inf;
    if (dim(A) == 1) return eps == 0 ? 0.0 : std::log2(1 - eps * eps);
    return cached("hmax", A, B, eps, [&](const LabeledState &s) { return smooth_hmax(s, A, B, eps, tol_); });
  }
  double hstar(const Names &A, const Names &B, double iota, double kappa) {
    return std::max(hmin(A, B, iota), hmax(A, B, kappa));
  }
  double hmax_prime(const Names &A, double eps) {
    return cached("hmaxp", A, {}, eps, [&](const LabeledState &s) { return hsrd::hmax_prime(s, A, eps); });
  }
  double h(const Names &A, const Names &B = {}) {
    if (dim(A) == 1) return 0.0;
    return cached("h", A, B, 0, [&](const LabeledState &s) { return von_neumann_h(s, A, B); });
  }
  double mi(const Names &A, const Names &B) { return h(A) - h(A, B); }
  LabeledState marginal(const Names &n) const { return source_marginal(src_, n); }
  size_t cache_size() const { return cache_.size(); }

 private:
  template <class F>
  double cached(const char *q, Names A, Names B, double eps, F f) {
    A = expand_names(A);
    B = expand_names(B);
    Names sa = A, sb = B;
    std::sort(sa.begin(), sa.end());
    std::sort(sb.begin(), sb.end());
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", eps);
    const std::string key = std::string(q) + ":" + join(sa) + "|" + join(sb) + "@" + buf;
    auto it = cache_.find(key);
    if (it != cache_.end()) return it->second;
    Names all = A;
    all.insert(all.end(), B.begin(), B.end());
    const double v = f(source_marginal(src_, all));
    cache_[key] = v;
    return v;
  }

  HybridSource src_;
  double tol_;
  std::map<std::string, double> cache_;
};

// --------------------------------------------------------------- reports

using Coef = std::array<double, 4>;  // over (c, q, e, e0)

struct BoundRow {
  std::string label;  // left-hand side, e.g. "c+2q"
  Coef coef{};
  double rhs = 0;
  bool equality = false;
  std::string expr;    // right-hand side in words
  std::string params;  // smoothing parameters used
  std::string note;
};

struct ClosedForm {
  std::string label;
  std::string expr;
  double value;
};

struct BoundReport {
  std::string provenance;
  bool achievability = true;
  double eps = 0, delta = 0;
  std::vector<BoundRow> rows;
  std::vector<std::string> notes;
  std::optional<double> error_budget;
  std::vector<ClosedForm> closed;

  const BoundRow *find(const std::string &label) const {
    for (auto &r : rows)
      if (r.label == label) return &r;
    return nullptr;
  }
  const BoundRow &at(const std::string &label) const {
    if (auto r = find(label)) return *r;
    throw validation_error("report has no row " + label);
  }
};

struct RowCheck {
  std::string label;
  bool satisfied;
  double slack;
};

inline double lhs_value(const Coef &c, const RateTuple &t) { return c[0] * t.c + c[1] * t.q + c[2] * t.e + c[3] * t.e0; }

inline std::vector<RowCheck> check_tuple(const BoundReport &r, const RateTuple &t, double tol = 1e-9) {
  std::vector<RowCheck> out;
  for (auto &row : r.rows) {
    const double s = lhs_value(row.coef, t) - row.rhs;
    out.push_back({row.label, row.equality ? std::abs(s) <= tol : s >= -tol, s});
  }
  return out;
}

inline bool all_satisfied(const std::vector<RowCheck> &v) {
  for (auto &c : v)
    if (!c.satisfied) return false;
  return true;
}

namespace detail {

inline std::string lhs_text(const Coef &c) {
  static const char *sym[4] = {"c", "q", "e", "e0"};
  std::string s;
  for (int k = 0; k < 4; ++k) {
    if (c[k] == 0) continue;
    if (c[k] < 0) s += "-";
    else if (!s.empty()) s += "+";
    if (std::abs(c[k]) != 1) s += std::to_string(int(std::abs(c[k])));
    s += sym[k];
  }
  return s.empty() ? "0" : s;
}

inline const Coef c_2q{1, 2, 0, 0}, c_qe{1, 1, 1, 0}, q_e{0, 1, 1, 0}, e0_{0, 0, 0, 1}, cq_e{1, 1, -1, 0},
    q_me{0, 1, -1, 0}, c_{1, 0, 0, 0};

// Builds rows for one report; registers of dimension 1 are dropped from the
// entropy arguments when `strip` is set (the scenario view).
struct Builder {
  SourceEvaluator &ev;
  bool strip = false;
  Coef zero_mask{1, 1, 1, 1};  // rates fixed to zero by a scenario
  BoundReport rep;

  explicit Builder(SourceEvaluator &e, bool s = false, Coef m = {1, 1, 1, 1}) : ev(e), strip(s), zero_mask(m) {}

  Names n(const std::string &s) const {
    Names all = regs(s), out;
    for (auto &r : all)
      if (!strip || ev.dim({r}) > 1) out.push_back(r);
    return out;
  }
  std::string arg(const std::string &t, const std::string &c) const {
    std::string a = join(n(t)), b = join(n(c));
    return b.empty() ? "(" + a + ")" : "(" + a + "|" + b + ")";
  }
  double hmin(const std::string &t, const std::string &c, double e) { return ev.hmin(n(t), n(c), e); }
  double hmax(const std::string &t, const std::string &c, double e) { return ev.hmax(n(t), n(c), e); }
  double hstar(const std::string &t, const std::string &c, double i, double k) { return ev.hstar(n(t), n(c), i, k); }
  double hmaxp(const std::string &t, double e) { return ev.hmax_prime(n(t), e); }
  double h(const std::string &t, const std::string &c = "") { return ev.h(n(t), n(c)); }

  void row(const Coef &coef, double rhs, std::string expr, std::string params = "", std::string note = "",
           bool eq = false) {
    Coef eff = coef;
    for (int k = 0; k < 4; ++k) eff[k] *= zero_mask[k];
    if (rhs == -inf && !eq) {
      rep.notes.push_back("row " + lhs_text(eff) + " is vacuous (right-hand side is -inf): " + expr);
      return;
    }
    if (!std::isfinite(rhs)) throw domain_error("bound " + lhs_text(eff) + " has non-finite right-hand side");
    BoundRow r;
    r.coef = eff;
    r.label = lhs_text(eff);
    for (auto &o : rep.rows)
      if (o.label == r.label) r.label += "'";
    r.rhs = rhs;
    r.equality = eq;
    r.expr = std::move(expr);
    r.params = std::move(params);
    r.note = std::move(note);
    rep.rows.push_back(r);
  }
};

inline void require_unit_open(double x, const char *what) {
  if (!(x > 0 && x < 1)) throw domain_error(std::string(what) + " must lie in (0, 1)");
}

}  // namespace detail

enum class DeltaStatus { zero, nonnegative_unknown };

inline DeltaStatus delta_structural_zero(const HybridSource &s) {
  if (s.dY == 1 || (s.dA == 1 && s.dC == 1)) return DeltaStatus::zero;
  return DeltaStatus::nonnegative_unknown;
}

inline double direct_error_budget(double eps, double delta) {
  return 4 * std::sqrt(12 * eps + 6 * delta) + std::sqrt(2.0) * eps;
}

namespace detail {

inline void direct_rows(Builder &b, double eps, double delta) {
  const double ld2 = std::log2(delta * delta), ld2h = std::log2(delta * delta / 2),
               ld4h = std::log2(std::pow(delta, 4) / 2);
  const double e2 = eps / 2, e32 = 1.5 * eps;
  if (e32 >= 1) throw domain_error("direct bound needs 3 eps / 2 < 1");
  if (b.ev.source().dC == 1) {
    b.row(c_, b.hmax("Z", "BY", eps) - ld2h, "Hmax^e" + b.arg("Z", "BY") + " - log(d^2/2)", "e");
    return;
  }
  const double hI = b.hstar("C", "AXYZ", e32, e2) + b.hmax("CZ", "BY", e2);
  const double hII = b.hmax("C", "AXZ", e2) + b.hmax("C", "BXYZ", e2);
  b.row(c_2q, std::max(hI, hII) - ld4h,
        "max{H*" + b.arg("C", "AXYZ") + " + Hmax" + b.arg("CZ", "BY") + ", Hmax" + b.arg("C", "AXZ") + " + Hmax" +
            b.arg("C", "BXYZ") + "} - log(d^4/2)",
        "H*: (3e/2, e/2); Hmax: e/2");
  b.row(c_qe, b.hmax("CZ", "BY", e2) - ld2h, "Hmax" + b.arg("CZ", "BY") + " - log(d^2/2)", "e/2");
  b.row(q_e, b.hmax("C", "BXYZ", e2) - ld2, "Hmax" + b.arg("C", "BXYZ") + " - log d^2", "e/2");
  b.row(e0_, 0.5 * (b.hmaxp("C", eps * eps / 8) - b.hmax("C", "BXYZ", e32)) + std::log2(delta),
        "(Hmax'(C) - Hmax" + b.arg("C", "BXYZ") + ")/2 + log d", "Hmax': e^2/8; Hmax: 3e/2");
}

inline void converse_rows(Builder &b, double eps, double delta, bool dzero) {
  const double e1 = 12 * eps + 6 * std::sqrt(delta), e2 = 11 * eps + 8 * std::sqrt(delta);
  const double f = f_eps(eps);
  const double hIp = b.hmin("AC", "XYZ", eps) - b.hmax("A", "XYZ", eps) + b.hmin("BYCZ", "", eps) - b.hmin("BY", "", e1);
  const double hIIp =
      b.hmin("AXCZ", "", eps) - b.hmax("AXZ", "", eps) + b.hmin("BC", "XYZ", eps) - b.hmin("B", "XYZ", e2);
  const std::string sI = "Hmin" + b.arg("AC", "XYZ") + " - Hmax" + b.arg("A", "XYZ") + " + Hmin" + b.arg("BYCZ", "") +
                         " - Hmin" + b.arg("BY", "");
  const std::string sII = "Hmin" + b.arg("AXCZ", "") + " - Hmax" + b.arg("AXZ", "") + " + Hmin" +
                          b.arg("BC", "XYZ") + " - Hmin" + b.arg("B", "XYZ");
  const std::string params = "e; " + std::to_string(e1) + "; " + std::to_string(e2);
  if (dzero) {
    b.row(c_2q, std::max(hIp, hIIp) - 6 * f, "max{" + sI + ", " + sII + "} - 6f(e)", params,
          "Delta = 0 (structural)");
  } else {
    b.row(c_2q, hIp - 6 * f, sI + " - 6f(e)", params, "Delta not evaluated; second branch omitted");
    char buf[96];
    std::snprintf(buf, sizeof buf, "second branch %.6f - Delta - 6f(e) with Delta not evaluated", hIIp);
    b.rep.notes.push_back(buf);
  }
  b.row(c_qe, b.hmin("BYCZ", "", eps) - b.hmin("BY", "", e1) - f,
        "Hmin" + b.arg("BYCZ", "") + " - Hmin" + b.arg("BY", "") + " - f(e)", params);
  b.row(q_e, b.hmin("BC", "XYZ", eps) - b.hmin("B", "XYZ", e2) - 2 * f,
        "Hmin" + b.arg("BC", "XYZ") + " - Hmin" + b.arg("B", "XYZ") + " - 2f(e)", params);
}

inline void asymptotic_rows(Builder &b, bool outer, bool dzero) {
  const double hI = b.h("C", "AXYZ") + b.h("CZ", "BY");
  const double hII = b.h("C", "AXZ") + b.h("C", "BXYZ");
  const std::string sI = "H" + b.arg("C", "AXYZ") + " + H" + b.arg("CZ", "BY");
  const std::string sII = "H" + b.arg("C", "AXZ") + " + H" + b.arg("C", "BXYZ");
  if (!outer || dzero) {
    b.row(c_2q, std::max(hI, hII), "max{" + sI + ", " + sII + "}", "", outer ? "Delta~ = 0 (structural)" : "");
  } else {
    b.row(c_2q, hI, sI, "", "Delta~ not evaluated; second branch omitted");
  }
  b.row(c_qe, b.h("CZ", "BY"), "H" + b.arg("CZ", "BY"));
  b.row(q_e, b.h("C", "BXYZ"), "H" + b.arg("C", "BXYZ"));
  if (!outer) b.row(e0_, 0.5 * (b.h("C") - b.h("C", "BXYZ")), "I(C:" + join(b.n("BXYZ")) + ")/2");
}

}  // namespace detail

inline BoundReport direct_bound(SourceEvaluator &ev, double eps, double delta) {
  detail::require_unit_open(eps, "eps");
  detail::require_unit_open(delta, "delta");
  detail::Builder b{ev};
  b.rep.provenance = "direct";
  b.rep.eps = eps;
  b.rep.delta = delta;
  detail::direct_rows(b, eps, delta);
  b.rep.error_budget = direct_error_budget(eps, delta);
  return b.rep;
}
inline BoundReport direct_bound(const HybridSource &s, double eps, double delta) {
  SourceEvaluator ev(s);
  return direct_bound(ev, eps, delta);
}

inline BoundReport converse_bound(SourceEvaluator &ev, double eps, double delta) {
  detail::require_unit_open(eps, "eps");
  if (!(delta >= 0 && delta < 1)) throw domain_error("delta must lie in [0, 1)");
  detail::Builder b{ev};
  b.rep.provenance = "converse";
  b.rep.achievability = false;
  b.rep.eps = eps;
  b.rep.delta = delta;
  detail::converse_rows(b, eps, delta, delta_structural_zero(ev.source()) == DeltaStatus::zero);
  return b.rep;
}
inline BoundReport converse_bound(const HybridSource &s, double eps, double delta) {
  SourceEvaluator ev(s);
  return converse_bound(ev, eps, delta);
}

struct AsymptoticRegion {
  BoundReport inner, outer;
};

inline AsymptoticRegion asymptotic_region(SourceEvaluator &ev) {
  const bool dz = delta_structural_zero(ev.source()) == DeltaStatus::zero;
  detail::Builder bi{ev}, bo{ev};
  bi.rep.provenance = "asymptotic-inner";
  bo.rep.provenance = "asymptotic-outer";
  bo.rep.achievability = false;
  detail::asymptotic_rows(bi, false, dz);
  detail::asymptotic_rows(bo, true, dz);
  return {bi.rep, bo.rep};
}
inline AsymptoticRegion asymptotic_region(const HybridSource &s) {
  SourceEvaluator ev(s);
  return asymptotic_region(ev);
}

// modified = true replaces the c+q-e row by Hmax(C|AXZ)
inline BoundReport prop_direct_bound(SourceEvaluator &ev, double eps, double delta, bool modified = false) {
  using namespace detail;
  require_unit_open(eps, "eps");
  require_unit_open(delta, "delta");
  Builder b{ev};
  b.rep.provenance = modified ? "prop-direct-modified" : "prop-direct";
  b.rep.eps = eps;
  b.rep.delta = delta;
  b.rep.error_budget = 4 * std::sqrt(12 * eps + 6 * delta);
  const double ld2 = std::log2(delta * delta), ld2h = std::log2(delta * delta / 2);
  if (ev.source().dC == 1) {
    b.row(c_, std::max(b.hmax("Z", "AX", eps), b.hmax("Z", "BY", eps)) - ld2h,
          "max{Hmax(Z|AX), Hmax(Z|BY)} - log(d^2/2)", "e");
    return b.rep;
  }
  if (modified)
    b.row(cq_e, b.hmax("C", "AXZ", eps) - ld2h, "Hmax(C|AXZ) - log(d^2/2)", "e");
  else
    b.row(cq_e, b.hmax("CZ", "AX", eps) - ld2h, "Hmax(CZ|AX) - log(d^2/2)", "e");
  b.row(q_me, b.hmax("C", "AXYZ", eps) - ld2, "Hmax(C|AXYZ) - log d^2", "e");
  b.row(c_qe, b.hmax("CZ", "BY", eps) - ld2h, "Hmax(CZ|BY) - log(d^2/2)", "e");
  b.row(q_e, b.hmax("C", "BXYZ", eps) - ld2, "Hmax(C|BXYZ) - log d^2", "e");
  b.row({0, 1, 1, 2}, std::log2(double(ev.source().dC)), "log d_C", "", "", true);
  return b.rep;
}

// intermediate form: single smoothing parameter, e0 tied to log d_C
inline BoundReport prop2_bound(SourceEvaluator &ev, double eps, double delta) {
  using namespace detail;
  require_unit_open(eps, "eps");
  require_unit_open(delta, "delta");
  Builder b{ev};
  b.rep.provenance = "prop-direct-2";
  b.rep.eps = eps;
  b.rep.delta = delta;
  b.rep.error_budget = 4 * std::sqrt(12 * eps + 6 * delta);
  const double ld2 = std::log2(delta * delta), ld2h = std::log2(delta * delta / 2),
               ld4h = std::log2(std::pow(delta, 4) / 2);
  if (ev.source().dC == 1) {
    b.row(c_, b.hmax("Z", "BY", eps) - ld2h, "Hmax(Z|BY) - log(d^2/2)", "e");
    return b.rep;
  }
  const double hI = b.hstar("C", "AXYZ", eps, eps) + b.hmax("CZ", "BY", eps);
  const double hII = b.hmax("C", "AXZ", eps) + b.hmax("C", "BXYZ", eps);
  b.row(c_2q, std::max(hI, hII) - ld4h, "max{H*(C|AXYZ) + Hmax(CZ|BY), Hmax(C|AXZ) + Hmax(C|BXYZ)} - log(d^4/2)",
        "e");
  b.row(c_qe, b.hmax("CZ", "BY", eps) - ld2h, "Hmax(CZ|BY) - log(d^2/2)", "e");
  b.row(q_e, b.hmax("C", "BXYZ", eps) - ld2, "Hmax(C|BXYZ) - log d^2", "e");
  b.row(e0_, 0.5 * (std::log2(double(ev.source().dC)) - b.hmax("C", "BXYZ", eps)) + std::log2(delta),
        "(log d_C - Hmax(C|BXYZ))/2 + log d", "e");
  return b.rep;
}

// ----------------------------------------------------- teleport / dense code

inline RateTuple tpdc_extend(const RateTuple &t, double lambda, double mu, double e0_new) {
  if (lambda < 0 || mu < 0) throw domain_error("tpdc_extend: lambda and mu must be >= 0");
  const double d = lambda - mu;
  if (d < -t.c / 2 - 1e-12 || d > t.q + 1e-12) throw domain_error("tpdc_extend: need -c/2 <= lambda - mu <= q");
  if (e0_new < t.e0 - 1e-12) throw domain_error("tpdc_extend: e0_new must be >= e0");
  return {std::max(0.0, t.c + 2 * d), std::max(0.0, t.q - d), t.e + lambda + mu, e0_new};
}

struct TpdcPreimage {
  RateTuple base;
  double lambda = 0, mu = 0;
};

// For a tuple meeting the intermediate form, the tuple it extends from via
// teleportation and dense coding (modified single-smoothing form).
inline TpdcPreimage prop2_preimage(SourceEvaluator &ev, const RateTuple &t, double eps, double delta) {
  if (ev.source().dC == 1) throw domain_error("prop2_preimage: needs d_C >= 2");
  const double ld2 = std::log2(delta * delta), ld2h = std::log2(delta * delta / 2);
  const double H3 = ev.hmax(regs("CZ"), regs("BY"), eps) - ld2h;
  const double H4 = ev.hmax(regs("C"), regs("BXYZ"), eps) - ld2;
  TpdcPreimage p;
  p.mu = 0.5 * (t.q + t.e - H4);
  p.lambda = 0.5 * (t.c + t.q + t.e - H3);
  p.base = {t.c - 2 * p.lambda + 2 * p.mu, t.q + p.lambda - p.mu, t.e - p.lambda - p.mu,
            0.5 * (std::log2(double(ev.source().dC)) - H4)};
  return p;
}

// ------------------------------------------------------------- scenarios

struct ScenarioSpec {
  std::string id;
  std::string title;
  std::string trivial;   // registers that must be one-dimensional
  std::string zero;      // rates fixed to zero, among "cqe0" letters: c q e E(=e0)
};

inline const std::vector<ScenarioSpec> &scenarios() {
  static const std::vector<ScenarioSpec> s{
      {"fqsr", "fully quantum state redistribution", "XYZ", "c"},
      {"fq_slepian_wolf", "fully quantum Slepian-Wolf", "XYZA", "c"},
      {"state_splitting", "quantum state splitting", "XYZB", "c"},
      {"state_merging", "quantum state merging", "XYZA", "q"},
      {"cdc_qsi", "classical compression with quantum side information", "AXYC", "qeE"},
      {"qdc_csi", "quantum compression with classical side information", "AXZB", "c"},
      {"classical_slepian_wolf", "classical Slepian-Wolf", "AXBC", "qeE"},
      {"qsr_csi_decoder", "redistribution with classical side information at the decoder", "XZ", "c"},
  };
  return s;
}

inline const ScenarioSpec &scenario(const std::string &id) {
  for (auto &s : scenarios())
    if (s.id == id) return s;
  throw scenario_error("unknown scenario " + id);
}

inline void check_scenario(const HybridSource &s, const ScenarioSpec &sc) {
  for (auto &r : regs(sc.trivial))
    if (s.dim(r) != 1)
      throw scenario_error(sc.id + " needs register " + r + " to be trivial (dimension " + std::to_string(s.dim(r)) +
                           ")");
}

namespace detail {

inline void closed_forms(Builder &b, const std::string &id) {
  auto &cf = b.rep.closed;
  if (id == "fqsr") {
    cf.push_back({"2q", "H(C|A)+H(C|B)", b.h("C", "A") + b.h("C", "B")});
    cf.push_back({"q+e", "H(C|B)", b.h("C", "B")});
  } else if (id == "fq_slepian_wolf") {
    cf.push_back({"2q", "H(C)+H(C|B)", b.h("C") + b.h("C", "B")});
    cf.push_back({"q+e", "H(C|B)", b.h("C", "B")});
  } else if (id == "state_splitting") {
    cf.push_back({"2q", "H(C|A)+H(C)", b.h("C", "A") + b.h("C")});
    cf.push_back({"q+e", "H(C)", b.h("C")});
    cf.push_back({"q", "(H(C)+H(C|A))/2", 0.5 * (b.h("C") + b.h("C", "A"))});
    cf.push_back({"e", "(H(C)-H(C|A))/2", 0.5 * (b.h("C") - b.h("C", "A"))});
  } else if (id == "state_merging") {
    cf.push_back({"c", "H(C)+H(C|B)", b.h("C") + b.h("C", "B")});
    cf.push_back({"e", "H(C|B)", b.h("C", "B")});
  } else if (id == "cdc_qsi") {
    cf.push_back({"c", "H(Z|B)", b.h("Z", "B")});
  } else if (id == "qdc_csi") {
    cf.push_back({"q", "(H(C)+H(C|Y))/2", 0.5 * (b.h("C") + b.h("C", "Y"))});
  } else if (id == "classical_slepian_wolf") {
    cf.push_back({"c", "H(Z|Y)", b.h("Z", "Y")});
  } else if (id == "qsr_csi_decoder") {
    cf.push_back({"2q", "H(C|A)+H(C|BY)", b.h("C", "A") + b.h("C", "BY")});
    cf.push_back({"q+e", "H(C|BY)", b.h("C", "BY")});
    cf.push_back({"e0", "I(C:BY)/2", 0.5 * (b.h("C") - b.h("C", "BY"))});
  }
}

}  // namespace detail

struct ScenarioReport {
  std::string scenario;
  std::vector<std::string> constraints;
  BoundReport direct, converse, inner, outer;
  std::vector<ClosedForm> closed;
};

inline ScenarioReport reduce_scenario(SourceEvaluator &ev, const std::string &id, double eps, double delta) {
  using namespace detail;
  const ScenarioSpec &sc = scenario(id);
  check_scenario(ev.source(), sc);
  require_unit_open(eps, "eps");
  require_unit_open(delta, "delta");
  Coef mask{1, 1, 1, 1};
  ScenarioReport out;
  out.scenario = id;
  for (char z : sc.zero) {
    const int k = z == 'c' ? 0 : z == 'q' ? 1 : z == 'e' ? 2 : 3;
    mask[k] = 0;
    out.constraints.push_back(std::string(k == 3 ? "e0" : std::string(1, z)) + " = 0");
  }
  const bool dz = delta_structural_zero(ev.source()) == DeltaStatus::zero;
  auto make = [&](const char *prov, bool ach) {
    Builder b{ev, true, mask};
    b.rep.provenance = std::string(prov) + ":" + id;
    b.rep.achievability = ach;
    b.rep.eps = eps;
    b.rep.delta = delta;
    return b;
  };
  Builder d = make("direct", true);
  direct_rows(d, eps, delta);
  d.rep.error_budget = direct_error_budget(eps, delta);
  Builder c = make("converse", false);
  converse_rows(c, eps, delta, dz);
  Builder i = make("asymptotic-inner", true), o = make("asymptotic-outer", false);
  asymptotic_rows(i, false, dz);
  asymptotic_rows(o, true, dz);
  Builder cf = make("closed", true);
  closed_forms(cf, id);
  out.direct = d.rep;
  out.converse = c.rep;
  out.inner = i.rep;
  out.outer = o.rep;
  out.closed = cf.rep.closed;
  return out;
}

// ----------------------------------------------------------- Delta for F

struct DeltaForMap {
  double value = 0;
  bool decoupling_ok = false;
  double distance = 0;  // upper bound on the infimum over product states
};

namespace detail {

inline void require_diagonal(const LabeledState &s, const std::string &reg, const char *who) {
  LabeledState d = dephase(s, reg);
  if ((d.matrix - s.matrix).cwiseAbs().maxCoeff() > 1e-9)
    throw validation_error(std::string(who) + ": output not diagonal on " + reg);
}

}  // namespace detail

// F acts on A X C Z and outputs registers A, G, M (M classical)
inline DeltaForMap delta_for_map(const HybridSource &spec, const Channel &F, double eps, double delta) {
  HybridSource s = validated(spec);
  for (auto n : {"A", "X", "C", "Z"})
    if (!F.in.contains(n) || F.in.reg(n).dim != s.dim(n)) throw layout_error(std::string("F input must carry ") + n);
  if (F.in.size() != 4) throw layout_error("F input must be exactly A X C Z");
  for (auto n : {"A", "G", "M"})
    if (!F.out.contains(n)) throw layout_error(std::string("F output must carry ") + n);
  if (F.out.size() != 3 || F.out.reg("A").dim != s.dA) throw layout_error("F output must be exactly A G M");
  if (F.tp_defect() > 1e-8) throw validation_error("F is not trace preserving");
  // diagonal on M for every input: probe with a maximally entangled input
  {
    const int din = int(F.in.total_dim());
    std::vector<Register> rr = F.in.registers();
    rr.push_back({"ref", din});
    LabeledState probe{projector(max_entangled(din)), RegisterLayout(rr)};
    detail::require_diagonal(apply_channel(probe, F), "M", "delta_for_map");
  }
  LabeledState src = source_marginal(s, regs("XZACRX'Y'Z'"));
  LabeledState out = apply_channel(src, F);  // A G M R X' Y' Z'
  const double eta = 7 * eps + 4 * std::sqrt(delta);
  if (eta >= 1) throw domain_error("delta_for_map: smoothing 7e+4sqrt(d) must be < 1");
  DeltaForMap r;
  r.value = smooth_hmin(out, {"G"}, {"M", "A", "X'", "Z'"}, eta) -
            smooth_hmin(out, {"G"}, {"M", "A", "X'", "Z'", "Y'"}, eta);
  // product candidate: omega_xyz = the G M block of each label
  LabeledState o = out.ordered({"X'", "Y'", "Z'", "A", "R", "G", "M"});
  const int dt = s.dX * s.dY * s.dZ, dar = s.dA * s.dR, dgm = int(F.out.reg("G").dim * F.out.reg("M").dim);
  const int blk = dar * dgm;
  CMatrix target = CMatrix::Zero(o.matrix.rows(), o.matrix.cols());
  for (int t = 0; t < dt; ++t) {
    CMatrix b = o.matrix.block(t * blk, t * blk, blk, blk);
    const double p = b.trace().real();
    if (p <= 0) continue;
    CMatrix ar = detail::trace_second(b, dar, dgm), gm = detail::trace_first(b, dar, dgm);
    target.block(t * blk, t * blk, blk, blk) = detail::kron(ar, gm) / p;
  }
  r.distance = purified_distance(o.matrix, target);
  r.decoupling_ok = r.distance <= 2 * std::sqrt(delta) + 1e-12;
  return r;
}

}  // namespace hsrd
