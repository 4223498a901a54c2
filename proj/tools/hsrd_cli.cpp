#include <CLI11.hpp>
#include <cstdio>
#include <iostream>
#include <set>

#include "hsrd/io.hpp"

using namespace hsrd;

namespace {

enum Exit { ok = 0, invalid = 2, solver = 3, infeasible = 4 };

struct Common {
  std::string state, out, format = "csv";
  double eps = 0, delta = 0.05;
  std::uint64_t seed = 1;
};

void emit(const Common &c, const std::string &text) {
  if (c.out.empty()) std::cout << text;
  else write_text(c.out, text);
}

void need_unit(double v, const char *name, bool open_low) {
  if (!(v < 1) || v < 0 || (open_low && v == 0)) throw input_error(std::string(name) + " must lie in [0, 1)");
}

std::pair<Names, Names> parse_systems(const std::string &s) {
  static const std::set<std::string> known{"A", "B", "C", "R", "X", "Y", "Z", "X'", "Y'", "Z'"};
  const auto bar = s.find('|');
  if (bar == std::string::npos || s.find('|', bar + 1) != std::string::npos)
    throw input_error("systems must look like TARGET|CONDITIONING");
  Names a, b;
  try {
    a = regs(s.substr(0, bar));
    b = regs(s.substr(bar + 1));
  } catch (const error &) {
    throw input_error("bad systems string " + s);
  }
  if (a.empty()) throw input_error("empty target in " + s);
  std::set<std::string> seen;
  for (auto *v : {&a, &b})
    for (auto &r : *v) {
      if (!known.count(r)) throw input_error("unknown register " + r);
      if (!seen.insert(r).second) throw input_error("register " + r + " repeated");
    }
  return {a, b};
}

RateTuple parse_tuple(const std::string &s) {
  std::vector<double> v;
  std::stringstream in(s);
  std::string tok;
  while (std::getline(in, tok, ',')) {
    try {
      size_t used = 0;
      v.push_back(std::stod(tok, &used));
      if (used != tok.size()) throw std::invalid_argument(tok);
    } catch (const std::exception &) {
      throw input_error("bad number in tuple: " + tok);
    }
  }
  if (v.size() != 4) throw input_error("tuple must be c,q,e,e0");
  RateTuple t{v[0], v[1], v[2], v[3]};
  try {
    validate_rates(t);
  } catch (const error &e) {
    throw input_error(e.what());
  }
  return t;
}

int exit_for(const std::exception &e) {
  std::fprintf(stderr, "error: %s\n", e.what());
  if (dynamic_cast<const solver_error *>(&e)) return solver;
  if (dynamic_cast<const plan_error *>(&e)) return infeasible;
  return invalid;
}

// ---------------------------------------------------------------- entropy

int cmd_entropy(const Common &c, const std::string &quantity, const std::string &systems) {
  auto [A, B] = parse_systems(systems);
  need_unit(c.eps, "eps", false);
  SourceEvaluator ev(read_source(c.state));
  double v;
  if (quantity == "hmin") v = ev.hmin(A, B, c.eps);
  else if (quantity == "hmax") v = ev.hmax(A, B, c.eps);
  else if (quantity == "h") v = ev.h(A, B);
  else if (quantity == "mi") v = ev.mi(A, B);
  else if (quantity == "hmaxp") {
    if (!B.empty()) throw input_error("hmaxp takes no conditioning");
    v = ev.hmax_prime(A, c.eps);
  } else
    throw input_error("unknown quantity " + quantity);
  emit(c, fmt6(v) + "\n");
  return ok;
}

// ----------------------------------------------------------------- region

std::string render(const Common &c, const std::vector<BoundReport> &rs) {
  if (c.format == "json") {
    json j = json::array();
    for (auto &r : rs) j.push_back(report_json(r));
    return (rs.size() == 1 ? j[0] : j).dump(2) + "\n";
  }
  if (c.format != "csv") throw input_error("region output is csv or json");
  std::string s = report_csv_header;
  for (auto &r : rs) s += report_csv_rows(r);
  return s;
}

int cmd_region(const Common &c, const std::string &kind) {
  SourceEvaluator ev(read_source(c.state));
  if (kind == "direct") {
    need_unit(c.eps, "eps", true);
    need_unit(c.delta, "delta", true);
    emit(c, render(c, {direct_bound(ev, c.eps, c.delta)}));
  } else if (kind == "converse") {
    need_unit(c.eps, "eps", true);
    need_unit(c.delta, "delta", false);
    emit(c, render(c, {converse_bound(ev, c.eps, c.delta)}));
  } else if (kind == "asymptotic") {
    auto a = asymptotic_region(ev);
    emit(c, render(c, {a.inner, a.outer}));
  } else {
    throw input_error("region kind is direct, converse or asymptotic");
  }
  return ok;
}

int cmd_reduce(const Common &c, const std::string &id) {
  need_unit(c.eps, "eps", true);
  need_unit(c.delta, "delta", true);
  SourceEvaluator ev(read_source(c.state));
  ScenarioReport r;
  try {
    r = reduce_scenario(ev, id, c.eps, c.delta);
  } catch (const scenario_error &e) {
    throw input_error(e.what());
  }
  if (c.format == "json") emit(c, scenario_json(r).dump(2) + "\n");
  else if (c.format == "csv") emit(c, scenario_csv(r));
  else throw input_error("reduce output is csv or json");
  return ok;
}

// --------------------------------------------------------------- decouple

int cmd_decouple(const Common &c, const std::string &config) {
  json cfg = read_json_file(config);
  if (!cfg.contains("configs") || !cfg["configs"].is_array()) throw input_error("config needs a configs array");
  Rng rng(c.seed);
  std::ostringstream o;
  json rows = json::array();
  o << "index,J_L,J_R,dC_L,dC_R,dS,env,eps,delta,hmin,hmin_dephased,cond1,cond2,status,empirical_mean,"
       "bound_4eps_2delta,lemma_bound\n";
  int idx = 0;
  for (auto &k : cfg["configs"]) {
    PartialTraceConfig p;
    int dS = 1, env = 4;
    try {
      p.JL = k.value("J_L", 1);
      p.JR = k.value("J_R", 2);
      p.dCL = k.value("dC_L", 1);
      p.dCR = k.value("dC_R", 2);
      p.eps = k.value("eps", 0.0);
      p.delta = k.value("delta", 0.3);
      p.samples = k.value("samples", 200);
      dS = k.value("dS", 1);
      env = k.value("env", 4);
    } catch (const json::exception &e) {
      throw input_error(std::string("bad decouple config: ") + e.what());
    }
    if (p.samples < 1) throw input_error("samples must be >= 1");
    need_unit(p.eps, "eps", false);
    if (!(p.delta > 0)) throw input_error("delta must be > 0");
    const int J = p.JL * p.JR, dC = p.dCL * p.dCR;
    LabeledState psi = random_decoupling_state(J, dC, dS, env, rng);
    PartialTraceReport r = verify_partial_trace_case(psi, p, rng);
    double lemma = std::numeric_limits<double>::quiet_NaN();
    if (J >= 2) lemma = decoupling_bound(psi, partial_trace_channel(p.JL, p.JR, p.dCL, p.dCR)).bound;
    const std::string status = r.conditions ? "ok" : "hypothesis unmet";
    o << idx << ',' << p.JL << ',' << p.JR << ',' << p.dCL << ',' << p.dCR << ',' << dS << ',' << env << ','
      << fmt6(p.eps) << ',' << fmt6(p.delta) << ',' << fmt6(r.hmin) << ',' << fmt6(r.hmin_dephased) << ','
      << (r.cond1 ? 1 : 0) << ',' << (r.cond2 ? 1 : 0) << ',' << status << ',' << fmt6(r.empirical_mean) << ','
      << fmt6(r.bound) << ',' << fmt6(lemma) << '\n';
    rows.push_back({{"index", idx}, {"hmin", jnum(r.hmin)}, {"hmin_dephased", jnum(r.hmin_dephased)},
                    {"status", status}, {"empirical_mean", jnum(r.empirical_mean)}, {"bound", jnum(r.bound)},
                    {"lemma_bound", jnum(lemma)}, {"seed", c.seed}});
    ++idx;
  }
  if (c.format == "json") emit(c, rows.dump(2) + "\n");
  else if (c.format == "csv") emit(c, o.str());
  else throw input_error("decouple output is csv or json");
  return ok;
}

// --------------------------------------------------------------- protocol

// identity followed by dense coding, teleportation and extra ebits, solved for t
RedistProtocol standard_protocol(const HybridSource &s, const RateTuple &t) {
  const double lc = std::log2(double(s.dC)), lz = std::log2(double(s.dZ));
  const double lambda = (t.e + lc - t.q) / 2, mu = (t.e - lc + t.q) / 2;
  auto integral = [](double v) { return std::abs(v - std::round(v)) < 1e-9 && v > -1e-9; };
  if (!integral(lambda) || !integral(mu) || !integral(t.e0) || std::abs(t.c - (lz + 2 * lambda - 2 * mu)) > 1e-9)
    throw plan_error("tuple is not identity + teleportation/dense coding/catalyst; nearest such tuple has c = " +
                     fmt6(lz + 2 * std::round(lambda) - 2 * std::round(mu)));
  return tpdc_protocol(identity_protocol(s), s, int(std::lround(lambda)), int(std::lround(mu)),
                       int(std::lround(t.e0)));
}

CMatrix shift_hamiltonian(int d) {
  CMatrix H = CMatrix::Zero(d, d);
  for (int j = 0; j + 1 < d; ++j) H(j, j + 1) = H(j + 1, j) = 1;
  return H;
}

int cmd_protocol(const Common &c, const std::string &action, const std::string &tuple, double noise, int tries) {
  HybridSource s = read_source(c.state);
  RateTuple t = parse_tuple(tuple);
  std::ostringstream o;
  json j;
  if (action == "run") {
    RedistProtocol p = standard_protocol(s, t);
    if (noise != 0) p = with_output_rotation(p, shift_hamiltonian(s.dC), noise);
    ProtocolReport r = run_protocol(s, p);
    r.seeds = {c.seed};
    o << "protocol,c,q,e,e0,error,branches\n"
      << p.name << ',' << fmt6(t.c) << ',' << fmt6(t.q) << ',' << fmt6(t.e) << ',' << fmt6(t.e0) << ','
      << fmt6(r.error) << ',' << r.branches << '\n';
    j = protocol_json(r);
    j["protocol"] = p.name;
  } else if (action == "construct") {
    need_unit(c.eps, "eps", false);
    ConstructedProtocol cp = construct_protocol(s, t, c.eps, c.seed, c.delta, tries);
    const bool within = cp.report.error <= cp.report.budget + 1e-9;
    o << "c,q,e,e0,eps,delta,found,tries,error,budget,within_budget,seed\n"
      << fmt6(t.c) << ',' << fmt6(t.q) << ',' << fmt6(t.e) << ',' << fmt6(t.e0) << ',' << fmt6(cp.eps) << ','
      << fmt6(cp.delta) << ',' << (cp.pair.found ? 1 : 0) << ',' << cp.pair.tries << ',' << fmt6(cp.report.error)
      << ',' << fmt6(cp.report.budget) << ',' << (within ? 1 : 0) << ',' << c.seed << '\n';
    j = protocol_json(cp.report);
    j["delta"] = jnum(cp.delta);
    j["eps"] = cp.eps;
    j["found"] = cp.pair.found;
    j["tries"] = cp.pair.tries;
    j["dims"] = {{"Z_L", cp.plan.dZL}, {"Z_R", cp.plan.dZR}, {"C1", cp.plan.dC1}, {"C2", cp.plan.dC2},
                 {"C3", cp.plan.dC3}};
  } else if (action == "audit") {
    need_unit(c.eps, "eps", true);
    RedistProtocol p = standard_protocol(s, t);
    if (noise != 0) p = with_output_rotation(p, shift_hamiltonian(s.dC), noise);
    SourceEvaluator ev(s);
    ConverseAudit a = audit_converse(ev, p, c.eps);
    o << "label,lhs_minus_rhs,satisfied,delta\n";
    if (a.vacuous) o << "vacuous,,1," << fmt6(a.delta) << '\n';
    for (auto &k : a.checks)
      o << csv_field(k.label) << ',' << fmt6(k.slack) << ',' << (k.satisfied ? 1 : 0) << ',' << fmt6(a.delta) << '\n';
    j["delta"] = jnum(a.delta);
    j["satisfied"] = a.satisfied;
    j["vacuous"] = a.vacuous;
    j["rows"] = json::array();
    for (auto &k : a.checks) j["rows"].push_back({{"label", k.label}, {"slack", jnum(k.slack)}, {"satisfied", k.satisfied}});
  } else {
    throw input_error("protocol action is run, construct or audit");
  }
  if (c.format == "json") emit(c, j.dump(2) + "\n");
  else if (c.format == "csv") emit(c, o.str());
  else throw input_error("protocol output is csv or json");
  return ok;
}

// ------------------------------------------------------------------ sweep

struct Axis {
  std::string name;
  std::vector<double> values;
};

Axis parse_axis(const std::string &spec) {
  std::vector<std::string> parts;
  std::stringstream in(spec);
  std::string tok;
  while (std::getline(in, tok, ':')) parts.push_back(tok);
  if (parts.size() != 4) throw input_error("axis must be name:lo:hi:step");
  static const std::set<std::string> names{"c", "q", "e", "e0"};
  if (!names.count(parts[0])) throw input_error("axis name must be c, q, e or e0");
  double lo, hi, step;
  try {
    lo = std::stod(parts[1]);
    hi = std::stod(parts[2]);
    step = std::stod(parts[3]);
  } catch (const std::exception &) {
    throw input_error("bad number in axis " + spec);
  }
  if (!(step > 0) || hi < lo || !std::isfinite(lo) || !std::isfinite(hi)) throw input_error("bad range " + spec);
  const long n = long(std::floor((hi - lo) / step + 1e-9)) + 1;
  if (n > 10000) throw input_error("axis has too many points");
  Axis a{parts[0], {}};
  for (long k = 0; k < n; ++k) a.values.push_back(lo + double(k) * step);
  return a;
}

void set_rate(RateTuple &t, const std::string &n, double v) {
  if (n == "c") t.c = v;
  else if (n == "q") t.q = v;
  else if (n == "e") t.e = v;
  else t.e0 = v;
}

int cmd_sweep(const Common &c, const std::string &bound, const std::string &xs, const std::string &ys,
              const std::string &at) {
  Axis X = parse_axis(xs);
  Axis Y = ys.empty() ? Axis{"", {0.0}} : parse_axis(ys);
  if (!ys.empty() && X.name == Y.name) throw input_error("axes must differ");
  RateTuple base{0, 0, 0, 0};
  if (!at.empty()) {
    std::stringstream in(at);
    std::string tok;
    while (std::getline(in, tok, ',')) {
      const auto eq = tok.find('=');
      if (eq == std::string::npos) throw input_error("--at takes name=value pairs");
      const std::string n = tok.substr(0, eq);
      if (n != "c" && n != "q" && n != "e" && n != "e0") throw input_error("unknown rate " + n);
      try {
        set_rate(base, n, std::stod(tok.substr(eq + 1)));
      } catch (const std::invalid_argument &) {
        throw input_error("bad value in --at");
      }
    }
  }
  SourceEvaluator ev(read_source(c.state));
  BoundReport rep;
  if (bound == "direct") {
    need_unit(c.eps, "eps", true);
    need_unit(c.delta, "delta", true);
    rep = direct_bound(ev, c.eps, c.delta);
  } else if (bound == "converse") {
    need_unit(c.eps, "eps", true);
    need_unit(c.delta, "delta", false);
    rep = converse_bound(ev, c.eps, c.delta);
  } else if (bound == "inner") {
    rep = asymptotic_region(ev).inner;
  } else if (bound == "outer") {
    rep = asymptotic_region(ev).outer;
  } else {
    throw input_error("bound is direct, converse, inner or outer");
  }
  SweepGrid g{X.name, Y.name, X.values, Y.values, {}};
  std::ostringstream o;
  o << "c,q,e,e0,satisfied\n";
  for (double y : Y.values) {
    std::vector<bool> row;
    for (double x : X.values) {
      RateTuple t = base;
      set_rate(t, X.name, x);
      if (!Y.name.empty()) set_rate(t, Y.name, y);
      const bool sat = all_satisfied(check_tuple(rep, t, 1e-9));
      row.push_back(sat);
      o << fmt6(t.c) << ',' << fmt6(t.q) << ',' << fmt6(t.e) << ',' << fmt6(t.e0) << ',' << (sat ? 1 : 0) << '\n';
    }
    g.ok.push_back(row);
  }
  if (c.format == "svg") emit(c, sweep_svg(g));
  else if (c.format == "csv") emit(c, o.str());
  else throw input_error("sweep output is csv or svg");
  return ok;
}

}  // namespace

int main(int argc, char **argv) {
  CLI::App app{"hybrid source redistribution toolkit"};
  app.require_subcommand(1);
  Common c;
  auto common = [&](CLI::App *s, bool state = true) {
    if (state) s->add_option("--state", c.state, "source json")->required()->check(CLI::ExistingFile);
    s->add_option("--eps", c.eps, "smoothing");
    s->add_option("--delta", c.delta, "error");
    s->add_option("--seed", c.seed, "rng seed");
    s->add_option("--out", c.out, "output path (stdout if empty)");
    s->add_option("--format", c.format, "csv | json | svg");
  };

  std::string quantity = "hmin", systems;
  auto *ent = app.add_subcommand("entropy", "one entropy of a source");
  common(ent);
  ent->add_option("--quantity", quantity, "hmin | hmax | h | mi | hmaxp");
  ent->add_option("--systems", systems, "TARGET|CONDITIONING")->required();

  std::string kind;
  auto *reg = app.add_subcommand("region", "rate region bounds");
  common(reg);
  reg->add_option("kind", kind, "direct | converse | asymptotic")->required();

  std::string scen;
  auto *red = app.add_subcommand("reduce", "scenario reduction");
  common(red);
  red->add_option("scenario", scen, "scenario id")->required();

  std::string config;
  auto *dec = app.add_subcommand("decouple", "partial decoupling batch");
  common(dec, false);
  dec->add_option("--config", config, "config json")->required()->check(CLI::ExistingFile);

  std::string action, tuple;
  double noise = 0;
  int tries = 100;
  auto *pro = app.add_subcommand("protocol", "run, construct or audit a protocol");
  common(pro);
  pro->add_option("action", action, "run | construct | audit")->required();
  pro->add_option("--tuple", tuple, "c,q,e,e0")->required();
  pro->add_option("--noise", noise, "rotation angle applied after decoding");
  pro->add_option("--tries", tries, "decoupling pair attempts");

  std::string bound = "inner", xs, ys, at;
  auto *swp = app.add_subcommand("sweep", "grid of check_tuple results");
  common(swp);
  swp->add_option("--bound", bound, "direct | converse | inner | outer");
  swp->add_option("--x", xs, "name:lo:hi:step")->required();
  swp->add_option("--y", ys, "name:lo:hi:step");
  swp->add_option("--at", at, "fixed rates, e.g. c=0,e0=0");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp &e) {
    return app.exit(e);
  } catch (const CLI::ParseError &e) {
    app.exit(e);
    return invalid;
  }

  try {
    if (*ent) return cmd_entropy(c, quantity, systems);
    if (*reg) return cmd_region(c, kind);
    if (*red) return cmd_reduce(c, scen);
    if (*dec) return cmd_decouple(c, config);
    if (*pro) return cmd_protocol(c, action, tuple, noise, tries);
    if (*swp) return cmd_sweep(c, bound, xs, ys, at);
  } catch (const std::exception &e) {
    return exit_for(e);
  }
  return invalid;
}
