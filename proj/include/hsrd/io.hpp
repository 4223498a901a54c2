#pragma once

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "hsrd/protocol.hpp"

namespace hsrd {

using json = nlohmann::json;

struct input_error : error {
  using error::error;
};

// %.6f, ties to even on the exact binary value; -0 printed as 0
inline std::string fmt6(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  std::string s(buf);
  if (s == "-0.000000") s = "0.000000";
  return s;
}

inline json jnum(double v) {
  if (std::isfinite(v)) return v;
  return fmt6(v);
}

inline std::string csv_field(const std::string &s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string r = "\"";
  for (char c : s) {
    if (c == '"') r += '"';
    r += c;
  }
  return r + "\"";
}

// ------------------------------------------------------------ sources

inline HybridSource source_from_json(const json &j) {
  try {
    HybridSource s;
    const json &d = j.at("dims");
    auto dim = [&](const char *k) { return d.contains(k) ? d.at(k).get<int>() : 1; };
    s.dA = dim("A");
    s.dB = dim("B");
    s.dC = dim("C");
    s.dR = dim("R");
    s.dX = dim("X");
    s.dY = dim("Y");
    s.dZ = dim("Z");
    for (auto &e : j.at("entries")) {
      SourceEntry en;
      en.x = e.value("x", 0);
      en.y = e.value("y", 0);
      en.z = e.value("z", 0);
      en.p = e.at("p").get<double>();
      auto re = e.at("psi").at("re").get<std::vector<double>>();
      std::vector<double> im = e.at("psi").contains("im") ? e.at("psi").at("im").get<std::vector<double>>()
                                                          : std::vector<double>(re.size(), 0.0);
      if (im.size() != re.size()) throw input_error("psi.re and psi.im differ in length");
      en.psi.resize(long(re.size()));
      for (size_t k = 0; k < re.size(); ++k) en.psi(long(k)) = cplx(re[k], im[k]);
      s.entries.push_back(en);
    }
    return validated(s);
  } catch (const json::exception &e) {
    throw input_error(std::string("malformed source json: ") + e.what());
  }
}

inline json source_to_json(const HybridSource &s) {
  json j;
  j["dims"] = {{"A", s.dA}, {"B", s.dB}, {"C", s.dC}, {"R", s.dR}, {"X", s.dX}, {"Y", s.dY}, {"Z", s.dZ}};
  j["entries"] = json::array();
  for (auto &e : s.entries) {
    std::vector<double> re, im;
    for (long k = 0; k < e.psi.size(); ++k) {
      re.push_back(e.psi(k).real());
      im.push_back(e.psi(k).imag());
    }
    j["entries"].push_back({{"x", e.x}, {"y", e.y}, {"z", e.z}, {"p", e.p}, {"psi", {{"re", re}, {"im", im}}}});
  }
  return j;
}

inline json read_json_file(const std::string &path) {
  std::ifstream f(path);
  if (!f) throw input_error("cannot read " + path);
  try {
    return json::parse(f);
  } catch (const json::exception &e) {
    throw input_error(path + ": " + e.what());
  }
}

inline HybridSource read_source(const std::string &path) { return source_from_json(read_json_file(path)); }

inline void write_text(const std::string &path, const std::string &text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw input_error("cannot write " + path);
  f << text;
}

// ------------------------------------------------------------ reports

inline const char *report_csv_header = "section,label,c,q,e,e0,relation,rhs,expr,params,note\n";

// rows only; section column = provenance
inline std::string report_csv_rows(const BoundReport &r) {
  std::ostringstream o;
  const std::string sec = csv_field(r.provenance);
  for (auto &row : r.rows) {
    o << sec << ',' << csv_field(row.label);
    for (double c : row.coef) o << ',' << fmt6(c);
    o << ',' << (row.equality ? "=" : ">=") << ',' << fmt6(row.rhs) << ',' << csv_field(row.expr) << ','
      << csv_field(row.params) << ',' << csv_field(row.note) << '\n';
  }
  if (r.error_budget)
    o << sec << ",error_budget,,,,,<=," << fmt6(*r.error_budget) << ",4 sqrt(12 eps + 6 delta),,\n";
  for (auto &c : r.closed)
    o << sec << ',' << csv_field("closed:" + c.label) << ",,,,,=," << fmt6(c.value) << ',' << csv_field(c.expr)
      << ",,\n";
  for (auto &n : r.notes) o << sec << ",note,,,,,,,,," << csv_field(n) << '\n';
  return o.str();
}

inline std::string report_csv(const BoundReport &r) { return report_csv_header + report_csv_rows(r); }

inline json report_json(const BoundReport &r) {
  json j;
  j["provenance"] = r.provenance;
  j["achievability"] = r.achievability;
  j["eps"] = r.eps;
  j["delta"] = r.delta;
  j["rows"] = json::array();
  for (auto &row : r.rows)
    j["rows"].push_back({{"label", row.label},
                         {"coef", {row.coef[0], row.coef[1], row.coef[2], row.coef[3]}},
                         {"relation", row.equality ? "=" : ">="},
                         {"rhs", jnum(row.rhs)},
                         {"expr", row.expr},
                         {"params", row.params},
                         {"note", row.note}});
  if (r.error_budget) j["error_budget"] = jnum(*r.error_budget);
  j["closed_forms"] = json::array();
  for (auto &c : r.closed) j["closed_forms"].push_back({{"label", c.label}, {"expr", c.expr}, {"value", jnum(c.value)}});
  j["notes"] = r.notes;
  return j;
}

inline json scenario_json(const ScenarioReport &s) {
  json j;
  j["scenario"] = s.scenario;
  j["constraints"] = s.constraints;
  j["direct"] = report_json(s.direct);
  j["converse"] = report_json(s.converse);
  j["inner"] = report_json(s.inner);
  j["outer"] = report_json(s.outer);
  j["closed_forms"] = json::array();
  for (auto &c : s.closed) j["closed_forms"].push_back({{"label", c.label}, {"expr", c.expr}, {"value", jnum(c.value)}});
  return j;
}

inline std::string scenario_csv(const ScenarioReport &s) {
  std::string o = report_csv_header;
  for (auto *r : {&s.direct, &s.converse, &s.inner, &s.outer}) o += report_csv_rows(*r);
  for (auto &c : s.closed)
    o += csv_field(s.scenario) + "," + csv_field("closed:" + c.label) + ",,,,,=," + fmt6(c.value) + "," +
         csv_field(c.expr) + ",,\n";
  for (auto &c : s.constraints) o += csv_field(s.scenario) + ",constraint,,,,,,,,," + csv_field(c) + "\n";
  return o;
}

inline json protocol_json(const ProtocolReport &r) {
  json j;
  j["error"] = jnum(r.error);
  j["budget"] = jnum(r.budget);
  j["rates"] = {{"c", r.rates.c}, {"q", r.rates.q}, {"e", r.rates.e}, {"e0", r.rates.e0}};
  j["seeds"] = r.seeds;
  j["branches"] = r.branches;
  return j;
}

// ---------------------------------------------------------------- svg

struct SweepGrid {
  std::string xname, yname;
  std::vector<double> xs, ys;
  std::vector<std::vector<bool>> ok;  // ok[iy][ix]
};

inline std::string sweep_svg(const SweepGrid &g) {
  const int cell = 12, margin = 48;
  const int W = margin * 2 + cell * int(std::max<size_t>(1, g.xs.size()));
  const int H = margin * 2 + cell * int(std::max<size_t>(1, g.ys.size()));
  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\">\n";
  o << "<rect x=\"0\" y=\"0\" width=\"" << W << "\" height=\"" << H << "\" fill=\"white\"/>\n";
  for (size_t iy = 0; iy < g.ys.size(); ++iy)
    for (size_t ix = 0; ix < g.xs.size(); ++ix) {
      const int x = margin + int(ix) * cell, y = H - margin - int(iy + 1) * cell;
      o << "<rect x=\"" << x << "\" y=\"" << y << "\" width=\"" << cell << "\" height=\"" << cell << "\" fill=\""
        << (g.ok[iy][ix] ? "#4a7ebb" : "#eeeeee") << "\"/>\n";
    }
  o << "<line x1=\"" << margin << "\" y1=\"" << H - margin << "\" x2=\"" << W - margin << "\" y2=\"" << H - margin
    << "\" stroke=\"black\"/>\n";
  o << "<line x1=\"" << margin << "\" y1=\"" << margin << "\" x2=\"" << margin << "\" y2=\"" << H - margin
    << "\" stroke=\"black\"/>\n";
  auto label = [&](int x, int y, const std::string &t) {
    o << "<text x=\"" << x << "\" y=\"" << y << "\" font-size=\"10\" font-family=\"monospace\">" << t << "</text>\n";
  };
  if (!g.xs.empty()) {
    label(margin, H - margin + 14, fmt6(g.xs.front()));
    label(W - margin - 40, H - margin + 14, fmt6(g.xs.back()));
  }
  if (!g.ys.empty()) {
    label(2, H - margin, fmt6(g.ys.front()));
    label(2, margin + 10, fmt6(g.ys.back()));
  }
  label(W / 2, H - 8, g.xname);
  label(4, margin / 2, g.yname);
  o << "</svg>\n";
  return o.str();
}

}  // namespace hsrd
