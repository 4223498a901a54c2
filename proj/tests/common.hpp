#pragma once

#include <chrono>
#include <string>
#include <vector>

#include "hsrd/io.hpp"

namespace hsrd::testing {

inline LabeledState make_state(const CMatrix &m, const std::vector<std::pair<std::string, int>> &regs) {
  std::vector<Register> r;
  for (auto &p : regs) r.push_back({p.first, p.second, Kind::quantum});
  return {m, RegisterLayout(r)};
}

inline CMatrix phi2() { return projector(max_entangled(2)); }

inline CMatrix random_hermitian(int d, Rng &rng) {
  CMatrix g = ginibre(d, d, rng);
  return 0.5 * (g + g.adjoint());
}

// random pure state on the listed registers
inline LabeledState random_pure(const std::vector<std::pair<std::string, int>> &regs, Rng &rng) {
  long d = 1;
  for (auto &p : regs) d *= p.second;
  return make_state(projector(sample_haar_state(int(d), rng)), regs);
}

inline LabeledState random_mixed(const std::vector<std::pair<std::string, int>> &regs, int env, Rng &rng) {
  long d = 1;
  for (auto &p : regs) d *= p.second;
  return make_state(sample_density(int(d), env, rng), regs);
}

// every (x,y,z) present, Dirichlet-ish weights
inline HybridSource random_source(Rng &rng, int dA, int dB, int dC, int dR, int dX = 1, int dY = 1, int dZ = 1) {
  HybridSource s;
  s.dA = dA;
  s.dB = dB;
  s.dC = dC;
  s.dR = dR;
  s.dX = dX;
  s.dY = dY;
  s.dZ = dZ;
  double tot = 0;
  for (int x = 0; x < dX; ++x)
    for (int y = 0; y < dY; ++y)
      for (int z = 0; z < dZ; ++z) {
        SourceEntry e;
        e.x = x;
        e.y = y;
        e.z = z;
        e.p = 0.2 + rng.uniform();
        tot += e.p;
        e.psi = sample_haar_state(dA * dB * dC * dR, rng);
        s.entries.push_back(e);
      }
  for (auto &e : s.entries) e.p /= tot;
  return s;
}

// dims 2 except the registers the scenario forces to 1
inline HybridSource scenario_source(const std::string &id, Rng &rng) {
  const auto &sc = scenario(id);
  auto d = [&](const char *r) { return sc.trivial.find(r) == std::string::npos ? 2 : 1; };
  return random_source(rng, d("A"), d("B"), d("C"), d("R"), d("X"), d("Y"), d("Z"));
}

struct Stopwatch {
  std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  }
};

}  // namespace hsrd::testing
