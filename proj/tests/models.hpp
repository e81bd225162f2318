#ifndef SUPERBRANCH_TESTS_MODELS_HPP
#define SUPERBRANCH_TESTS_MODELS_HPP

#include "superbranch/model.hpp"

#include <string>
#include <utility>
#include <vector>

namespace superbranch::testing {

inline LatticeModel cbi() { return preset_cbi(1.0, 0.5, 0.3); }

/// Two sites with non-unit weights, nonlocal transfer, a branching channel
/// placing offspring on both sites, a compensated local channel and an
/// immigration jump channel.
inline LatticeModel two_site() {
  LatticeModel m;
  m.sites = {"a", "b"};
  m.h = Vector(2);
  m.h << 1.0, 1.5;
  m.motion.q = Matrix(2, 2);
  m.motion.q << 0.0, 1.0, 0.8, 0.0;
  m.branching.b = Vector(2);
  m.branching.b << 2.0, 1.8;
  m.branching.c = Vector(2);
  m.branching.c << 0.4, 0.25;
  m.branching.eta = Matrix(2, 2);
  m.branching.eta << 0.0, 0.3, 0.2, 0.0;

  JumpChannel spread;
  spread.site = 0;
  spread.intensity = 0.6;
  spread.profile = Vector(2);
  spread.profile << 0.5, 1.0;
  spread.size = JumpSizeLaw::exponential(2.5);
  m.branching.h1_channels.push_back(spread);

  JumpChannel local;
  local.site = 1;
  local.intensity = 0.5;
  local.profile = Vector::Unit(2, 1);
  local.size = JumpSizeLaw::gamma(2.0, 4.0);
  local.compensated = true;
  m.branching.h1_channels.push_back(local);

  m.immigration.beta = Vector(2);
  m.immigration.beta << 0.2, 0.1;
  JumpChannel imm;
  imm.intensity = 0.4;
  imm.profile = Vector(2);
  imm.profile << 1.0, 0.5;
  imm.size = JumpSizeLaw::exponential(3.0);
  m.immigration.h2_channels.push_back(imm);
  ensure_valid(m);
  return m;
}

inline LatticeModel kp18() {
  Kp18Params p;
  p.b = Vector(3);
  p.b << 1.5, 1.2, 1.4;
  p.c = Vector(3);
  p.c << 0.3, 0.2, 0.25;
  p.g = Vector(3);
  p.g << 0.6, 0.5, 0.4;
  p.d = Vector(3);
  p.d << 0.8, 1.0, 0.6;
  p.pi = Matrix(3, 3);
  p.pi << 0.0, 0.5, 0.5, 0.7, 0.0, 0.3, 0.4, 0.6, 0.0;
  p.g0 = {std::pair{0.5, JumpSizeLaw::exponential(2.0)}, std::nullopt, std::pair{0.3, JumpSizeLaw::gamma(3.0, 6.0)}};
  p.g1 = {std::pair{0.5, JumpSizeLaw::exponential(4.0)},
          std::pair{0.8, JumpSizeLaw::atomic({0.1, 0.3}, {0.5, 0.5})}, std::nullopt};
  p.beta = Vector(3);
  p.beta << 0.1, 0.2, 0.05;
  JumpChannel imm;
  imm.intensity = 0.3;
  imm.profile = Vector::Unit(3, 0);
  imm.size = JumpSizeLaw::gamma(2.0, 5.0);
  p.h2_channels.push_back(imm);
  return preset_kp18(p);
}

/// Hurwitz B whose row sums are not all negative: only the spectral route
/// certifies it.
inline LatticeModel spectral() {
  LatticeModel m;
  m.sites = default_site_names(2);
  m.h = Vector::Ones(2);
  m.motion.q = Matrix::Zero(2, 2);
  m.branching.b = Vector(2);
  m.branching.b << 1.0, 2.0;
  m.branching.c = Vector::Constant(2, 0.1);
  m.branching.eta = Matrix(2, 2);
  m.branching.eta << 0.0, 1.5, 0.1, 0.0;
  m.immigration.beta = Vector::Constant(2, 0.1);
  ensure_valid(m);
  return m;
}

inline LatticeModel random_walk() {
  RandomWalkParams p;
  p.d = 4;
  p.left_rate = 0.5;
  p.right_rate = 1.0;
  p.b = 0.8;
  p.c = 0.2;
  p.beta = Vector::Zero(4);
  p.beta[0] = 0.1;
  return preset_random_walk(p);
}

/// Conservative chain without killing: B = Q, spectral abscissa 0.
inline LatticeModel critical() {
  LatticeModel m;
  m.sites = default_site_names(2);
  m.h = Vector::Ones(2);
  m.motion.q = Matrix(2, 2);
  m.motion.q << 0.0, 1.0, 1.0, 0.0;
  m.branching.b = Vector::Zero(2);
  m.branching.c = Vector::Constant(2, 0.5);
  m.branching.eta = Matrix::Zero(2, 2);
  m.immigration.beta = Vector::Constant(2, 0.2);
  ensure_valid(m);
  return m;
}

inline std::vector<std::pair<std::string, LatticeModel>> certified_models() {
  return {{"cbi", cbi()}, {"two_site", two_site()}, {"kp18", kp18()}, {"spectral", spectral()},
          {"random_walk", random_walk()}};
}

} // namespace superbranch::testing

#endif
