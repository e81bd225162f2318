#include "superbranch/model.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace superbranch {

Matrix MotionGenerator::generator() const {
  Matrix a = q;
  a.diagonal().setZero();
  a.diagonal() = -a.rowwise().sum();
  return a;
}

bool ValidationReport::valid() const {
  if (!errors.empty()) return false;
  return std::all_of(conditions.begin(), conditions.end(), [](const ConditionResult& c) { return c.holds; });
}

const ConditionResult* ValidationReport::find(const std::string& name) const {
  for (const auto& c : conditions) {
    if (c.name == name) return &c;
  }
  return nullptr;
}

namespace {

void check_channel(const LatticeModel& model, const JumpChannel& ch, const std::string& where, bool branching,
                   std::vector<std::string>& errors) {
  const auto d = static_cast<Eigen::Index>(model.dim());
  if (branching && ch.site >= model.dim()) {
    errors.push_back(where + ": site index " + std::to_string(ch.site) + " out of range");
    return;
  }
  if (!(ch.intensity >= 0.0) || !std::isfinite(ch.intensity)) {
    errors.push_back(where + ": intensity must be finite and >= 0");
  }
  if (ch.profile.size() != d) {
    errors.push_back(where + ": profile has " + std::to_string(ch.profile.size()) + " entries, expected " +
                     std::to_string(d));
    return;
  }
  for (Eigen::Index y = 0; y < d; ++y) {
    if (!(ch.profile[y] >= 0.0) || !std::isfinite(ch.profile[y])) {
      errors.push_back(where + ": profile entry " + std::to_string(y) + " must be finite and >= 0");
      return;
    }
  }
  if (!(model.h.dot(ch.profile) > 0.0)) {
    errors.push_back(where + ": profile has <h, profile> = 0");
  }
  if (ch.compensated) {
    if (!branching) {
      errors.push_back(where + ": immigration channels cannot be compensated");
      return;
    }
    for (Eigen::Index y = 0; y < d; ++y) {
      if (y != static_cast<Eigen::Index>(ch.site) && ch.profile[y] != 0.0) {
        errors.push_back(where + ": compensated channel profile must be concentrated on its source site");
        return;
      }
    }
  }
}

} // namespace

ValidationReport validate_model(const LatticeModel& model) {
  ValidationReport report;
  auto& errors = report.errors;
  const auto d = static_cast<Eigen::Index>(model.h.size());
  if (d < 1) {
    errors.push_back("model needs at least one site");
    return report;
  }
  if (!model.sites.empty() && static_cast<Eigen::Index>(model.sites.size()) != d) {
    errors.push_back("sites: expected " + std::to_string(d) + " names");
  }
  for (Eigen::Index x = 0; x < d; ++x) {
    if (!(model.h[x] > 0.0) || !std::isfinite(model.h[x])) {
      errors.push_back("h: entry at site " + std::to_string(x) + " must be finite and > 0");
    }
  }
  const auto& q = model.motion.q;
  const auto& br = model.branching;
  const auto& im = model.immigration;
  auto shape_ok = [&](Eigen::Index rows, Eigen::Index cols, const char* name) {
    if (rows != d || cols != d) {
      errors.push_back(std::string(name) + ": wrong shape");
      return false;
    }
    return true;
  };
  bool shapes = shape_ok(q.rows(), q.cols(), "motion.q");
  shapes &= shape_ok(br.b.size(), d, "branching.b");
  shapes &= shape_ok(br.c.size(), d, "branching.c");
  shapes &= shape_ok(br.eta.rows(), br.eta.cols(), "branching.eta");
  shapes &= shape_ok(im.beta.size(), d, "immigration.beta");
  if (!shapes || !errors.empty()) return report;

  for (Eigen::Index x = 0; x < d; ++x) {
    for (Eigen::Index y = 0; y < d; ++y) {
      if (x != y && (!(q(x, y) >= 0.0) || !std::isfinite(q(x, y)))) {
        errors.push_back("motion.q: rate (" + std::to_string(x) + "," + std::to_string(y) + ") must be >= 0");
      }
      if (x == y && q(x, y) != 0.0) {
        errors.push_back("motion.q: diagonal entry " + std::to_string(x) + " must be 0");
      }
      if (!(br.eta(x, y) >= 0.0) || !std::isfinite(br.eta(x, y))) {
        errors.push_back("branching.eta: entry (" + std::to_string(x) + "," + std::to_string(y) + ") must be >= 0");
      }
    }
    if (!std::isfinite(br.b[x])) errors.push_back("branching.b: entry " + std::to_string(x) + " not finite");
    if (!(br.c[x] >= 0.0) || !std::isfinite(br.c[x])) {
      errors.push_back("branching.c: entry " + std::to_string(x) + " must be >= 0");
    }
    if (!(im.beta[x] >= 0.0) || !std::isfinite(im.beta[x])) {
      errors.push_back("immigration.beta: entry " + std::to_string(x) + " must be >= 0");
    }
  }
  for (std::size_t i = 0; i < br.h1_channels.size(); ++i) {
    check_channel(model, br.h1_channels[i], "branching.h1_channels[" + std::to_string(i) + "]", true, errors);
  }
  for (std::size_t i = 0; i < im.h2_channels.size(); ++i) {
    check_channel(model, im.h2_channels[i], "immigration.h2_channels[" + std::to_string(i) + "]", false, errors);
  }
  if (!errors.empty()) return report;

  const Vector& h = model.h;
  const Vector rates = model.motion.total_rates();

  auto finite_condition = [](std::string name, double constant, std::string detail) {
    ConditionResult r{std::move(name), constant, std::isfinite(constant), std::move(detail)};
    return r;
  };

  report.conditions.push_back(
      finite_condition("bounded_motion_rates", rates.maxCoeff(), "sup_x sum_y q(x,y)"));

  double excess = 0.0;
  for (Eigen::Index x = 0; x < d; ++x) {
    excess = std::max(excess, (q.row(x).dot(h) - h[x] * rates[x]) / h[x]);
  }
  report.conditions.push_back(finite_condition(
      "weight_excessive_motion", excess, "minimal C with sum_y h(y)q(x,y) <= C h(x) + h(x) sum_y q(x,y)"));

  report.conditions.push_back(finite_condition("bounded_linear_rate", br.b.cwiseAbs().maxCoeff(), "sup_x |b(x)|"));
  report.conditions.push_back(
      finite_condition("bounded_weighted_quadratic", (h.array() * br.c.array()).maxCoeff(), "sup_x h(x)c(x)"));

  const Vector transfer = (br.eta * h).cwiseQuotient(h);
  report.conditions.push_back(
      finite_condition("bounded_transfer", transfer.maxCoeff(), "minimal C with sum_y h(y)eta(x,y) <= C h(x)"));

  Vector jump_load = Vector::Zero(d);
  for (const auto& ch : br.h1_channels) {
    const double s = h.dot(ch.profile);
    const double off_site = s - h[static_cast<Eigen::Index>(ch.site)] * ch.profile[static_cast<Eigen::Index>(ch.site)];
    jump_load[static_cast<Eigen::Index>(ch.site)] +=
        ch.intensity * (ch.size.min_linear_quadratic(s) + ch.size.mean() * off_site);
  }
  report.conditions.push_back(finite_condition(
      "bounded_branching_jumps", jump_load.cwiseQuotient(h).maxCoeff(),
      "minimal C with int (<h,nu> ^ <h,nu>^2 + <h,nu_x>) H1(x,dnu) <= C h(x)"));

  report.conditions.push_back(finite_condition("finite_immigration_rate", h.dot(im.beta), "<h, beta>"));

  double small_jumps = 0.0;
  for (const auto& ch : im.h2_channels) {
    const double s = h.dot(ch.profile);
    small_jumps += ch.intensity * ch.size.min_one_linear(s);
    report.h2_first_moment += ch.intensity * ch.size.large_jump_first_moment(s);
    report.h2_log_moment += ch.intensity * ch.size.large_jump_log_moment(s);
  }
  report.conditions.push_back(
      finite_condition("integrable_immigration_jumps", small_jumps, "int 1 ^ <h,nu> H2(dnu)"));
  report.h2_first_moment_finite = std::isfinite(report.h2_first_moment);
  report.h2_log_moment_finite = std::isfinite(report.h2_log_moment);
  return report;
}

void ensure_valid(const LatticeModel& model) {
  const auto report = validate_model(model);
  if (report.valid()) return;
  std::ostringstream msg;
  msg << "invalid model";
  for (const auto& e : report.errors) msg << "; " << e;
  for (const auto& c : report.conditions) {
    if (!c.holds) msg << "; condition " << c.name << " fails";
  }
  throw ValidationError(msg.str());
}

std::vector<std::string> default_site_names(std::size_t d) {
  std::vector<std::string> names(d);
  for (std::size_t i = 0; i < d; ++i) names[i] = std::to_string(i);
  return names;
}

LatticeModel preset_cbi(double b, double c, double beta) {
  LatticeModel m;
  m.sites = default_site_names(1);
  m.h = Vector::Ones(1);
  m.motion.q = Matrix::Zero(1, 1);
  m.branching.b = Vector::Constant(1, b);
  m.branching.c = Vector::Constant(1, c);
  m.branching.eta = Matrix::Zero(1, 1);
  m.immigration.beta = Vector::Constant(1, beta);
  ensure_valid(m);
  return m;
}

LatticeModel preset_kp18(const Kp18Params& p) {
  const auto d = p.b.size();
  if (d < 1 || p.c.size() != d || p.g.size() != d || p.d.size() != d || p.pi.rows() != d || p.pi.cols() != d ||
      p.beta.size() != d) {
    throw ValidationError("kp18: parameter vectors must all have the same length");
  }
  if ((!p.g0.empty() && static_cast<Eigen::Index>(p.g0.size()) != d) ||
      (!p.g1.empty() && static_cast<Eigen::Index>(p.g1.size()) != d)) {
    throw ValidationError("kp18: g0/g1 must be empty or have one entry per site");
  }
  for (Eigen::Index x = 0; x < d; ++x) {
    if (p.pi(x, x) != 0.0) {
      throw ValidationError("kp18: pi_x({x}) must be 0 (site " + std::to_string(x) + ")");
    }
    if ((p.pi.row(x).array() < 0.0).any()) throw ValidationError("kp18: pi entries must be >= 0");
    if (p.g[x] < 0.0 || p.d[x] < 0.0) throw ValidationError("kp18: g and d must be >= 0");
    if (p.g[x] > 0.0 && std::abs(p.pi.row(x).sum() - 1.0) > 1e-12) {
      throw ValidationError("kp18: pi_x must be a probability vector where g(x) > 0 (site " + std::to_string(x) +
                            ")");
    }
  }

  LatticeModel m;
  m.sites = default_site_names(static_cast<std::size_t>(d));
  m.h = Vector::Ones(d);
  m.motion.q = Matrix::Zero(d, d);
  m.branching.b = p.b;
  m.branching.c = p.c;
  m.branching.eta = (p.g.cwiseProduct(p.d)).asDiagonal() * p.pi;
  for (Eigen::Index x = 0; x < d; ++x) {
    const auto site = static_cast<std::size_t>(x);
    if (!p.g0.empty() && p.g0[site]) {
      JumpChannel ch;
      ch.site = site;
      ch.intensity = p.g0[site]->first;
      ch.profile = Vector::Unit(d, x);
      ch.size = p.g0[site]->second;
      ch.compensated = true;
      m.branching.h1_channels.push_back(std::move(ch));
    }
    if (!p.g1.empty() && p.g1[site] && p.g[x] > 0.0) {
      JumpChannel ch;
      ch.site = site;
      ch.intensity = p.g[x] * p.g1[site]->first;
      ch.profile = p.pi.row(x).transpose();
      ch.size = p.g1[site]->second;
      ch.compensated = false;
      m.branching.h1_channels.push_back(std::move(ch));
    }
  }
  m.immigration.beta = p.beta;
  m.immigration.h2_channels = p.h2_channels;
  ensure_valid(m);
  return m;
}

LatticeModel preset_random_walk(const RandomWalkParams& p) {
  if (p.d < 1) throw ValidationError("random walk: need d >= 1");
  const auto d = static_cast<Eigen::Index>(p.d);
  LatticeModel m;
  m.sites = default_site_names(p.d);
  m.h = Vector::Ones(d);
  m.motion.q = Matrix::Zero(d, d);
  if (d > 1) {
    for (Eigen::Index x = 0; x < d; ++x) {
      m.motion.q(x, (x + 1) % d) += p.right_rate;
      m.motion.q(x, (x + d - 1) % d) += p.left_rate;
    }
  }
  m.branching.b = Vector::Constant(d, p.b);
  m.branching.c = Vector::Constant(d, p.c);
  m.branching.eta = Matrix::Zero(d, d);
  m.immigration.beta = p.beta.size() == 0 ? Vector(Vector::Zero(d)) : p.beta;
  m.immigration.h2_channels = p.h2_channels;
  ensure_valid(m);
  return m;
}

LatticeModel h_transform(const LatticeModel& model) {
  ensure_valid(model);
  const Vector& h = model.h;
  const auto d = h.size();
  const Vector h_inv = h.cwiseInverse();

  LatticeModel out;
  out.sites = model.sites;
  out.h = Vector::Ones(d);
  out.motion.q = h_inv.asDiagonal() * model.motion.q * h.asDiagonal();
  out.branching.b = model.branching.b - out.motion.total_rates() + model.motion.total_rates();
  out.branching.c = model.branching.c.cwiseProduct(h);
  out.branching.eta = h_inv.asDiagonal() * model.branching.eta * h.asDiagonal();
  for (const auto& ch : model.branching.h1_channels) {
    JumpChannel t = ch;
    t.intensity = ch.intensity / h[static_cast<Eigen::Index>(ch.site)];
    t.profile = ch.profile.cwiseProduct(h);
    out.branching.h1_channels.push_back(std::move(t));
  }
  out.immigration.beta = model.immigration.beta.cwiseProduct(h);
  for (const auto& ch : model.immigration.h2_channels) {
    JumpChannel t = ch;
    t.profile = ch.profile.cwiseProduct(h);
    out.immigration.h2_channels.push_back(std::move(t));
  }
  ensure_valid(out);
  return out;
}

} // namespace superbranch
