// Acceptance suite: one PASS/FAIL line per criterion.
#include "models.hpp"
#include "superbranch/ergodicity.hpp"

#include <boost/math/distributions/gamma.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <sstream>
#include <string>

using namespace superbranch;

namespace {

constexpr double kSimDt = 0.01;

struct Outcome {
  bool pass = true;
  std::string detail;
};

int failures = 0;

void report(int id, const char* title, double limit_s, const std::function<Outcome()>& body) {
  const auto start = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (limit_s > 0 && secs > limit_s) {
    o.pass = false;
    o.detail += " [over time limit]";
  }
  if (!o.pass) ++failures;
  std::printf("criterion %d %-28s %s  (%.1fs) %s\n", id, title, o.pass ? "PASS" : "FAIL", secs, o.detail.c_str());
  std::fflush(stdout);
}

std::string fmt(const char* f, double a, double b = 0.0) {
  char buf[160];
  std::snprintf(buf, sizeof buf, f, a, b);
  return buf;
}

std::vector<std::pair<std::string, LatticeModel>> mc_models() {
  return {{"cbi", testing::cbi()}, {"two_site", testing::two_site()}, {"kp18", testing::kp18()}};
}

Outcome riccati() {
  const auto m = testing::cbi();
  const Vector f = Vector::Ones(1);
  const double v = solve_cumulant(m, f, 1.0).final_value()[0];
  const double defect = semigroup_defect(m, f, 0.5, 0.5);
  return {std::abs(v - 0.279531) <= 1e-6 && defect <= 1e-7, fmt("V_1 f=%.9f defect=%.2e", v, defect)};
}

Outcome invariant_gamma() {
  const auto m = testing::cbi();
  const double lap = invariant_laplace(m, Vector::Ones(1)).value;
  const double lap_err = std::abs(lap - std::pow(1.5, -0.6));

  SimConfig sim;
  sim.n_paths = 20000;
  sim.dt = kSimDt;
  sim.seed = 2024;
  const auto inv = sample_invariant(m, Vector::Ones(1), sim, 1);
  std::vector<double> xs;
  for (const auto& s : inv.samples) xs.push_back(s[0]);
  std::sort(xs.begin(), xs.end());
  const boost::math::gamma_distribution<double> law(0.6, 0.5);
  const double n = static_cast<double>(xs.size());
  double ks = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double cdf = boost::math::cdf(law, xs[i]);
    ks = std::max({ks, (static_cast<double>(i) + 1.0) / n - cdf, cdf - static_cast<double>(i) / n});
  }
  const double crit = 1.628 / std::sqrt(n);
  return {lap_err <= 1e-6 && ks <= crit,
          fmt("|L-1.5^-0.6|=%.2e", lap_err) + fmt(" KS D=%.5f crit=%.5f", ks, crit) +
              " n=" + std::to_string(xs.size())};
}

Outcome ladder() {
  bool pass = true;
  double worst_rel = 0.0;
  int monotone_violations = 0;
  const double t = 1.0;
  for (const auto& [name, m] : mc_models()) {
    const auto d = static_cast<Eigen::Index>(m.dim());
    const std::vector<Vector> fs = {m.h, Vector::Unit(d, 0).cwiseProduct(m.h) * 2.0,
                                    Vector::LinSpaced(d, 0.3, 1.5)};
    for (const auto& f : fs) {
      const Vector rf = apply_R(m, f, t);
      Vector prev = Vector::Constant(d, -1.0);
      for (double eps : {1.0, 1e-1, 1e-2, 1e-3, 1e-4}) {
        SolverOptions opt;
        opt.atol = 1e-12 * eps;
        opt.rtol = 1e-11;
        const Vector v = solve_cumulant(m, eps * f, t, opt).final_value() / eps;
        for (Eigen::Index i = 0; i < d; ++i) {
          if (v[i] < prev[i]) ++monotone_violations;
        }
        prev = v;
        if (eps == 1e-4) {
          for (Eigen::Index i = 0; i < d; ++i) {
            if (rf[i] > 0.0) worst_rel = std::max(worst_rel, std::abs(v[i] - rf[i]) / rf[i]);
          }
        }
      }
    }
  }
  pass = monotone_violations == 0 && worst_rel <= 1e-4;
  return {pass, "monotonicity violations=" + std::to_string(monotone_violations) +
                    fmt(" worst rel gap at eps=1e-4: %.2e", worst_rel)};
}

struct MonteCarlo {
  std::string name;
  LatticeModel model;
  PathEnsemble ensemble;
};

std::vector<MonteCarlo>& ensembles() {
  static std::vector<MonteCarlo> cache = [] {
    std::vector<MonteCarlo> out;
    std::uint64_t seed = 100;
    for (auto& [name, m] : mc_models()) {
      SimConfig sim;
      sim.n_paths = 100000;
      sim.dt = kSimDt;
      sim.record_grid = {0.0, 0.5, 1.0, 2.0};
      sim.seed = seed++;
      out.push_back({name, m, simulate_paths(m, m.h, sim)});
    }
    return out;
  }();
  return cache;
}

Outcome moment_agreement() {
  int checks = 0, misses = 0;
  double worst = 0.0;
  for (const auto& mc : ensembles()) {
    for (double t : {0.5, 1.0, 2.0}) {
      const Vector exact = transition_mean(mc.model, mc.model.h, t);
      const auto est = empirical_mean(mc.ensemble, t);
      for (Eigen::Index i = 0; i < exact.size(); ++i) {
        const double z = std::abs(est.mean[i] - exact[i]) / est.stderr_[i];
        worst = std::max(worst, z);
        ++checks;
        if (!(z <= 3.0)) ++misses;
      }
    }
  }
  return {misses == 0, std::to_string(checks) + " components, " + std::to_string(misses) +
                           fmt(" beyond 3 stderr, worst |z|=%.2f", worst)};
}

Outcome laplace_agreement() {
  int checks = 0, misses = 0;
  double worst = 0.0;
  for (const auto& mc : ensembles()) {
    const auto& m = mc.model;
    const auto d = static_cast<Eigen::Index>(m.dim());
    const std::vector<Vector> fs = {m.h * 0.5, m.h * 2.0, Vector::LinSpaced(d, 1.0, 0.2)};
    for (const auto& f : fs) {
      for (double t : {0.5, 1.0, 2.0}) {
        const double exact = transition_laplace(m, m.h, f, t).value;
        const auto est = empirical_laplace(mc.ensemble, f, t);
        const double z = std::abs(est.value - exact) / est.stderr_;
        worst = std::max(worst, z);
        ++checks;
        if (!(z <= 3.0)) ++misses;
      }
    }
  }
  return {misses == 0, std::to_string(checks) + " functionals, " + std::to_string(misses) +
                           fmt(" beyond 3 stderr, worst |z|=%.2f", worst)};
}

Outcome certification() {
  int violations = 0;
  double worst_ratio = 0.0;
  for (const auto& [name, m] : testing::certified_models()) {
    const auto op = assemble_moment_operator(m);
    const auto cert = require_certificate(m);
    for (int i = 0; i < 50; ++i) {
      const double t = 0.01 * std::pow(5000.0, i / 49.0);
      const double norm = weighted_operator_norm(moment_semigroup(op, t), m.h);
      const double bound = cert.C * std::exp(-cert.delta * t);
      worst_ratio = std::max(worst_ratio, norm / bound);
      if (norm > bound * (1 + 1e-12)) ++violations;
    }
  }
  const bool refused = !check_subcritical(testing::critical()).certificate.has_value();
  return {violations == 0 && refused, std::to_string(violations) + fmt(" violations, max norm/bound=%.6f", worst_ratio) +
                                          (refused ? ", critical refused" : ", critical NOT refused")};
}

Outcome ergodic_rate() {
  ErgodicityOptions opt;
  opt.t_max = 10.0;
  opt.grid_intervals = 50;
  const auto cbi = ergodicity_report(testing::cbi(), Vector::Ones(1), opt);
  const double delta = cbi.certificate.delta;
  auto fit_ok = [&](const DecayFit& f) { return std::abs(f.rate + delta) <= 0.1 * delta && f.r2 > 0.99; };
  bool pass = fit_ok(cbi.dl_fit) && fit_ok(cbi.mean_gap_fit);
  std::string detail = fmt("cbi dL rate=%.4f r2=%.5f", cbi.dl_fit.rate, cbi.dl_fit.r2) +
                       fmt(", gap rate=%.4f r2=%.5f", cbi.mean_gap_fit.rate, cbi.mean_gap_fit.r2);
  int violations = 0;
  for (const auto& [name, m] : testing::certified_models()) {
    ErgodicityOptions o;
    o.t_max = 10.0;
    o.grid_intervals = 50;
    const auto r = ergodicity_report(m, m.h * 1.5, o);
    for (std::size_t k = 0; k < r.t.size(); ++k) {
      if (r.dl_lower[k] > r.dl_bound[k]) ++violations;
      if (r.mean_gap[k] > r.w1_bound[k]) ++violations;
    }
  }
  pass = pass && violations == 0;
  return {pass, detail + ", bound violations=" + std::to_string(violations)};
}

Outcome appendix_lemmas() {
  // Convolution contraction: immigration from zero is the common summand,
  // the two laws are the process started from h and from 2h.
  const auto m = testing::two_site();
  SimConfig sim;
  sim.dt = kSimDt;
  sim.record_grid = {0.0, 1.0};
  sim.n_paths = 128;
  sim.seed = 31;
  const auto a_ens = simulate_paths(m, m.h, sim);
  sim.seed = 32;
  const auto b_ens = simulate_paths(m, 2.0 * m.h, sim);
  sim.seed = 33;
  sim.n_paths = 4;
  const auto g_ens = simulate_paths(m, Vector::Zero(2), sim);
  std::vector<Vector> a, b, ag, bg;
  for (std::size_t p = 0; p < 128; ++p) {
    a.push_back(a_ens.state(p, 1));
    b.push_back(b_ens.state(p, 1));
    for (std::size_t j = 0; j < 4; ++j) {
      ag.push_back(a.back() + g_ens.state(j, 1));
      bg.push_back(b.back() + g_ens.state(j, 1));
    }
  }
  const double w_ab = empirical_w1(a, b, m.h);
  const double w_conv = empirical_w1(ag, bg, m.h);
  const bool contraction = w_conv <= w_ab * (1 + 1e-9);

  // Coupling convexity for two-point mixtures.
  int convexity_violations = 0, cases = 0;
  double max_excess = -1.0;
  for (const auto& [name, mm] : testing::certified_models()) {
    const auto dict = make_dictionary(mm, 6, 5);
    const auto d = static_cast<Eigen::Index>(mm.dim());
    const Vector x1 = mm.h, x2 = Vector::LinSpaced(d, 0.1, 2.0);
    const Vector y1 = Vector::Zero(d), y2 = 3.0 * mm.h;
    for (double w : {0.2, 0.5, 0.9}) {
      for (double t : {0.3, 1.5}) {
        const double mixed = mixture_laplace_distance(mm, {{w, x1}, {1 - w, x2}}, {{w, y1}, {1 - w, y2}}, dict, t);
        const double sep = w * mixture_laplace_distance(mm, {{1.0, x1}}, {{1.0, y1}}, dict, t) +
                           (1 - w) * mixture_laplace_distance(mm, {{1.0, x2}}, {{1.0, y2}}, dict, t);
        max_excess = std::max(max_excess, mixed - sep);
        ++cases;
        if (mixed > sep + 1e-12) ++convexity_violations;
      }
    }
  }
  return {contraction && convexity_violations == 0,
          fmt("W1(A*G,B*G)=%.5f <= W1(A,B)=%.5f", w_conv, w_ab) + ", convexity " + std::to_string(cases) +
              " cases, violations=" + std::to_string(convexity_violations) +
              fmt(", max excess=%.2e", max_excess)};
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

Outcome reproducibility() {
  const auto m = testing::kp18();
  SimConfig sim;
  sim.n_paths = 2000;
  sim.dt = kSimDt;
  sim.record_grid = {0.0, 0.5, 1.0};
  sim.seed = 99;
  const auto dir = std::filesystem::temp_directory_path();
  sim.threads = 1;
  write_ensemble(simulate_paths(m, m.h, sim), dir / "superbranch_t1.sbr");
  sim.threads = 8;
  write_ensemble(simulate_paths(m, m.h, sim), dir / "superbranch_t8.sbr");
  const std::string a = slurp(dir / "superbranch_t1.sbr"), b = slurp(dir / "superbranch_t8.sbr");
  std::filesystem::remove(dir / "superbranch_t1.sbr");
  std::filesystem::remove(dir / "superbranch_t8.sbr");
  return {!a.empty() && a == b, std::to_string(a.size()) + " bytes, " + (a == b ? "identical" : "DIFFERENT")};
}

} // namespace

int main() {
  report(1, "riccati oracle", 1.0, riccati);
  report(2, "invariant gamma law", 120.0, invariant_gamma);
  report(3, "scaled cumulant ladder", 30.0, ladder);
  report(4, "moment agreement", 300.0, moment_agreement);
  report(5, "laplace agreement", 300.0, laplace_agreement);
  report(6, "certificate soundness", 0.0, certification);
  report(7, "ergodic rate", 120.0, ergodic_rate);
  report(8, "appendix lemmas", 0.0, appendix_lemmas);
  report(9, "thread reproducibility", 0.0, reproducibility);
  std::printf("%d of 9 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
