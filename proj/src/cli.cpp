#include "superbranch/cli.hpp"

#include "superbranch/config.hpp"
#include "superbranch/cumulant.hpp"
#include "superbranch/ergodicity.hpp"
#include "superbranch/simulate.hpp"

#include "CLI11.hpp"

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>

namespace superbranch::cli {

namespace {

namespace fs = std::filesystem;

class UsageError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

struct Globals {
  std::string out_dir;
  std::uint64_t seed = 0;
  unsigned threads = 0;
};

Vector parse_vector(const std::string& text, const char* flag) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error&) {
    throw UsageError(std::string(flag) + " expects a JSON array, got '" + text + "'");
  }
  try {
    return vector_from_json(doc, flag);
  } catch (const ValidationError& e) {
    throw UsageError(e.what());
  }
}

Vector vector_or_zero(const std::string& text, const char* flag, std::size_t d) {
  if (text.empty()) return Vector::Zero(static_cast<Eigen::Index>(d));
  Vector v = parse_vector(text, flag);
  if (v.size() != static_cast<Eigen::Index>(d)) {
    throw UsageError(std::string(flag) + " must have " + std::to_string(d) + " entries");
  }
  return v;
}

std::vector<double> parse_time_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      out.push_back(std::stod(item));
    } catch (const std::exception&) {
      throw UsageError("--record expects comma-separated times, got '" + item + "'");
    }
  }
  return out;
}

std::string csv_number(double x) {
  std::ostringstream os;
  os << std::setprecision(17) << x;
  return os.str();
}

json certificate_json(const SubcriticalityResult& sub) {
  json j;
  j["certified"] = sub.certificate.has_value();
  j["spectral_abscissa"] = sub.spectral_abscissa;
  j["lyapunov_rate"] = sub.lyapunov_rate;
  if (sub.certificate) {
    const auto& c = *sub.certificate;
    j["certificate"] = {{"delta", c.delta},
                        {"C", c.C},
                        {"method", to_string(c.method)},
                        {"numerical_estimate", c.numerical_estimate}};
    if (c.method == CertificateMethod::spectral) {
      j["certificate"]["grid_supremum"] = c.grid_supremum;
      j["certificate"]["grid_step"] = c.grid_step;
      j["certificate"]["grid_horizon"] = c.grid_horizon;
    }
  } else {
    j["reason"] = sub.reason;
  }
  return j;
}

json fit_json(const DecayFit& fit) {
  return {{"rate", fit.rate}, {"r2", fit.r2}, {"points", fit.points}};
}

// Collects artifacts of one run and writes them, plus a manifest, under
// --out when given.
class Session {
public:
  Session(std::string command, const Globals& g, std::vector<std::string> args)
      : command_(std::move(command)), globals_(g), args_(std::move(args)),
        start_(std::chrono::steady_clock::now()) {}

  void set_config(const std::string& path, const LatticeModel& model) {
    config_path_ = path;
    config_hash_ = config_hash(model);
  }

  void write(const std::string& name, const std::string& content) {
    if (globals_.out_dir.empty()) return;
    fs::create_directories(globals_.out_dir);
    const fs::path path = fs::path(globals_.out_dir) / name;
    save(path, content);
    outputs_.push_back(path.string());
  }

  void note_output(const std::string& path) { outputs_.push_back(path); }

  json manifest() const {
    const double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    return {{"command", command_},
            {"config", config_path_},
            {"config_hash", config_hash_},
            {"seed", globals_.seed},
            {"threads", globals_.threads},
            {"tool_version", kVersion},
            {"args", args_},
            {"wall_time_seconds", wall},
            {"outputs", outputs_}};
  }

  // Prints `result` with its manifest and writes <command>.json and
  // manifest.json under --out.
  void finish(json result, std::ostream& out) {
    const bool to_disk = !globals_.out_dir.empty();
    const fs::path dir(globals_.out_dir);
    if (to_disk) {
      outputs_.push_back((dir / (command_ + ".json")).string());
      outputs_.push_back((dir / "manifest.json").string());
    }
    result["manifest"] = manifest();
    const std::string text = result.dump(2) + "\n";
    if (to_disk) {
      fs::create_directories(dir);
      save(dir / (command_ + ".json"), text);
      save(dir / "manifest.json", result["manifest"].dump(2) + "\n");
    }
    out << text;
  }

private:
  static void save(const fs::path& path, const std::string& content) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot write " + path.string());
    os << content;
    if (!os) throw IoError("write failed for " + path.string());
  }

  std::string command_;
  Globals globals_;
  std::vector<std::string> args_;
  std::chrono::steady_clock::time_point start_;
  std::string config_path_;
  std::string config_hash_;
  std::vector<std::string> outputs_;
};

int cmd_check(Session& s, const std::string& config, bool certify, std::ostream& out) {
  LatticeModel model;
  try {
    model = load_config(config);
  } catch (const InvalidModelError& e) {
    json result{{"valid", false}, {"validation", report_to_json(e.report())}};
    s.finish(result, out);
    return refused;
  }
  s.set_config(config, model);
  json result{{"valid", true}, {"validation", report_to_json(validate_model(model))}};
  int code = ok;
  if (certify) {
    const auto sub = check_subcritical(model);
    result["subcritical"] = certificate_json(sub);
    if (!sub.certificate) code = refused;
  }
  s.finish(result, out);
  return code;
}

int cmd_solve(Session& s, const LatticeModel& model, const std::string& f_text, double t, std::size_t intervals,
              std::ostream& out) {
  const Vector f = vector_or_zero(f_text, "--f", model.dim());
  const auto sol = solve_cumulant(model, f, uniform_grid(t, intervals));
  std::ostringstream csv;
  csv << "t";
  for (const auto& name : model.sites) csv << ",v_" << name;
  csv << ",psi_integral\n";
  for (std::size_t k = 0; k < sol.grid.size(); ++k) {
    csv << csv_number(sol.grid[k]);
    for (Eigen::Index x = 0; x < sol.values[k].size(); ++x) csv << ',' << csv_number(sol.values[k][x]);
    csv << ',' << csv_number(sol.psi_integral[k]) << '\n';
  }
  s.write("solve.csv", csv.str());
  json result{{"t", t},
              {"f", vector_to_json(f)},
              {"v", vector_to_json(sol.final_value())},
              {"psi_integral", sol.final_psi_integral()},
              {"max_clamp", sol.max_clamp},
              {"accepted_steps", sol.stats.accepted},
              {"rejected_steps", sol.stats.rejected}};
  s.finish(result, out);
  return ok;
}

int cmd_laplace(Session& s, const LatticeModel& model, const std::string& mu0_text, const std::string& f_text,
                std::optional<double> t, bool invariant, std::ostream& out) {
  const Vector f = vector_or_zero(f_text, "--f", model.dim());
  json result{{"f", vector_to_json(f)}};
  LaplaceValue value;
  if (invariant) {
    value = invariant_laplace(model, f);
    result["invariant"] = true;
  } else {
    if (!t) throw UsageError("laplace: give --t or --invariant");
    const Vector mu0 = vector_or_zero(mu0_text, "--mu0", model.dim());
    value = transition_laplace(model, mu0, f, *t);
    result["mu0"] = vector_to_json(mu0);
    result["t"] = *t;
  }
  result["value"] = value.value;
  result["exponent"] = value.exponent;
  result["error_budget"] = value.error_budget;
  s.finish(result, out);
  return ok;
}

int cmd_mean(Session& s, const LatticeModel& model, const std::string& mu0_text, std::optional<double> t,
             bool invariant, std::ostream& out) {
  json result;
  if (invariant) {
    result["invariant"] = true;
    result["mean"] = vector_to_json(invariant_mean(model));
  } else {
    if (!t) throw UsageError("mean: give --t or --invariant");
    const Vector mu0 = vector_or_zero(mu0_text, "--mu0", model.dim());
    result["mu0"] = vector_to_json(mu0);
    result["t"] = *t;
    result["mean"] = vector_to_json(transition_mean(model, mu0, *t));
  }
  s.finish(result, out);
  return ok;
}

struct SimulateArgs {
  std::string mu0;
  double t = 1.0;
  std::size_t paths = 1000;
  std::string record;
  std::vector<std::string> fs;
  std::string scheme = "auto";
  double dt = 0.0;
  bool csv = false;
  std::string binary;
};

int cmd_simulate(Session& s, const LatticeModel& model, const SimulateArgs& a, const Globals& g, std::ostream& out) {
  const auto d = model.dim();
  const Vector mu0 = vector_or_zero(a.mu0, "--mu0", d);
  SimConfig sim;
  if (a.scheme == "auto") {
    sim.scheme = (model.branching.c.array() > 0.0).any() ? Scheme::splitting : Scheme::event_driven;
  } else if (a.scheme == "splitting") {
    sim.scheme = Scheme::splitting;
  } else if (a.scheme == "event_driven") {
    sim.scheme = Scheme::event_driven;
  } else {
    throw UsageError("--scheme must be auto, splitting or event_driven");
  }
  sim.dt = a.dt;
  sim.n_paths = a.paths;
  sim.seed = g.seed;
  sim.threads = g.threads;
  std::vector<double> grid = a.record.empty() ? std::vector<double>{} : parse_time_list(a.record);
  grid.push_back(0.0);
  grid.push_back(a.t);
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
  if (grid.front() < 0.0 || grid.back() > a.t) throw UsageError("--record times must lie in [0, t]");
  sim.record_grid = grid;

  std::vector<Vector> fs;
  for (const auto& text : a.fs) fs.push_back(vector_or_zero(text, "--f", d));
  if (fs.empty()) fs.push_back(model.h);

  const auto ens = simulate_paths(model, mu0, sim);
  json times = json::array();
  for (double t : ens.grid()) {
    const auto m = empirical_mean(ens, t);
    json entry{{"t", t},
               {"mean", vector_to_json(m.mean)},
               {"mean_stderr", vector_to_json(m.stderr_)},
               {"mean_exact", vector_to_json(transition_mean(model, mu0, t))}};
    json lap = json::array();
    for (const auto& f : fs) {
      const auto e = empirical_laplace(ens, f, t);
      const auto exact = transition_laplace(model, mu0, f, t);
      lap.push_back({{"f", vector_to_json(f)},
                     {"estimate", e.value},
                     {"stderr", e.stderr_},
                     {"exact", exact.value}});
    }
    entry["laplace"] = lap;
    times.push_back(entry);
  }
  const auto& dg = ens.diagnostics;
  json result{{"mu0", vector_to_json(mu0)},
              {"paths", ens.n_paths()},
              {"scheme", to_string(ens.scheme)},
              {"dt", ens.dt},
              {"seed", ens.seed},
              {"times", times},
              {"diagnostics",
               {{"substeps", dg.substeps},
                {"clamp_events", dg.clamp_events},
                {"max_clamp", dg.max_clamp},
                {"rejected_candidates", dg.rejected_candidates},
                {"branching_jumps", dg.h1_jumps},
                {"immigration_jumps", dg.h2_jumps}}}};
  if (a.csv) {
    std::ostringstream csv;
    csv << "path,t";
    for (const auto& name : model.sites) csv << ',' << name;
    csv << '\n';
    for (std::size_t i = 0; i < ens.n_paths(); ++i) {
      for (std::size_t k = 0; k < ens.grid().size(); ++k) {
        csv << i << ',' << csv_number(ens.grid()[k]);
        for (std::size_t x = 0; x < d; ++x) csv << ',' << csv_number(ens.at(i, k, x));
        csv << '\n';
      }
    }
    s.write("states.csv", csv.str());
  }
  if (!a.binary.empty()) {
    write_ensemble(ens, a.binary);
    s.note_output(a.binary);
  }
  s.finish(result, out);
  return ok;
}

struct ErgodicityArgs {
  std::string mu0;
  double tmax = 10.0;
  std::size_t grid = 50;
  std::size_t dict_size = 8;
  std::size_t paths = 0;
  double dt = 0.0;
  std::string norm = "h";
};

int cmd_ergodicity(Session& s, const LatticeModel& model, const ErgodicityArgs& a, const Globals& g,
                   std::ostream& out) {
  ErgodicityOptions opt;
  opt.t_max = a.tmax;
  opt.grid_intervals = a.grid;
  opt.dict_size = a.dict_size;
  opt.paths = a.paths;
  opt.seed = g.seed;
  opt.threads = g.threads;
  opt.dt = a.dt;
  if (a.norm == "h") {
    opt.norm = TestNorm::weighted;
  } else if (a.norm == "sup") {
    opt.norm = TestNorm::sup;
  } else {
    throw UsageError("--norm must be h or sup");
  }
  const Vector mu0 = vector_or_zero(a.mu0, "--mu0", model.dim());
  const auto rep = ergodicity_report(model, mu0, opt);

  std::ostringstream csv;
  csv << "t,dL_lower,dL_bound,mean_gap,w1_bound,w1_empirical\n";
  json w1 = json::array();
  for (std::size_t k = 0; k < rep.t.size(); ++k) {
    csv << csv_number(rep.t[k]) << ',' << csv_number(rep.dl_lower[k]) << ',' << csv_number(rep.dl_bound[k]) << ','
        << csv_number(rep.mean_gap[k]) << ',' << csv_number(rep.w1_bound[k]) << ',';
    if (rep.w1_empirical[k]) {
      csv << csv_number(*rep.w1_empirical[k]);
      w1.push_back(*rep.w1_empirical[k]);
    } else {
      w1.push_back(nullptr);
    }
    csv << '\n';
  }
  s.write("ergodicity.csv", csv.str());
  json dict = json::array();
  for (const auto& f : rep.dictionary.functions) dict.push_back(vector_to_json(f));
  bool dl_ok = true, w1_ok = true;
  for (std::size_t k = 0; k < rep.t.size(); ++k) {
    dl_ok = dl_ok && rep.dl_lower[k] <= rep.dl_bound[k];
    w1_ok = w1_ok && rep.mean_gap[k] <= rep.w1_bound[k];
  }
  json result{{"mu0", vector_to_json(mu0)},
              {"t", rep.t},
              {"dL_lower", rep.dl_lower},
              {"dL_bound", rep.dl_bound},
              {"mean_gap", rep.mean_gap},
              {"mean_gap_scalar", rep.mean_gap_scalar},
              {"w1_bound", rep.w1_bound},
              {"w1_empirical", w1},
              {"dL_fit", fit_json(rep.dl_fit)},
              {"mean_gap_fit", fit_json(rep.mean_gap_fit)},
              {"dL_within_bound", dl_ok},
              {"mean_gap_within_bound", w1_ok},
              {"certificate",
               {{"delta", rep.certificate.delta},
                {"C", rep.certificate.C},
                {"method", to_string(rep.certificate.method)},
                {"numerical_estimate", rep.certificate.numerical_estimate}}},
              {"dictionary", dict},
              {"norm", a.norm}};
  s.finish(result, out);
  return ok;
}

void flatten(const json& j, const std::string& prefix, std::vector<std::pair<std::string, std::string>>& rows) {
  if (j.is_object()) {
    for (const auto& [key, value] : j.items()) flatten(value, prefix.empty() ? key : prefix + "." + key, rows);
  } else if (j.is_array()) {
    for (std::size_t i = 0; i < j.size(); ++i) flatten(j[i], prefix + "[" + std::to_string(i) + "]", rows);
  } else if (j.is_number()) {
    rows.emplace_back(prefix, csv_number(j.get<double>()));
  } else if (j.is_boolean()) {
    rows.emplace_back(prefix, j.get<bool>() ? "true" : "false");
  }
}

int cmd_report(Session& s, const std::string& config, const LatticeModel& model,
               const std::vector<std::string>& inputs, std::ostream& out) {
  const std::string hash = config_hash(model);
  json sections{{"check", nullptr}, {"solve", nullptr},      {"laplace", nullptr},
                {"mean", nullptr},  {"simulate", nullptr},   {"ergodicity", nullptr}};
  for (const auto& path : inputs) {
    std::ifstream in(path);
    if (!in) throw IoError("report: cannot open input " + path);
    json doc;
    try {
      doc = json::parse(in);
    } catch (const json::parse_error&) {
      throw IoError("report: input is not JSON: " + path);
    }
    const auto manifest = doc.value("manifest", json::object());
    const std::string other = manifest.value("config_hash", "");
    if (other != hash) {
      throw RefusalError("report: config hash mismatch for " + path + " (" + other + " vs " + hash + ")");
    }
    const std::string command = manifest.value("command", "");
    doc.erase("manifest");
    sections[command.empty() ? path : command] = doc;
  }
  json result{{"config", config},
              {"config_hash", hash},
              {"subcritical", certificate_json(check_subcritical(model))},
              {"sections", sections}};
  std::vector<std::pair<std::string, std::string>> rows;
  flatten(result["subcritical"], "subcritical", rows);
  flatten(sections, "", rows);
  std::ostringstream csv;
  csv << "key,value\n";
  for (const auto& [key, value] : rows) csv << key << ',' << value << '\n';
  s.write("report.csv", csv.str());
  s.finish(result, out);
  return ok;
}

} // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"superbranch: measure-valued branching processes with immigration on a finite lattice"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--out", g.out_dir, "Directory for JSON/CSV artifacts and the run manifest");
  app.add_option("--seed", g.seed, "Random seed");
  app.add_option("--threads", g.threads, "Worker threads (0 = auto)");

  std::string config;
  bool no_certify = false;
  auto* check = app.add_subcommand("check", "Validate a model and certify subcriticality");
  check->add_option("config", config, "Model JSON")->required();
  check->add_flag("--no-certify", no_certify, "Skip the subcriticality certificate");
  check->add_flag("--certify", "Certify subcriticality (default)");

  std::string f_text, mu0_text;
  double t_value = 0.0;
  std::size_t intervals = 10;
  auto* solve = app.add_subcommand("solve", "Integrate the cumulant equation");
  solve->add_option("config", config, "Model JSON")->required();
  solve->add_option("--f", f_text, "Test function, JSON array")->required();
  solve->add_option("--t", t_value, "Horizon")->required();
  solve->add_option("--grid", intervals, "Output intervals");

  bool invariant = false;
  auto* laplace = app.add_subcommand("laplace", "Transition or invariant Laplace functional");
  laplace->add_option("config", config, "Model JSON")->required();
  laplace->add_option("--mu0", mu0_text, "Initial state, JSON array");
  laplace->add_option("--f", f_text, "Test function, JSON array")->required();
  auto* lap_t = laplace->add_option("--t", t_value, "Time");
  laplace->add_flag("--invariant", invariant, "Invariant law instead of P_t");

  auto* mean = app.add_subcommand("mean", "Transition or invariant mean");
  mean->add_option("config", config, "Model JSON")->required();
  mean->add_option("--mu0", mu0_text, "Initial state, JSON array");
  auto* mean_t = mean->add_option("--t", t_value, "Time");
  mean->add_flag("--invariant", invariant, "Invariant mean");

  SimulateArgs sa;
  auto* simulate = app.add_subcommand("simulate", "Monte Carlo ensemble and agreement summary");
  simulate->add_option("config", config, "Model JSON")->required();
  simulate->add_option("--mu0", sa.mu0, "Initial state, JSON array");
  simulate->add_option("--t", sa.t, "Horizon")->required();
  simulate->add_option("--paths", sa.paths, "Number of paths");
  simulate->add_option("--record", sa.record, "Comma-separated record times");
  simulate->add_option("--f", sa.fs, "Test function(s), JSON array; repeatable")->allow_extra_args(false);
  simulate->add_option("--scheme", sa.scheme, "auto, splitting or event_driven");
  simulate->add_option("--dt", sa.dt, "Substep (0 = default)");
  simulate->add_flag("--csv", sa.csv, "Write recorded states to states.csv under --out");
  simulate->add_option("--binary", sa.binary, "Write the raw ensemble to this file");

  ErgodicityArgs ea;
  auto* ergodicity = app.add_subcommand("ergodicity", "Convergence profiles and bounds");
  ergodicity->add_option("config", config, "Model JSON")->required();
  ergodicity->add_option("--mu0", ea.mu0, "Initial state, JSON array");
  ergodicity->add_option("--tmax", ea.tmax, "Horizon");
  ergodicity->add_option("--grid", ea.grid, "Grid intervals");
  ergodicity->add_option("--dict-size", ea.dict_size, "Test dictionary size");
  ergodicity->add_option("--paths", ea.paths, "Paths for empirical W1 (0 = off, <= 512)");
  ergodicity->add_option("--dt", ea.dt, "Simulation substep (0 = default)");
  ergodicity->add_option("--norm", ea.norm, "Test function normalization: h or sup");

  std::vector<std::string> inputs;
  auto* report = app.add_subcommand("report", "Merge run outputs into one report");
  report->add_option("config", config, "Model JSON")->required();
  report->add_option("inputs", inputs, "JSON outputs of earlier runs");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return ok;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return ok;
  } catch (const CLI::CallForVersion&) {
    out << kVersion << '\n';
    return ok;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return usage;
  }

  CLI::App* sub = app.get_subcommands().front();
  Session session(sub->get_name(), g, args);
  try {
    if (sub == check) return cmd_check(session, config, !no_certify, out);
    const LatticeModel model = load_config(config);
    session.set_config(config, model);
    if (sub == solve) return cmd_solve(session, model, f_text, t_value, intervals, out);
    if (sub == laplace) {
      return cmd_laplace(session, model, mu0_text, f_text,
                         lap_t->count() ? std::optional<double>(t_value) : std::nullopt, invariant, out);
    }
    if (sub == mean) {
      return cmd_mean(session, model, mu0_text, mean_t->count() ? std::optional<double>(t_value) : std::nullopt,
                      invariant, out);
    }
    if (sub == simulate) return cmd_simulate(session, model, sa, g, out);
    if (sub == ergodicity) return cmd_ergodicity(session, model, ea, g, out);
    if (sub == report) return cmd_report(session, config, model, inputs, out);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n\n" << sub->help();
    return usage;
  } catch (const IoError& e) {
    err << "io error: " << e.what() << '\n';
    return io_failure;
  } catch (const fs::filesystem_error& e) {
    err << "io error: " << e.what() << '\n';
    return io_failure;
  } catch (const SolverError& e) {
    err << "solver error: " << e.what() << '\n';
    return solver_failure;
  } catch (const RefusalError& e) {
    err << "refused: " << e.what() << '\n';
    return refused;
  } catch (const ValidationError& e) {
    err << "invalid: " << e.what() << '\n';
    return refused;
  } catch (const DomainError& e) {
    err << "invalid argument: " << e.what() << '\n';
    return refused;
  }
  return usage;
}

int run(int argc, const char* const* argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run(args, std::cout, std::cerr);
}

} // namespace superbranch::cli
