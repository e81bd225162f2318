#include "superbranch/config.hpp"

#include <cstdint>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace superbranch {

namespace {

std::string idx(const std::string& base, std::size_t i) { return base + "/" + std::to_string(i); }

const json& member(const json& obj, const std::string& pointer, const char* key) {
  if (!obj.is_object()) throw ParseError(pointer, "expected an object");
  auto it = obj.find(key);
  if (it == obj.end()) throw ParseError(pointer + "/" + key, "missing required field");
  return *it;
}

double number(const json& v, const std::string& pointer) {
  if (!v.is_number()) throw ParseError(pointer, "expected a number");
  return v.get<double>();
}

double nonnegative(const json& v, const std::string& pointer) {
  const double x = number(v, pointer);
  if (!(x >= 0.0)) throw ParseError(pointer, "must be >= 0");
  return x;
}

Vector vector_field(const json& v, const std::string& pointer, std::size_t d, bool require_nonnegative) {
  if (!v.is_array()) throw ParseError(pointer, "expected an array of numbers");
  if (v.size() != d) {
    throw ParseError(pointer, "expected " + std::to_string(d) + " entries, got " + std::to_string(v.size()));
  }
  Vector out(static_cast<Eigen::Index>(d));
  for (std::size_t i = 0; i < d; ++i) {
    out[static_cast<Eigen::Index>(i)] =
        require_nonnegative ? nonnegative(v[i], idx(pointer, i)) : number(v[i], idx(pointer, i));
  }
  return out;
}

Matrix matrix_field(const json& v, const std::string& pointer, std::size_t d) {
  if (!v.is_array() || v.size() != d) {
    throw ParseError(pointer, "expected " + std::to_string(d) + " rows");
  }
  Matrix out(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
  for (std::size_t i = 0; i < d; ++i) {
    out.row(static_cast<Eigen::Index>(i)) = vector_field(v[i], idx(pointer, i), d, true).transpose();
  }
  return out;
}

JumpChannel channel_from_json(const json& v, const std::string& pointer, std::size_t d, bool branching) {
  JumpChannel ch;
  if (branching) {
    const json& site = member(v, pointer, "site");
    if (!site.is_number_integer() || site.get<long long>() < 0 || site.get<std::size_t>() >= d) {
      throw ParseError(pointer + "/site", "expected a site index in [0, " + std::to_string(d) + ")");
    }
    ch.site = site.get<std::size_t>();
  }
  ch.intensity = nonnegative(member(v, pointer, "intensity"), pointer + "/intensity");
  ch.profile = vector_field(member(v, pointer, "profile"), pointer + "/profile", d, true);
  ch.size = size_law_from_json(member(v, pointer, "size"), pointer + "/size");
  if (auto it = v.find("compensated"); it != v.end()) {
    if (!it->is_boolean()) throw ParseError(pointer + "/compensated", "expected a boolean");
    ch.compensated = it->get<bool>();
  }
  return ch;
}

json channel_to_json(const JumpChannel& ch, bool branching) {
  json out = json::object();
  if (branching) out["site"] = ch.site;
  out["intensity"] = ch.intensity;
  out["profile"] = vector_to_json(ch.profile);
  out["size"] = size_law_to_json(ch.size);
  if (branching) out["compensated"] = ch.compensated;
  return out;
}

json matrix_to_json(const MatrixRef& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) rows.push_back(vector_to_json(m.row(i).transpose()));
  return rows;
}

} // namespace

json vector_to_json(const VectorRef& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
  return out;
}

Vector vector_from_json(const json& doc, const std::string& pointer) {
  if (!doc.is_array()) throw ParseError(pointer, "expected an array of numbers");
  return vector_field(doc, pointer, doc.size(), false);
}

InvalidModelError::InvalidModelError(ValidationReport report)
    : ValidationError([&] {
        std::string msg = "model failed validation";
        for (const auto& e : report.errors) msg += "; " + e;
        for (const auto& c : report.conditions)
          if (!c.holds) msg += "; condition " + c.name + " fails";
        return msg;
      }()),
      report_(std::move(report)) {}

json size_law_to_json(const JumpSizeLaw& law) {
  json out = json::object();
  out["kind"] = law.kind_name();
  if (auto* a = std::get_if<JumpSizeLaw::Atomic>(&law.kind())) {
    out["points"] = a->points;
    out["weights"] = a->weights;
  } else if (auto* e = std::get_if<JumpSizeLaw::Exponential>(&law.kind())) {
    out["rate"] = e->rate;
  } else if (auto* g = std::get_if<JumpSizeLaw::Gamma>(&law.kind())) {
    out["shape"] = g->shape;
    out["rate"] = g->rate;
  }
  return out;
}

JumpSizeLaw size_law_from_json(const json& doc, const std::string& pointer) {
  const json& kind = member(doc, pointer, "kind");
  if (!kind.is_string()) throw ParseError(pointer + "/kind", "expected a string");
  const auto k = kind.get<std::string>();
  auto positive = [&](const char* key) {
    const double x = number(member(doc, pointer, key), pointer + "/" + key);
    if (!(x > 0.0)) throw ParseError(pointer + "/" + key, "must be > 0");
    return x;
  };
  if (k == "atomic") {
    const json& pts = member(doc, pointer, "points");
    const json& wts = member(doc, pointer, "weights");
    if (!pts.is_array() || pts.empty()) throw ParseError(pointer + "/points", "expected a nonempty array");
    if (!wts.is_array() || wts.size() != pts.size()) {
      throw ParseError(pointer + "/weights", "expected one weight per point");
    }
    std::vector<double> p, w;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      p.push_back(number(pts[i], idx(pointer + "/points", i)));
      if (!(p.back() > 0.0)) throw ParseError(idx(pointer + "/points", i), "must be > 0");
      w.push_back(number(wts[i], idx(pointer + "/weights", i)));
      if (!(w.back() > 0.0)) throw ParseError(idx(pointer + "/weights", i), "must be > 0");
    }
    return JumpSizeLaw::atomic(std::move(p), std::move(w));
  }
  if (k == "exponential") return JumpSizeLaw::exponential(positive("rate"));
  if (k == "gamma") {
    const double shape = positive("shape");
    return JumpSizeLaw::gamma(shape, positive("rate"));
  }
  throw ParseError(pointer + "/kind", "unknown size law kind '" + k + "'");
}

LatticeModel model_from_json(const json& doc) {
  LatticeModel m;
  const json& sites = member(doc, "", "sites");
  std::size_t d = 0;
  if (sites.is_number_integer()) {
    if (sites.get<long long>() < 1) throw ParseError("/sites", "need at least one site");
    d = sites.get<std::size_t>();
    m.sites = default_site_names(d);
  } else if (sites.is_array() && !sites.empty()) {
    d = sites.size();
    for (std::size_t i = 0; i < d; ++i) {
      if (!sites[i].is_string()) throw ParseError(idx("/sites", i), "expected a string");
      m.sites.push_back(sites[i].get<std::string>());
    }
  } else {
    throw ParseError("/sites", "expected a positive count or a nonempty array of names");
  }

  m.h = vector_field(member(doc, "", "h"), "/h", d, false);
  for (std::size_t i = 0; i < d; ++i) {
    if (!(m.h[static_cast<Eigen::Index>(i)] > 0.0)) throw ParseError(idx("/h", i), "must be > 0");
  }

  const json& motion = member(doc, "", "motion");
  m.motion.q = matrix_field(member(motion, "/motion", "q"), "/motion/q", d);

  const json& br = member(doc, "", "branching");
  m.branching.b = vector_field(member(br, "/branching", "b"), "/branching/b", d, false);
  m.branching.c = vector_field(member(br, "/branching", "c"), "/branching/c", d, true);
  if (auto it = br.find("eta"); it != br.end()) {
    m.branching.eta = matrix_field(*it, "/branching/eta", d);
  } else {
    m.branching.eta = Matrix::Zero(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
  }
  if (auto it = br.find("h1_channels"); it != br.end()) {
    if (!it->is_array()) throw ParseError("/branching/h1_channels", "expected an array");
    for (std::size_t i = 0; i < it->size(); ++i) {
      m.branching.h1_channels.push_back(channel_from_json((*it)[i], idx("/branching/h1_channels", i), d, true));
    }
  }

  const json& im = member(doc, "", "immigration");
  m.immigration.beta = vector_field(member(im, "/immigration", "beta"), "/immigration/beta", d, true);
  if (auto it = im.find("h2_channels"); it != im.end()) {
    if (!it->is_array()) throw ParseError("/immigration/h2_channels", "expected an array");
    for (std::size_t i = 0; i < it->size(); ++i) {
      m.immigration.h2_channels.push_back(
          channel_from_json((*it)[i], idx("/immigration/h2_channels", i), d, false));
    }
  }

  auto report = validate_model(m);
  if (!report.valid()) throw InvalidModelError(std::move(report));
  return m;
}

json model_to_json(const LatticeModel& m) {
  json doc = json::object();
  doc["sites"] = m.sites.empty() ? default_site_names(m.dim()) : m.sites;
  doc["h"] = vector_to_json(m.h);
  doc["motion"] = json{{"q", matrix_to_json(m.motion.q)}};
  json br = json::object();
  br["b"] = vector_to_json(m.branching.b);
  br["c"] = vector_to_json(m.branching.c);
  br["eta"] = matrix_to_json(m.branching.eta);
  br["h1_channels"] = json::array();
  for (const auto& ch : m.branching.h1_channels) br["h1_channels"].push_back(channel_to_json(ch, true));
  doc["branching"] = std::move(br);
  json im = json::object();
  im["beta"] = vector_to_json(m.immigration.beta);
  im["h2_channels"] = json::array();
  for (const auto& ch : m.immigration.h2_channels) im["h2_channels"].push_back(channel_to_json(ch, false));
  doc["immigration"] = std::move(im);
  return doc;
}

json report_to_json(const ValidationReport& report) {
  json out = json::object();
  out["valid"] = report.valid();
  out["errors"] = report.errors;
  json conds = json::array();
  for (const auto& c : report.conditions) {
    conds.push_back({{"name", c.name}, {"constant", c.constant}, {"holds", c.holds}, {"detail", c.detail}});
  }
  out["conditions"] = std::move(conds);
  out["h2_first_moment"] = {{"value", report.h2_first_moment}, {"finite", report.h2_first_moment_finite}};
  out["h2_log_moment"] = {{"value", report.h2_log_moment}, {"finite", report.h2_log_moment_finite}};
  return out;
}

LatticeModel load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open model file " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ParseError("", std::string("malformed JSON: ") + e.what());
  }
  return model_from_json(doc);
}

void save_config(const LatticeModel& model, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write model file " + path.string());
  out << model_to_json(model).dump(2) << '\n';
}

std::string fnv1a_hex(const std::string& text) {
  std::uint64_t hash = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    hash ^= ch;
    hash *= 0x100000001b3ULL;
  }
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << hash;
  return os.str();
}

std::string config_hash(const LatticeModel& model) { return fnv1a_hex(model_to_json(model).dump()); }

} // namespace superbranch
