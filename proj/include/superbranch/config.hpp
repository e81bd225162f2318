#ifndef SUPERBRANCH_CONFIG_HPP
#define SUPERBRANCH_CONFIG_HPP

#include "superbranch/model.hpp"

#include "json.hpp"

#include <filesystem>
#include <string>

namespace superbranch {

using json = nlohmann::json;

/// Schema violation in a model document; `pointer` is the JSON pointer of
/// the offending field.
class ParseError : public ValidationError {
public:
  ParseError(std::string pointer, const std::string& message)
      : ValidationError(pointer + ": " + message), pointer_(std::move(pointer)) {}
  const std::string& pointer() const { return pointer_; }

private:
  std::string pointer_;
};

/// Well-formed document whose model fails validation.
class InvalidModelError : public ValidationError {
public:
  explicit InvalidModelError(ValidationReport report);
  const ValidationReport& report() const { return report_; }

private:
  ValidationReport report_;
};

LatticeModel model_from_json(const json& doc);
json model_to_json(const LatticeModel& model);

json size_law_to_json(const JumpSizeLaw& law);
JumpSizeLaw size_law_from_json(const json& doc, const std::string& pointer = "");

json report_to_json(const ValidationReport& report);

/// Reads, parses and validates a model file.
LatticeModel load_config(const std::filesystem::path& path);
void save_config(const LatticeModel& model, const std::filesystem::path& path);

/// FNV-1a 64 of the canonical JSON text, as 16 hex digits.
std::string config_hash(const LatticeModel& model);
std::string fnv1a_hex(const std::string& text);

json vector_to_json(const VectorRef& v);
Vector vector_from_json(const json& doc, const std::string& pointer = "");

} // namespace superbranch

#endif
