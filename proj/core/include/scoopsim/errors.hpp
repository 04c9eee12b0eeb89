#pragma once

#include <stdexcept>
#include <string>

namespace scoopsim {

enum class ErrorKind {
  MissingFile,
  SchemaViolation,
  NonConvexPolygon,
  UnknownClass,
  OverlapUnresolvable,
  NumericalBlowup,
  UnknownItem,
  InvalidPhase,
  PhysicsFault,
  NoFoodDetected,
  NormNotFitted,
  EmptyCatalog,
  NoBreakObserved,
  DivergedLoss,
  ShapeMismatch,
  EmptySet,
  InvalidDataset,
  ModelMissing,
  InvalidAlpha,
  IncompleteRecord,
  ConfigInvalid,
};

const char* to_string(ErrorKind kind);

// Every failure raised by the library carries one of the kinds above so the
// CLI can map it onto an exit code without string matching.
class ScoopError : public std::runtime_error {
 public:
  ScoopError(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what),
        kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

// Catalog validation failure that names the offending class and field.
class SchemaViolation : public ScoopError {
 public:
  SchemaViolation(std::string class_name, std::string field,
                  const std::string& detail = {})
      : ScoopError(ErrorKind::SchemaViolation,
                   "class '" + class_name + "' field '" + field + "'" +
                       (detail.empty() ? "" : ": " + detail)),
        class_name_(std::move(class_name)),
        field_(std::move(field)) {}

  const std::string& class_name() const noexcept { return class_name_; }
  const std::string& field() const noexcept { return field_; }

 private:
  std::string class_name_;
  std::string field_;
};

}  // namespace scoopsim
