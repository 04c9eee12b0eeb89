#include "scoopsim/policy.hpp"

#include <cmath>

#include "scoopsim/errors.hpp"

namespace scoopsim {

const char* to_string(ControllerKind k) {
  switch (k) {
    case ControllerKind::CARBS: return "CARBS";
    case ControllerKind::Single: return "Single";
    case ControllerKind::FixedAlpha: return "FixedAlpha";
    case ControllerKind::OracleServo: return "OracleServo";
  }
  return "?";
}

const char* to_string(RiskVerdict v) { return v == RiskVerdict::Robust ? "Robust" : "Fragile"; }

RiskVerdict classify_risk(const BinaryClassifier* model, const SideGrid& initial,
                          std::optional<double> threshold) {
  if (!model) throw ScoopError(ErrorKind::ModelMissing, "risk model not loaded");
  const double p = predict_grid(*model, initial);
  return p >= threshold.value_or(model->threshold) ? RiskVerdict::Fragile : RiskVerdict::Robust;
}

TickDecision carbs_tick(const BinaryClassifier& failure_model, const SideGrid& observation,
                        Phase phase, std::optional<double> threshold) {
  if (phase != Phase::Pushing) return TickDecision::Continue;
  const double p = predict_grid(failure_model, observation);
  return p >= threshold.value_or(failure_model.threshold) ? TickDecision::TerminatePushing
                                                          : TickDecision::Continue;
}

bool oracle_failure_detector(const WorldState& world, double margin) {
  for (const auto& item : world.items) {
    if (item.inert() || item.broken || !world.spec_of(item).fragile()) continue;
    if (item.squeeze >= item.break_force - margin) return true;
  }
  return false;
}

Controller::Controller(ControllerSpec spec) : spec_(std::move(spec)) {
  if (spec_.kind == ControllerKind::CARBS && (!spec_.risk_model || !spec_.failure_model)) {
    throw ScoopError(ErrorKind::ModelMissing, "CARBS needs both risk and failure models");
  }
  if (spec_.kind == ControllerKind::OracleServo) armed_ = true;
}

void Controller::observe_initial(const SideGrid& initial) {
  if (spec_.kind != ControllerKind::CARBS) return;
  verdict_ = classify_risk(spec_.risk_model.get(), initial, spec_.risk_threshold);
  armed_ = *verdict_ == RiskVerdict::Fragile;
}

PrimitivePlan Controller::plan(double x_f, const PrimitiveOptions& base) const {
  PrimitiveOptions o = base;
  o.single_arm = spec_.kind == ControllerKind::Single;
  // Closed-loop kinds start from alpha = 1 and cut Pushing short on demand.
  o.alpha = spec_.kind == ControllerKind::FixedAlpha ? spec_.alpha : 1.0;
  return plan_primitive(x_f, o);
}

bool Controller::wants_observation() const {
  return spec_.kind == ControllerKind::CARBS && armed_;
}

TickDecision Controller::on_tick(const WorldState& world, const SideGrid* observation,
                                 Phase phase, double, int tick) {
  if (phase != Phase::Pushing || !armed_ || stop_tick_ >= 0) return TickDecision::Continue;
  bool stop = false;
  if (spec_.kind == ControllerKind::OracleServo) {
    stop = oracle_failure_detector(world, spec_.margin);
  } else if (spec_.kind == ControllerKind::CARBS && observation) {
    const double p = predict_grid(*spec_.failure_model, *observation);
    trace_.push_back(p);
    stop = p >= spec_.failure_threshold.value_or(spec_.failure_model->threshold);
  }
  if (!stop) return TickDecision::Continue;
  stop_tick_ = tick;
  return TickDecision::TerminatePushing;
}

ControllerSpec baseline_controller(ControllerKind kind, double alpha) {
  ControllerSpec s;
  s.kind = kind;
  if (kind == ControllerKind::FixedAlpha) {
    if (!(alpha >= 0.0 && alpha <= 1.0)) {
      throw ScoopError(ErrorKind::InvalidAlpha, "alpha " + std::to_string(alpha) +
                                                    " outside [0, 1]");
    }
    s.alpha = alpha;
  } else if (kind != ControllerKind::Single) {
    throw ScoopError(ErrorKind::ConfigInvalid,
                     std::string(to_string(kind)) + " is not a baseline controller");
  }
  return s;
}

}  // namespace scoopsim
