#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "scoopsim/learning.hpp"
#include "scoopsim/perception.hpp"
#include "scoopsim/primitive.hpp"

namespace scoopsim {

enum class ControllerKind { CARBS, Single, FixedAlpha, OracleServo };
const char* to_string(ControllerKind k);

enum class RiskVerdict { Robust, Fragile };
const char* to_string(RiskVerdict v);

struct ControllerSpec {
  ControllerKind kind = ControllerKind::FixedAlpha;
  double alpha = 1.0;   // FixedAlpha
  double margin = 0.0;  // OracleServo, N
  std::shared_ptr<const BinaryClassifier> risk_model;     // CARBS
  std::shared_ptr<const BinaryClassifier> failure_model;  // CARBS
  // Overrides the thresholds stored in the models when set.
  std::optional<double> risk_threshold;
  std::optional<double> failure_threshold;
};

// Fragile iff p >= threshold. Throws ModelMissing.
RiskVerdict classify_risk(const BinaryClassifier* model, const SideGrid& initial,
                          std::optional<double> threshold = std::nullopt);

// TerminatePushing iff the failure probability reaches the threshold during
// Pushing.
TickDecision carbs_tick(const BinaryClassifier& failure_model, const SideGrid& observation,
                        Phase phase, std::optional<double> threshold = std::nullopt);

// True iff some intact fragile item squeezes within margin of breaking.
bool oracle_failure_detector(const WorldState& world, double margin);

// Margin that covers one tick of reaction delay.
inline double oracle_margin_for(double max_tick_squeeze_increase) {
  return 1.2 * max_tick_squeeze_increase;
}

// One instance per rollout.
class Controller : public RolloutController {
 public:
  explicit Controller(ControllerSpec spec);

  // CARBS consults the risk model on the initial overhead observation and
  // arms the servo for Fragile scenes. No-op for the other kinds.
  void observe_initial(const SideGrid& initial);

  const ControllerSpec& spec() const { return spec_; }
  std::optional<RiskVerdict> verdict() const { return verdict_; }
  bool servo_armed() const { return armed_; }
  // Failure probabilities seen at each Pushing tick (CARBS only).
  const std::vector<double>& failure_trace() const { return trace_; }
  int termination_tick() const { return stop_tick_; }

  // Open-loop plan for this controller around the food centre.
  PrimitivePlan plan(double x_f, const PrimitiveOptions& base = {}) const;

  bool wants_observation() const override;
  TickDecision on_tick(const WorldState& world, const SideGrid* observation, Phase phase,
                       double u, int tick) override;

 private:
  ControllerSpec spec_;
  std::optional<RiskVerdict> verdict_;
  bool armed_ = false;
  int stop_tick_ = -1;
  std::vector<double> trace_;
};

// Single or FixedAlpha(v). Throws InvalidAlpha.
ControllerSpec baseline_controller(ControllerKind kind, double alpha = 1.0);

}  // namespace scoopsim
