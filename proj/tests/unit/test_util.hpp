#pragma once

#include <memory>
#include <string>

#include "scoopsim/physics.hpp"
#include "scoopsim/primitive.hpp"
#include "scoopsim/worldmodel.hpp"

namespace scoopsim::testing {

inline std::shared_ptr<const Catalog> shipped_catalog() {
  static const auto c = std::make_shared<const Catalog>(load_catalog(default_catalog_path()));
  return c;
}

// One item at the plate origin, no jitter, tools parked.
inline WorldState single_item(const std::string& cls, std::uint64_t seed = 7) {
  ScenarioConfig cfg;
  cfg.items = {{cls, 1}};
  cfg.seed = seed;
  return spawn_scenario(shipped_catalog(), cfg);
}

// Catalog with one class replaced by `spec`.
inline std::shared_ptr<const Catalog> catalog_with(const FoodClassSpec& spec) {
  Catalog c = *shipped_catalog();
  for (auto& s : c.classes) {
    if (s.name == spec.name) s = spec;
  }
  return std::make_shared<const Catalog>(std::move(c));
}

// Tools far from the plate centre and motionless.
inline void park_tools(WorldState& w) { w.tools = idle_tools(0.0); }

inline WorldState run_steps(WorldState w, int n, const PhysicsParams& p = {}) {
  for (int i = 0; i < n; ++i) w = simulate_step(std::move(w), p);
  return w;
}

}  // namespace scoopsim::testing
