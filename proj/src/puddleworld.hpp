#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "errors.hpp"
#include "rng.hpp"

namespace groundnet {

// Object kinds. The first six are unique per map, the rest may repeat.
inline constexpr int kNumUniqueObjects = 6;
inline constexpr int kNumCommonObjects = 4;
inline constexpr int kNumObjectKinds = kNumUniqueObjects + kNumCommonObjects;

const std::vector<std::string>& object_names();  // triangle .. house

// Cell-content ids fed to the observation embedding table.
inline constexpr int kEntityGrass = 0;
inline constexpr int kEntityWater = 1;
inline constexpr int kEntityObjectBase = 2;  // 2 .. 11
inline constexpr int kEntityNoiseBase = kEntityObjectBase + kNumObjectKinds;
inline constexpr int kNumNoiseEntities = 10;  // reserved, untrained
inline constexpr int kEntityTableSize = kEntityNoiseBase + kNumNoiseEntities;

struct Cell {
  int r = 0;
  int c = 0;
  bool operator==(const Cell&) const = default;
};

inline int manhattan(Cell a, Cell b) {
  return std::abs(a.r - b.r) + std::abs(a.c - b.c);
}
inline int chebyshev(Cell a, Cell b) {
  return std::max(std::abs(a.r - b.r), std::abs(a.c - b.c));
}

enum class Action { kUp = 0, kDown = 1, kLeft = 2, kRight = 3 };
inline constexpr int kNumActions = 4;

struct Rewards {
  double goal = 3.0;
  double puddle = -1.0;
  double step = 0.0;
};

struct GridWorld {
  int m = 10;
  int n = 10;
  std::vector<int> terrain;  // 0 grass, 1 water; row-major
  std::vector<int> objects;  // -1 none, else object kind or noise entity id
  Cell goal;
  Cell start;
  double gamma = 0.95;
  Rewards rewards;

  int index(Cell s) const { return s.r * n + s.c; }
  bool in_bounds(Cell s) const {
    return s.r >= 0 && s.r < m && s.c >= 0 && s.c < n;
  }
  bool water(Cell s) const { return terrain[index(s)] == 1; }
  int object_at(Cell s) const { return objects[index(s)]; }
};

// Cell-content id for the observation encoder.
int entity_id(const GridWorld& w, Cell s);
std::vector<int> observation_ids(const GridWorld& w);

struct ValueMap {
  int m = 0;
  int n = 0;
  std::vector<double> v;
  double at(Cell s) const { return v[s.r * n + s.c]; }
  Cell argmax() const;
};

struct Transition {
  Cell state;
  Action action;
  double reward = 0.0;
  Cell next;
  bool done = false;
};

struct MapConfig {
  int m = 10;
  int n = 10;
  double water_density = 0.12;
  // Each unique object is placed independently with this probability
  // (at least one is always placed so local instructions have a referent).
  double unique_object_prob = 0.8;
  int common_objects_min = 2;
  int common_objects_max = 6;
  // Unique objects keep this margin from the border so that offset goals
  // stay on the map.
  int unique_margin = 2;
  int max_retries = 64;
};

GridWorld generate_map(uint64_t seed, const MapConfig& config = {});

// Fixed point of V(s) = R(s) + gamma * max_a V(next(s, a)) with the goal
// absorbing at V(goal) = goal reward; R is the puddle penalty on water and
// the step reward on grass. Iterates until the max change is below 1e-9.
ValueMap value_iteration_oracle(const GridWorld& w);

// Deterministic move; off-grid attempts stay in place. Reward is that of the
// entered cell (goal reward, puddle penalty, or step reward); done iff the
// next cell is the goal.
Transition step(const GridWorld& w, Cell state, Action a);

using Policy = std::vector<Action>;  // one action per cell, row-major

// Greedy policy: argmax_a R(next) + gamma * V(next); ties resolved in the
// fixed order up, down, left, right.
Policy induce_policy(const ValueMap& values, const GridWorld& w);

struct RolloutResult {
  Cell final_cell;
  double discounted_return = 0.0;
  std::vector<Cell> path;
  bool reached_goal = false;
};

int default_rollout_budget(const GridWorld& w);
RolloutResult rollout(const GridWorld& w, const Policy& policy, int budget);
RolloutResult rollout_random(const GridWorld& w, int budget, Rng& rng);

enum class InstructionKind { kLocal, kGlobal };

std::string instruction_kind_name(InstructionKind k);
InstructionKind instruction_kind_from_name(const std::string& name);

struct InstructionSample {
  GridWorld world;
  std::string text;
  InstructionKind kind = InstructionKind::kLocal;
  ValueMap oracle_values;
};

struct InstructionConfig {
  // Sampling weights for offset distances 1..3 in local templates.
  std::vector<double> offset_weights = {0.55, 0.3, 0.15};
  int max_retries = 64;
};

// Fills in goal/start and instruction text for an existing map. Throws
// GenerationError when no eligible referent/template combination fits.
InstructionSample generate_instruction(const GridWorld& world,
                                       InstructionKind kind, uint64_t seed,
                                       const InstructionConfig& config = {});

// Map + instruction generation with retries over fresh maps.
std::vector<InstructionSample> generate_dataset(
    uint64_t seed, int count, InstructionKind kind,
    const MapConfig& map_config = {},
    const InstructionConfig& instruction_config = {});

// Words the instruction generator can emit (referents, directions, glue).
const std::vector<std::string>& instruction_template_words();

}  // namespace groundnet
