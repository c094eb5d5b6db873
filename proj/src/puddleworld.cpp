#include "puddleworld.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <tuple>

namespace groundnet {

const std::vector<std::string>& object_names() {
  static const std::vector<std::string> names = {
      "triangle", "star", "diamond", "circle", "heart",
      "spade",    "rock", "tree",    "horse",  "house"};
  return names;
}

// objects-grid codes >= kNoiseCodeBase are reserved unseen-object slots.
inline constexpr int kNoiseCodeBase = kNumObjectKinds;

int entity_id(const GridWorld& w, Cell s) {
  if (w.water(s)) return kEntityWater;
  const int code = w.object_at(s);
  if (code < 0) return kEntityGrass;
  if (code < kNumObjectKinds) return kEntityObjectBase + code;
  const int noise = code - kNoiseCodeBase;
  if (noise >= kNumNoiseEntities) {
    throw InputError("entity_id: object code " + std::to_string(code) +
                     " outside the embedding table");
  }
  return kEntityNoiseBase + noise;
}

std::vector<int> observation_ids(const GridWorld& w) {
  std::vector<int> ids(w.m * w.n);
  for (int r = 0; r < w.m; ++r) {
    for (int c = 0; c < w.n; ++c) ids[r * w.n + c] = entity_id(w, {r, c});
  }
  return ids;
}

Cell ValueMap::argmax() const {
  int best = 0;
  for (int i = 1; i < m * n; ++i) {
    if (v[i] > v[best]) best = i;
  }
  return {best / n, best % n};
}

namespace {

double cell_reward(const GridWorld& w, Cell s) {
  if (s == w.goal) return w.rewards.goal;
  if (w.water(s)) return w.rewards.puddle;
  return w.rewards.step;
}

constexpr std::array<std::pair<int, int>, kNumActions> kMoves = {{
    {-1, 0},  // up
    {1, 0},   // down
    {0, -1},  // left
    {0, 1},   // right
}};

}  // namespace

GridWorld generate_map(uint64_t seed, const MapConfig& config) {
  if (config.water_density < 0.0 || config.water_density >= 1.0) {
    throw ConfigError("generate_map: water density must be in [0, 1)");
  }
  if (config.unique_object_prob < 0.0 || config.unique_object_prob >= 1.0) {
    throw ConfigError("generate_map: object density must be in [0, 1)");
  }
  for (int attempt = 0; attempt < config.max_retries; ++attempt) {
    Rng rng(Rng::mix(seed, 0x6d61702eULL + attempt));
    GridWorld w;
    w.m = config.m;
    w.n = config.n;
    w.terrain.assign(w.m * w.n, 0);
    w.objects.assign(w.m * w.n, -1);
    for (int i = 0; i < w.m * w.n; ++i) {
      if (rng.uniform() < config.water_density) w.terrain[i] = 1;
    }
    auto free_grass = [&](Cell s) {
      return !w.water(s) && w.object_at(s) < 0;
    };
    auto place_random = [&](int code, int margin) {
      for (int t = 0; t < 64; ++t) {
        Cell s{margin + rng.uniform_int(w.m - 2 * margin),
               margin + rng.uniform_int(w.n - 2 * margin)};
        if (free_grass(s)) {
          w.objects[w.index(s)] = code;
          return true;
        }
      }
      return false;
    };

    std::vector<int> uniques;
    for (int u = 0; u < kNumUniqueObjects; ++u) {
      if (rng.uniform() < config.unique_object_prob) uniques.push_back(u);
    }
    if (uniques.empty() && config.unique_object_prob > 0.0) {
      uniques.push_back(rng.uniform_int(kNumUniqueObjects));
    }
    bool ok = true;
    std::vector<Cell> unique_cells;
    for (int u : uniques) {
      if (!place_random(u, config.unique_margin)) {
        ok = false;
        break;
      }
    }
    if (!ok) continue;
    for (int r = 0; r < w.m && ok; ++r) {
      for (int c = 0; c < w.n; ++c) {
        const int code = w.object_at({r, c});
        if (code >= 0 && code < kNumUniqueObjects) unique_cells.push_back({r, c});
      }
    }
    const int span = config.common_objects_max - config.common_objects_min;
    int commons = config.common_objects_min +
                  (span > 0 ? rng.uniform_int(span + 1) : 0);
    for (int t = 0; t < commons; ++t) {
      place_random(kNumUniqueObjects + rng.uniform_int(kNumCommonObjects), 0);
    }
    // Sometimes pin a common object directly above or below a unique one so
    // that two-referent instructions have support.
    if (!unique_cells.empty() && rng.uniform() < 0.6) {
      const Cell u = unique_cells[rng.uniform_int(
          static_cast<int>(unique_cells.size()))];
      const int dist = 1 + rng.uniform_int(2);
      const int dir = rng.uniform_int(2) == 0 ? -1 : 1;
      const Cell s{u.r + dir * dist, u.c};
      if (w.in_bounds(s) && free_grass(s)) {
        w.objects[w.index(s)] =
            kNumUniqueObjects + rng.uniform_int(kNumCommonObjects);
      }
    }

    std::vector<Cell> grass;
    for (int r = 0; r < w.m; ++r) {
      for (int c = 0; c < w.n; ++c) {
        if (!w.water({r, c})) grass.push_back({r, c});
      }
    }
    if (grass.size() < 2) continue;
    w.goal = grass.front();
    w.start = grass.back();
    return w;
  }
  throw GenerationError("generate_map: no viable map after retries");
}

ValueMap value_iteration_oracle(const GridWorld& w) {
  ValueMap vm;
  vm.m = w.m;
  vm.n = w.n;
  vm.v.assign(w.m * w.n, 0.0);
  std::vector<double> next(vm.v.size(), 0.0);
  const int goal = w.index(w.goal);
  vm.v[goal] = w.rewards.goal;
  while (true) {
    double delta = 0.0;
    for (int r = 0; r < w.m; ++r) {
      for (int c = 0; c < w.n; ++c) {
        const int i = r * w.n + c;
        if (i == goal) {
          next[i] = w.rewards.goal;
          continue;
        }
        double best = -std::numeric_limits<double>::infinity();
        for (const auto& [dr, dc] : kMoves) {
          Cell t{r + dr, c + dc};
          if (!w.in_bounds(t)) t = {r, c};
          best = std::max(best, vm.v[w.index(t)]);
        }
        const Cell here{r, c};
        const double reward =
            w.water(here) ? w.rewards.puddle : w.rewards.step;
        next[i] = reward + w.gamma * best;
        delta = std::max(delta, std::abs(next[i] - vm.v[i]));
      }
    }
    vm.v.swap(next);
    if (delta < 1e-9) break;
  }
  return vm;
}

Transition step(const GridWorld& w, Cell state, Action a) {
  if (!w.in_bounds(state)) throw InputError("step: state out of bounds");
  const auto [dr, dc] = kMoves[static_cast<int>(a)];
  Cell next{state.r + dr, state.c + dc};
  if (!w.in_bounds(next)) next = state;
  Transition t;
  t.state = state;
  t.action = a;
  t.next = next;
  t.reward = cell_reward(w, next);
  t.done = next == w.goal;
  return t;
}

Policy induce_policy(const ValueMap& values, const GridWorld& w) {
  // Greedy over R(s) + gamma * V(next). The state reward R(s) does not
  // depend on the action, so the ranking is by V(next); under the oracle's
  // value convention (entry rewards folded into V) this greedy policy is
  // optimal, while adding R(next) again would double-count puddle penalties.
  Policy pi(w.m * w.n, Action::kUp);
  for (int r = 0; r < w.m; ++r) {
    for (int c = 0; c < w.n; ++c) {
      const double own = cell_reward(w, {r, c});
      double best = -std::numeric_limits<double>::infinity();
      Action best_a = Action::kUp;
      for (int a = 0; a < kNumActions; ++a) {
        Cell t{r + kMoves[a].first, c + kMoves[a].second};
        if (!w.in_bounds(t)) t = {r, c};
        const double score = own + w.gamma * values.at(t);
        if (score > best) {
          best = score;
          best_a = static_cast<Action>(a);
        }
      }
      pi[r * w.n + c] = best_a;
    }
  }
  return pi;
}

int default_rollout_budget(const GridWorld& w) { return 2 * (w.m + w.n); }

namespace {
RolloutResult run_rollout(const GridWorld& w, int budget,
                          const std::function<Action(Cell)>& act) {
  if (budget < 1) throw InputError("rollout: budget must be >= 1");
  RolloutResult out;
  Cell cur = w.start;
  double discount = 1.0;
  for (int t = 0; t < budget; ++t) {
    const Transition tr = step(w, cur, act(cur));
    out.discounted_return += discount * tr.reward;
    discount *= w.gamma;
    cur = tr.next;
    out.path.push_back(cur);
    if (tr.done) {
      out.reached_goal = true;
      break;
    }
  }
  out.final_cell = cur;
  return out;
}
}  // namespace

RolloutResult rollout(const GridWorld& w, const Policy& policy, int budget) {
  return run_rollout(w, budget,
                     [&](Cell s) { return policy[w.index(s)]; });
}

RolloutResult rollout_random(const GridWorld& w, int budget, Rng& rng) {
  return run_rollout(w, budget, [&](Cell) {
    return static_cast<Action>(rng.uniform_int(kNumActions));
  });
}

std::string instruction_kind_name(InstructionKind k) {
  return k == InstructionKind::kLocal ? "local" : "global";
}

InstructionKind instruction_kind_from_name(const std::string& name) {
  if (name == "local") return InstructionKind::kLocal;
  if (name == "global") return InstructionKind::kGlobal;
  throw ConfigError("unknown instruction kind '" + name + "'");
}

namespace {

const std::vector<std::string>& number_words() {
  static const std::vector<std::string> w = {"one", "two", "three"};
  return w;
}

struct Offset {
  int dr = 0;
  int dc = 0;
};

// Direction vocab with grid semantics (row 0 is the top of the map).
std::string horizontal_word(int dc) { return dc < 0 ? "left" : "right"; }
std::string vertical_word(int dr) { return dr < 0 ? "above" : "below"; }
std::string motion_word(const Offset& o) {
  if (o.dr < 0) return "up";
  if (o.dr > 0) return "down";
  return o.dc < 0 ? "left" : "right";
}

std::vector<Cell> object_cells(const GridWorld& w, int code) {
  std::vector<Cell> cells;
  for (int r = 0; r < w.m; ++r) {
    for (int c = 0; c < w.n; ++c) {
      if (w.object_at({r, c}) == code) cells.push_back({r, c});
    }
  }
  return cells;
}

int sample_distance(Rng& rng, const std::vector<double>& weights) {
  double total = 0.0;
  for (double x : weights) total += x;
  double u = rng.uniform() * total;
  for (size_t i = 0; i < weights.size(); ++i) {
    u -= weights[i];
    if (u <= 0.0) return static_cast<int>(i) + 1;
  }
  return static_cast<int>(weights.size());
}

struct LocalDraft {
  std::string text;
  Cell goal;
};

// Renders one local template for a unique referent at `ref`. Returns nothing
// when the offset leaves the map or lands on water.
std::optional<LocalDraft> draw_local(const GridWorld& w, Rng& rng,
                                     const InstructionConfig& cfg) {
  std::vector<std::pair<int, Cell>> uniques;
  for (int u = 0; u < kNumUniqueObjects; ++u) {
    auto cells = object_cells(w, u);
    if (cells.size() == 1) uniques.emplace_back(u, cells.front());
  }
  if (uniques.empty()) return std::nullopt;
  const int tpl = rng.uniform_int(12);

  if (tpl == 9) {
    // two-referent form: "reach cell that is rock one below spade"
    std::vector<std::tuple<int, int, int, Cell>> pairs;  // common, dist, dir, cell
    for (const auto& [u, uc] : uniques) {
      for (int dist = 1; dist <= 2; ++dist) {
        for (int dir : {-1, 1}) {
          const Cell s{uc.r + dir * dist, uc.c};
          if (!w.in_bounds(s)) continue;
          const int code = w.object_at(s);
          if (code >= kNumUniqueObjects && code < kNumObjectKinds) {
            pairs.emplace_back(u, dist, dir, s);
          }
        }
      }
    }
    if (pairs.empty()) return std::nullopt;
    const auto& [u, dist, dir, cell] = pairs[rng.uniform_int(
        static_cast<int>(pairs.size()))];
    LocalDraft d;
    d.goal = cell;
    d.text = "reach cell that is " + object_names()[w.object_at(cell)] + " " +
             number_words()[dist - 1] + " " + vertical_word(dir) + " " +
             object_names()[u];
    return d;
  }

  const auto& [obj, ref] =
      uniques[rng.uniform_int(static_cast<int>(uniques.size()))];
  const std::string& name = object_names()[obj];
  const int dist = sample_distance(rng, cfg.offset_weights);
  Offset o;
  std::string text;
  switch (tpl) {
    case 0: {
      o = {0, rng.uniform_int(2) == 0 ? -dist : dist};
      text = "reach " + number_words()[dist - 1] + " cells to the " +
             horizontal_word(o.dc) + " of the " + name;
      break;
    }
    case 1: {
      o = {rng.uniform_int(2) == 0 ? -dist : dist, 0};
      text = "reach " + number_words()[dist - 1] + " cells " +
             vertical_word(o.dr) + " the " + name;
      break;
    }
    case 2: {
      o = {0, rng.uniform_int(2) == 0 ? -dist : dist};
      text = "reach cell " + number_words()[dist - 1] + " " +
             horizontal_word(o.dc) + " of the " + name;
      break;
    }
    case 3: {
      o = {rng.uniform_int(2) == 0 ? -dist : dist, 0};
      text = "reach cell " + number_words()[dist - 1] + " " +
             vertical_word(o.dr) + " the " + name;
      break;
    }
    case 4: {
      const int d2 = sample_distance(rng, cfg.offset_weights);
      o = {rng.uniform_int(2) == 0 ? -dist : dist,
           rng.uniform_int(2) == 0 ? -d2 : d2};
      text = "reach cell " + number_words()[dist - 1] + " " +
             vertical_word(o.dr) + " and " + number_words()[d2 - 1] + " " +
             horizontal_word(o.dc) + " of the " + name;
      break;
    }
    case 5: {
      const int axis = rng.uniform_int(4);
      o = axis == 0   ? Offset{-dist, 0}
          : axis == 1 ? Offset{dist, 0}
          : axis == 2 ? Offset{0, -dist}
                      : Offset{0, dist};
      text = "go " + number_words()[dist - 1] + " cells " + motion_word(o) +
             " from the " + name;
      break;
    }
    case 6: {
      const int axis = rng.uniform_int(4);
      o = axis == 0   ? Offset{-dist, 0}
          : axis == 1 ? Offset{dist, 0}
          : axis == 2 ? Offset{0, -dist}
                      : Offset{0, dist};
      text = "go to the cell " + number_words()[dist - 1] + " " +
             motion_word(o) + " of the " + name;
      break;
    }
    case 7: {
      const int axis = rng.uniform_int(4);
      o = axis == 0   ? Offset{-dist, 0}
          : axis == 1 ? Offset{dist, 0}
          : axis == 2 ? Offset{0, -dist}
                      : Offset{0, dist};
      text = "the cell " + number_words()[dist - 1] + " steps " +
             motion_word(o) + " of the " + name;
      break;
    }
    case 8: {
      o = {rng.uniform_int(2) == 0 ? -1 : 1, rng.uniform_int(2) == 0 ? -1 : 1};
      text = "reach the cell to the " + std::string(o.dr < 0 ? "top" : "bottom") +
             " " + horizontal_word(o.dc) + " of the " + name;
      break;
    }
    case 10: {
      const int d2 = sample_distance(rng, cfg.offset_weights);
      o = {rng.uniform_int(2) == 0 ? -d2 : d2,
           rng.uniform_int(2) == 0 ? -dist : dist};
      text = "reach the cell " + number_words()[dist - 1] + " " +
             horizontal_word(o.dc) + " and " + number_words()[d2 - 1] + " " +
             vertical_word(o.dr) + " of the " + name;
      break;
    }
    default: {
      const int axis = rng.uniform_int(4);
      o = axis == 0   ? Offset{-dist, 0}
          : axis == 1 ? Offset{dist, 0}
          : axis == 2 ? Offset{0, -dist}
                      : Offset{0, dist};
      text = number_words()[dist - 1] + " cells " + motion_word(o) +
             " of the " + name;
      break;
    }
  }
  const Cell goal{ref.r + o.dr, ref.c + o.dc};
  if (!w.in_bounds(goal) || w.water(goal) || goal == ref) return std::nullopt;
  return LocalDraft{text, goal};
}

std::optional<LocalDraft> draw_global(const GridWorld& w, Rng& rng) {
  struct Combo {
    int cls;
    int sup;  // 0 west, 1 east, 2 north, 3 south
    Cell cell;
  };
  std::vector<Combo> combos;
  for (int cls = kNumUniqueObjects; cls < kNumObjectKinds; ++cls) {
    const auto cells = object_cells(w, cls);
    if (cells.size() < 2) continue;
    for (int sup = 0; sup < 4; ++sup) {
      auto key = [&](Cell s) {
        switch (sup) {
          case 0: return -s.c;
          case 1: return s.c;
          case 2: return -s.r;
          default: return s.r;
        }
      };
      Cell best = cells[0];
      int ties = 1;
      for (size_t i = 1; i < cells.size(); ++i) {
        if (key(cells[i]) > key(best)) {
          best = cells[i];
          ties = 1;
        } else if (key(cells[i]) == key(best)) {
          ++ties;
        }
      }
      if (ties == 1) combos.push_back({cls, sup, best});
    }
  }
  if (combos.empty()) return std::nullopt;
  const Combo& combo = combos[rng.uniform_int(static_cast<int>(combos.size()))];
  static const std::vector<std::string> sups = {
      "westernmost", "easternmost", "northernmost", "southernmost"};
  const std::string phrase =
      sups[combo.sup] + " " + object_names()[combo.cls];
  std::string text;
  switch (rng.uniform_int(6)) {
    case 0: text = "reach the " + phrase; break;
    case 1: text = "go to the " + phrase; break;
    case 2: text = "the " + phrase; break;
    case 3: text = "reach the " + phrase + " on the map"; break;
    case 4: text = "navigate to the " + phrase; break;
    default: text = "move to the " + phrase; break;
  }
  return LocalDraft{text, combo.cell};
}

}  // namespace

InstructionSample generate_instruction(const GridWorld& world,
                                       InstructionKind kind, uint64_t seed,
                                       const InstructionConfig& config) {
  Rng rng(Rng::mix(seed, 0x696e7374ULL));
  for (int attempt = 0; attempt < config.max_retries; ++attempt) {
    auto draft = kind == InstructionKind::kLocal
                     ? draw_local(world, rng, config)
                     : draw_global(world, rng);
    if (!draft) continue;
    GridWorld w = world;
    w.goal = draft->goal;
    std::vector<Cell> starts;
    for (int r = 0; r < w.m; ++r) {
      for (int c = 0; c < w.n; ++c) {
        const Cell s{r, c};
        if (!w.water(s) && manhattan(s, w.goal) >= 2) starts.push_back(s);
      }
    }
    if (starts.empty()) continue;
    w.start = starts[rng.uniform_int(static_cast<int>(starts.size()))];
    InstructionSample sample;
    sample.world = std::move(w);
    sample.text = draft->text;
    sample.kind = kind;
    sample.oracle_values = value_iteration_oracle(sample.world);
    return sample;
  }
  throw GenerationError("generate_instruction: no eligible referent");
}

std::vector<InstructionSample> generate_dataset(
    uint64_t seed, int count, InstructionKind kind,
    const MapConfig& map_config, const InstructionConfig& instruction_config) {
  std::vector<InstructionSample> out;
  out.reserve(count);
  for (int i = 0; i < count; ++i) {
    bool done = false;
    for (int attempt = 0; attempt < 200 && !done; ++attempt) {
      const uint64_t s = Rng::mix(Rng::mix(seed, i), attempt);
      try {
        GridWorld map = generate_map(s, map_config);
        out.push_back(
            generate_instruction(map, kind, Rng::mix(s, 1), instruction_config));
        done = true;
      } catch (const GenerationError&) {
      }
    }
    if (!done) {
      throw GenerationError("generate_dataset: exhausted retries at record " +
                            std::to_string(i));
    }
  }
  return out;
}

const std::vector<std::string>& instruction_template_words() {
  static const std::vector<std::string> words = [] {
    std::vector<std::string> w = {
        "reach", "cells", "cell",  "to",    "the",   "of",   "left",
        "right", "above", "below", "go",    "from",  "up",   "down",
        "steps", "and",   "that",  "is",    "top",   "bottom",
        "one",   "two",   "three", "on",    "map",   "navigate",
        "move",  "westernmost",    "easternmost",    "northernmost",
        "southernmost"};
    for (const auto& name : object_names()) w.push_back(name);
    return w;
  }();
  return words;
}

}  // namespace groundnet
