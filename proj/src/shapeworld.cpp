#include "shapeworld.hpp"

#include <algorithm>
#include <cmath>

namespace groundnet {

const std::vector<std::string>& shape_kind_names() {
  static const std::vector<std::string> names = {
      "square", "rectangle", "triangle",   "pentagon",
      "cross",  "circle",    "semicircle", "ellipse"};
  return names;
}

const std::vector<std::string>& shape_color_names() {
  static const std::vector<std::string> names = {
      "red", "green", "blue", "yellow", "magenta", "cyan", "gray", "white"};
  return names;
}

const std::array<double, 3>& shape_color_rgb(int color) {
  static const std::array<std::array<double, 3>, kNumShapeColors> palette = {{
      {1.0, 0.0, 0.0},
      {0.0, 1.0, 0.0},
      {0.0, 0.0, 1.0},
      {1.0, 1.0, 0.0},
      {1.0, 0.0, 1.0},
      {0.0, 1.0, 1.0},
      {0.5, 0.5, 0.5},
      {1.0, 1.0, 1.0},
  }};
  return palette[color];
}

namespace {

bool inside_convex(const std::vector<std::pair<double, double>>& poly,
                   double x, double y) {
  const size_t n = poly.size();
  int sign = 0;
  for (size_t i = 0; i < n; ++i) {
    const auto& [x1, y1] = poly[i];
    const auto& [x2, y2] = poly[(i + 1) % n];
    const double cross = (x2 - x1) * (y - y1) - (y2 - y1) * (x - x1);
    if (cross == 0.0) continue;
    const int s = cross > 0.0 ? 1 : -1;
    if (sign == 0) {
      sign = s;
    } else if (s != sign) {
      return false;
    }
  }
  return true;
}

bool inside_shape(const ShapeSpec& sp, double px, double py) {
  const double dx = px - sp.cx;
  const double dy = py - sp.cy;
  const double s = sp.size;
  switch (sp.kind) {
    case 0:  // square
      return std::abs(dx) <= s && std::abs(dy) <= s;
    case 1:  // rectangle
      return std::abs(dx) <= s && std::abs(dy) <= 0.55 * s;
    case 2: {  // triangle, apex up
      const std::vector<std::pair<double, double>> poly = {
          {0.0, -s}, {-s, s}, {s, s}};
      return inside_convex(poly, dx, dy);
    }
    case 3: {  // pentagon
      std::vector<std::pair<double, double>> poly;
      for (int k = 0; k < 5; ++k) {
        const double a = -M_PI / 2 + 2.0 * M_PI * k / 5.0;
        poly.emplace_back(s * std::cos(a), s * std::sin(a));
      }
      return inside_convex(poly, dx, dy);
    }
    case 4:  // cross
      return (std::abs(dx) <= s / 3.0 && std::abs(dy) <= s) ||
             (std::abs(dy) <= s / 3.0 && std::abs(dx) <= s);
    case 5:  // circle
      return dx * dx + dy * dy <= s * s;
    case 6:  // semicircle, flat side up
      return dx * dx + dy * dy <= s * s && dy >= 0.0;
    default: {  // ellipse
      const double ry = 0.55 * s;
      return (dx * dx) / (s * s) + (dy * dy) / (ry * ry) <= 1.0;
    }
  }
}

bool boxes_disjoint(const ShapeSpec& a, const ShapeSpec& b, double gap) {
  return std::abs(a.cx - b.cx) > a.size + b.size + gap ||
         std::abs(a.cy - b.cy) > a.size + b.size + gap;
}

}  // namespace

Scene render_scene(uint64_t seed, const SceneConfig& config) {
  Rng rng(Rng::mix(seed, 0x7363656eULL));
  for (int attempt = 0; attempt < config.max_retries; ++attempt) {
    Scene scene;
    scene.image_size = config.image_size;
    const int span = config.max_shapes - config.min_shapes;
    const int count =
        config.min_shapes + (span > 0 ? rng.uniform_int(span + 1) : 0);
    bool ok = true;
    for (int i = 0; i < count && ok; ++i) {
      bool placed = false;
      for (int t = 0; t < 64 && !placed; ++t) {
        ShapeSpec sp;
        sp.kind = rng.uniform_int(kNumShapeKinds);
        sp.color = rng.uniform_int(kNumShapeColors);
        sp.size = rng.uniform(config.min_size, config.max_size);
        const double lo = sp.size + 1.0;
        const double hi = config.image_size - sp.size - 1.0;
        sp.cx = rng.uniform(lo, hi);
        sp.cy = rng.uniform(lo, hi);
        placed = true;
        for (const ShapeSpec& other : scene.shapes) {
          if (!boxes_disjoint(sp, other, 1.0)) {
            placed = false;
            break;
          }
        }
        if (placed) scene.shapes.push_back(sp);
      }
      ok = placed;
    }
    if (!ok) continue;
    const int hw = config.image_size;
    scene.image.assign(static_cast<size_t>(hw) * hw * 3, 0.0);
    for (const ShapeSpec& sp : scene.shapes) {
      const auto& rgb = shape_color_rgb(sp.color);
      const int y0 = std::max(0, static_cast<int>(sp.cy - sp.size) - 1);
      const int y1 = std::min(hw - 1, static_cast<int>(sp.cy + sp.size) + 1);
      const int x0 = std::max(0, static_cast<int>(sp.cx - sp.size) - 1);
      const int x1 = std::min(hw - 1, static_cast<int>(sp.cx + sp.size) + 1);
      for (int y = y0; y <= y1; ++y) {
        for (int x = x0; x <= x1; ++x) {
          if (inside_shape(sp, x + 0.5, y + 0.5)) {
            double* px = scene.image.data() + (static_cast<size_t>(y) * hw + x) * 3;
            px[0] = rgb[0];
            px[1] = rgb[1];
            px[2] = rgb[2];
          }
        }
      }
    }
    return scene;
  }
  throw GenerationError("render_scene: could not place shapes after retries");
}

std::string render_caption(const CaptionSpec& spec) {
  auto describe = [](int color, int kind) {
    std::string s = "a ";
    if (color >= 0) s += shape_color_names()[color] + " ";
    s += shape_kind_names()[kind];
    return s;
  };
  std::string rel;
  switch (spec.relation) {
    case SpatialRelation::kLeftOf: rel = "to the left of"; break;
    case SpatialRelation::kRightOf: rel = "to the right of"; break;
    case SpatialRelation::kAbove: rel = "above"; break;
    case SpatialRelation::kBelow: rel = "below"; break;
  }
  return describe(spec.subject_color, spec.subject_kind) + " is " + rel + " " +
         describe(spec.object_color, spec.object_kind);
}

namespace {

bool matches(const ShapeSpec& sp, int color, int kind) {
  return sp.kind == kind && (color < 0 || sp.color == color);
}

bool relation_holds(const ShapeSpec& a, const ShapeSpec& b,
                    SpatialRelation rel) {
  switch (rel) {
    case SpatialRelation::kLeftOf: return a.cx < b.cx;
    case SpatialRelation::kRightOf: return a.cx > b.cx;
    case SpatialRelation::kAbove: return a.cy < b.cy;
    case SpatialRelation::kBelow: return a.cy > b.cy;
  }
  return false;
}

double relation_margin(const ShapeSpec& a, const ShapeSpec& b,
                       SpatialRelation rel) {
  switch (rel) {
    case SpatialRelation::kLeftOf:
    case SpatialRelation::kRightOf: return std::abs(a.cx - b.cx);
    default: return std::abs(a.cy - b.cy);
  }
}

}  // namespace

bool caption_holds(const Scene& scene, const CaptionSpec& spec) {
  const auto& shapes = scene.shapes;
  for (size_t i = 0; i < shapes.size(); ++i) {
    if (!matches(shapes[i], spec.subject_color, spec.subject_kind)) continue;
    for (size_t j = 0; j < shapes.size(); ++j) {
      if (i == j) continue;
      if (!matches(shapes[j], spec.object_color, spec.object_kind)) continue;
      if (relation_holds(shapes[i], shapes[j], spec.relation)) return true;
    }
  }
  return false;
}

CaptionSample generate_caption(const Scene& scene, uint64_t seed,
                               bool target_label,
                               const CaptionConfig& config) {
  if (scene.shapes.size() < 2) {
    throw InputError("generate_caption: scene needs at least two shapes");
  }
  Rng rng(Rng::mix(seed, 0x63617074ULL));
  const int n = static_cast<int>(scene.shapes.size());
  for (int attempt = 0; attempt < config.max_retries; ++attempt) {
    const int ai = rng.uniform_int(n);
    int bi = rng.uniform_int(n - 1);
    if (bi >= ai) ++bi;
    const ShapeSpec& a = scene.shapes[ai];
    const ShapeSpec& b = scene.shapes[bi];
    CaptionSpec spec;
    spec.subject_kind = a.kind;
    spec.subject_color = rng.bernoulli(config.color_prob) ? a.color : -1;
    spec.object_kind = b.kind;
    spec.object_color = rng.bernoulli(config.color_prob) ? b.color : -1;
    spec.relation = static_cast<SpatialRelation>(rng.uniform_int(4));

    bool ambiguous = false;
    for (size_t i = 0; i < scene.shapes.size() && !ambiguous; ++i) {
      if (!matches(scene.shapes[i], spec.subject_color, spec.subject_kind)) {
        continue;
      }
      for (size_t j = 0; j < scene.shapes.size(); ++j) {
        if (i == j) continue;
        if (!matches(scene.shapes[j], spec.object_color, spec.object_kind)) {
          continue;
        }
        if (relation_margin(scene.shapes[i], scene.shapes[j], spec.relation) <
            config.ambiguity_margin) {
          ambiguous = true;
          break;
        }
      }
    }
    if (ambiguous) continue;
    if (caption_holds(scene, spec) != target_label) continue;
    CaptionSample out;
    out.spec = spec;
    out.caption = render_caption(spec);
    out.label = target_label;
    return out;
  }
  throw GenerationError("generate_caption: no caption with requested label");
}

std::vector<SwSample> generate_sw_dataset(uint64_t seed, int count,
                                          const SceneConfig& scene_config,
                                          const CaptionConfig& caption_config) {
  std::vector<SwSample> out;
  out.reserve(count);
  for (int i = 0; i < count; ++i) {
    const bool target = (i % 2) == 0;  // exact class balance
    bool done = false;
    for (int attempt = 0; attempt < 100 && !done; ++attempt) {
      const uint64_t s = Rng::mix(Rng::mix(seed, i), attempt);
      try {
        SwSample sample;
        sample.scene = render_scene(s, scene_config);
        sample.caption =
            generate_caption(sample.scene, Rng::mix(s, 2), target,
                             caption_config);
        out.push_back(std::move(sample));
        done = true;
      } catch (const GenerationError&) {
      }
    }
    if (!done) {
      throw GenerationError("generate_sw_dataset: exhausted retries at " +
                            std::to_string(i));
    }
  }
  return out;
}

const std::vector<std::string>& caption_template_words() {
  static const std::vector<std::string> words = [] {
    std::vector<std::string> w = {"a", "is", "to", "the", "left",
                                  "right", "of", "above", "below"};
    for (const auto& c : shape_color_names()) w.push_back(c);
    for (const auto& k : shape_kind_names()) w.push_back(k);
    return w;
  }();
  return words;
}

void add_gaussian_patches(std::vector<double>& image, int image_size,
                          int amount, int patch_size, Rng& rng) {
  for (int p = 0; p < amount; ++p) {
    const int y0 = rng.uniform_int(std::max(1, image_size - patch_size));
    const int x0 = rng.uniform_int(std::max(1, image_size - patch_size));
    for (int y = y0; y < std::min(image_size, y0 + patch_size); ++y) {
      for (int x = x0; x < std::min(image_size, x0 + patch_size); ++x) {
        for (int c = 0; c < 3; ++c) {
          double& px = image[(static_cast<size_t>(y) * image_size + x) * 3 + c];
          px = std::clamp(px + rng.normal(), 0.0, 1.0);
        }
      }
    }
  }
}

}  // namespace groundnet
