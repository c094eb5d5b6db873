#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "errors.hpp"
#include "rng.hpp"

namespace groundnet {

inline constexpr int kNumShapeKinds = 8;
inline constexpr int kNumShapeColors = 8;

const std::vector<std::string>& shape_kind_names();   // square .. ellipse
const std::vector<std::string>& shape_color_names();  // red .. white
const std::array<double, 3>& shape_color_rgb(int color);

struct ShapeSpec {
  int kind = 0;
  int color = 0;
  double cx = 0.0;  // pixel column of the center
  double cy = 0.0;  // pixel row of the center
  double size = 0.0;  // half extent in pixels
};

struct Scene {
  int image_size = 64;
  std::vector<double> image;  // row-major (y, x, channel), entries in [0, 1]
  std::vector<ShapeSpec> shapes;
};

struct SceneConfig {
  int image_size = 64;
  int min_shapes = 4;
  int max_shapes = 5;
  double min_size = 5.0;
  double max_size = 9.0;
  int max_retries = 200;
};

Scene render_scene(uint64_t seed, const SceneConfig& config = {});

enum class SpatialRelation { kLeftOf, kRightOf, kAbove, kBelow };

struct CaptionSpec {
  int subject_color = -1;  // -1: unspecified
  int subject_kind = 0;
  SpatialRelation relation = SpatialRelation::kLeftOf;
  int object_color = -1;
  int object_kind = 0;
};

std::string render_caption(const CaptionSpec& spec);

// Existential semantics over shape centers with strict inequalities: the
// caption is true iff some pair of distinct shapes matches the two
// descriptors and satisfies the relation.
bool caption_holds(const Scene& scene, const CaptionSpec& spec);

struct CaptionSample {
  std::string caption;
  CaptionSpec spec;
  bool label = false;
};

struct CaptionConfig {
  double color_prob = 0.5;
  double ambiguity_margin = 2.0;  // resample near-tie pairs (px)
  int max_retries = 200;
};

// Emits a caption whose truth value equals target_label; near-tie captions
// (any descriptor-matching pair within the margin on the relation axis) are
// resampled. Throws GenerationError when the scene cannot satisfy the label.
CaptionSample generate_caption(const Scene& scene, uint64_t seed,
                               bool target_label,
                               const CaptionConfig& config = {});

struct SwSample {
  Scene scene;
  CaptionSample caption;
};

std::vector<SwSample> generate_sw_dataset(uint64_t seed, int count,
                                          const SceneConfig& scene_config = {},
                                          const CaptionConfig& caption_config = {});

const std::vector<std::string>& caption_template_words();

// Evaluation-time observational noise for the pixel task: `amount` square
// patches of N(0,1) noise added to the image, clipped back to [0, 1].
void add_gaussian_patches(std::vector<double>& image, int image_size,
                          int amount, int patch_size, Rng& rng);

}  // namespace groundnet
