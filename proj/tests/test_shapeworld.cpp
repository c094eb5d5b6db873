#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstring>
#include <sstream>

#include "shapeworld.hpp"

using namespace groundnet;

namespace {

// Caption truth re-derived from the caption text alone. Shares no code with
// the generator's checker: its own parser, matcher and comparisons.
bool independent_truth(const Scene& scene, const std::string& caption) {
  std::istringstream is(caption);
  std::vector<std::string> tok;
  std::string w;
  while (is >> w) tok.push_back(w);

  auto color_id = [](const std::string& word) {
    const auto& names = shape_color_names();
    for (size_t i = 0; i < names.size(); ++i) {
      if (names[i] == word) return static_cast<int>(i);
    }
    return -1;
  };
  auto kind_id = [](const std::string& word) {
    const auto& names = shape_kind_names();
    for (size_t i = 0; i < names.size(); ++i) {
      if (names[i] == word) return static_cast<int>(i);
    }
    return -1;
  };

  size_t p = 0;
  REQUIRE(tok[p++] == "a");
  int subj_color = color_id(tok[p]);
  if (subj_color >= 0) ++p;
  const int subj_kind = kind_id(tok[p++]);
  REQUIRE(subj_kind >= 0);
  REQUIRE(tok[p++] == "is");
  std::string rel;
  if (tok[p] == "above" || tok[p] == "below") {
    rel = tok[p++];
  } else {
    REQUIRE(tok[p] == "to");
    rel = tok[p + 2];  // left / right
    p += 4;            // to the X of
  }
  REQUIRE(tok[p++] == "a");
  int obj_color = color_id(tok[p]);
  if (obj_color >= 0) ++p;
  const int obj_kind = kind_id(tok[p++]);
  REQUIRE(obj_kind >= 0);

  for (size_t i = 0; i < scene.shapes.size(); ++i) {
    const auto& a = scene.shapes[i];
    if (a.kind != subj_kind) continue;
    if (subj_color >= 0 && a.color != subj_color) continue;
    for (size_t j = 0; j < scene.shapes.size(); ++j) {
      if (i == j) continue;
      const auto& b = scene.shapes[j];
      if (b.kind != obj_kind) continue;
      if (obj_color >= 0 && b.color != obj_color) continue;
      bool holds = false;
      if (rel == "left") holds = a.cx < b.cx;
      if (rel == "right") holds = a.cx > b.cx;
      if (rel == "above") holds = a.cy < b.cy;
      if (rel == "below") holds = a.cy > b.cy;
      if (holds) return true;
    }
  }
  return false;
}

}  // namespace

TEST_CASE("scene shape counts follow the configured range") {
  SceneConfig cfg;
  cfg.min_shapes = 4;
  cfg.max_shapes = 4;
  const Scene s = render_scene(1, cfg);
  CHECK(s.shapes.size() == 4);

  for (uint64_t seed = 0; seed < 40; ++seed) {
    const Scene sc = render_scene(seed, {});
    CHECK(sc.shapes.size() >= 4);
    CHECK(sc.shapes.size() <= 5);
  }
}

TEST_CASE("same seed renders a bit-identical image") {
  const Scene a = render_scene(77, {});
  const Scene b = render_scene(77, {});
  REQUIRE(a.image.size() == b.image.size());
  CHECK(std::memcmp(a.image.data(), b.image.data(),
                    a.image.size() * sizeof(double)) == 0);
}

TEST_CASE("bounding boxes stay disjoint and inside the image") {
  for (uint64_t seed = 0; seed < 200; ++seed) {
    const Scene s = render_scene(seed, {});
    for (size_t i = 0; i < s.shapes.size(); ++i) {
      const auto& a = s.shapes[i];
      CHECK(a.cx - a.size >= 0.0);
      CHECK(a.cx + a.size <= s.image_size);
      CHECK(a.cy - a.size >= 0.0);
      CHECK(a.cy + a.size <= s.image_size);
      for (size_t j = i + 1; j < s.shapes.size(); ++j) {
        const auto& b = s.shapes[j];
        const bool disjoint = std::abs(a.cx - b.cx) > a.size + b.size ||
                              std::abs(a.cy - b.cy) > a.size + b.size;
        CHECK(disjoint);
      }
    }
    for (double v : s.image) {
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
    }
  }
}

TEST_CASE("caption truth follows center coordinates") {
  Scene scene;
  scene.shapes.push_back({5, 0, 10.0, 30.0, 6.0});  // circle at x=10
  scene.shapes.push_back({3, 1, 50.0, 30.0, 6.0});  // pentagon at x=50
  CaptionSpec spec;
  spec.subject_kind = 5;
  spec.object_kind = 3;
  spec.relation = SpatialRelation::kLeftOf;
  CHECK(caption_holds(scene, spec));
  CHECK(render_caption(spec) == "a circle is to the left of a pentagon");
  spec.relation = SpatialRelation::kRightOf;
  CHECK_FALSE(caption_holds(scene, spec));
}

TEST_CASE("captions on scenes with fewer than two shapes are rejected") {
  Scene scene;
  scene.shapes.push_back({0, 0, 20.0, 20.0, 5.0});
  CHECK_THROWS_AS(generate_caption(scene, 1, true), InputError);
}

TEST_CASE("independent geometric checker reproduces every stored label") {
  const auto data = generate_sw_dataset(3, 1000);
  for (const auto& sample : data) {
    CHECK(independent_truth(sample.scene, sample.caption.caption) ==
          sample.caption.label);
  }
}

TEST_CASE("default dataset is class balanced") {
  const auto data = generate_sw_dataset(9, 10000);
  int pos = 0;
  for (const auto& s : data) pos += s.caption.label ? 1 : 0;
  const double p = static_cast<double>(pos) / data.size();
  CHECK(std::abs(p - 0.5) < 0.02);
}

TEST_CASE("gaussian patches keep pixels in range and are seeded") {
  Scene s = render_scene(5, {});
  auto img1 = s.image;
  auto img2 = s.image;
  Rng r1(11), r2(11);
  add_gaussian_patches(img1, s.image_size, 10, 8, r1);
  add_gaussian_patches(img2, s.image_size, 10, 8, r2);
  CHECK(img1 == img2);
  CHECK(img1 != s.image);
  for (double v : img1) {
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
  }
}
