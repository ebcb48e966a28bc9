#include <algorithm>
#include <random>

#include "doctest.h"
#include "hierarchy_oracle.hpp"
#include "hypelift/hierarchy.hpp"
#include "hypelift/synth.hpp"
#include "scene_support.hpp"

using namespace hypelift;
using namespace hypelift::hier;

namespace {

Mask rect_mask(const std::string& id, int h, int w, int r0, int c0, int r1, int c1) {
  std::vector<std::uint8_t> bits(static_cast<std::size_t>(h) * w, 0);
  for (int r = r0; r < r1; ++r) {
    for (int c = c0; c < c1; ++c) bits[static_cast<std::size_t>(r) * w + c] = 1;
  }
  return Mask(id, "img", h, w, bits);
}

const HierarchyNode& node(const MaskHierarchy& h, const std::string& id) { return h.nodes[*h.index_of(id)]; }

void check_against_oracle(const std::vector<Mask>& masks, const ContainmentConfig& cfg) {
  const MaskHierarchy h = build_hierarchy(masks, cfg);
  const auto oracle = testing::hierarchy_oracle(masks, cfg.tolerance, cfg.min_area);
  REQUIRE(h.nodes.size() == oracle.size());
  for (const auto& n : h.nodes) {
    const auto& o = oracle.at(n.mask_id);
    CHECK(n.level == o.level);
    CHECK(n.parent == o.parent);
  }
}

}  // namespace

TEST_CASE("containment test") {
  ContainmentConfig cfg;
  const Mask big = rect_mask("a", 20, 20, 0, 0, 20, 10);
  const Mask small = rect_mask("b", 20, 20, 2, 2, 8, 8);
  CHECK(contains(big, small, cfg));
  CHECK_FALSE(contains(small, big, cfg));
  CHECK_FALSE(contains(big, big, cfg));

  // 100-pixel child with 3 pixels outside the parent.
  const Mask child = rect_mask("c", 20, 20, 0, 7, 10, 17);
  std::vector<std::uint8_t> bits(400, 0);
  for (int r = 0; r < 20; ++r) {
    for (int c = 0; c < 20; ++c) bits[r * 20 + c] = child.covers(r, c) ? 1 : 0;
  }
  bits[0 * 20 + 7] = bits[0 * 20 + 8] = bits[0 * 20 + 9] = 0;
  for (int r = 0; r < 20; ++r) bits[r * 20 + 0] = 1;
  const Mask parent("p", "img", 20, 20, bits);
  CHECK(parent.area() > child.area());
  CHECK(contains(parent, child, ContainmentConfig{0.05, 16}));
  CHECK_FALSE(contains(parent, child, ContainmentConfig{0.02, 16}));

  CHECK_THROWS_AS(contains(big, rect_mask("d", 10, 10, 0, 0, 5, 5), cfg), DimensionError);
  CHECK_THROWS_AS(Mask("e", "img", 4, 4, std::vector<std::uint8_t>(16, 0)), ConfigError);
  CHECK_THROWS_AS(Mask("e", "img", 4, 4, std::vector<std::uint8_t>(15, 1)), DimensionError);
}

TEST_CASE("nested chain gets consecutive levels") {
  const std::vector<Mask> masks{rect_mask("C", 32, 32, 10, 10, 16, 16), rect_mask("A", 32, 32, 0, 0, 32, 32),
                                rect_mask("B", 32, 32, 4, 4, 24, 24)};
  const MaskHierarchy h = build_hierarchy(masks, {});
  CHECK(node(h, "A").level == 1);
  CHECK(node(h, "B").level == 2);
  CHECK(node(h, "C").level == 3);
  CHECK_FALSE(node(h, "A").parent);
  CHECK(node(h, "B").parent == "A");
  CHECK(node(h, "C").parent == "B");
  CHECK(h.is_parent(*h.index_of("A"), *h.index_of("B")));
  CHECK_FALSE(h.is_parent(*h.index_of("A"), *h.index_of("C")));
  check_against_oracle(masks, {});
}

TEST_CASE("disjoint masks are both top level") {
  const std::vector<Mask> masks{rect_mask("A", 32, 32, 0, 0, 10, 10), rect_mask("B", 32, 32, 20, 20, 30, 30)};
  const MaskHierarchy h = build_hierarchy(masks, {});
  CHECK(node(h, "A").level == 1);
  CHECK(node(h, "B").level == 1);
  CHECK(h.relation.empty());
}

TEST_CASE("overlapping containers: the smaller one is the parent") {
  // A and B overlap without nesting; C lies in both.
  const std::vector<Mask> masks{rect_mask("A", 32, 32, 0, 0, 20, 20), rect_mask("B", 32, 32, 5, 5, 22, 22),
                                rect_mask("C", 32, 32, 8, 8, 14, 14)};
  const MaskHierarchy h = build_hierarchy(masks, {});
  CHECK(node(h, "A").level == 1);
  CHECK(node(h, "B").level == 1);
  CHECK(node(h, "C").parent == "B");
  CHECK(node(h, "C").level == 2);
  check_against_oracle(masks, {});
}

TEST_CASE("small masks are dropped and empty input gives an empty hierarchy") {
  const std::vector<Mask> masks{rect_mask("A", 32, 32, 0, 0, 20, 20), rect_mask("tiny", 32, 32, 1, 1, 4, 4)};
  const MaskHierarchy h = build_hierarchy(masks, {});
  CHECK(h.nodes.size() == 1);
  CHECK_FALSE(h.index_of("tiny"));
  CHECK(build_hierarchy({}, {}).nodes.empty());
  CHECK_THROWS_AS(build_hierarchy({masks[0], masks[0]}, {}), ConfigError);
}

TEST_CASE("deepest mask lookup") {
  const std::vector<Mask> masks{rect_mask("A", 32, 32, 0, 0, 32, 32), rect_mask("B", 32, 32, 4, 4, 24, 24),
                                rect_mask("C", 32, 32, 10, 10, 16, 16), rect_mask("D", 32, 32, 4, 26, 30, 31),
                                rect_mask("E", 32, 32, 26, 4, 30, 8)};
  const MaskHierarchy h = build_hierarchy(masks, {});
  CHECK(deepest_mask_at(h, masks, 12, 12) == "C");
  CHECK(deepest_mask_at(h, masks, 5, 5) == "B");
  CHECK(deepest_mask_at(h, masks, 0, 0) == "A");
  // D (130 px) and E (16 px) are both level 2; they do not overlap here, so
  // the tie-break is checked with an overlapping same-level pair below.
  CHECK(deepest_mask_at(h, masks, 27, 5) == "E");
  CHECK_THROWS_AS(deepest_mask_at(h, masks, 32, 0), BoundsError);

  const std::vector<Mask> pair{rect_mask("big", 16, 16, 0, 0, 10, 10), rect_mask("small", 16, 16, 5, 5, 15, 14)};
  const MaskHierarchy hp = build_hierarchy(pair, {});
  REQUIRE(node(hp, "big").level == node(hp, "small").level);
  CHECK(deepest_mask_at(hp, pair, 6, 6) == "small");  // 90 px beats 100 px
  CHECK(deepest_mask_at(hp, pair, 1, 1) == "big");
  CHECK(deepest_mask_at(hp, pair, 14, 14).has_value() == false);

  const auto map = deepest_mask_map(h, masks);
  for (int r = 0; r < 32; ++r) {
    for (int c = 0; c < 32; ++c) {
      const auto id = deepest_mask_at(h, masks, r, c);
      const int idx = map[static_cast<std::size_t>(r) * 32 + c];
      CHECK((idx < 0 ? !id.has_value() : masks[static_cast<std::size_t>(idx)].id() == *id));
    }
  }
}

TEST_CASE("permutation invariance and relation consistency") {
  std::vector<Mask> masks{rect_mask("A", 32, 32, 0, 0, 32, 32), rect_mask("B", 32, 32, 4, 4, 24, 24),
                          rect_mask("C", 32, 32, 10, 10, 16, 16), rect_mask("D", 32, 32, 4, 26, 30, 31),
                          rect_mask("E", 32, 32, 26, 4, 30, 8)};
  const MaskHierarchy ref = build_hierarchy(masks, {});
  std::mt19937 gen(7);
  for (int i = 0; i < 20; ++i) {
    std::shuffle(masks.begin(), masks.end(), gen);
    CHECK(build_hierarchy(masks, {}) == ref);
  }
  std::vector<int> parents_per_child(ref.nodes.size(), 0);
  for (const auto& [p, c] : ref.relation) {
    ++parents_per_child[c];
    CHECK(ref.nodes[c].level == ref.nodes[p].level + 1);
  }
  for (std::size_t i = 0; i < ref.nodes.size(); ++i) {
    CHECK(parents_per_child[i] == (ref.nodes[i].parent ? 1 : 0));
  }
}

TEST_CASE("random synthetic views match the oracle and the concept tree") {
  Rng rng(2024);
  for (int trial = 0; trial < 40; ++trial) {
    const auto tree = testing::random_tree(rng);
    const auto scene = synth::generate_scene(rng.next_u64(), tree, 48, 96);
    const auto views = synth::spread_views(scene, 3, 32, 40, rng.next_u64());
    for (const auto& v : views) {
      const auto rendered = synth::render_view(scene, v, {}, 1);
      if (rendered.masks.empty()) continue;
      check_against_oracle(rendered.masks, {});
      const MaskHierarchy h = build_hierarchy(rendered.masks, {});
      // Parent mask must be the nearest emitted ancestor concept.
      for (std::size_t m = 0; m < rendered.masks.size(); ++m) {
        const auto idx = h.index_of(rendered.masks[m].id());
        if (!idx) continue;
        const int concept_id = rendered.mask_concepts[m];
        const auto& parent = h.nodes[*idx].parent;
        if (!parent) {
          for (std::size_t k = 0; k < rendered.masks.size(); ++k) {
            if (h.index_of(rendered.masks[k].id())) CHECK_FALSE(tree.is_ancestor(rendered.mask_concepts[k], concept_id));
          }
          continue;
        }
        const auto pk = std::find_if(rendered.masks.begin(), rendered.masks.end(),
                                     [&](const Mask& x) { return x.id() == *parent; }) -
                        rendered.masks.begin();
        CHECK(tree.is_ancestor(rendered.mask_concepts[static_cast<std::size_t>(pk)], concept_id));
      }
    }
  }
}
