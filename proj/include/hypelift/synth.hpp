#pragma once

// Synthetic multi-view scenes with known ground truth. A world grid of leaf
// concept ids stands in for the scene, rectangular windows stand in for
// camera views, and noisy copies of per-concept unit vectors stand in for
// language-aligned image features.

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "hypelift/errors.hpp"
#include "hypelift/hierarchy.hpp"

namespace hypelift::synth {

inline constexpr int kEmpty = -1;
inline constexpr int kRoot = -1;

struct ConceptNode {
  int id = 0;
  std::string label;
  int parent = kRoot;
  bool operator==(const ConceptNode&) const = default;
};

struct ConceptTree {
  std::vector<ConceptNode> nodes;
  int feature_dim = 512;

  /// Acyclic, unique ids and labels, parents exist. Throws ConfigError.
  void validate() const;
  std::size_t index_of(int id) const;
  const ConceptNode& node(int id) const { return nodes[index_of(id)]; }
  std::vector<int> children(int id) const;
  std::vector<int> top_level() const;
  bool is_leaf(int id) const { return children(id).empty(); }
  /// 1 for top-level concepts.
  int depth(int id) const;
  /// True if `ancestor` is a strict ancestor of `id`.
  bool is_ancestor(int ancestor, int id) const;
  /// Leaf ids in the subtree rooted at `id` (the concept itself if a leaf).
  std::vector<int> leaves_under(int id) const;

  /// Two objects with three parts each, labelled like hierarchical prompts.
  static ConceptTree two_objects_three_parts(int feature_dim = 512);
  bool operator==(const ConceptTree&) const = default;
};

struct Rect {
  int row = 0, col = 0, height = 0, width = 0;
  bool contains(int r, int c) const { return r >= row && r < row + height && c >= col && c < col + width; }
  bool operator==(const Rect&) const = default;
};

struct WorldScene {
  int height = 0;
  int width = 0;
  std::vector<int> grid;  // leaf concept id or kEmpty, row-major
  ConceptTree tree;
  std::vector<Eigen::VectorXd> gt_features;  // indexed like tree.nodes, unit norm
  std::vector<Rect> regions;                 // indexed like tree.nodes

  int at(int r, int c) const { return grid[static_cast<std::size_t>(r) * width + c]; }
  const Eigen::VectorXd& feature(int concept_id) const { return gt_features[tree.index_of(concept_id)]; }
};

struct ViewSpec {
  std::string id;
  int row = 0, col = 0, height = 0, width = 0;

  /// Throws BoundsError if the window leaves the world or is smaller than 8x8.
  void validate(const WorldScene& scene) const;
  bool operator==(const ViewSpec&) const = default;
};

struct FeatureRecord {
  std::string mask_id;
  Eigen::VectorXd feature;
};

struct RenderOptions {
  double noise_sigma = 0.0;
  /// Probability that a non-top-level concept is not segmented in a view,
  /// emulating a segmenter that misses a granularity level in some images.
  double part_dropout = 0.0;
};

struct RenderedView {
  ViewSpec view;
  std::vector<hier::Mask> masks;
  std::vector<FeatureRecord> features;  // same order as masks
  std::vector<int> mask_concepts;       // ground-truth concept id per mask
};

/// Deterministic in `seed`. Top-level concepts become disjoint rectangles,
/// children tile their parent's rectangle in strips (alternating axis by
/// depth). Features are uniform on the unit sphere, redrawn until every pair
/// has |cos| < 0.5. Throws PlacementError if the world is too small.
WorldScene generate_scene(std::uint64_t seed, const ConceptTree& tree, int height, int width);

/// One mask per visible concept subtree (a parent whose visible pixels equal a
/// single child's is not emitted separately). Feature noise is drawn from a
/// stream keyed on (seed, view id, concept id).
RenderedView render_view(const WorldScene& scene, const ViewSpec& view, const RenderOptions& options,
                         std::uint64_t seed);

/// Ground-truth pixels of `concept_id` (its whole subtree) inside the view.
std::vector<std::uint8_t> concept_mask(const WorldScene& scene, const ViewSpec& view, int concept_id);

/// `count` windows of the given size spread over the world, jittered by seed.
std::vector<ViewSpec> spread_views(const WorldScene& scene, int count, int height, int width,
                                   std::uint64_t seed);

}  // namespace hypelift::synth
