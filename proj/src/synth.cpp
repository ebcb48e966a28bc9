#include "hypelift/synth.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "hypelift/rng.hpp"
#include "hypelift/util.hpp"

namespace hypelift::synth {

void ConceptTree::validate() const {
  if (nodes.empty()) throw ConfigError("concept tree is empty");
  if (feature_dim < 2) throw ConfigError("feature_dim must be at least 2");
  std::set<int> ids;
  std::set<std::string> labels;
  for (const auto& n : nodes) {
    if (n.id < 0) throw ConfigError("concept ids must be non-negative");
    if (!ids.insert(n.id).second) throw ConfigError("duplicate concept id " + std::to_string(n.id));
    if (!labels.insert(n.label).second) throw ConfigError("duplicate concept label '" + n.label + "'");
  }
  for (const auto& n : nodes) {
    if (n.parent != kRoot && !ids.count(n.parent)) {
      throw ConfigError("concept " + std::to_string(n.id) + " has unknown parent");
    }
    // Walk up; a cycle would exceed the node count.
    int cur = n.parent;
    for (std::size_t steps = 0; cur != kRoot; ++steps) {
      if (steps > nodes.size()) throw ConfigError("concept tree has a cycle");
      cur = node(cur).parent;
    }
  }
}

std::size_t ConceptTree::index_of(int id) const {
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (nodes[i].id == id) return i;
  }
  throw ConfigError("unknown concept id " + std::to_string(id));
}

std::vector<int> ConceptTree::children(int id) const {
  std::vector<int> out;
  for (const auto& n : nodes) {
    if (n.parent == id) out.push_back(n.id);
  }
  return out;
}

std::vector<int> ConceptTree::top_level() const { return children(kRoot); }

int ConceptTree::depth(int id) const {
  int d = 1;
  for (int cur = node(id).parent; cur != kRoot; cur = node(cur).parent) ++d;
  return d;
}

bool ConceptTree::is_ancestor(int ancestor, int id) const {
  for (int cur = node(id).parent; cur != kRoot; cur = node(cur).parent) {
    if (cur == ancestor) return true;
  }
  return false;
}

std::vector<int> ConceptTree::leaves_under(int id) const {
  std::vector<int> out;
  std::vector<int> stack{id};
  while (!stack.empty()) {
    const int cur = stack.back();
    stack.pop_back();
    const auto kids = children(cur);
    if (kids.empty()) out.push_back(cur);
    for (auto it = kids.rbegin(); it != kids.rend(); ++it) stack.push_back(*it);
  }
  return out;
}

ConceptTree ConceptTree::two_objects_three_parts(int feature_dim) {
  ConceptTree t;
  t.feature_dim = feature_dim;
  t.nodes = {
      {0, "chair", kRoot},
      {1, "table", kRoot},
      {2, "back of a chair", 0},
      {3, "seat of a chair", 0},
      {4, "leg of a chair", 0},
      {5, "top of a table", 1},
      {6, "drawer of a table", 1},
      {7, "leg of a table", 1},
  };
  return t;
}

void ViewSpec::validate(const WorldScene& scene) const {
  if (height < 8 || width < 8) throw BoundsError("view '" + id + "' is smaller than 8x8");
  if (row < 0 || col < 0 || row + height > scene.height || col + width > scene.width) {
    throw BoundsError("view '" + id + "' leaves the world bounds");
  }
}

namespace {

constexpr int kMinStrip = 3;

// Splits `span` cells into `k` strips of at least kMinStrip with random weights.
std::vector<int> strip_sizes(Rng& rng, int span, std::size_t k) {
  if (span < static_cast<int>(k) * kMinStrip) {
    throw PlacementError("region of " + std::to_string(span) + " cells cannot hold " + std::to_string(k) +
                         " parts");
  }
  std::vector<double> w(k);
  double total = 0.0;
  for (auto& x : w) total += (x = rng.uniform(0.75, 1.25));
  const int spare = span - static_cast<int>(k) * kMinStrip;
  std::vector<int> sizes(k, kMinStrip);
  int used = 0;
  for (std::size_t i = 0; i < k; ++i) {
    const int extra = static_cast<int>(std::floor(spare * w[i] / total));
    sizes[i] += extra;
    used += extra;
  }
  for (int i = 0; used < spare; ++i, ++used) sizes[static_cast<std::size_t>(i) % k] += 1;
  return sizes;
}

void fill_region(WorldScene& scene, Rng& rng, int id, const Rect& rect, int depth) {
  scene.regions[scene.tree.index_of(id)] = rect;
  const auto kids = scene.tree.children(id);
  if (kids.empty()) {
    for (int r = rect.row; r < rect.row + rect.height; ++r) {
      for (int c = rect.col; c < rect.col + rect.width; ++c) {
        scene.grid[static_cast<std::size_t>(r) * scene.width + c] = id;
      }
    }
    return;
  }
  const bool split_cols = depth % 2 == 1;
  const auto sizes = strip_sizes(rng, split_cols ? rect.width : rect.height, kids.size());
  int offset = 0;
  for (std::size_t i = 0; i < kids.size(); ++i) {
    Rect sub = rect;
    if (split_cols) {
      sub.col = rect.col + offset;
      sub.width = sizes[i];
    } else {
      sub.row = rect.row + offset;
      sub.height = sizes[i];
    }
    offset += sizes[i];
    fill_region(scene, rng, kids[i], sub, depth + 1);
  }
}

Eigen::VectorXd random_unit(Rng& rng, int dim) {
  Eigen::VectorXd v(dim);
  for (int i = 0; i < dim; ++i) v[i] = rng.normal();
  return v.normalized();
}

}  // namespace

WorldScene generate_scene(std::uint64_t seed, const ConceptTree& tree, int height, int width) {
  tree.validate();
  WorldScene scene;
  scene.height = height;
  scene.width = width;
  scene.tree = tree;
  scene.grid.assign(static_cast<std::size_t>(height) * std::max(width, 0), kEmpty);
  scene.regions.assign(tree.nodes.size(), Rect{});

  Rng layout = Rng::derive(seed, {0x1a7007});
  const auto top = tree.top_level();
  const int slot = width / static_cast<int>(top.size());
  if (height < 8 || slot < 8) throw PlacementError("world too small for " + std::to_string(top.size()) + " objects");
  for (std::size_t i = 0; i < top.size(); ++i) {
    Rect r;
    r.width = std::max(kMinStrip, static_cast<int>(std::lround(slot * layout.uniform(0.6, 0.85))));
    r.height = std::max(kMinStrip, static_cast<int>(std::lround(height * layout.uniform(0.5, 0.8))));
    r.col = static_cast<int>(i) * slot + 1 + static_cast<int>(layout.below(static_cast<std::uint64_t>(slot - r.width - 1)));
    r.row = 1 + static_cast<int>(layout.below(static_cast<std::uint64_t>(height - r.height - 1)));
    fill_region(scene, layout, top[i], r, 1);
  }

  Rng feats = Rng::derive(seed, {0xfea7});
  for (std::size_t i = 0; i < tree.nodes.size(); ++i) {
    for (int attempt = 0;; ++attempt) {
      if (attempt > 10000) throw ConfigError("could not draw well-separated concept features");
      Eigen::VectorXd v = random_unit(feats, tree.feature_dim);
      const bool separated = std::all_of(scene.gt_features.begin(), scene.gt_features.end(),
                                         [&](const Eigen::VectorXd& u) { return std::abs(u.dot(v)) < 0.5; });
      if (separated) {
        scene.gt_features.push_back(std::move(v));
        break;
      }
    }
  }
  return scene;
}

namespace {

// Visible pixel bitmap per concept (indexed like tree.nodes).
std::vector<std::vector<std::uint8_t>> visible_bitmaps(const WorldScene& scene, const ViewSpec& view) {
  const auto& tree = scene.tree;
  std::map<int, std::vector<std::size_t>> chain;  // leaf id -> node indices of leaf and ancestors
  for (const auto& n : tree.nodes) {
    if (!tree.is_leaf(n.id)) continue;
    auto& c = chain[n.id];
    for (int cur = n.id; cur != kRoot; cur = tree.node(cur).parent) c.push_back(tree.index_of(cur));
  }
  const std::size_t pixels = static_cast<std::size_t>(view.height) * view.width;
  std::vector<std::vector<std::uint8_t>> out(tree.nodes.size(), std::vector<std::uint8_t>(pixels, 0));
  for (int r = 0; r < view.height; ++r) {
    for (int c = 0; c < view.width; ++c) {
      const int leaf = scene.at(view.row + r, view.col + c);
      if (leaf == kEmpty) continue;
      for (std::size_t idx : chain.at(leaf)) out[idx][static_cast<std::size_t>(r) * view.width + c] = 1;
    }
  }
  return out;
}

}  // namespace

RenderedView render_view(const WorldScene& scene, const ViewSpec& view, const RenderOptions& options,
                         std::uint64_t seed) {
  view.validate(scene);
  const auto& tree = scene.tree;
  const auto bitmaps = visible_bitmaps(scene, view);
  const std::uint64_t view_key = fnv1a64(view.id);

  std::vector<std::int64_t> area(tree.nodes.size(), 0);
  std::vector<bool> emit(tree.nodes.size(), false);
  for (std::size_t i = 0; i < tree.nodes.size(); ++i) {
    area[i] = std::count(bitmaps[i].begin(), bitmaps[i].end(), std::uint8_t{1});
    emit[i] = area[i] > 0;
    if (emit[i] && options.part_dropout > 0.0 && tree.nodes[i].parent != kRoot) {
      Rng drop = Rng::derive(seed, {view_key, static_cast<std::uint64_t>(tree.nodes[i].id), 0xd0});
      if (drop.uniform() < options.part_dropout) emit[i] = false;
    }
  }
  // A concept whose visible pixels coincide with an emitted descendant's
  // would be the same segment; keep only the more specific one.
  for (std::size_t i = 0; i < tree.nodes.size(); ++i) {
    if (!emit[i]) continue;
    for (std::size_t j = 0; j < tree.nodes.size(); ++j) {
      if (emit[j] && area[j] == area[i] && tree.is_ancestor(tree.nodes[i].id, tree.nodes[j].id)) {
        emit[i] = false;
        break;
      }
    }
  }

  RenderedView out;
  out.view = view;
  for (std::size_t i = 0; i < tree.nodes.size(); ++i) {
    if (!emit[i]) continue;
    const int concept_id = tree.nodes[i].id;
    char suffix[16];
    std::snprintf(suffix, sizeof(suffix), "_m%02zu", out.masks.size());
    const std::string mask_id = view.id + suffix;
    out.masks.emplace_back(mask_id, view.id, view.height, view.width, bitmaps[i]);

    Eigen::VectorXd f = scene.gt_features[i];
    if (options.noise_sigma > 0.0) {
      Rng noise = Rng::derive(seed, {view_key, static_cast<std::uint64_t>(concept_id)});
      for (Eigen::Index k = 0; k < f.size(); ++k) f[k] += options.noise_sigma * noise.normal();
      f.normalize();
    }
    out.features.push_back({mask_id, std::move(f)});
    out.mask_concepts.push_back(concept_id);
  }
  return out;
}

std::vector<std::uint8_t> concept_mask(const WorldScene& scene, const ViewSpec& view, int concept_id) {
  const auto leaves = scene.tree.leaves_under(concept_id);
  const std::set<int> leaf_set(leaves.begin(), leaves.end());
  std::vector<std::uint8_t> out(static_cast<std::size_t>(view.height) * view.width, 0);
  for (int r = 0; r < view.height; ++r) {
    for (int c = 0; c < view.width; ++c) {
      if (leaf_set.count(scene.at(view.row + r, view.col + c))) {
        out[static_cast<std::size_t>(r) * view.width + c] = 1;
      }
    }
  }
  return out;
}

std::vector<ViewSpec> spread_views(const WorldScene& scene, int count, int height, int width,
                                   std::uint64_t seed) {
  if (count < 1) throw ConfigError("view count must be positive");
  if (height > scene.height || width > scene.width) throw BoundsError("view larger than the world");
  Rng rng = Rng::derive(seed, {0x71e3});
  const int max_row = scene.height - height;
  const int max_col = scene.width - width;
  std::vector<ViewSpec> views;
  for (int i = 0; i < count; ++i) {
    const double f = count == 1 ? 0.5 : static_cast<double>(i) / (count - 1);
    int col = static_cast<int>(std::lround(f * max_col)) + static_cast<int>(rng.below(5)) - 2;
    int row = (i % 2 == 0 ? 0 : max_row) + (i % 2 == 0 ? 1 : -1) * static_cast<int>(rng.below(3));
    col = std::clamp(col, 0, max_col);
    row = std::clamp(row, 0, max_row);
    char id[16];
    std::snprintf(id, sizeof(id), "view_%02d", i);
    ViewSpec v{id, row, col, height, width};
    v.validate(scene);
    views.push_back(v);
  }
  return views;
}

}  // namespace hypelift::synth
