#include "hypelift/hierarchy.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <set>

namespace hypelift::hier {

Mask::Mask(std::string id, std::string image, int height, int width, std::vector<std::uint8_t> bitmap)
    : id_(std::move(id)), image_(std::move(image)), height_(height), width_(width), bitmap_(std::move(bitmap)) {
  if (height_ <= 0 || width_ <= 0 ||
      bitmap_.size() != static_cast<std::size_t>(height_) * static_cast<std::size_t>(width_)) {
    throw DimensionError("mask '" + id_ + "' bitmap does not match " + std::to_string(height_) + "x" +
                         std::to_string(width_));
  }
  for (auto& b : bitmap_) b = b ? 1 : 0;
  area_ = std::count(bitmap_.begin(), bitmap_.end(), std::uint8_t{1});
  if (area_ == 0) throw ConfigError("mask '" + id_ + "' is empty");
}

void ContainmentConfig::validate() const {
  if (!(tolerance >= 0.0 && tolerance <= 0.5)) throw ConfigError("containment tolerance must be in [0, 0.5]");
  if (min_area < 1) throw ConfigError("min_area must be positive");
}

bool contains(const Mask& parent, const Mask& child, const ContainmentConfig& cfg) {
  if (parent.height() != child.height() || parent.width() != child.width()) {
    throw DimensionError("masks '" + parent.id() + "' and '" + child.id() + "' differ in size");
  }
  if (parent.area() <= child.area()) return false;
  const auto& p = parent.bitmap();
  const auto& c = child.bitmap();
  std::int64_t outside = 0;
  for (std::size_t i = 0; i < c.size(); ++i) outside += c[i] & (p[i] ^ 1);
  return static_cast<double>(outside) <= cfg.tolerance * static_cast<double>(child.area());
}

std::optional<std::size_t> MaskHierarchy::index_of(const std::string& mask_id) const {
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (nodes[i].mask_id == mask_id) return i;
  }
  return std::nullopt;
}

bool MaskHierarchy::is_parent(std::size_t i, std::size_t j) const {
  return std::binary_search(relation.begin(), relation.end(), std::make_pair(i, j));
}

std::vector<std::size_t> MaskHierarchy::children(std::size_t i) const {
  std::vector<std::size_t> out;
  for (const auto& [p, c] : relation) {
    if (p == i) out.push_back(c);
  }
  return out;
}

std::optional<std::size_t> MaskHierarchy::parent_index(std::size_t i) const {
  for (const auto& [p, c] : relation) {
    if (c == i) return p;
  }
  return std::nullopt;
}

namespace {

// Smaller area first, then lexicographic id.
bool tighter(const Mask& a, const Mask& b) {
  if (a.area() != b.area()) return a.area() < b.area();
  return a.id() < b.id();
}

}  // namespace

MaskHierarchy build_hierarchy(const std::vector<Mask>& masks, const ContainmentConfig& cfg) {
  cfg.validate();
  MaskHierarchy h;
  if (masks.empty()) return h;
  h.image = masks.front().image();

  std::vector<const Mask*> kept;
  std::set<std::string> seen;
  for (const auto& m : masks) {
    if (m.height() != masks.front().height() || m.width() != masks.front().width()) {
      throw DimensionError("masks of one image must share its size");
    }
    if (!seen.insert(m.id()).second) throw ConfigError("duplicate mask id '" + m.id() + "'");
    if (m.area() >= cfg.min_area) kept.push_back(&m);
  }
  std::sort(kept.begin(), kept.end(), [](const Mask* a, const Mask* b) { return a->id() < b->id(); });
  const std::size_t n = kept.size();

  std::vector<std::vector<std::size_t>> containers(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i != j && contains(*kept[j], *kept[i], cfg)) containers[i].push_back(j);
    }
  }

  std::vector<int> level(n, 0);
  std::vector<std::optional<std::size_t>> parent(n);
  std::size_t placed = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (containers[i].empty()) {
      level[i] = 1;
      ++placed;
    }
  }
  while (placed < n) {
    std::vector<std::size_t> ready;
    for (std::size_t i = 0; i < n; ++i) {
      if (level[i] != 0) continue;
      const bool all_placed = std::all_of(containers[i].begin(), containers[i].end(),
                                          [&](std::size_t j) { return level[j] != 0; });
      if (all_placed) ready.push_back(i);
    }
    if (ready.empty()) {
      // Orphans: nothing left can be attached under a placed mask.
      for (std::size_t i = 0; i < n; ++i) {
        if (level[i] == 0) {
          level[i] = 1;
          ++placed;
        }
      }
      break;
    }
    for (std::size_t i : ready) {
      std::size_t best = containers[i].front();
      for (std::size_t j : containers[i]) {
        if (tighter(*kept[j], *kept[best])) best = j;
      }
      parent[i] = best;
      level[i] = level[best] + 1;
      ++placed;
    }
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (level[a] != level[b]) return level[a] < level[b];
    return kept[a]->id() < kept[b]->id();
  });
  std::vector<std::size_t> position(n);
  for (std::size_t k = 0; k < n; ++k) position[order[k]] = k;

  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t i = order[k];
    HierarchyNode node{kept[i]->id(), level[i], std::nullopt};
    if (parent[i]) {
      node.parent = kept[*parent[i]]->id();
      h.relation.emplace_back(position[*parent[i]], k);
    }
    h.nodes.push_back(std::move(node));
  }
  std::sort(h.relation.begin(), h.relation.end());
  return h;
}

namespace {

std::vector<std::pair<const Mask*, int>> ranked_masks(const MaskHierarchy& h, const std::vector<Mask>& masks,
                                                      std::vector<int>* source_index) {
  std::vector<std::pair<const Mask*, int>> ranked;
  for (std::size_t i = 0; i < masks.size(); ++i) {
    if (auto idx = h.index_of(masks[i].id())) {
      ranked.emplace_back(&masks[i], h.nodes[*idx].level);
      if (source_index) source_index->push_back(static_cast<int>(i));
    }
  }
  return ranked;
}

bool deeper(const std::pair<const Mask*, int>& a, const std::pair<const Mask*, int>& b) {
  if (a.second != b.second) return a.second > b.second;
  return tighter(*a.first, *b.first);
}

}  // namespace

std::optional<std::string> deepest_mask_at(const MaskHierarchy& h, const std::vector<Mask>& masks, int row,
                                           int col) {
  if (masks.empty()) return std::nullopt;
  if (row < 0 || col < 0 || row >= masks.front().height() || col >= masks.front().width()) {
    throw BoundsError("pixel (" + std::to_string(row) + ", " + std::to_string(col) + ") outside the image");
  }
  const std::pair<const Mask*, int>* best = nullptr;
  const auto ranked = ranked_masks(h, masks, nullptr);
  for (const auto& entry : ranked) {
    if (!entry.first->covers(row, col)) continue;
    if (!best || deeper(entry, *best)) best = &entry;
  }
  if (!best) return std::nullopt;
  return best->first->id();
}

std::vector<int> deepest_mask_map(const MaskHierarchy& h, const std::vector<Mask>& masks) {
  if (masks.empty()) return {};
  const int height = masks.front().height();
  const int width = masks.front().width();
  std::vector<int> source;
  const auto ranked = ranked_masks(h, masks, &source);
  std::vector<int> out(static_cast<std::size_t>(height) * width, -1);
  std::vector<int> best_rank(out.size(), -1);
  for (std::size_t r = 0; r < ranked.size(); ++r) {
    const auto& bitmap = ranked[r].first->bitmap();
    for (std::size_t p = 0; p < out.size(); ++p) {
      if (!bitmap[p]) continue;
      if (best_rank[p] < 0 || deeper(ranked[r], ranked[static_cast<std::size_t>(best_rank[p])])) {
        best_rank[p] = static_cast<int>(r);
        out[p] = source[r];
      }
    }
  }
  return out;
}

}  // namespace hypelift::hier
