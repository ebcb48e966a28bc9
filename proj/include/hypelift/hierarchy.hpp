#pragma once

// Per-image mask hierarchies built from pixel containment. Level 1 holds the
// masks contained in no other mask; every other mask hangs under the smallest
// mask that contains it.

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "hypelift/errors.hpp"

namespace hypelift::hier {

class Mask {
 public:
  Mask() = default;
  /// `bitmap` is row-major, nonzero = covered. Throws ConfigError for an
  /// empty mask and DimensionError for a size mismatch.
  Mask(std::string id, std::string image, int height, int width, std::vector<std::uint8_t> bitmap);

  const std::string& id() const { return id_; }
  const std::string& image() const { return image_; }
  int height() const { return height_; }
  int width() const { return width_; }
  std::int64_t area() const { return area_; }
  bool covers(int row, int col) const { return bitmap_[static_cast<std::size_t>(row) * width_ + col] != 0; }
  const std::vector<std::uint8_t>& bitmap() const { return bitmap_; }

 private:
  std::string id_;
  std::string image_;
  int height_ = 0;
  int width_ = 0;
  std::vector<std::uint8_t> bitmap_;
  std::int64_t area_ = 0;
};

struct ContainmentConfig {
  double tolerance = 0.02;   // max fraction of child pixels outside the parent
  std::int64_t min_area = 16;

  void validate() const;
};

/// |child \ parent| / |child| <= tolerance and area(parent) > area(child).
bool contains(const Mask& parent, const Mask& child, const ContainmentConfig& cfg);

struct HierarchyNode {
  std::string mask_id;
  int level = 1;
  std::optional<std::string> parent;  // nullopt = ROOT
  bool operator==(const HierarchyNode&) const = default;
};

struct MaskHierarchy {
  std::string image;
  std::vector<HierarchyNode> nodes;                       // sorted by (level, mask id)
  std::vector<std::pair<std::size_t, std::size_t>> relation;  // (parent, child) node indices, sorted

  std::optional<std::size_t> index_of(const std::string& mask_id) const;
  /// R_ij: node i is the parent of node j.
  bool is_parent(std::size_t i, std::size_t j) const;
  std::vector<std::size_t> children(std::size_t i) const;
  std::optional<std::size_t> parent_index(std::size_t i) const;
  bool operator==(const MaskHierarchy&) const = default;
};

/// Drops masks below min_area, then assigns levels in rounds. Output does not
/// depend on the order of `masks`. Throws DimensionError if masks disagree on
/// image size and ConfigError on duplicate ids.
MaskHierarchy build_hierarchy(const std::vector<Mask>& masks, const ContainmentConfig& cfg);

/// Mask of maximal level covering (row, col); ties go to the smaller area,
/// then the smaller id. Masks absent from `h` are ignored.
std::optional<std::string> deepest_mask_at(const MaskHierarchy& h, const std::vector<Mask>& masks,
                                           int row, int col);

/// deepest_mask_at for every pixel at once: index into `masks`, or -1.
std::vector<int> deepest_mask_map(const MaskHierarchy& h, const std::vector<Mask>& masks);

}  // namespace hypelift::hier
