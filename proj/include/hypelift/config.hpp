#pragma once

// One key/value file drives the whole pipeline. Sections mirror the module
// configs; unknown keys are rejected so typos cannot silently fall back to
// defaults.
//
//   seed = 2024
//   output = out
//   [scene]        tree, feature_dim, height, width, views, view_height,
//                  view_width, noise_sigma, part_dropout
//   [hierarchy]    tolerance, min_area
//   [geometry]     curvature, boundary_radius, arccos_clamp_eps, entailment_aperture
//   [autoencoder]  dims, epochs, peak_lr, initial_div, final_div, warmup_fraction,
//                  weight_decay, temperature, batch_images, weight_distance,
//                  weight_angle, weight_reconstruction
//   [field]        supervision, steps, batch_size, lr, lambda, squared
//   [query]        steps, aggregation, negatives, threshold, threshold_mode, t_max, neutrals
//   [eval]         oracle_levels

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "hypelift/autoencoder.hpp"
#include "hypelift/field.hpp"
#include "hypelift/geometry.hpp"
#include "hypelift/hierarchy.hpp"
#include "hypelift/query.hpp"
#include "hypelift/synth.hpp"

namespace hypelift {

struct SceneConfig {
  /// "builtin" for the two-object tree, otherwise a JSON tree file
  /// (relative paths resolve against the config file's directory).
  std::string tree = "builtin";
  int feature_dim = 512;
  int height = 48;
  int width = 96;
  int views = 8;
  int view_height = 40;
  int view_width = 48;
  double noise_sigma = 0.1;
  double part_dropout = 0.0;
};

struct PipelineConfig {
  std::uint64_t seed = 2024;
  std::filesystem::path output = "out";
  std::filesystem::path base_dir = ".";  // not serialized
  SceneConfig scene;
  hier::ContainmentConfig hierarchy;
  geo::GeometryConfig geometry;
  std::vector<int> ae_dims{512, 256, 128, 64, 32};
  ae::TrainConfig autoencoder;
  field::Supervision supervision = field::Supervision::hyperbolic_extrapolated;
  field::FieldTrainConfig field;
  query::QueryConfig query;
  bool oracle_levels = false;

  /// Throws ConfigError.
  void validate() const;
  int latent_dim() const { return ae_dims.back(); }
  synth::ConceptTree concept_tree() const;
};

PipelineConfig parse_config(const std::string& text, const std::filesystem::path& base_dir = ".");
PipelineConfig load_config(const std::filesystem::path& path);
/// Canonical text; parse_config(to_text(c)) reproduces c exactly.
std::string to_text(const PipelineConfig& cfg);
bool same_config(const PipelineConfig& a, const PipelineConfig& b);

/// Reads a JSON concept tree: {"nodes": [{"id", "label", "parent"}]}, parent -1 for top level.
synth::ConceptTree load_tree(const std::filesystem::path& path, int feature_dim);

}  // namespace hypelift
