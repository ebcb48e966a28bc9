#pragma once

// Hyperbolic autoencoder. The encoder maps a language feature to a vector in
// the tangent space at the origin, which is clamped to the boundary orbit and
// lifted with the exponential map. The decoder takes the logarithmic map of
// a point back through a mirrored MLP.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "hypelift/geometry.hpp"
#include "hypelift/hierarchy.hpp"

namespace hypelift::ae {

using Matrix = Eigen::MatrixXd;

struct DenseLayer {
  int in = 0;
  int out = 0;
  Eigen::VectorXd weight;  // out x in, column-major
  Eigen::VectorXd bias;

  Eigen::Map<const Matrix> W() const { return {weight.data(), out, in}; }
  bool operator==(const DenseLayer& o) const {
    return in == o.in && out == o.out && weight == o.weight && bias == o.bias;
  }
};

struct AutoencoderModel {
  std::vector<DenseLayer> encoder;  // GELU between layers, linear output
  std::vector<DenseLayer> decoder;
  geo::GeometryConfig geometry;

  /// `dims` lists the encoder widths, e.g. {512, 256, 128, 64, 32}; the
  /// decoder mirrors them. Weights and biases ~ U(-1/sqrt(fan_in), +).
  static AutoencoderModel create(const std::vector<int>& dims, const geo::GeometryConfig& geometry,
                                 std::uint64_t seed);
  int input_dim() const { return encoder.front().in; }
  int latent_dim() const { return encoder.back().out; }
  std::vector<int> dims() const;
  void validate() const;
  std::size_t parameter_count() const;
  bool operator==(const AutoencoderModel& o) const { return encoder == o.encoder && decoder == o.decoder; }
};

/// Rows of `features` are samples. Throws NumericalError on non-finite activations.
std::vector<geo::HyperPoint> encode(const AutoencoderModel& model, const Matrix& features);
/// Tangent vectors before the orbit clamp (columns are samples).
Matrix encode_tangent(const AutoencoderModel& model, const Matrix& features);
/// Rows are unit-norm reconstructions. Throws NumericalError on a zero row.
Matrix decode(const AutoencoderModel& model, const std::vector<geo::HyperPoint>& points);
/// Decoder on tangent vectors given as columns; rows of the result are raw
/// (unnormalized) outputs.
Matrix decode_tangent_raw(const AutoencoderModel& model, const Matrix& tangents);

Matrix normalize_rows(const Matrix& m);

// ------------------------------------------------------------------ losses

struct ContrastiveAnchor {
  Eigen::Index anchor = 0;
  Eigen::Index positive = 0;  // direct parent
  std::vector<Eigen::Index> negatives;
};

struct ContrastiveBatch {
  std::vector<ContrastiveAnchor> anchors;
};

/// Anchors for every node with a parent. Negatives are the other nodes of the
/// image outside the anchor's ancestor/descendant chain. Indices are node
/// indices plus `offset`.
void append_anchors(const hier::MaskHierarchy& h, Eigen::Index offset, ContrastiveBatch& batch);

struct LossTerm {
  double value = 0.0;
  Matrix grad;           // d value / d spatial(point), one column per point
  int skipped = 0;       // degenerate pairs left out
  int terms = 0;         // anchors that contributed
};

/// Contrastive loss with similarity -d(anchor, candidate) / tau.
LossTerm loss_distance(const ContrastiveBatch& batch, const std::vector<geo::HyperPoint>& points, double tau);
/// Contrastive loss with similarity -alpha(candidate, anchor) / tau; the
/// candidate sits at the angle vertex.
LossTerm loss_angle(const ContrastiveBatch& batch, const std::vector<geo::HyperPoint>& points, double tau,
                    const geo::GeometryConfig& cfg);
/// Mean over rows of |normalize(f) - normalize(r)|^2. `grad` is N x D with
/// respect to the raw reconstruction rows.
LossTerm loss_reconstruction(const Matrix& features, const Matrix& reconstructed);

// ---------------------------------------------------------------- training

struct LossWeights {
  double distance = 1.0;
  double angle = 1.0;
  double reconstruction = 1.0;
};

struct TrainConfig {
  int epochs = 1000;
  double weight_decay = 1e-4;
  double temperature = 0.2;
  int batch_images = 10;
  double peak_lr = 1e-2;
  double initial_div = 10.0;
  double final_div = 1000.0;
  double warmup_fraction = 0.05;
  LossWeights weights;
  std::uint64_t seed = 0;

  void validate() const;
};

struct TrainingImage {
  hier::MaskHierarchy hierarchy;
  Matrix features;  // row i belongs to hierarchy.nodes[i]
};

struct LossBreakdown {
  double distance = 0.0;
  double angle = 0.0;
  double reconstruction = 0.0;
  double total = 0.0;
  int skipped_angle_pairs = 0;
};

struct ModelGrad {
  std::vector<Eigen::VectorXd> blocks;  // weight, bias per layer: encoder then decoder
};

/// Loss of one batch and, if `grad` is given, its gradient with respect to
/// every parameter. Throws NumericalError naming the component that went
/// non-finite.
LossBreakdown batch_loss(const AutoencoderModel& model, const Matrix& features, const ContrastiveBatch& batch,
                         const TrainConfig& cfg, ModelGrad* grad);

/// Flat parameter views in the order used by ModelGrad.
std::vector<Eigen::VectorXd*> parameter_blocks(AutoencoderModel& model);

struct TrainResult {
  AutoencoderModel model;
  std::vector<LossBreakdown> curve;  // per epoch, averaged over batches
};

/// Deterministic in cfg.seed. Aborts with NumericalError when a loss
/// component becomes non-finite.
TrainResult train(AutoencoderModel model, const std::vector<TrainingImage>& images, const TrainConfig& cfg);

// -------------------------------------------------------------- diagnostics

struct StructureReport {
  int pairs = 0;
  double ordered_fraction = 0.0;    // parent closer to O than child
  double median_pair_angle = 0.0;   // alpha(parent, child)
  double median_other_angle = 0.0;  // alpha(negative, anchor)
  double mean_radius = 0.0;
  double radius_spread = 0.0;       // standard deviation of d(O, h)
  double mean_reconstruction_cosine = 0.0;
  double min_reconstruction_cosine = 0.0;

  double boundary_radius = 0.0;

  /// Empty for a usable model, otherwise why it counts as collapsed:
  /// encodings contracted toward O (mean radius < 0.2 r_b) or onto one
  /// radius, depth not ordered by radius for at least 90% of pairs, or
  /// reconstructions no longer resembling the inputs (mean cosine < 0.9).
  std::string collapse_reason() const;
};

StructureReport assess(const AutoencoderModel& model, const std::vector<TrainingImage>& images);

// -------------------------------------------------------------- checkpoints

/// Writes all parameters as one flat f64 tensor plus `<path>.json` with the
/// layer shapes, activation, geometry and `config_hash`.
void save_checkpoint(const std::filesystem::path& path, const AutoencoderModel& model,
                     const std::string& config_hash);
AutoencoderModel load_checkpoint(const std::filesystem::path& path, std::string* config_hash = nullptr);

}  // namespace hypelift::ae
