#pragma once

// A learnable world grid that stands in for a radiance-field language head.
// Each cell stores a vector; in the hyperbolic modes it is a tangent vector
// at the origin and the cell's feature is exp(clamp(vector)).

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "hypelift/geometry.hpp"
#include "hypelift/hierarchy.hpp"
#include "hypelift/synth.hpp"

namespace hypelift::field {

/// What the grid is trained to reproduce at a pixel covered by masks.
enum class Supervision {
  raw_feature,             // the deepest mask's language feature, MSE
  tangent,                 // log of its encoding, MSE in the tangent space
  hyperbolic,              // its encoding, geodesic loss
  hyperbolic_extrapolated  // its encoding pushed to the boundary orbit
};

const char* to_string(Supervision s);
Supervision supervision_from_string(const std::string& s);
inline bool is_hyperbolic(Supervision s) { return s == Supervision::hyperbolic || s == Supervision::hyperbolic_extrapolated; }

struct FieldGrid {
  int height = 0;
  int width = 0;
  int dim = 0;
  Eigen::MatrixXd cells;  // dim x (height * width), row-major cell order
  /// Per cell, 1 once a supervision sample has touched it. A cell that was
  /// never observed holds no feature, only the initial value.
  std::vector<std::uint8_t> observed;
  geo::GeometryConfig geometry;

  static FieldGrid zeros(int height, int width, int dim, const geo::GeometryConfig& geometry);
  Eigen::Index cell(int row, int col) const { return static_cast<Eigen::Index>(row) * width + col; }
  /// exp(clamp(cell vector)).
  geo::HyperPoint point(int row, int col) const;
  bool operator==(const FieldGrid& o) const {
    return height == o.height && width == o.width && dim == o.dim && cells == o.cells && observed == o.observed;
  }
};

/// Everything known about one training view.
struct ViewSupervision {
  synth::ViewSpec view;
  hier::MaskHierarchy hierarchy;
  std::vector<hier::Mask> masks;
  std::vector<geo::HyperPoint> encoded;  // aligned with masks
  Eigen::MatrixXd features;              // aligned with masks (rows), raw mode only
};

struct SupervisionSample {
  int row = 0;  // world cell
  int col = 0;
  std::string view_id;
  geo::HyperPoint target;  // hyperbolic modes
  Eigen::VectorXd vector;  // raw and tangent modes
};

struct TargetSet {
  std::vector<SupervisionSample> samples;
  int skipped = 0;  // pixels whose deepest mask encodes to the origin
};

/// One sample per view pixel covered by a mask of the view's hierarchy,
/// using the deepest such mask.
TargetSet build_targets(const std::vector<ViewSupervision>& views, Supervision mode,
                        const geo::GeometryConfig& geometry);

/// Per-pixel cell features of a view. Throws BoundsError if the view leaves
/// the grid.
std::vector<geo::HyperPoint> render(const FieldGrid& field, const synth::ViewSpec& view);
/// Raw cell vectors of a view, one column per pixel.
Eigen::MatrixXd render_vectors(const FieldGrid& field, const synth::ViewSpec& view);

/// d(pred, target)^2 + lambda (d(pred, O) - d(target, O))^2, or with the plain
/// distance when `squared` is false.
double distill_loss(const geo::HyperPoint& pred, const geo::HyperPoint& target, double lambda,
                    bool squared = true);

struct DistillGrad {
  double value = 0.0;
  Eigen::VectorXd grad;  // with respect to the cell's tangent vector
};

/// distill_loss of exp(clamp(z)) and its gradient with respect to z.
DistillGrad distill_loss_grad(const geo::TangentVector& z, const geo::HyperPoint& target, double lambda,
                              bool squared, const geo::GeometryConfig& geometry);

struct FieldTrainConfig {
  int steps = 1500;
  int batch_size = 2048;
  double lr = 0.05;
  double lambda = 1.0;
  bool squared = true;
  std::uint64_t seed = 0;

  void validate() const;
};

struct FieldTrainResult {
  FieldGrid field;
  std::vector<double> curve;        // mean loss per pass over the samples
  double mean_distance = 0.0;       // final mean d(render, target), hyperbolic modes
  double mean_squared_error = 0.0;  // final mean |vector - target|^2, vector modes
};

/// Adam over shuffled minibatches with a cosine-decayed rate; deterministic
/// in cfg.seed. Throws NumericalError on a non-finite loss.
FieldTrainResult train_field(FieldGrid field, const std::vector<SupervisionSample>& samples, Supervision mode,
                             const FieldTrainConfig& cfg);

void save_field(const std::filesystem::path& path, const FieldGrid& field, Supervision mode, double lambda,
                const std::string& config_hash);
FieldGrid load_field(const std::filesystem::path& path, Supervision* mode = nullptr,
                     std::string* config_hash = nullptr);

}  // namespace hypelift::field
