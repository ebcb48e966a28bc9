#include "hypelift/field.hpp"

#include <cmath>
#include <fstream>
#include <numeric>

#include <json.hpp>

#include "hypelift/optim.hpp"
#include "hypelift/rng.hpp"
#include "hypelift/tensor_io.hpp"

namespace hypelift::field {

using geo::HyperPoint;
using geo::TangentVector;

const char* to_string(Supervision s) {
  switch (s) {
    case Supervision::raw_feature: return "raw";
    case Supervision::tangent: return "tangent";
    case Supervision::hyperbolic: return "hyperbolic";
    case Supervision::hyperbolic_extrapolated: return "hyperbolic_extrapolated";
  }
  return "?";
}

Supervision supervision_from_string(const std::string& s) {
  for (auto m : {Supervision::raw_feature, Supervision::tangent, Supervision::hyperbolic,
                 Supervision::hyperbolic_extrapolated}) {
    if (s == to_string(m)) return m;
  }
  throw ConfigError("unknown supervision mode '" + s + "'");
}

FieldGrid FieldGrid::zeros(int height, int width, int dim, const geo::GeometryConfig& geometry) {
  if (height < 1 || width < 1 || dim < 1) throw ConfigError("field grid dimensions must be positive");
  geometry.validate();
  FieldGrid f;
  f.height = height;
  f.width = width;
  f.dim = dim;
  f.cells = Eigen::MatrixXd::Zero(dim, static_cast<Eigen::Index>(height) * width);
  f.observed.assign(static_cast<std::size_t>(height) * width, 0);
  f.geometry = geometry;
  return f;
}

HyperPoint FieldGrid::point(int row, int col) const {
  return geo::exp_map_origin(geo::clamp_to_orbit(TangentVector{cells.col(cell(row, col)), geometry.curvature}, geometry));
}

namespace {

void check_window(const FieldGrid& field, const synth::ViewSpec& view) {
  if (view.row < 0 || view.col < 0 || view.row + view.height > field.height || view.col + view.width > field.width) {
    throw BoundsError("view '" + view.id + "' leaves the field grid");
  }
}

}  // namespace

TargetSet build_targets(const std::vector<ViewSupervision>& views, Supervision mode,
                        const geo::GeometryConfig& geometry) {
  TargetSet out;
  for (const auto& v : views) {
    if (v.masks.size() != v.encoded.size()) throw DimensionError("view '" + v.view.id + "' lacks mask encodings");
    if (mode == Supervision::raw_feature && v.features.rows() != static_cast<Eigen::Index>(v.masks.size())) {
      throw DimensionError("view '" + v.view.id + "' lacks mask features");
    }
    // Per-mask target, computed once.
    std::vector<HyperPoint> point_target(v.masks.size());
    std::vector<Eigen::VectorXd> vector_target(v.masks.size());
    std::vector<bool> usable(v.masks.size(), true);
    for (std::size_t m = 0; m < v.masks.size(); ++m) {
      switch (mode) {
        case Supervision::raw_feature: vector_target[m] = v.features.row(static_cast<Eigen::Index>(m)).transpose(); break;
        case Supervision::tangent: vector_target[m] = geo::log_map_origin(v.encoded[m]).spatial; break;
        case Supervision::hyperbolic: point_target[m] = v.encoded[m]; break;
        case Supervision::hyperbolic_extrapolated:
          try {
            point_target[m] = geo::extrapolate_to_boundary(v.encoded[m], geometry);
          } catch (const DegenerateDirectionError&) {
            usable[m] = false;
          }
          break;
      }
    }
    const std::vector<int> deepest = hier::deepest_mask_map(v.hierarchy, v.masks);
    for (int r = 0; r < v.view.height; ++r) {
      for (int c = 0; c < v.view.width; ++c) {
        const int m = deepest[static_cast<std::size_t>(r) * v.view.width + c];
        if (m < 0) continue;
        if (!usable[static_cast<std::size_t>(m)]) {
          ++out.skipped;
          continue;
        }
        SupervisionSample s;
        s.row = v.view.row + r;
        s.col = v.view.col + c;
        s.view_id = v.view.id;
        if (is_hyperbolic(mode)) {
          s.target = point_target[static_cast<std::size_t>(m)];
        } else {
          s.vector = vector_target[static_cast<std::size_t>(m)];
        }
        out.samples.push_back(std::move(s));
      }
    }
  }
  return out;
}

std::vector<HyperPoint> render(const FieldGrid& field, const synth::ViewSpec& view) {
  check_window(field, view);
  std::vector<HyperPoint> out;
  out.reserve(static_cast<std::size_t>(view.height) * view.width);
  for (int r = 0; r < view.height; ++r) {
    for (int c = 0; c < view.width; ++c) out.push_back(field.point(view.row + r, view.col + c));
  }
  return out;
}

Eigen::MatrixXd render_vectors(const FieldGrid& field, const synth::ViewSpec& view) {
  check_window(field, view);
  Eigen::MatrixXd out(field.dim, static_cast<Eigen::Index>(view.height) * view.width);
  for (int r = 0; r < view.height; ++r) {
    for (int c = 0; c < view.width; ++c) {
      out.col(static_cast<Eigen::Index>(r) * view.width + c) = field.cells.col(field.cell(view.row + r, view.col + c));
    }
  }
  return out;
}

double distill_loss(const HyperPoint& pred, const HyperPoint& target, double lambda, bool squared) {
  const double d = geo::geodesic_distance(pred, target);
  const double gap = geo::distance_to_origin(pred) - geo::distance_to_origin(target);
  return (squared ? d * d : d) + lambda * gap * gap;
}

DistillGrad distill_loss_grad(const TangentVector& z, const HyperPoint& target, double lambda, bool squared,
                              const geo::GeometryConfig& geometry) {
  const TangentVector zc = geo::clamp_to_orbit(z, geometry);
  const HyperPoint pred = geo::exp_map_origin(zc);
  const geo::PairGrad pg = squared ? geo::squared_distance_grad(pred, target) : geo::geodesic_distance_grad(pred, target);
  // d(exp(v), O) = |v| for tangent vectors at O.
  const double radius = zc.norm();
  const double gap = radius - geo::distance_to_origin(target);
  Eigen::VectorXd g_tangent = geo::exp_map_origin_vjp(zc, pg.d_first);
  if (radius > 0.0) g_tangent += 2.0 * lambda * gap * zc.spatial / radius;
  DistillGrad out;
  out.value = pg.value + lambda * gap * gap;
  out.grad = geo::clamp_to_orbit_vjp(z, geometry, g_tangent);
  return out;
}

void FieldTrainConfig::validate() const {
  if (steps < 1) throw ConfigError("field training needs at least one step");
  if (batch_size < 1) throw ConfigError("field batch size must be positive");
  if (!(lr > 0.0)) throw ConfigError("field learning rate must be positive");
  if (!(lambda >= 0.0)) throw ConfigError("norm regularizer weight must be non-negative");
}

FieldTrainResult train_field(FieldGrid field, const std::vector<SupervisionSample>& samples, Supervision mode,
                             const FieldTrainConfig& cfg) {
  cfg.validate();
  if (samples.empty()) throw ConfigError("field training needs at least one supervision sample");
  for (const auto& s : samples) {
    if (s.row < 0 || s.col < 0 || s.row >= field.height || s.col >= field.width) {
      throw BoundsError("supervision sample outside the field grid");
    }
    const Eigen::Index want = is_hyperbolic(mode) ? s.target.dim() : s.vector.size();
    if (want != field.dim) throw DimensionError("supervision target dimension does not match the field");
  }
  for (const auto& s : samples) field.observed[static_cast<std::size_t>(field.cell(s.row, s.col))] = 1;
  const bool hyperbolic = is_hyperbolic(mode);
  const std::size_t n = samples.size();
  const std::size_t batch = std::min(n, static_cast<std::size_t>(cfg.batch_size));
  const optim::OneCycle schedule{cfg.lr, 1.0, 100.0, 0.01, cfg.steps};
  optim::Adam adam({field.cells.size()}, optim::AdamConfig{});

  const auto sample_loss = [&](const SupervisionSample& s, Eigen::VectorXd* grad) {
    const Eigen::Index cell = field.cell(s.row, s.col);
    if (hyperbolic) {
      const TangentVector z{field.cells.col(cell), field.geometry.curvature};
      if (!grad) return distill_loss(field.point(s.row, s.col), s.target, cfg.lambda, cfg.squared);
      DistillGrad dg = distill_loss_grad(z, s.target, cfg.lambda, cfg.squared, field.geometry);
      *grad = std::move(dg.grad);
      return dg.value;
    }
    const Eigen::VectorXd diff = field.cells.col(cell) - s.vector;
    if (grad) *grad = 2.0 * diff;
    return diff.squaredNorm();
  };

  FieldTrainResult result;
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::size_t pos = n;  // forces a shuffle on the first step
  std::uint64_t pass = 0;
  double pass_loss = 0.0;
  std::size_t pass_count = 0;
  Eigen::MatrixXd grad = Eigen::MatrixXd::Zero(field.cells.rows(), field.cells.cols());
  std::vector<Eigen::Index> touched;
  Eigen::VectorXd g;
  for (int step = 0; step < cfg.steps; ++step) {
    if (pos >= n) {
      if (pass_count > 0) result.curve.push_back(pass_loss / static_cast<double>(pass_count));
      pass_loss = 0.0;
      pass_count = 0;
      Rng rng = Rng::derive(cfg.seed, {0xf1e1d, pass++});
      for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
      pos = 0;
    }
    const std::size_t end = std::min(n, pos + batch);
    const double scale = 1.0 / static_cast<double>(end - pos);
    for (std::size_t k = pos; k < end; ++k) {
      const auto& s = samples[order[k]];
      const double value = sample_loss(s, &g);
      if (!std::isfinite(value) || !g.allFinite()) {
        throw NumericalError("non-finite field loss at step " + std::to_string(step) + " for cell (" +
                             std::to_string(s.row) + ", " + std::to_string(s.col) + ")");
      }
      pass_loss += value;
      ++pass_count;
      const Eigen::Index cell = field.cell(s.row, s.col);
      grad.col(cell) += scale * g;
      touched.push_back(cell);
    }
    pos = end;
    adam.step({Eigen::Map<Eigen::VectorXd>(field.cells.data(), field.cells.size())},
              {Eigen::Map<const Eigen::VectorXd>(grad.data(), grad.size())}, cfg.lr, schedule.multiplier(step));
    for (Eigen::Index cell : touched) grad.col(cell).setZero();
    touched.clear();
  }
  if (pass_count > 0) result.curve.push_back(pass_loss / static_cast<double>(pass_count));

  double total = 0.0;
  for (const auto& s : samples) {
    if (hyperbolic) {
      total += geo::geodesic_distance(field.point(s.row, s.col), s.target);
    } else {
      total += (field.cells.col(field.cell(s.row, s.col)) - s.vector).squaredNorm();
    }
  }
  (hyperbolic ? result.mean_distance : result.mean_squared_error) = total / static_cast<double>(n);
  result.field = std::move(field);
  return result;
}

void save_field(const std::filesystem::path& path, const FieldGrid& field, Supervision mode, double lambda,
                const std::string& config_hash) {
  Tensor t;
  t.shape = {static_cast<std::uint64_t>(field.height), static_cast<std::uint64_t>(field.width),
             static_cast<std::uint64_t>(field.dim)};
  // cells is dim x cells column-major, which is row-major [height][width][dim].
  t.values.assign(field.cells.data(), field.cells.data() + field.cells.size());
  write_tensor(path, t);
  nlohmann::json side;
  side["kind"] = "field";
  side["height"] = field.height;
  side["width"] = field.width;
  side["dim"] = field.dim;
  side["supervision"] = to_string(mode);
  std::string observed(field.observed.size(), '0');
  for (std::size_t i = 0; i < observed.size(); ++i) observed[i] = field.observed[i] ? '1' : '0';
  side["observed"] = observed;
  side["lambda"] = lambda;
  side["geometry"] = {{"curvature", field.geometry.curvature.value()},
                      {"boundary_radius", field.geometry.boundary_radius},
                      {"arccos_clamp_eps", field.geometry.arccos_clamp_eps},
                      {"entailment_aperture", field.geometry.entailment_aperture}};
  side["config_hash"] = config_hash;
  std::ofstream out(path.string() + ".json");
  out << side.dump(2) << '\n';
  if (!out) throw FormatError("cannot write " + path.string() + ".json");
}

FieldGrid load_field(const std::filesystem::path& path, Supervision* mode, std::string* config_hash) {
  std::ifstream in(path.string() + ".json");
  if (!in) throw FormatError("missing field sidecar " + path.string() + ".json");
  try {
    const auto side = nlohmann::json::parse(in);
    geo::GeometryConfig geom;
    geom.curvature = geo::Curvature(side.at("geometry").at("curvature").get<double>());
    geom.boundary_radius = side.at("geometry").at("boundary_radius").get<double>();
    geom.arccos_clamp_eps = side.at("geometry").at("arccos_clamp_eps").get<double>();
    geom.entailment_aperture = side.at("geometry").at("entailment_aperture").get<double>();
    FieldGrid f = FieldGrid::zeros(side.at("height").get<int>(), side.at("width").get<int>(),
                                   side.at("dim").get<int>(), geom);
    const Tensor t = read_tensor(path);
    if (t.values.size() != static_cast<std::size_t>(f.cells.size())) {
      throw FormatError("field tensor " + path.string() + " does not match its sidecar");
    }
    std::copy(t.values.begin(), t.values.end(), f.cells.data());
    const auto observed = side.at("observed").get<std::string>();
    if (observed.size() != f.observed.size() || observed.find_first_not_of("01") != std::string::npos) {
      throw FormatError("bad observed-cell record in " + path.string() + ".json");
    }
    for (std::size_t i = 0; i < observed.size(); ++i) f.observed[i] = observed[i] == '1' ? 1 : 0;
    if (mode) *mode = supervision_from_string(side.at("supervision").get<std::string>());
    if (config_hash) *config_hash = side.value("config_hash", "");
    return f;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("bad field sidecar " + path.string() + ".json: " + e.what());
  }
}

}  // namespace hypelift::field
