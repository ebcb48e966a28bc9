#include "hypelift/autoencoder.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <set>

#include <json.hpp>

#include "hypelift/optim.hpp"
#include "hypelift/rng.hpp"
#include "hypelift/tensor_io.hpp"

namespace hypelift::ae {

namespace {

using geo::HyperPoint;
using geo::TangentVector;
using geo::Vec;

double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x * std::numbers::sqrt2 / 2.0)); }

double gelu_slope(double x) {
  const double cdf = 0.5 * (1.0 + std::erf(x * std::numbers::sqrt2 / 2.0));
  const double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
  return cdf + x * pdf;
}

DenseLayer make_layer(int in, int out, Rng& rng) {
  DenseLayer l;
  l.in = in;
  l.out = out;
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  l.weight.resize(static_cast<Eigen::Index>(in) * out);
  for (auto& w : l.weight) w = rng.uniform(-bound, bound);
  l.bias.resize(out);
  for (auto& b : l.bias) b = rng.uniform(-bound, bound);
  return l;
}

struct MlpCache {
  std::vector<Matrix> inputs;  // input of each layer
  std::vector<Matrix> pre;     // pre-activation of each layer
};

Matrix mlp_forward(const std::vector<DenseLayer>& layers, const Matrix& x, MlpCache* cache) {
  Matrix a = x;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    Matrix z = layers[l].W() * a;
    z.colwise() += layers[l].bias;
    if (cache) {
      cache->inputs.push_back(a);
      cache->pre.push_back(z);
    }
    a = l + 1 < layers.size() ? z.unaryExpr(&gelu) : z;
  }
  return a;
}

// Accumulates weight/bias gradients into blocks[first..] and returns d/d input.
Matrix mlp_backward(const std::vector<DenseLayer>& layers, const MlpCache& cache, Matrix d_out,
                    std::vector<Eigen::VectorXd>& blocks, std::size_t first) {
  for (std::size_t l = layers.size(); l-- > 0;) {
    Matrix dz = l + 1 < layers.size() ? Matrix(d_out.cwiseProduct(cache.pre[l].unaryExpr(&gelu_slope))) : d_out;
    Matrix dw = dz * cache.inputs[l].transpose();
    blocks[first + 2 * l] += Eigen::Map<const Eigen::VectorXd>(dw.data(), dw.size());
    blocks[first + 2 * l + 1] += dz.rowwise().sum();
    d_out = layers[l].W().transpose() * dz;
  }
  return d_out;
}

void require_finite(const Matrix& m, const char* what) {
  if (!m.allFinite()) throw NumericalError(std::string("non-finite activations in ") + what);
}

struct Contrast {
  double value = 0.0;
  std::vector<double> coef;  // d value / d similarity-distance of each candidate (positive first)
};

// -log softmax_0 over logits -x_k / tau, with x_0 the positive.
Contrast contrast(const std::vector<double>& x, double tau) {
  double top = -x[0] / tau;
  for (double v : x) top = std::max(top, -v / tau);
  double sum = 0.0;
  std::vector<double> w(x.size());
  for (std::size_t k = 0; k < x.size(); ++k) sum += (w[k] = std::exp(-x[k] / tau - top));
  Contrast c;
  c.value = std::log(sum) + top + x[0] / tau;
  c.coef.resize(x.size());
  for (std::size_t k = 0; k < x.size(); ++k) c.coef[k] = -(w[k] / sum - (k == 0 ? 1.0 : 0.0)) / tau;
  return c;
}

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

}  // namespace

AutoencoderModel AutoencoderModel::create(const std::vector<int>& dims, const geo::GeometryConfig& geometry,
                                          std::uint64_t seed) {
  if (dims.size() < 2) throw ConfigError("autoencoder needs at least an input and a latent width");
  for (int d : dims) {
    if (d < 1) throw ConfigError("layer widths must be positive");
  }
  geometry.validate();
  AutoencoderModel m;
  m.geometry = geometry;
  const std::size_t n = dims.size() - 1;
  for (std::size_t l = 0; l < n; ++l) {
    Rng rng = Rng::derive(seed, {0xe1c0de, l});
    m.encoder.push_back(make_layer(dims[l], dims[l + 1], rng));
  }
  for (std::size_t l = 0; l < n; ++l) {
    Rng rng = Rng::derive(seed, {0xdec0de, l});
    m.decoder.push_back(make_layer(dims[n - l], dims[n - l - 1], rng));
  }
  return m;
}

std::vector<int> AutoencoderModel::dims() const {
  std::vector<int> d{encoder.front().in};
  for (const auto& l : encoder) d.push_back(l.out);
  return d;
}

void AutoencoderModel::validate() const {
  if (encoder.empty() || encoder.size() != decoder.size()) throw ConfigError("encoder and decoder depth differ");
  const auto check_chain = [](const std::vector<DenseLayer>& layers) {
    for (std::size_t l = 0; l < layers.size(); ++l) {
      const auto& L = layers[l];
      if (L.weight.size() != static_cast<Eigen::Index>(L.in) * L.out || L.bias.size() != L.out) {
        throw DimensionError("layer parameter sizes do not match its shape");
      }
      if (l > 0 && layers[l - 1].out != L.in) throw DimensionError("layer widths do not chain");
      if (!L.weight.allFinite() || !L.bias.allFinite()) throw NumericalError("non-finite model parameters");
    }
  };
  check_chain(encoder);
  check_chain(decoder);
  if (decoder.front().in != latent_dim() || decoder.back().out != input_dim()) {
    throw DimensionError("decoder does not mirror the encoder");
  }
  geometry.validate();
}

std::size_t AutoencoderModel::parameter_count() const {
  std::size_t n = 0;
  for (const auto* side : {&encoder, &decoder}) {
    for (const auto& l : *side) n += static_cast<std::size_t>(l.weight.size() + l.bias.size());
  }
  return n;
}

Matrix encode_tangent(const AutoencoderModel& model, const Matrix& features) {
  if (features.cols() != model.input_dim()) {
    throw DimensionError("features have " + std::to_string(features.cols()) + " columns, model expects " +
                         std::to_string(model.input_dim()));
  }
  require_finite(features, "encoder input");
  Matrix z = mlp_forward(model.encoder, features.transpose(), nullptr);
  require_finite(z, "encoder");
  return z;
}

std::vector<HyperPoint> encode(const AutoencoderModel& model, const Matrix& features) {
  const Matrix z = encode_tangent(model, features);
  std::vector<HyperPoint> out;
  out.reserve(static_cast<std::size_t>(z.cols()));
  for (Eigen::Index j = 0; j < z.cols(); ++j) {
    const TangentVector t{z.col(j), model.geometry.curvature};
    out.push_back(geo::exp_map_origin(geo::clamp_to_orbit(t, model.geometry)));
  }
  return out;
}

Matrix decode_tangent_raw(const AutoencoderModel& model, const Matrix& tangents) {
  if (tangents.rows() != model.latent_dim()) throw DimensionError("tangent width does not match the latent width");
  Matrix r = mlp_forward(model.decoder, tangents, nullptr);
  require_finite(r, "decoder");
  return r.transpose();
}

Matrix normalize_rows(const Matrix& m) {
  Matrix out = m;
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    const double n = m.row(i).norm();
    if (!(n > 0.0)) throw NumericalError("cannot normalize a zero row");
    out.row(i) /= n;
  }
  return out;
}

Matrix decode(const AutoencoderModel& model, const std::vector<HyperPoint>& points) {
  Matrix u(model.latent_dim(), static_cast<Eigen::Index>(points.size()));
  for (std::size_t j = 0; j < points.size(); ++j) {
    if (points[j].dim() != model.latent_dim()) throw DimensionError("point dimension does not match the latent width");
    u.col(static_cast<Eigen::Index>(j)) = geo::log_map_origin(points[j]).spatial;
  }
  return normalize_rows(decode_tangent_raw(model, u));
}

void append_anchors(const hier::MaskHierarchy& h, Eigen::Index offset, ContrastiveBatch& batch) {
  const std::size_t n = h.nodes.size();
  std::vector<std::optional<std::size_t>> parent(n);
  for (const auto& [p, c] : h.relation) parent[c] = p;
  const auto is_ancestor = [&](std::size_t a, std::size_t of) {
    for (auto p = parent[of]; p; p = parent[*p]) {
      if (*p == a) return true;
    }
    return false;
  };
  for (std::size_t i = 0; i < n; ++i) {
    if (!parent[i]) continue;
    ContrastiveAnchor a;
    a.anchor = offset + static_cast<Eigen::Index>(i);
    a.positive = offset + static_cast<Eigen::Index>(*parent[i]);
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i || is_ancestor(j, i) || is_ancestor(i, j)) continue;
      a.negatives.push_back(offset + static_cast<Eigen::Index>(j));
    }
    batch.anchors.push_back(std::move(a));
  }
}

LossTerm loss_distance(const ContrastiveBatch& batch, const std::vector<HyperPoint>& points, double tau) {
  LossTerm out;
  const Eigen::Index dim = points.empty() ? 0 : points.front().dim();
  out.grad = Matrix::Zero(dim, static_cast<Eigen::Index>(points.size()));
  for (const auto& a : batch.anchors) {
    std::vector<Eigen::Index> cand{a.positive};
    cand.insert(cand.end(), a.negatives.begin(), a.negatives.end());
    std::vector<geo::PairGrad> g;
    std::vector<double> d;
    for (Eigen::Index k : cand) {
      g.push_back(geo::geodesic_distance_grad(points[a.anchor], points[k]));
      d.push_back(g.back().value);
    }
    const Contrast c = contrast(d, tau);
    out.value += c.value;
    for (std::size_t k = 0; k < cand.size(); ++k) {
      out.grad.col(a.anchor) += c.coef[k] * g[k].d_first;
      out.grad.col(cand[k]) += c.coef[k] * g[k].d_second;
    }
    ++out.terms;
  }
  if (out.terms > 0) {
    out.value /= out.terms;
    out.grad /= out.terms;
  }
  return out;
}

LossTerm loss_angle(const ContrastiveBatch& batch, const std::vector<HyperPoint>& points, double tau,
                    const geo::GeometryConfig& cfg) {
  LossTerm out;
  const Eigen::Index dim = points.empty() ? 0 : points.front().dim();
  out.grad = Matrix::Zero(dim, static_cast<Eigen::Index>(points.size()));
  for (const auto& a : batch.anchors) {
    std::vector<Eigen::Index> cand;
    std::vector<geo::PairGrad> g;
    std::vector<double> alpha;
    bool positive_ok = true;
    for (std::size_t k = 0; k <= a.negatives.size(); ++k) {
      const Eigen::Index idx = k == 0 ? a.positive : a.negatives[k - 1];
      try {
        g.push_back(geo::exterior_angle_grad(points[idx], points[a.anchor], cfg));
      } catch (const DegenerateAngleError&) {
        ++out.skipped;
        if (k == 0) {
          positive_ok = false;
          break;
        }
        continue;
      }
      cand.push_back(idx);
      alpha.push_back(g.back().value);
    }
    if (!positive_ok) continue;
    const Contrast c = contrast(alpha, tau);
    out.value += c.value;
    for (std::size_t k = 0; k < cand.size(); ++k) {
      out.grad.col(cand[k]) += c.coef[k] * g[k].d_first;
      out.grad.col(a.anchor) += c.coef[k] * g[k].d_second;
    }
    ++out.terms;
  }
  if (out.terms > 0) {
    out.value /= out.terms;
    out.grad /= out.terms;
  }
  return out;
}

LossTerm loss_reconstruction(const Matrix& features, const Matrix& reconstructed) {
  if (features.rows() != reconstructed.rows() || features.cols() != reconstructed.cols()) {
    throw DimensionError("reconstruction shape differs from the input");
  }
  LossTerm out;
  out.grad = Matrix::Zero(reconstructed.rows(), reconstructed.cols());
  const Eigen::Index n = features.rows();
  for (Eigen::Index i = 0; i < n; ++i) {
    const double fn = features.row(i).norm();
    const double rn = reconstructed.row(i).norm();
    if (!(fn > 0.0) || !(rn > 0.0)) throw NumericalError("zero-norm row in reconstruction loss");
    const Eigen::RowVectorXd r_hat = reconstructed.row(i) / rn;
    const Eigen::RowVectorXd diff = r_hat - features.row(i) / fn;
    out.value += diff.squaredNorm();
    const Eigen::RowVectorXd d_hat = 2.0 * diff / static_cast<double>(n);
    out.grad.row(i) = (d_hat - r_hat * r_hat.dot(d_hat)) / rn;
  }
  if (n > 0) out.value /= static_cast<double>(n);
  out.terms = static_cast<int>(n);
  return out;
}

void TrainConfig::validate() const {
  if (epochs < 1) throw ConfigError("epochs must be at least 1");
  if (!(temperature > 0.0)) throw ConfigError("temperature must be positive");
  if (batch_images < 1) throw ConfigError("batch_images must be at least 1");
  if (!(weight_decay >= 0.0)) throw ConfigError("weight decay must be non-negative");
  if (weights.distance < 0 || weights.angle < 0 || weights.reconstruction < 0) {
    throw ConfigError("loss weights must be non-negative");
  }
  optim::OneCycle{peak_lr, initial_div, final_div, warmup_fraction, 1}.validate();
}

std::vector<Eigen::VectorXd*> parameter_blocks(AutoencoderModel& model) {
  std::vector<Eigen::VectorXd*> out;
  for (auto* side : {&model.encoder, &model.decoder}) {
    for (auto& l : *side) {
      out.push_back(&l.weight);
      out.push_back(&l.bias);
    }
  }
  return out;
}

LossBreakdown batch_loss(const AutoencoderModel& model, const Matrix& features, const ContrastiveBatch& batch,
                         const TrainConfig& cfg, ModelGrad* grad) {
  const auto& geom = model.geometry;
  MlpCache enc, dec;
  if (features.cols() != model.input_dim()) throw DimensionError("feature width does not match the model");
  const Matrix z = mlp_forward(model.encoder, features.transpose(), &enc);
  require_finite(z, "encoder");
  const Eigen::Index n = z.cols();

  std::vector<TangentVector> tz, tc;
  std::vector<HyperPoint> points;
  Matrix u(z.rows(), n);
  for (Eigen::Index j = 0; j < n; ++j) {
    tz.push_back(TangentVector{z.col(j), geom.curvature});
    tc.push_back(geo::clamp_to_orbit(tz.back(), geom));
    points.push_back(geo::exp_map_origin(tc.back()));
    u.col(j) = geo::log_map_origin(points.back()).spatial;
  }
  const Matrix r = mlp_forward(model.decoder, u, &dec);
  require_finite(r, "decoder");

  LossBreakdown out;
  LossTerm ld, la;
  if (cfg.weights.distance > 0.0) ld = loss_distance(batch, points, cfg.temperature);
  if (cfg.weights.angle > 0.0) {
    la = loss_angle(batch, points, cfg.temperature, geom);
    out.skipped_angle_pairs = la.skipped;
  }
  LossTerm lr = cfg.weights.reconstruction > 0.0 ? loss_reconstruction(features, r.transpose()) : LossTerm{};
  out.distance = ld.value;
  out.angle = la.value;
  out.reconstruction = lr.value;
  for (auto [value, term, name] : {std::tuple{out.distance, &ld, "distance"}, std::tuple{out.angle, &la, "angle"},
                                   std::tuple{out.reconstruction, &lr, "reconstruction"}}) {
    if (!std::isfinite(value) || (term->grad.size() && !term->grad.allFinite())) {
      throw NumericalError(std::string("non-finite ") + name + " loss");
    }
  }
  out.total = cfg.weights.distance * out.distance + cfg.weights.angle * out.angle +
              cfg.weights.reconstruction * out.reconstruction;
  if (!grad) return out;

  AutoencoderModel& mut = const_cast<AutoencoderModel&>(model);
  grad->blocks.clear();
  for (auto* p : parameter_blocks(mut)) grad->blocks.push_back(Eigen::VectorXd::Zero(p->size()));
  const std::size_t dec_first = 2 * model.encoder.size();

  Matrix dh = Matrix::Zero(z.rows(), n);
  if (ld.grad.size()) dh += cfg.weights.distance * ld.grad;
  if (la.grad.size()) dh += cfg.weights.angle * la.grad;
  if (lr.grad.size()) {
    const Matrix du = mlp_backward(model.decoder, dec, cfg.weights.reconstruction * lr.grad.transpose(),
                                   grad->blocks, dec_first);
    for (Eigen::Index j = 0; j < n; ++j) dh.col(j) += geo::log_map_origin_vjp(points[static_cast<std::size_t>(j)], du.col(j));
  }
  Matrix dz(z.rows(), n);
  for (Eigen::Index j = 0; j < n; ++j) {
    const auto s = static_cast<std::size_t>(j);
    dz.col(j) = geo::clamp_to_orbit_vjp(tz[s], geom, geo::exp_map_origin_vjp(tc[s], dh.col(j)));
  }
  mlp_backward(model.encoder, enc, dz, grad->blocks, 0);
  return out;
}

TrainResult train(AutoencoderModel model, const std::vector<TrainingImage>& images, const TrainConfig& cfg) {
  cfg.validate();
  model.validate();
  std::vector<std::size_t> usable;
  for (std::size_t i = 0; i < images.size(); ++i) {
    if (images[i].features.rows() != static_cast<Eigen::Index>(images[i].hierarchy.nodes.size())) {
      throw DimensionError("image features do not match its hierarchy nodes");
    }
    if (images[i].features.rows() > 0) usable.push_back(i);
  }
  if (usable.empty()) throw ConfigError("training needs at least one image with masks");

  const std::size_t per_batch = static_cast<std::size_t>(cfg.batch_images);
  const std::size_t batches = (usable.size() + per_batch - 1) / per_batch;
  const optim::OneCycle schedule{cfg.peak_lr, cfg.initial_div, cfg.final_div, cfg.warmup_fraction,
                                 static_cast<std::int64_t>(cfg.epochs) * static_cast<std::int64_t>(batches)};
  const auto params = parameter_blocks(model);
  std::vector<Eigen::Index> sizes;
  for (auto* p : params) sizes.push_back(p->size());
  optim::Adam adam(sizes, optim::AdamConfig{0.9, 0.999, 1e-8, cfg.weight_decay});

  TrainResult result;
  std::int64_t step = 0;
  std::vector<std::size_t> order = usable;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    if (batches > 1) {
      Rng rng = Rng::derive(cfg.seed, {0x5f1e, static_cast<std::uint64_t>(epoch)});
      for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
    }
    LossBreakdown mean;
    for (std::size_t b = 0; b < batches; ++b) {
      const std::size_t lo = b * per_batch;
      const std::size_t hi = std::min(order.size(), lo + per_batch);
      Eigen::Index rows = 0;
      for (std::size_t i = lo; i < hi; ++i) rows += images[order[i]].features.rows();
      Matrix features(rows, model.input_dim());
      ContrastiveBatch batch;
      Eigen::Index offset = 0;
      for (std::size_t i = lo; i < hi; ++i) {
        const auto& img = images[order[i]];
        features.middleRows(offset, img.features.rows()) = img.features;
        append_anchors(img.hierarchy, offset, batch);
        offset += img.features.rows();
      }
      ModelGrad g;
      LossBreakdown lb;
      try {
        lb = batch_loss(model, features, batch, cfg, &g);
      } catch (const NumericalError& e) {
        throw NumericalError(std::string(e.what()) + " at epoch " + std::to_string(epoch) + ", batch " +
                             std::to_string(b));
      }
      adam.step(params, g.blocks, cfg.peak_lr, schedule.multiplier(step++));
      mean.distance += lb.distance / batches;
      mean.angle += lb.angle / batches;
      mean.reconstruction += lb.reconstruction / batches;
      mean.total += lb.total / batches;
      mean.skipped_angle_pairs += lb.skipped_angle_pairs;
    }
    result.curve.push_back(mean);
  }
  result.model = std::move(model);
  return result;
}

StructureReport assess(const AutoencoderModel& model, const std::vector<TrainingImage>& images) {
  StructureReport rep;
  std::vector<double> pair_angles, other_angles, radii;
  double cos_sum = 0.0;
  int cos_count = 0;
  rep.min_reconstruction_cosine = 1.0;
  int ordered = 0;
  for (const auto& img : images) {
    if (img.features.rows() == 0) continue;
    const auto pts = encode(model, img.features);
    const Matrix rec = decode(model, pts);
    const Matrix f = normalize_rows(img.features);
    for (Eigen::Index i = 0; i < f.rows(); ++i) {
      const double c = f.row(i).dot(rec.row(i));
      cos_sum += c;
      ++cos_count;
      rep.min_reconstruction_cosine = std::min(rep.min_reconstruction_cosine, c);
    }
    for (const auto& p : pts) radii.push_back(geo::distance_to_origin(p));
    ContrastiveBatch batch;
    append_anchors(img.hierarchy, 0, batch);
    for (const auto& a : batch.anchors) {
      ++rep.pairs;
      if (geo::distance_to_origin(pts[a.positive]) < geo::distance_to_origin(pts[a.anchor])) ++ordered;
      try {
        pair_angles.push_back(geo::exterior_angle(pts[a.positive], pts[a.anchor], model.geometry));
      } catch (const DegenerateAngleError&) {
      }
      for (Eigen::Index n : a.negatives) {
        try {
          other_angles.push_back(geo::exterior_angle(pts[n], pts[a.anchor], model.geometry));
        } catch (const DegenerateAngleError&) {
        }
      }
    }
  }
  rep.ordered_fraction = rep.pairs ? static_cast<double>(ordered) / rep.pairs : 0.0;
  rep.median_pair_angle = median(pair_angles);
  rep.median_other_angle = median(other_angles);
  if (!radii.empty()) {
    double s = 0.0, s2 = 0.0;
    for (double r : radii) {
      s += r;
      s2 += r * r;
    }
    rep.mean_radius = s / radii.size();
    rep.radius_spread = std::sqrt(std::max(0.0, s2 / radii.size() - rep.mean_radius * rep.mean_radius));
  }
  rep.mean_reconstruction_cosine = cos_count ? cos_sum / cos_count : 0.0;
  rep.boundary_radius = model.geometry.boundary_radius;
  return rep;
}

std::string StructureReport::collapse_reason() const {
  if (mean_radius < 0.2 * boundary_radius) return "encodings contracted toward the origin";
  if (radius_spread < 1e-3) return "all encodings share one radius";
  if (pairs > 0 && ordered_fraction < 0.9) return "radius does not follow hierarchy depth";
  if (mean_reconstruction_cosine < 0.9) return "reconstructions do not match the inputs";
  return "";
}

void save_checkpoint(const std::filesystem::path& path, const AutoencoderModel& model,
                     const std::string& config_hash) {
  model.validate();
  Tensor t;
  t.shape = {model.parameter_count()};
  t.values.reserve(model.parameter_count());
  AutoencoderModel& mut = const_cast<AutoencoderModel&>(model);
  for (auto* p : parameter_blocks(mut)) t.values.insert(t.values.end(), p->data(), p->data() + p->size());
  write_tensor(path, t);

  nlohmann::json side;
  side["kind"] = "autoencoder";
  side["encoder_dims"] = model.dims();
  side["activation"] = "gelu";
  side["output_activation"] = "linear";
  side["layers"] = nlohmann::json::array();
  for (const auto* part : {&model.encoder, &model.decoder}) {
    for (const auto& l : *part) side["layers"].push_back({{"in", l.in}, {"out", l.out}});
  }
  side["geometry"] = {{"curvature", model.geometry.curvature.value()},
                      {"boundary_radius", model.geometry.boundary_radius},
                      {"arccos_clamp_eps", model.geometry.arccos_clamp_eps},
                      {"entailment_aperture", model.geometry.entailment_aperture}};
  side["config_hash"] = config_hash;
  std::ofstream out(path.string() + ".json");
  out << side.dump(2) << '\n';
  if (!out) throw FormatError("cannot write " + path.string() + ".json");
}

AutoencoderModel load_checkpoint(const std::filesystem::path& path, std::string* config_hash) {
  std::ifstream in(path.string() + ".json");
  if (!in) throw FormatError("missing checkpoint sidecar " + path.string() + ".json");
  nlohmann::json side;
  try {
    side = nlohmann::json::parse(in);
    geo::GeometryConfig geom;
    geom.curvature = geo::Curvature(side.at("geometry").at("curvature").get<double>());
    geom.boundary_radius = side.at("geometry").at("boundary_radius").get<double>();
    geom.arccos_clamp_eps = side.at("geometry").at("arccos_clamp_eps").get<double>();
    geom.entailment_aperture = side.at("geometry").at("entailment_aperture").get<double>();
    AutoencoderModel m = AutoencoderModel::create(side.at("encoder_dims").get<std::vector<int>>(), geom, 0);
    const Tensor t = read_tensor(path);
    if (t.shape.size() != 1 || t.values.size() != m.parameter_count()) {
      throw FormatError("checkpoint " + path.string() + " does not match its sidecar shapes");
    }
    std::size_t at = 0;
    for (auto* p : parameter_blocks(m)) {
      for (Eigen::Index i = 0; i < p->size(); ++i) (*p)[i] = t.values[at++];
    }
    if (config_hash) *config_hash = side.value("config_hash", "");
    m.validate();
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("bad checkpoint sidecar " + path.string() + ".json: " + e.what());
  }
}

}  // namespace hypelift::ae
