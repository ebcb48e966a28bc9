#include "hypelift/query.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "hypelift/errors.hpp"
#include "hypelift/rng.hpp"

namespace hypelift::query {

const char* to_string(Aggregation a) {
  switch (a) {
    case Aggregation::max: return "max";
    case Aggregation::mean: return "mean";
    case Aggregation::sum: return "sum";
    case Aggregation::softmax: return "softmax";
  }
  return "?";
}

const char* to_string(NegativeMode m) {
  switch (m) {
    case NegativeMode::none: return "none";
    case NegativeMode::aggregated: return "aggregated";
    case NegativeMode::stepwise: return "stepwise";
  }
  return "?";
}

const char* to_string(ThresholdMode m) { return m == ThresholdMode::adjusted ? "adjusted" : "raw"; }

Aggregation aggregation_from_string(const std::string& s) {
  for (auto a : {Aggregation::max, Aggregation::mean, Aggregation::sum, Aggregation::softmax}) {
    if (s == to_string(a)) return a;
  }
  throw ConfigError("unknown aggregation '" + s + "'");
}

NegativeMode negative_mode_from_string(const std::string& s) {
  for (auto m : {NegativeMode::none, NegativeMode::aggregated, NegativeMode::stepwise}) {
    if (s == to_string(m)) return m;
  }
  throw ConfigError("unknown negative mode '" + s + "'");
}

ThresholdMode threshold_mode_from_string(const std::string& s) {
  if (s == "adjusted") return ThresholdMode::adjusted;
  if (s == "raw") return ThresholdMode::raw;
  throw ConfigError("unknown threshold mode '" + s + "'");
}

void QueryConfig::validate() const {
  if (steps < 1) throw ConfigError("query steps must be at least 1");
  if (!(t_max >= 0.0 && t_max <= 1.0)) throw ConfigError("t_max must be in [0, 1]");
  if (!(threshold > 0.0 && threshold < 1.0)) throw ConfigError("threshold must be in (0, 1)");
  if (negatives != NegativeMode::none && neutral_labels.empty()) {
    throw ConfigError("relevancy needs at least one neutral term");
  }
}

std::vector<geo::HyperPoint> traverse(const geo::HyperPoint& h, int steps, double t_max) {
  if (steps < 1) throw ConfigError("query steps must be at least 1");
  const auto toward_origin = geo::log_map(h, geo::HyperPoint::origin(h.dim(), h.curvature));
  std::vector<geo::HyperPoint> out;
  out.reserve(static_cast<std::size_t>(steps));
  out.push_back(h);
  for (int k = 1; k < steps; ++k) {
    const double t = t_max * static_cast<double>(k) / static_cast<double>(steps - 1);
    out.push_back(geo::geodesic_point(h, toward_origin, t));
  }
  return out;
}

double relevancy_from_similarity(double prompt_sim, const std::vector<double>& neutral_sims) {
  if (neutral_sims.empty()) throw ConfigError("relevancy needs at least one neutral term");
  double worst = std::numeric_limits<double>::infinity();
  for (double n : neutral_sims) {
    // exp(p) / (exp(n) + exp(p)) written as a logistic of p - n.
    worst = std::min(worst, 1.0 / (1.0 + std::exp(n - prompt_sim)));
  }
  return worst;
}

double relevancy(const Eigen::VectorXd& feature, const Eigen::VectorXd& prompt,
                 const std::vector<Eigen::VectorXd>& neutrals) {
  if (feature.size() != prompt.size()) throw DimensionError("feature and prompt sizes differ");
  std::vector<double> sims;
  sims.reserve(neutrals.size());
  for (const auto& n : neutrals) {
    if (n.size() != feature.size()) throw DimensionError("feature and neutral sizes differ");
    sims.push_back(feature.dot(n));
  }
  return relevancy_from_similarity(feature.dot(prompt), sims);
}

double aggregate(const std::vector<double>& scores, Aggregation method) {
  if (scores.empty()) throw ConfigError("cannot aggregate an empty score list");
  switch (method) {
    case Aggregation::max: return *std::max_element(scores.begin(), scores.end());
    case Aggregation::sum: {
      double s = 0.0;
      for (double v : scores) s += v;
      return s;
    }
    case Aggregation::mean: {
      double s = 0.0;
      for (double v : scores) s += v;
      return s / static_cast<double>(scores.size());
    }
    case Aggregation::softmax: {
      const double top = *std::max_element(scores.begin(), scores.end());
      double z = 0.0, s = 0.0;
      for (double v : scores) {
        const double w = std::exp(v - top);
        z += w;
        s += w * v;
      }
      return s / z;
    }
  }
  return 0.0;
}

std::vector<Eigen::VectorXd> neutral_features(int dim, std::size_t count) {
  if (dim < 1) throw DimensionError("neutral feature dimension must be positive");
  std::vector<Eigen::VectorXd> out;
  for (std::size_t j = 0; j < count; ++j) {
    auto rng = Rng::derive(0x6e657574, {j});
    Eigen::VectorXd v(dim);
    for (int i = 0; i < dim; ++i) v(i) = rng.normal();
    out.push_back(v.normalized());
  }
  return out;
}

namespace {

struct SpatialLess {
  bool operator()(const Eigen::VectorXd* a, const Eigen::VectorXd* b) const {
    return std::lexicographical_compare(a->data(), a->data() + a->size(), b->data(), b->data() + b->size());
  }
};

}  // namespace

StepSimilarities step_similarities(const ae::AutoencoderModel& model, const std::vector<geo::HyperPoint>& points,
                                   const Matrix& text, int steps, double t_max) {
  if (steps < 1) throw ConfigError("query steps must be at least 1");
  if (text.rows() != model.input_dim()) throw DimensionError("text features do not match the decoder output");
  const Eigen::Index latent = model.latent_dim();

  // Points rendered from the same field cell are bit-identical; decode each once.
  std::map<const Eigen::VectorXd*, Eigen::Index, SpatialLess> unique_index;
  std::vector<Eigen::Index> slot(points.size());
  std::vector<std::size_t> representatives;
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (points[i].dim() != latent) throw DimensionError("point does not match the decoder latent size");
    auto [it, inserted] = unique_index.emplace(&points[i].spatial, static_cast<Eigen::Index>(representatives.size()));
    if (inserted) representatives.push_back(i);
    slot[i] = it->second;
  }
  const auto u = static_cast<Eigen::Index>(representatives.size());
  Matrix base(latent, u);
  for (Eigen::Index j = 0; j < u; ++j) {
    base.col(j) = geo::log_map_origin(points[representatives[static_cast<std::size_t>(j)]]).spatial;
  }

  StepSimilarities out;
  out.steps = steps;
  out.per_step.reserve(static_cast<std::size_t>(steps));
  for (int k = 0; k < steps; ++k) {
    const double t = steps == 1 ? 0.0 : t_max * static_cast<double>(k) / static_cast<double>(steps - 1);
    // The geodesic toward O keeps the direction of log_O(h) and scales its norm by 1 - t.
    const Matrix decoded = ae::normalize_rows(ae::decode_tangent_raw(model, (1.0 - t) * base));
    const Matrix unique_sims = text.transpose() * decoded.transpose();  // text x unique
    Matrix sims(text.cols(), static_cast<Eigen::Index>(points.size()));
    for (std::size_t i = 0; i < points.size(); ++i) sims.col(static_cast<Eigen::Index>(i)) = unique_sims.col(slot[i]);
    out.per_step.push_back(std::move(sims));
  }
  return out;
}

StepSimilarities direct_similarities(const Matrix& features, const Matrix& text) {
  if (features.rows() != text.rows()) throw DimensionError("features and text features differ in size");
  Matrix unit = features;
  for (Eigen::Index j = 0; j < unit.cols(); ++j) {
    const double n = unit.col(j).norm();
    if (n > 0.0) unit.col(j) /= n;
  }
  StepSimilarities out;
  out.steps = 1;
  out.per_step.push_back(text.transpose() * unit);
  return out;
}

std::vector<double> step_relevancy(const StepSimilarities& sims, Eigen::Index point, Eigen::Index prompt,
                                   const std::vector<Eigen::Index>& neutrals) {
  std::vector<double> out;
  std::vector<double> ns(neutrals.size());
  for (const auto& s : sims.per_step) {
    for (std::size_t j = 0; j < neutrals.size(); ++j) ns[j] = s(neutrals[j], point);
    out.push_back(relevancy_from_similarity(s(prompt, point), ns));
  }
  return out;
}

Eigen::VectorXd point_scores(const StepSimilarities& sims, Eigen::Index prompt,
                             const std::vector<Eigen::Index>& neutrals, const QueryConfig& cfg) {
  if (sims.per_step.empty()) throw ConfigError("no traversal steps to score");
  if (cfg.negatives != NegativeMode::none && neutrals.empty()) {
    throw ConfigError("relevancy needs at least one neutral term");
  }
  const Eigen::Index n = sims.per_step.front().cols();
  Eigen::VectorXd out(n);
  std::vector<double> series(sims.per_step.size());
  std::vector<double> ns(neutrals.size());
  for (Eigen::Index i = 0; i < n; ++i) {
    switch (cfg.negatives) {
      case NegativeMode::none:
        for (std::size_t k = 0; k < series.size(); ++k) series[k] = sims.per_step[k](prompt, i);
        out(i) = aggregate(series, cfg.aggregation);
        break;
      case NegativeMode::stepwise:
        out(i) = aggregate(step_relevancy(sims, i, prompt, neutrals), cfg.aggregation);
        break;
      case NegativeMode::aggregated: {
        for (std::size_t k = 0; k < series.size(); ++k) series[k] = sims.per_step[k](prompt, i);
        const double p = aggregate(series, cfg.aggregation);
        for (std::size_t j = 0; j < neutrals.size(); ++j) {
          for (std::size_t k = 0; k < series.size(); ++k) series[k] = sims.per_step[k](neutrals[j], i);
          ns[j] = aggregate(series, cfg.aggregation);
        }
        out(i) = relevancy_from_similarity(p, ns);
        break;
      }
    }
  }
  return out;
}

RelevancyMap make_map(int height, int width, Eigen::VectorXd scores, const QueryConfig& cfg,
                      std::vector<std::uint8_t> covered) {
  const auto n = static_cast<std::size_t>(height) * static_cast<std::size_t>(width);
  if (height < 1 || width < 1 || static_cast<std::size_t>(scores.size()) != n) {
    throw DimensionError("score count does not match the view size");
  }
  if (!covered.empty() && covered.size() != n) throw DimensionError("coverage does not match the view size");
  const auto is_covered = [&](std::size_t p) { return covered.empty() || covered[p] != 0; };
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (std::size_t p = 0; p < n; ++p) {
    if (!is_covered(p)) continue;
    const double v = scores(static_cast<Eigen::Index>(p));
    if (!std::isfinite(v)) throw NumericalError("non-finite relevancy score");
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  for (std::size_t p = 0; p < n; ++p) {
    if (!is_covered(p)) scores(static_cast<Eigen::Index>(p)) = 0.0;
  }
  const bool any = hi >= lo;
  double span = any ? hi - lo : 0.0;
  if (cfg.negatives == NegativeMode::none) {
    for (std::size_t p = 0; p < n; ++p) {
      if (!is_covered(p)) continue;
      auto& v = scores(static_cast<Eigen::Index>(p));
      v = span > 0.0 ? (v - lo) / span : 0.0;
    }
    lo = 0.0;
    span = span > 0.0 ? 1.0 : 0.0;
  }

  RelevancyMap map;
  map.height = height;
  map.width = width;
  map.relevancy.assign(scores.data(), scores.data() + scores.size());
  map.adjusted.resize(n, 0.0);
  map.mask.resize(n, 0);
  for (std::size_t p = 0; p < n; ++p) {
    if (!is_covered(p)) continue;
    if (span > 0.0) {
      map.adjusted[p] = std::clamp(2.0 * (scores(static_cast<Eigen::Index>(p)) - lo) / span - 1.0, 0.0, 1.0);
    }
    const double v = cfg.threshold_mode == ThresholdMode::adjusted ? map.adjusted[p] : map.relevancy[p];
    map.mask[p] = v > cfg.threshold ? 1 : 0;
  }
  map.covered = std::move(covered);
  return map;
}

RelevancyMap query_view(const std::vector<geo::HyperPoint>& rendered, int height, int width,
                        const ae::AutoencoderModel& decoder, const Eigen::VectorXd& prompt,
                        const std::vector<Eigen::VectorXd>& neutrals, const QueryConfig& cfg, bool keep_steps) {
  cfg.validate();
  if (cfg.negatives != NegativeMode::none && neutrals.empty()) {
    throw ConfigError("relevancy needs at least one neutral term");
  }
  Matrix text(prompt.size(), static_cast<Eigen::Index>(neutrals.size()) + 1);
  text.col(0) = prompt.normalized();
  std::vector<Eigen::Index> neutral_cols;
  for (std::size_t j = 0; j < neutrals.size(); ++j) {
    if (neutrals[j].size() != prompt.size()) throw DimensionError("neutral and prompt sizes differ");
    text.col(static_cast<Eigen::Index>(j) + 1) = neutrals[j].normalized();
    neutral_cols.push_back(static_cast<Eigen::Index>(j) + 1);
  }
  const auto sims = step_similarities(decoder, rendered, text, cfg.steps, cfg.t_max);
  auto map = make_map(height, width, point_scores(sims, 0, neutral_cols, cfg), cfg);
  if (keep_steps) {
    map.step_scores.assign(sims.per_step.size(), std::vector<double>(rendered.size()));
    for (std::size_t i = 0; i < rendered.size(); ++i) {
      const auto idx = static_cast<Eigen::Index>(i);
      if (neutral_cols.empty()) {
        for (std::size_t k = 0; k < sims.per_step.size(); ++k) map.step_scores[k][i] = sims.per_step[k](0, idx);
        continue;
      }
      const auto series = step_relevancy(sims, idx, 0, neutral_cols);
      for (std::size_t k = 0; k < series.size(); ++k) map.step_scores[k][i] = series[k];
    }
  }
  return map;
}

std::pair<int, int> peak(const RelevancyMap& map) {
  if (map.relevancy.empty()) throw DimensionError("empty relevancy map");
  std::size_t best = 0;
  bool found = false;
  // Strict comparison keeps the first maximum, which is the row-major tie-break.
  for (std::size_t p = 0; p < map.relevancy.size(); ++p) {
    if (!map.covered.empty() && map.covered[p] == 0) continue;
    if (!found || map.relevancy[p] > map.relevancy[best]) {
      best = p;
      found = true;
    }
  }
  const auto i = static_cast<int>(best);
  return {i / map.width, i % map.width};
}

bool localize(const RelevancyMap& map, const synth::Rect& box) {
  const auto [r, c] = peak(map);
  return box.contains(r, c);
}

}  // namespace hypelift::query
