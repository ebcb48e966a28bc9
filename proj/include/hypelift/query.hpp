#pragma once

// Open-vocabulary queries over hyperbolic features: walk each pixel's
// geodesic toward the origin, decode every step, score the decoded features
// against a prompt and neutral terms, and aggregate over the steps.

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "hypelift/autoencoder.hpp"
#include "hypelift/geometry.hpp"
#include "hypelift/synth.hpp"

namespace hypelift::query {

using Matrix = Eigen::MatrixXd;

enum class Aggregation { max, mean, sum, softmax };
enum class NegativeMode { none, aggregated, stepwise };
/// `adjusted`: threshold clip(2 (s - min) / (max - min) - 1, 0, 1) over the
/// view. `raw`: threshold the aggregated relevancy itself.
enum class ThresholdMode { adjusted, raw };

const char* to_string(Aggregation a);
const char* to_string(NegativeMode m);
const char* to_string(ThresholdMode m);
Aggregation aggregation_from_string(const std::string& s);
NegativeMode negative_mode_from_string(const std::string& s);
ThresholdMode threshold_mode_from_string(const std::string& s);

struct QueryConfig {
  int steps = 20;
  Aggregation aggregation = Aggregation::softmax;
  NegativeMode negatives = NegativeMode::stepwise;
  ThresholdMode threshold_mode = ThresholdMode::adjusted;
  double threshold = 0.4;
  double t_max = 0.95;
  std::vector<std::string> neutral_labels{"object", "things", "stuff", "texture"};

  void validate() const;
};

/// gamma(t_k) on the geodesic from h toward O, t_k = t_max (k-1)/(T-1);
/// the first element is h itself.
std::vector<geo::HyperPoint> traverse(const geo::HyperPoint& h, int steps, double t_max);

/// min_j exp(f.p) / (exp(f.n_j) + exp(f.p)). Throws ConfigError without neutrals.
double relevancy(const Eigen::VectorXd& feature, const Eigen::VectorXd& prompt,
                 const std::vector<Eigen::VectorXd>& neutrals);
/// Same formula on precomputed similarities.
double relevancy_from_similarity(double prompt_sim, const std::vector<double>& neutral_sims);

/// Throws ConfigError on an empty list.
double aggregate(const std::vector<double>& scores, Aggregation method);

/// Four fixed pseudo-random unit vectors standing in for the neutral terms.
std::vector<Eigen::VectorXd> neutral_features(int dim, std::size_t count = 4);

/// Cosine similarities of decoded traversal steps against text features.
struct StepSimilarities {
  int steps = 0;
  std::vector<Matrix> per_step;  // per step: text count x points
};

/// `text` holds unit-norm text features as columns. Identical points are
/// decoded once.
StepSimilarities step_similarities(const ae::AutoencoderModel& model, const std::vector<geo::HyperPoint>& points,
                                   const Matrix& text, int steps, double t_max);
/// Single-step similarities of raw feature columns (fields that store
/// language features directly).
StepSimilarities direct_similarities(const Matrix& features, const Matrix& text);

/// Aggregated score per point for text column `prompt`, with text columns
/// `neutrals` as the neutral terms. In `none` mode this is the aggregated
/// cosine, otherwise a relevancy in (0, 1).
Eigen::VectorXd point_scores(const StepSimilarities& sims, Eigen::Index prompt,
                             const std::vector<Eigen::Index>& neutrals, const QueryConfig& cfg);
/// Per-step relevancy (stepwise neutrals) of one point, for diagnostics.
std::vector<double> step_relevancy(const StepSimilarities& sims, Eigen::Index point, Eigen::Index prompt,
                                   const std::vector<Eigen::Index>& neutrals);

struct RelevancyMap {
  int height = 0;
  int width = 0;
  std::vector<double> relevancy;  // aggregated score; min-maxed to [0, 1] in `none` mode
  std::vector<double> adjusted;   // clip(2 (s - min) / (max - min) - 1, 0, 1)
  std::vector<std::uint8_t> mask;
  /// Pixels that carry a feature; empty means all of them. Uncovered pixels
  /// score 0, never enter the mask and never hold the peak.
  std::vector<std::uint8_t> covered;
  std::vector<std::vector<double>> step_scores;  // optional, per step then pixel

  double at(int r, int c) const { return relevancy[static_cast<std::size_t>(r) * width + c]; }
};

/// Builds the map of one view from per-pixel aggregated scores. The min and
/// max of the normalizations run over covered pixels only.
RelevancyMap make_map(int height, int width, Eigen::VectorXd scores, const QueryConfig& cfg,
                      std::vector<std::uint8_t> covered = {});

/// Full query of one rendered view (row-major pixels).
RelevancyMap query_view(const std::vector<geo::HyperPoint>& rendered, int height, int width,
                        const ae::AutoencoderModel& decoder, const Eigen::VectorXd& prompt,
                        const std::vector<Eigen::VectorXd>& neutrals, const QueryConfig& cfg,
                        bool keep_steps = false);

/// Row-major argmax of the relevancy over covered pixels; ties go to the
/// smallest row, then column. (0, 0) when nothing is covered.
std::pair<int, int> peak(const RelevancyMap& map);
/// True iff the peak lies inside `box` (view coordinates).
bool localize(const RelevancyMap& map, const synth::Rect& box);

}  // namespace hypelift::query
