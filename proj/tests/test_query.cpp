#include <cmath>

#include "doctest.h"
#include "hypelift/query.hpp"
#include "test_support.hpp"

using namespace hypelift;
using namespace hypelift::query;
using geo::HyperPoint;
using geo::Vec;

namespace {

Vec unit(Rng& rng, Eigen::Index n) { return testing::random_vec(rng, n).normalized(); }

// Unit vector with prescribed cosine to `ref` (unit).
Vec with_cosine(Rng& rng, const Vec& ref, double cosine) {
  Vec other = testing::random_vec(rng, ref.size());
  other -= other.dot(ref) * ref;
  other.normalize();
  return cosine * ref + std::sqrt(std::max(0.0, 1.0 - cosine * cosine)) * other;
}

// Straightforward per-point evaluation used as the oracle for the batched path.
double oracle_score(const ae::AutoencoderModel& model, const HyperPoint& h, const Vec& prompt,
                    const std::vector<Vec>& neutrals, const QueryConfig& cfg) {
  const auto path = traverse(h, cfg.steps, cfg.t_max);
  const ae::Matrix decoded = ae::decode(model, path);
  std::vector<double> p, step_rel;
  std::vector<std::vector<double>> n(neutrals.size());
  for (Eigen::Index k = 0; k < decoded.rows(); ++k) {
    const Vec f = decoded.row(k).transpose();
    p.push_back(f.dot(prompt));
    for (std::size_t j = 0; j < neutrals.size(); ++j) n[j].push_back(f.dot(neutrals[j]));
    if (!neutrals.empty()) step_rel.push_back(relevancy(f, prompt, neutrals));
  }
  switch (cfg.negatives) {
    case NegativeMode::none: return aggregate(p, cfg.aggregation);
    case NegativeMode::stepwise: return aggregate(step_rel, cfg.aggregation);
    case NegativeMode::aggregated: {
      std::vector<double> agg;
      for (const auto& s : n) agg.push_back(aggregate(s, cfg.aggregation));
      return relevancy_from_similarity(aggregate(p, cfg.aggregation), agg);
    }
  }
  return 0.0;
}

RelevancyMap map_from(int h, int w, std::vector<double> values) {
  QueryConfig cfg;
  return make_map(h, w, Eigen::Map<Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size())), cfg);
}

}  // namespace

TEST_CASE("relevancy formula") {
  Rng rng(3);
  const Vec f = unit(rng, 16);

  SUBCASE("symmetric case is one half") {
    const Vec p = with_cosine(rng, f, 0.3);
    std::vector<Vec> ns{with_cosine(rng, f, 0.3), with_cosine(rng, f, 0.3)};
    CHECK(relevancy(f, p, ns) == doctest::Approx(0.5).epsilon(1e-12));
  }
  SUBCASE("aligned prompt against opposite neutrals") {
    const Vec p = f;
    std::vector<Vec> ns{-f, -f};
    CHECK(relevancy(f, p, ns) == doctest::Approx(1.0 / (1.0 + std::exp(-2.0))).epsilon(1e-12));
    CHECK(relevancy(f, p, ns) == doctest::Approx(0.8808).epsilon(1e-4));
  }
  SUBCASE("adding a neutral never raises the score") {
    for (int trial = 0; trial < 50; ++trial) {
      const Vec p = unit(rng, 16);
      std::vector<Vec> ns{unit(rng, 16)};
      double previous = relevancy(f, p, ns);
      for (int j = 0; j < 4; ++j) {
        ns.push_back(unit(rng, 16));
        const double next = relevancy(f, p, ns);
        CHECK(next <= previous);
        CHECK(next > 0.0);
        CHECK(next < 1.0);
        previous = next;
      }
    }
  }
  SUBCASE("empty neutral list is rejected") {
    CHECK_THROWS_AS(relevancy(f, f, {}), ConfigError);
    CHECK_THROWS_AS(relevancy_from_similarity(0.2, {}), ConfigError);
  }
  SUBCASE("size mismatch") { CHECK_THROWS_AS(relevancy(f, unit(rng, 8), {f}), DimensionError); }
}

TEST_CASE("path aggregation") {
  CHECK(aggregate({0.0, 1.0}, Aggregation::softmax) == doctest::Approx(std::exp(1.0) / (1.0 + std::exp(1.0))));
  CHECK(aggregate({0.0, 1.0}, Aggregation::softmax) == doctest::Approx(0.7311).epsilon(1e-4));
  CHECK(aggregate({0.3, 0.3, 0.3}, Aggregation::softmax) == doctest::Approx(0.3).epsilon(1e-14));
  CHECK(aggregate({0.1, 0.7, 0.4}, Aggregation::max) == 0.7);
  CHECK(aggregate({0.1, 0.7, 0.4}, Aggregation::mean) == doctest::Approx(0.4));
  CHECK(aggregate({0.1, 0.7, 0.4}, Aggregation::sum) == doctest::Approx(1.2));
  CHECK_THROWS_AS(aggregate({}, Aggregation::mean), ConfigError);

  Rng rng(8);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> s(1 + rng.below(30));
    for (auto& v : s) v = rng.uniform(-3.0, 3.0);
    const double lo = *std::min_element(s.begin(), s.end());
    const double hi = *std::max_element(s.begin(), s.end());
    const double soft = aggregate(s, Aggregation::softmax);
    CHECK(soft >= lo - 1e-12);
    CHECK(soft <= hi + 1e-12);
    // Softmax weighting leans toward the large scores.
    CHECK(soft >= aggregate(s, Aggregation::mean) - 1e-12);
  }
}

TEST_CASE("traversal toward the origin") {
  Rng rng(21);
  for (double c : {1.0, 0.5, 2.0}) {
    const geo::Curvature k(c);
    for (int trial = 0; trial < 20; ++trial) {
      const HyperPoint h = testing::random_point(rng, 6, 5.0, k);
      const double d0 = geo::distance_to_origin(h);
      const auto path = traverse(h, 20, 0.95);
      REQUIRE(path.size() == 20);
      CHECK(path[0].spatial == h.spatial);
      CHECK(path[0].time == h.time);
      for (int i = 0; i < 20; ++i) {
        const double t = 0.95 * i / 19.0;
        CHECK(std::abs(geo::distance_to_origin(path[static_cast<std::size_t>(i)]) - (1.0 - t) * d0) < 1e-8);
        // Same ray as h.
        const double cosine = path[static_cast<std::size_t>(i)].spatial.normalized().dot(h.spatial.normalized());
        CHECK(cosine == doctest::Approx(1.0).epsilon(1e-10));
        if (i > 0) {
          CHECK(geo::distance_to_origin(path[static_cast<std::size_t>(i)]) <
                geo::distance_to_origin(path[static_cast<std::size_t>(i - 1)]));
        }
      }
    }
  }

  SUBCASE("single step returns h") {
    const HyperPoint h = testing::random_point(rng, 4, 2.0);
    const auto path = traverse(h, 1, 0.95);
    REQUIRE(path.size() == 1);
    CHECK(path[0].spatial == h.spatial);
  }
  SUBCASE("origin stays put") {
    const auto path = traverse(HyperPoint::origin(5), 7, 0.95);
    REQUIRE(path.size() == 7);
    for (const auto& p : path) {
      CHECK(p.spatial.isZero(0.0));
      CHECK(p.time == 1.0);
    }
  }
  SUBCASE("full traversal ends at the origin") {
    const auto path = traverse(testing::random_point(rng, 4, 3.0), 5, 1.0);
    CHECK(geo::distance_to_origin(path.back()) < 1e-8);
  }
  CHECK_THROWS_AS(traverse(HyperPoint::origin(3), 0, 0.95), ConfigError);
}

TEST_CASE("batched scoring matches per-point evaluation") {
  const auto model = ae::AutoencoderModel::create({24, 16, 8}, {}, 5);
  Rng rng(9);
  std::vector<HyperPoint> points;
  for (int i = 0; i < 6; ++i) points.push_back(testing::random_point(rng, 8, 4.0));
  points.push_back(points[2]);  // duplicate, decoded once
  points.push_back(HyperPoint::origin(8));

  const Vec prompt = unit(rng, 24);
  const std::vector<Vec> neutrals{unit(rng, 24), unit(rng, 24), unit(rng, 24)};
  ae::Matrix text(24, 4);
  text.col(0) = prompt;
  for (int j = 0; j < 3; ++j) text.col(j + 1) = neutrals[static_cast<std::size_t>(j)];

  for (auto agg : {Aggregation::max, Aggregation::mean, Aggregation::sum, Aggregation::softmax}) {
    for (auto neg : {NegativeMode::none, NegativeMode::aggregated, NegativeMode::stepwise}) {
      QueryConfig cfg;
      cfg.steps = 7;
      cfg.aggregation = agg;
      cfg.negatives = neg;
      const auto sims = step_similarities(model, points, text, cfg.steps, cfg.t_max);
      const Eigen::VectorXd scores = point_scores(sims, 0, {1, 2, 3}, cfg);
      for (std::size_t i = 0; i < points.size(); ++i) {
        CAPTURE(to_string(agg));
        CAPTURE(to_string(neg));
        CHECK(scores(static_cast<Eigen::Index>(i)) ==
              doctest::Approx(oracle_score(model, points[i], prompt, neutrals, cfg)).epsilon(1e-9));
        if (neg != NegativeMode::none && agg != Aggregation::sum) {
          CHECK(scores(static_cast<Eigen::Index>(i)) > 0.0);
          CHECK(scores(static_cast<Eigen::Index>(i)) < 1.0);
        }
      }
      CHECK(scores(6) == scores(2));
    }
  }
}

TEST_CASE("direct similarities normalize raw features") {
  ae::Matrix features(3, 2);
  features << 2, 0, 0, 0, 0, 5;
  ae::Matrix text(3, 1);
  text << 1, 0, 0;
  const auto sims = direct_similarities(features, text);
  CHECK(sims.steps == 1);
  CHECK(sims.per_step[0](0, 0) == doctest::Approx(1.0));
  CHECK(sims.per_step[0](0, 1) == doctest::Approx(0.0));
}

TEST_CASE("view queries") {
  const auto model = ae::AutoencoderModel::create({64, 32, 8}, {}, 11);
  const auto neutrals = neutral_features(64);
  Rng rng(2);

  SUBCASE("an untrained view renders the origin and gives a uniform map") {
    std::vector<HyperPoint> rendered(12, HyperPoint::origin(8));
    const auto map = query_view(rendered, 3, 4, model, unit(rng, 64), neutrals, QueryConfig{});
    for (double v : map.relevancy) CHECK(v == map.relevancy[0]);
    for (auto m : map.mask) CHECK(m == 0);
  }
  SUBCASE("prompting with a neutral term scores about one half") {
    std::vector<HyperPoint> rendered;
    for (int i = 0; i < 12; ++i) rendered.push_back(testing::random_point(rng, 8, 4.0));
    const auto map = query_view(rendered, 3, 4, model, neutrals[1], neutrals, QueryConfig{});
    for (double v : map.relevancy) {
      CHECK(v <= 0.5 + 1e-12);
      CHECK(v > 0.45);
    }
  }
  SUBCASE("mask follows the thresholded score") {
    std::vector<HyperPoint> rendered;
    for (int i = 0; i < 20; ++i) rendered.push_back(testing::random_point(rng, 8, 4.0));
    for (auto mode : {ThresholdMode::adjusted, ThresholdMode::raw}) {
      QueryConfig cfg;
      cfg.threshold_mode = mode;
      const auto map = query_view(rendered, 4, 5, model, unit(rng, 64), neutrals, cfg, true);
      REQUIRE(map.step_scores.size() == 20);
      for (std::size_t p = 0; p < map.mask.size(); ++p) {
        const double s = mode == ThresholdMode::adjusted ? map.adjusted[p] : map.relevancy[p];
        CHECK(map.mask[p] == (s > 0.4 ? 1 : 0));
        CHECK(std::isfinite(map.relevancy[p]));
        CHECK(map.adjusted[p] >= 0.0);
        CHECK(map.adjusted[p] <= 1.0);
      }
    }
  }
  SUBCASE("relevancy needs neutrals unless negatives are off") {
    std::vector<HyperPoint> rendered(4, HyperPoint::origin(8));
    CHECK_THROWS_AS(query_view(rendered, 2, 2, model, unit(rng, 64), {}, QueryConfig{}), ConfigError);
    QueryConfig cfg;
    cfg.negatives = NegativeMode::none;
    CHECK_NOTHROW(query_view(rendered, 2, 2, model, unit(rng, 64), {}, cfg));
  }
  SUBCASE("wrong sizes") {
    std::vector<HyperPoint> rendered(4, HyperPoint::origin(8));
    CHECK_THROWS_AS(query_view(rendered, 2, 3, model, unit(rng, 64), neutrals, QueryConfig{}), DimensionError);
    CHECK_THROWS_AS(query_view(rendered, 2, 2, model, unit(rng, 32), neutrals, QueryConfig{}), DimensionError);
  }
}

TEST_CASE("map normalization") {
  SUBCASE("adjusted score stretches the view range") {
    const auto map = map_from(1, 5, {0.50, 0.55, 0.60, 0.65, 0.70});
    CHECK(map.adjusted[0] == 0.0);
    CHECK(map.adjusted[2] == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(map.adjusted[3] == doctest::Approx(0.5));
    CHECK(map.adjusted[4] == doctest::Approx(1.0));
    CHECK(std::vector<std::uint8_t>(map.mask) == std::vector<std::uint8_t>{0, 0, 0, 1, 1});
  }
  SUBCASE("without neutrals the cosine is min-maxed over the view") {
    QueryConfig cfg;
    cfg.negatives = NegativeMode::none;
    Eigen::VectorXd s(4);
    s << -0.2, 0.0, 0.2, 0.6;
    const auto map = make_map(2, 2, s, cfg);
    CHECK(map.relevancy[0] == 0.0);
    CHECK(map.relevancy[1] == doctest::Approx(0.25));
    CHECK(map.relevancy[3] == 1.0);
  }
  SUBCASE("raw threshold") {
    QueryConfig cfg;
    cfg.threshold_mode = ThresholdMode::raw;
    Eigen::VectorXd s(3);
    s << 0.39, 0.41, 0.5;
    const auto map = make_map(1, 3, s, cfg);
    CHECK(std::vector<std::uint8_t>(map.mask) == std::vector<std::uint8_t>{0, 1, 1});
  }
  SUBCASE("non-finite scores are rejected") {
    Eigen::VectorXd s(2);
    s << 0.1, std::nan("");
    CHECK_THROWS_AS(make_map(1, 2, s, QueryConfig{}), NumericalError);
  }
  SUBCASE("uncovered pixels stay out of the range and the mask") {
    Eigen::VectorXd s(5);
    s << 0.9, 0.50, 0.60, 0.70, std::nan("");
    const auto map = make_map(1, 5, s, QueryConfig{}, {0, 1, 1, 1, 0});
    CHECK(map.relevancy[0] == 0.0);
    CHECK(map.relevancy[4] == 0.0);
    CHECK(map.adjusted[2] == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(map.adjusted[3] == doctest::Approx(1.0));
    CHECK(std::vector<std::uint8_t>(map.mask) == std::vector<std::uint8_t>{0, 0, 0, 1, 0});
    CHECK(peak(map) == std::pair{0, 3});
  }
  SUBCASE("nothing covered gives an empty uniform map") {
    Eigen::VectorXd s(4);
    s << 0.3, 0.7, 0.1, 0.2;
    const auto map = make_map(2, 2, s, QueryConfig{}, {0, 0, 0, 0});
    CHECK(std::all_of(map.relevancy.begin(), map.relevancy.end(), [](double v) { return v == 0.0; }));
    CHECK(std::all_of(map.mask.begin(), map.mask.end(), [](std::uint8_t m) { return m == 0; }));
    CHECK(peak(map) == std::pair{0, 0});
  }
  SUBCASE("coverage must match the view") {
    CHECK_THROWS_AS(make_map(1, 2, Eigen::VectorXd::Zero(2), QueryConfig{}, {1}), DimensionError);
  }
}

TEST_CASE("localization") {
  const synth::Rect box{1, 1, 2, 2};
  SUBCASE("single peak inside the box") {
    std::vector<double> v(16, 0.1);
    v[2 * 4 + 2] = 0.9;
    CHECK(localize(map_from(4, 4, v), box));
  }
  SUBCASE("uniform map peaks at the first pixel") {
    const auto map = map_from(4, 4, std::vector<double>(16, 0.5));
    CHECK(peak(map) == std::pair{0, 0});
    CHECK_FALSE(localize(map, box));
    CHECK(localize(map, synth::Rect{0, 0, 1, 1}));
  }
  SUBCASE("equal peaks resolve to the earlier row") {
    std::vector<double> v(16, 0.1);
    v[0 * 4 + 3] = 0.9;  // outside, row 0
    v[2 * 4 + 1] = 0.9;  // inside, row 2
    CHECK(peak(map_from(4, 4, v)) == std::pair{0, 3});
    CHECK_FALSE(localize(map_from(4, 4, v), box));
  }
}

TEST_CASE("neutral features and config") {
  const auto a = neutral_features(32);
  const auto b = neutral_features(32);
  REQUIRE(a.size() == 4);
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(a[i] == b[i]);
    CHECK(a[i].norm() == doctest::Approx(1.0));
    for (std::size_t j = 0; j < i; ++j) CHECK(std::abs(a[i].dot(a[j])) < 0.9);
  }

  QueryConfig cfg;
  CHECK(cfg.steps == 20);
  CHECK(cfg.neutral_labels.size() == 4);
  CHECK_NOTHROW(cfg.validate());
  cfg.threshold = 1.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = {};
  cfg.steps = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);

  for (auto a2 : {Aggregation::max, Aggregation::mean, Aggregation::sum, Aggregation::softmax}) {
    CHECK(aggregation_from_string(to_string(a2)) == a2);
  }
  for (auto n : {NegativeMode::none, NegativeMode::aggregated, NegativeMode::stepwise}) {
    CHECK(negative_mode_from_string(to_string(n)) == n);
  }
  CHECK(threshold_mode_from_string("raw") == ThresholdMode::raw);
  CHECK_THROWS_AS(aggregation_from_string("median"), ConfigError);
}
