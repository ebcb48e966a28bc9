#include <cmath>
#include <filesystem>
#include <map>

#include "doctest.h"
#include "hypelift/autoencoder.hpp"
#include "hypelift/field.hpp"
#include "test_support.hpp"

using namespace hypelift;
using namespace hypelift::field;
using geo::HyperPoint;
using geo::TangentVector;
using geo::Vec;

namespace {

const geo::GeometryConfig kGeometry{};

HyperPoint radial(const Vec& dir, double r) { return geo::exp_map_origin({dir.normalized() * r}); }

Vec axis(Eigen::Index n, Eigen::Index i) {
  Vec v = Vec::Zero(n);
  v[i] = 1.0;
  return v;
}

hier::Mask box_mask(const std::string& id, int h, int w, int r0, int c0, int r1, int c1) {
  std::vector<std::uint8_t> bits(static_cast<std::size_t>(h) * w, 0);
  for (int r = r0; r < r1; ++r) {
    for (int c = c0; c < c1; ++c) bits[static_cast<std::size_t>(r) * w + c] = 1;
  }
  return hier::Mask(id, "v", h, w, bits);
}

// Chain A > B > C inside a 10x10 view placed at (2, 3) in the world.
ViewSupervision chain_view(const std::vector<HyperPoint>& encoded) {
  ViewSupervision v;
  v.view = synth::ViewSpec{"v", 2, 3, 10, 10};
  v.masks = {box_mask("A", 10, 10, 0, 0, 9, 9), box_mask("B", 10, 10, 1, 1, 8, 8), box_mask("C", 10, 10, 2, 2, 6, 6)};
  v.hierarchy = hier::build_hierarchy(v.masks, {});
  v.encoded = encoded;
  return v;
}

ViewSupervision supervise(const synth::RenderedView& rv, const ae::AutoencoderModel& model) {
  ViewSupervision v;
  v.view = rv.view;
  v.masks = rv.masks;
  v.hierarchy = hier::build_hierarchy(rv.masks, {});
  ae::Matrix f(static_cast<Eigen::Index>(rv.features.size()), model.input_dim());
  for (std::size_t i = 0; i < rv.features.size(); ++i) f.row(static_cast<Eigen::Index>(i)) = rv.features[i].feature.transpose();
  v.encoded = ae::encode(model, f);
  v.features = f;
  return v;
}

}  // namespace

TEST_CASE("rendering the grid") {
  auto grid = FieldGrid::zeros(12, 16, 6, kGeometry);
  const synth::ViewSpec a{"a", 0, 0, 8, 10};
  const synth::ViewSpec b{"b", 3, 4, 8, 10};

  for (const auto& p : render(grid, a)) {
    CHECK(p.spatial.isZero(0.0));
    CHECK(p.time == 1.0);
  }

  Rng rng(4);
  for (Eigen::Index j = 0; j < grid.cells.cols(); ++j) grid.cells.col(j) = testing::random_vec(rng, 6, 3.0);
  const auto ra = render(grid, a);
  const auto rb = render(grid, b);
  for (int r = 3; r < 8; ++r) {
    for (int c = 4; c < 10; ++c) {
      const auto& pa = ra[static_cast<std::size_t>(r) * 10 + c];
      const auto& pb = rb[static_cast<std::size_t>(r - 3) * 10 + (c - 4)];
      CHECK(pa.spatial == pb.spatial);
    }
  }
  for (const auto& p : ra) {
    CHECK(std::abs(geo::lorentz_inner(p, p) + 1.0) < 1e-9);
    CHECK(geo::distance_to_origin(p) <= kGeometry.boundary_radius + 1e-9);
  }
  const auto vectors = render_vectors(grid, b);
  CHECK(vectors.cols() == 80);
  CHECK(vectors.col(0) == grid.cells.col(grid.cell(3, 4)));

  CHECK_THROWS_AS(render(grid, synth::ViewSpec{"c", 5, 10, 8, 10}), BoundsError);
  CHECK_THROWS_AS(render(grid, synth::ViewSpec{"d", -1, 0, 8, 10}), BoundsError);
}

TEST_CASE("distillation loss") {
  Rng rng(6);
  for (int trial = 0; trial < 20; ++trial) {
    const HyperPoint t = testing::random_point(rng, 8, 5.0);
    CHECK(distill_loss(t, t, 1.0) < 1e-18);

    // Same distance from O: only the geodesic term remains.
    const HyperPoint p = radial(testing::random_vec(rng, 8), geo::distance_to_origin(t));
    const double d = geo::geodesic_distance(p, t);
    CHECK(distill_loss(p, t, 1.0) == doctest::Approx(d * d).epsilon(1e-9));
    CHECK(distill_loss(p, t, 1.0, false) == doctest::Approx(d).epsilon(1e-9));

    const HyperPoint q = testing::random_point(rng, 8, 5.0);
    const double reg = geo::distance_to_origin(q) - geo::distance_to_origin(t);
    const double dq = geo::geodesic_distance(q, t);
    CHECK(distill_loss(q, t, 0.7) == doctest::Approx(dq * dq + 0.7 * reg * reg).epsilon(1e-12));
    CHECK(distill_loss(q, t, 0.0) >= 0.0);
  }
}

TEST_CASE("distillation gradient matches finite differences") {
  Rng rng(13);
  int checked = 0;
  for (bool squared : {true, false}) {
    for (double lambda : {0.0, 1.0, 2.5}) {
      for (int trial = 0; trial < 10; ++trial) {
        // Inside the orbit so the clamp is smooth around z.
        const TangentVector z = testing::random_tangent(rng, 6, 4.5);
        if (z.norm() < 0.05) continue;
        const HyperPoint target = testing::random_point(rng, 6, 5.0);
        const auto dg = distill_loss_grad(z, target, lambda, squared, kGeometry);
        CHECK(dg.value == doctest::Approx(distill_loss(geo::exp_map_origin(z), target, lambda, squared)).epsilon(1e-12));
        const auto f = [&](const Vec& v) {
          return distill_loss(geo::exp_map_origin(geo::clamp_to_orbit({v, z.curvature}, kGeometry)), target, lambda,
                              squared);
        };
        for (Eigen::Index i = 0; i < 6; ++i) {
          const double fd = testing::central_difference(f, z.spatial, i, 1e-6);
          CHECK(testing::rel_error(dg.grad[i], fd) < 1e-4);
          ++checked;
        }
      }
    }
  }
  CHECK(checked > 300);

  SUBCASE("outside the orbit the gradient is tangential") {
    const Vec dir = axis(4, 1);
    const auto dg = distill_loss_grad({dir * 7.0, {}}, radial(axis(4, 0), 2.0), 1.0, true, kGeometry);
    CHECK(std::abs(dg.grad.dot(dir)) < 1e-12);
    CHECK(dg.grad.norm() > 0.0);
  }
}

TEST_CASE("target construction") {
  const Vec e0 = axis(4, 0), e1 = axis(4, 1), e2 = axis(4, 2);
  const std::vector<HyperPoint> enc{radial(e0, 1.0), radial(e1, 2.0), radial(e2, 3.0)};
  const auto view = chain_view(enc);

  SUBCASE("deepest mask supervises each pixel") {
    const auto set = build_targets({view}, Supervision::hyperbolic_extrapolated, kGeometry);
    CHECK(set.samples.size() == 81);
    CHECK(set.skipped == 0);
    for (const auto& s : set.samples) {
      CHECK(geo::distance_to_origin(s.target) == doctest::Approx(kGeometry.boundary_radius).epsilon(1e-9));
      CHECK(std::abs(geo::distance_to_origin(s.target) - kGeometry.boundary_radius) < 1e-6);
      const int r = s.row - 2, c = s.col - 3;
      const Vec expected_dir = (r >= 2 && r < 6 && c >= 2 && c < 6) ? e2 : (r >= 1 && r < 8 && c >= 1 && c < 8) ? e1 : e0;
      CHECK(s.target.spatial.normalized().dot(expected_dir) == doctest::Approx(1.0));
      CHECK(s.view_id == "v");
    }
  }
  SUBCASE("plain hyperbolic keeps the encoding") {
    const auto set = build_targets({view}, Supervision::hyperbolic, kGeometry);
    int in_c = 0;
    for (const auto& s : set.samples) {
      if (s.row == 2 + 2 && s.col == 3 + 2) {
        CHECK(s.target.spatial == enc[2].spatial);
        ++in_c;
      }
    }
    CHECK(in_c == 1);
  }
  SUBCASE("tangent targets are origin logs") {
    const auto set = build_targets({view}, Supervision::tangent, kGeometry);
    CHECK(set.samples.size() == 81);
    CHECK(set.samples.front().vector.isApprox(geo::log_map_origin(enc[0]).spatial));
  }
  SUBCASE("an encoding at the origin is skipped and counted") {
    const auto set = build_targets({chain_view({radial(e0, 1.0), radial(e1, 2.0), HyperPoint::origin(4)})},
                                   Supervision::hyperbolic_extrapolated, kGeometry);
    CHECK(set.skipped == 16);
    CHECK(set.samples.size() == 65);
  }
  SUBCASE("missing encodings") {
    auto bad = view;
    bad.encoded.pop_back();
    CHECK_THROWS_AS(build_targets({bad}, Supervision::hyperbolic, kGeometry), DimensionError);
    CHECK_THROWS_AS(build_targets({view}, Supervision::raw_feature, kGeometry), DimensionError);
  }
}

TEST_CASE("noise-free overlapping views agree on shared cells") {
  const auto tree = synth::ConceptTree::two_objects_three_parts(32);
  const auto scene = synth::generate_scene(3, tree, 48, 64);
  const auto model = ae::AutoencoderModel::create({32, 16, 8}, kGeometry, 1);
  const synth::ViewSpec a{"a", 4, 4, 40, 40};
  const synth::ViewSpec b{"b", 6, 20, 40, 40};
  const auto va = supervise(synth::render_view(scene, a, {}, 5), model);
  const auto vb = supervise(synth::render_view(scene, b, {}, 5), model);
  const auto ta = build_targets({va}, Supervision::hyperbolic_extrapolated, kGeometry);
  const auto tb = build_targets({vb}, Supervision::hyperbolic_extrapolated, kGeometry);
  std::map<std::pair<int, int>, const SupervisionSample*> by_cell;
  for (const auto& s : ta.samples) by_cell[{s.row, s.col}] = &s;
  int shared = 0;
  for (const auto& s : tb.samples) {
    auto it = by_cell.find({s.row, s.col});
    if (it == by_cell.end()) continue;
    ++shared;
    // The deepest concept may differ only where a view crops a part to its parent's extent.
    if (scene.at(s.row, s.col) == synth::kEmpty) continue;
    CHECK(geo::geodesic_distance(it->second->target, s.target) < 1e-6);
  }
  CHECK(shared > 500);
}

TEST_CASE("field training") {
  SUBCASE("single noise-free target is recovered") {
    auto grid = FieldGrid::zeros(1, 1, 8, kGeometry);
    Rng rng(2);
    const HyperPoint target = geo::extrapolate_to_boundary(testing::random_point(rng, 8, 3.0), kGeometry);
    SupervisionSample s;
    s.target = target;
    FieldTrainConfig cfg;
    cfg.steps = 2000;
    const auto result = train_field(grid, {s}, Supervision::hyperbolic_extrapolated, cfg);
    CHECK(geo::geodesic_distance(result.field.point(0, 0), target) < 1e-2);
    CHECK(result.mean_distance < 1e-2);
    CHECK(result.curve.back() < result.curve.front());
  }
  SUBCASE("only supervised cells count as observed") {
    auto grid = FieldGrid::zeros(2, 3, 4, kGeometry);
    SupervisionSample s;
    s.row = 1;
    s.col = 2;
    s.target = geo::exp_map_origin({Vec{{0.5, 0.1, 0.0, 0.2}}, {}});
    FieldTrainConfig cfg;
    cfg.steps = 5;
    const auto result = train_field(grid, {s, s}, Supervision::hyperbolic, cfg);
    CHECK(result.field.observed == std::vector<std::uint8_t>{0, 0, 0, 0, 0, 1});
    CHECK(result.field.cells.col(0).isZero());
  }
  SUBCASE("conflicting symmetric targets meet in the middle") {
    auto grid = FieldGrid::zeros(1, 1, 4, kGeometry);
    grid.cells.col(0) << 0.6, 0.3, -0.2, 0.1;
    // Mirror images under e0 -> -e0 around the ray through e1.
    const HyperPoint t1 = geo::exp_map_origin({Vec{{1.5, 2.0, 0.0, 0.0}}, {}});
    const HyperPoint t2 = geo::exp_map_origin({Vec{{-1.5, 2.0, 0.0, 0.0}}, {}});
    SupervisionSample s1, s2;
    s1.target = t1;
    s2.target = t2;
    FieldTrainConfig cfg;
    cfg.steps = 3000;
    cfg.batch_size = 2;
    const auto result = train_field(grid, {s1, s2}, Supervision::hyperbolic, cfg);
    const auto p = result.field.point(0, 0);
    const double d1 = geo::geodesic_distance(p, t1);
    const double d2 = geo::geodesic_distance(p, t2);
    CHECK(std::abs(d1 - d2) <= 0.05 * std::max(d1, d2));
  }
  SUBCASE("vector modes regress the target") {
    auto grid = FieldGrid::zeros(2, 2, 3, kGeometry);
    SupervisionSample s;
    s.row = 1;
    s.col = 0;
    s.vector = Vec{{0.5, -1.0, 2.0}};
    FieldTrainConfig cfg;
    cfg.steps = 2000;
    cfg.lr = 0.05;
    const auto result = train_field(grid, {s}, Supervision::tangent, cfg);
    CHECK(result.mean_squared_error < 1e-4);
    CHECK(result.field.cells.col(grid.cell(1, 0)).isApprox(s.vector, 1e-2));
  }
  SUBCASE("training is deterministic in the seed") {
    auto grid = FieldGrid::zeros(3, 3, 4, kGeometry);
    Rng rng(8);
    std::vector<SupervisionSample> samples;
    for (int i = 0; i < 30; ++i) {
      SupervisionSample s;
      s.row = static_cast<int>(rng.below(3));
      s.col = static_cast<int>(rng.below(3));
      s.target = geo::extrapolate_to_boundary(testing::random_point(rng, 4, 2.0), kGeometry);
      samples.push_back(s);
    }
    FieldTrainConfig cfg;
    cfg.steps = 200;
    cfg.batch_size = 7;
    cfg.seed = 44;
    const auto a = train_field(grid, samples, Supervision::hyperbolic_extrapolated, cfg);
    const auto b = train_field(grid, samples, Supervision::hyperbolic_extrapolated, cfg);
    CHECK(a.field == b.field);
    CHECK(a.curve == b.curve);
    cfg.seed = 45;
    CHECK_FALSE(train_field(grid, samples, Supervision::hyperbolic_extrapolated, cfg).field == a.field);
  }
  SUBCASE("bad inputs") {
    auto grid = FieldGrid::zeros(2, 2, 4, kGeometry);
    CHECK_THROWS_AS(train_field(grid, {}, Supervision::hyperbolic, {}), ConfigError);
    SupervisionSample s;
    s.row = 2;
    s.target = HyperPoint::origin(4);
    CHECK_THROWS_AS(train_field(grid, {s}, Supervision::hyperbolic, {}), BoundsError);
    s.row = 0;
    s.target = HyperPoint::origin(3);
    CHECK_THROWS_AS(train_field(grid, {s}, Supervision::hyperbolic, {}), DimensionError);
    s.target = HyperPoint::origin(4);
    s.target.spatial[0] = std::nan("");
    CHECK_THROWS_AS(train_field(grid, {s}, Supervision::hyperbolic, {}), NumericalError);
  }
}

TEST_CASE("field checkpoints round trip") {
  auto grid = FieldGrid::zeros(3, 5, 4, kGeometry);
  Rng rng(1);
  for (Eigen::Index j = 0; j < grid.cells.cols(); ++j) grid.cells.col(j) = testing::random_vec(rng, 4);
  grid.observed[3] = grid.observed[7] = 1;
  const auto dir = std::filesystem::temp_directory_path() / "hypelift_field_test";
  std::filesystem::create_directories(dir);
  const auto path = dir / "field.oht";
  save_field(path, grid, Supervision::hyperbolic_extrapolated, 1.0, "abc123");
  Supervision mode{};
  std::string hash;
  const auto back = load_field(path, &mode, &hash);
  CHECK(back == grid);
  CHECK(mode == Supervision::hyperbolic_extrapolated);
  CHECK(hash == "abc123");
  CHECK(back.point(2, 4).spatial == grid.point(2, 4).spatial);
  std::filesystem::remove(path.string() + ".json");
  CHECK_THROWS_AS(load_field(path), FormatError);
  std::filesystem::remove_all(dir);

  for (auto m : {Supervision::raw_feature, Supervision::tangent, Supervision::hyperbolic,
                 Supervision::hyperbolic_extrapolated}) {
    CHECK(supervision_from_string(to_string(m)) == m);
  }
  CHECK_THROWS_AS(supervision_from_string("nerf"), ConfigError);
}
