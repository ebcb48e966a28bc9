#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "hypelift/config.hpp"
#include "hypelift/errors.hpp"
#include "hypelift/pipeline.hpp"

using namespace hypelift;
namespace fs = std::filesystem;

namespace {

// Small enough to train in well under a second.
PipelineConfig tiny_config(const fs::path& out) {
  auto cfg = parse_config(
      "seed = 5\n"
      "[scene]\nfeature_dim = 32\nheight = 24\nwidth = 48\nviews = 3\nview_height = 20\nview_width = 24\n"
      "noise_sigma = 0.05\n"
      "[hierarchy]\nmin_area = 4\n"
      "[autoencoder]\ndims = 32,16,8\nepochs = 300\n"
      "[field]\nsteps = 100\n"
      "[query]\nsteps = 5\n");
  cfg.output = out;
  return cfg;
}

fs::path scratch(const char* name) {
  const auto dir = fs::temp_directory_path() / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

}  // namespace

TEST_CASE("intersection over union") {
  const std::vector<std::uint8_t> full(8, 1);
  CHECK(pipeline::iou(full, full) == 1.0);
  const std::vector<std::uint8_t> a{1, 1, 0, 0}, b{0, 0, 1, 1};
  CHECK(pipeline::iou(a, b) == 0.0);
  // Left half of a 2x4 image against the whole image.
  const std::vector<std::uint8_t> left{1, 1, 0, 0, 1, 1, 0, 0};
  CHECK(pipeline::iou(left, full) == 0.5);
  CHECK(pipeline::iou(std::vector<std::uint8_t>(4, 0), std::vector<std::uint8_t>(4, 0)) == 1.0);
  CHECK_THROWS_AS(pipeline::iou(a, full), DimensionError);
}

TEST_CASE("bounding boxes") {
  std::vector<std::uint8_t> m(5 * 6, 0);
  m[1 * 6 + 2] = m[3 * 6 + 4] = 1;
  const auto box = pipeline::bounding_box(m, 5, 6);
  CHECK(box.row == 1);
  CHECK(box.col == 2);
  CHECK(box.height == 3);
  CHECK(box.width == 3);
  CHECK(box.contains(2, 3));
  CHECK_FALSE(box.contains(0, 2));
}

TEST_CASE("ablation switches") {
  const auto sw = pipeline::parse_switch("steps=10,20,30");
  CHECK(sw.name == "steps");
  CHECK(sw.values == std::vector<std::string>{"10", "20", "30"});
  CHECK_THROWS_AS(pipeline::parse_switch("steps"), ConfigError);
  CHECK_THROWS_AS(pipeline::parse_switch("=1"), ConfigError);
  CHECK_THROWS_AS(pipeline::parse_switch("colour=red"), ConfigError);
  CHECK_THROWS_AS(pipeline::parse_switch("loss=everything"), ConfigError);

  PipelineConfig cfg;
  pipeline::apply_switch(cfg, "loss", "angle");
  CHECK(cfg.autoencoder.weights.distance == 0.0);
  CHECK(cfg.autoencoder.weights.angle == 1.0);
  CHECK(cfg.autoencoder.weights.reconstruction == 1.0);
  pipeline::apply_switch(cfg, "latent_dim", "3");
  CHECK(cfg.latent_dim() == 3);
  CHECK(cfg.ae_dims.front() == 512);
  pipeline::apply_switch(cfg, "supervision", "tangent");
  CHECK(cfg.supervision == field::Supervision::tangent);
  pipeline::apply_switch(cfg, "negatives", "none");
  CHECK(cfg.query.negatives == query::NegativeMode::none);
  pipeline::apply_switch(cfg, "aggregation", "max");
  CHECK(cfg.query.aggregation == query::Aggregation::max);
  pipeline::apply_switch(cfg, "steps", "30");
  CHECK(cfg.query.steps == 30);
}

TEST_CASE("in-memory runs are deterministic") {
  const auto cfg = tiny_config("unused");
  const auto a = pipeline::run_all(cfg);
  const auto b = pipeline::run_all(cfg);
  REQUIRE(a.report);
  REQUIRE(b.report);
  CHECK(a.autoencoder.model == b.autoencoder.model);
  CHECK(a.field->result.field == b.field->result.field);
  CHECK(pipeline::report_json(*a.report).dump() == pipeline::report_json(*b.report).dump());
  CHECK_FALSE(a.report->queries.empty());
  for (const auto& q : a.report->queries) {
    CHECK(q.iou >= 0.0);
    CHECK(q.iou <= 1.0);
  }
  CHECK(a.report->localization_accuracy >= 0.0);
  CHECK(a.report->localization_accuracy <= 1.0);

  auto other = cfg;
  other.seed = 6;
  CHECK_FALSE(pipeline::run_all(other).autoencoder.model == a.autoencoder.model);
}

TEST_CASE("stage commands check their inputs") {
  const auto dir = scratch("hypelift_pipeline_stages");
  auto cfg = tiny_config(dir);

  CHECK_THROWS_AS(pipeline::cmd_hierarchy(cfg), StageDependencyError);
  CHECK_THROWS_AS(pipeline::cmd_eval(cfg), StageDependencyError);

  pipeline::cmd_gen(cfg);
  pipeline::cmd_hierarchy(cfg);
  CHECK_THROWS_AS(pipeline::cmd_train_field(cfg), StageDependencyError);
  pipeline::cmd_train_ae(cfg);
  pipeline::cmd_train_field(cfg);
  pipeline::cmd_query(cfg);
  const auto stored = pipeline::cmd_eval(cfg);
  pipeline::cmd_export(cfg);
  CHECK(fs::exists(dir / "eval" / "report.json"));
  CHECK(fs::exists(dir / "export" / "index.json"));
  for (const char* stage : {"gen", "hierarchy", "ae", "field", "query", "eval", "export"}) {
    CHECK(fs::exists(dir / stage / "manifest.json"));
  }

  // The artifact chain reproduces the in-memory pipeline.
  const auto memory = pipeline::run_all(cfg);
  REQUIRE(memory.report);
  CHECK(pipeline::report_json(stored).dump() == pipeline::report_json(*memory.report).dump());

  // A query config change leaves upstream artifacts valid.
  auto requery = cfg;
  requery.query.aggregation = query::Aggregation::max;
  CHECK_NOTHROW(pipeline::cmd_query(requery));
  CHECK_THROWS_AS(pipeline::cmd_eval(cfg), StaleArtifactError);
  CHECK_NOTHROW(pipeline::cmd_eval(requery));

  // Changing an upstream value invalidates everything downstream of it.
  auto retrained = cfg;
  retrained.autoencoder.epochs = 301;
  CHECK_THROWS_AS(pipeline::cmd_train_field(retrained), StaleArtifactError);
  auto reseeded = cfg;
  reseeded.seed = 99;
  CHECK_THROWS_AS(pipeline::cmd_hierarchy(reseeded), StaleArtifactError);
  fs::remove_all(dir);
}

TEST_CASE("ablation tables") {
  auto cfg = tiny_config("unused");
  const std::vector<pipeline::AblationSwitch> switches{pipeline::parse_switch("steps=3,5"),
                                                       pipeline::parse_switch("aggregation=max,softmax")};
  const auto rows = pipeline::run_ablation(cfg, switches);
  REQUIRE(rows.size() == 4);
  for (const auto& r : rows) {
    CHECK(r.status == "ok");
    CHECK(r.report.has_value());
  }
  CHECK(rows[0].key.at("steps") == "3");
  CHECK(rows[0].key.at("aggregation") == "max");
  CHECK(rows[3].key.at("steps") == "5");
  CHECK(rows[3].key.at("aggregation") == "softmax");

  // The (steps=5, softmax) row is the base config with those values.
  auto direct = cfg;
  direct.query.steps = 5;
  const auto run = pipeline::run_all(direct);
  REQUIRE(rows[3].report);
  REQUIRE(run.report);
  CHECK(pipeline::report_json(*rows[3].report).dump() == pipeline::report_json(*run.report).dump());

  const auto csv = pipeline::ablation_csv(switches, rows);
  CHECK(csv.rfind("steps,aggregation,status,", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 5);
}
