// On-disk stages. Layout under the output directory:
//   gen/        scene.json, features.oht, <view>/features.oht, <view>/<mask>.pgm
//   hierarchy/  hierarchies.json
//   ae/         model.oht (+ .json), report.json
//   field/      field.oht (+ .json), report.json
//   query/      queries.json, relevancy.oht, adjusted.oht, masks.oht, covered.oht [, steps.oht]
//   eval/       report.json, runtime.json
//   export/     <view>/<prompt>.{relevancy.pgm, mask.pgm, json}
//   ablate/     table.csv, table.json
// Each stage directory holds manifest.json with the stage's config hash and
// the hashes of the stages it read.

#include <chrono>
#include <fstream>

#include "hypelift/errors.hpp"
#include "hypelift/pgm.hpp"
#include "hypelift/pipeline.hpp"
#include "hypelift/tensor_io.hpp"
#include "hypelift/util.hpp"

namespace hypelift::pipeline {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kFormatVersion = 1;

const char* dir_name(Stage s) {
  switch (s) {
    case Stage::gen: return "gen";
    case Stage::hierarchy: return "hierarchy";
    case Stage::train_ae: return "ae";
    case Stage::train_field: return "field";
    case Stage::query: return "query";
    case Stage::eval: return "eval";
  }
  return "?";
}

fs::path stage_dir(const PipelineConfig& cfg, Stage s) { return cfg.output / dir_name(s); }

void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write " + path.string());
  out << j.dump(2) << "\n";
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw StageDependencyError("missing artifact " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw FormatError("bad JSON in " + path.string() + ": " + e.what());
  }
}

// Checks that `upstream` ran under the same config; returns its hash.
std::string require(const PipelineConfig& cfg, Stage upstream) {
  const auto path = stage_dir(cfg, upstream) / "manifest.json";
  if (!fs::exists(path)) {
    throw StageDependencyError(std::string("stage '") + to_string(upstream) + "' has not been run: missing " +
                               path.string());
  }
  const auto manifest = read_json(path);
  const auto want = stage_hash(cfg, upstream);
  const auto have = manifest.value("config_hash", std::string());
  if (have != want) {
    throw StaleArtifactError(std::string("artifacts of stage '") + to_string(upstream) + "' were made with config " +
                             have + ", current config gives " + want + "; rerun that stage");
  }
  return have;
}

class StageWriter {
 public:
  StageWriter(const PipelineConfig& cfg, Stage stage, std::vector<Stage> upstream)
      : StageWriter(cfg, stage, std::move(upstream), to_string(stage), stage_dir(cfg, stage)) {}
  /// A derived output (export) carries the hash of the stage it renders.
  StageWriter(const PipelineConfig& cfg, Stage stage, std::vector<Stage> upstream, std::string name, fs::path dir)
      : cfg_(cfg), stage_(stage), name_(std::move(name)), start_(std::chrono::steady_clock::now()) {
    for (Stage u : upstream) upstream_[to_string(u)] = require(cfg, u);
    dir_ = std::move(dir);
    fs::create_directories(dir_);
    fs::remove(dir_ / "manifest.json");  // a half-written stage must not look complete
  }

  const fs::path& dir() const { return dir_; }
  std::string hash() const { return stage_hash(cfg_, stage_); }
  void add(const fs::path& p) { files_.push_back(fs::relative(p, dir_).generic_string()); }
  double elapsed() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

  void finish() {
    std::sort(files_.begin(), files_.end());
    write_json(dir_ / "manifest.json", json{{"stage", name_},
                                            {"format_version", kFormatVersion},
                                            {"config_hash", hash()},
                                            {"upstream", upstream_},
                                            {"files", files_},
                                            {"runtime_seconds", elapsed()}});
  }

 private:
  const PipelineConfig& cfg_;
  Stage stage_;
  std::string name_;
  std::chrono::steady_clock::time_point start_;
  fs::path dir_;
  json upstream_ = json::object();
  std::vector<std::string> files_;
};

Tensor matrix_tensor(const Eigen::MatrixXd& m) {
  Tensor t;
  t.shape = {static_cast<std::uint64_t>(m.rows()), static_cast<std::uint64_t>(m.cols())};
  t.values.resize(static_cast<std::size_t>(m.size()));
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) t.values[static_cast<std::size_t>(r * m.cols() + c)] = m(r, c);
  }
  return t;
}

Eigen::MatrixXd tensor_matrix(const Tensor& t, const fs::path& where) {
  if (t.shape.size() != 2) throw FormatError(where.string() + " is not a matrix");
  Eigen::MatrixXd m(static_cast<Eigen::Index>(t.shape[0]), static_cast<Eigen::Index>(t.shape[1]));
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = t.values[static_cast<std::size_t>(r * m.cols() + c)];
  }
  return m;
}

std::string slug(const std::string& label) {
  std::string out;
  for (char c : label) {
    if (std::isalnum(static_cast<unsigned char>(c))) {
      out += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    } else if (!out.empty() && out.back() != '_') {
      out += '_';
    }
  }
  while (!out.empty() && out.back() == '_') out.pop_back();
  return out;
}

json hierarchy_json(const hier::MaskHierarchy& h) {
  json nodes = json::array();
  for (const auto& n : h.nodes) {
    nodes.push_back({{"mask", n.mask_id}, {"level", n.level}, {"parent", n.parent ? json(*n.parent) : json(nullptr)}});
  }
  json relation = json::array();
  for (const auto& [p, c] : h.relation) relation.push_back({p, c});
  return {{"image", h.image}, {"nodes", nodes}, {"relation", relation}};
}

hier::MaskHierarchy hierarchy_from_json(const json& j) {
  hier::MaskHierarchy h;
  h.image = j.at("image").get<std::string>();
  for (const auto& n : j.at("nodes")) {
    std::optional<std::string> parent;
    if (!n.at("parent").is_null()) parent = n.at("parent").get<std::string>();
    h.nodes.push_back({n.at("mask").get<std::string>(), n.at("level").get<int>(), parent});
  }
  for (const auto& r : j.at("relation")) h.relation.emplace_back(r.at(0).get<std::size_t>(), r.at(1).get<std::size_t>());
  return h;
}

std::vector<hier::MaskHierarchy> load_hierarchies(const PipelineConfig& cfg, const SceneData& data) {
  const auto path = stage_dir(cfg, Stage::hierarchy) / "hierarchies.json";
  const auto j = read_json(path);
  std::vector<hier::MaskHierarchy> out;
  try {
    for (const auto& h : j.at("views")) out.push_back(hierarchy_from_json(h));
  } catch (const json::exception& e) {
    throw FormatError("bad hierarchy file " + path.string() + ": " + e.what());
  }
  if (out.size() != data.views.size()) throw FormatError("hierarchy count does not match the views");
  return out;
}

ae::AutoencoderModel load_model(const PipelineConfig& cfg) {
  const auto report = read_json(stage_dir(cfg, Stage::train_ae) / "report.json");
  const auto failure = report.value("failure", std::string());
  if (!failure.empty()) {
    throw StageDependencyError("the trained autoencoder is flagged (" + failure + "); later stages cannot use it");
  }
  std::string hash;
  auto model = ae::load_checkpoint(stage_dir(cfg, Stage::train_ae) / "model.oht", &hash);
  if (hash != stage_hash(cfg, Stage::train_ae)) throw StaleArtifactError("autoencoder checkpoint hash mismatch");
  return model;
}

field::FieldGrid load_grid(const PipelineConfig& cfg) {
  std::string hash;
  auto grid = field::load_field(stage_dir(cfg, Stage::train_field) / "field.oht", nullptr, &hash);
  if (hash != stage_hash(cfg, Stage::train_field)) throw StaleArtifactError("field checkpoint hash mismatch");
  return grid;
}

struct StoredQueries {
  std::vector<QueryRecord> records;
};

StoredQueries load_queries(const PipelineConfig& cfg) {
  const auto dir = stage_dir(cfg, Stage::query);
  const auto list = read_json(dir / "queries.json");
  const auto relevancy = read_tensor(dir / "relevancy.oht");
  const auto adjusted = read_tensor(dir / "adjusted.oht");
  const auto masks = read_tensor(dir / "masks.oht");
  const auto covered = read_tensor(dir / "covered.oht");
  std::optional<Tensor> steps;
  if (fs::exists(dir / "steps.oht")) steps = read_tensor(dir / "steps.oht");
  const auto& entries = list.at("queries");
  const int h = list.at("height").get<int>();
  const int w = list.at("width").get<int>();
  const std::size_t n = static_cast<std::size_t>(h) * w;
  if (relevancy.values.size() != entries.size() * n || masks.values.size() != relevancy.values.size() ||
      adjusted.values.size() != relevancy.values.size() || covered.values.size() != relevancy.values.size()) {
    throw FormatError("query tensors do not match queries.json");
  }
  StoredQueries out;
  for (std::size_t q = 0; q < entries.size(); ++q) {
    QueryRecord r;
    r.view_id = entries[q].at("view").get<std::string>();
    r.concept_id = entries[q].at("concept").get<int>();
    r.label = entries[q].at("label").get<std::string>();
    r.object = entries[q].at("kind").get<std::string>() == "object";
    r.map.height = h;
    r.map.width = w;
    r.map.relevancy.assign(relevancy.values.begin() + static_cast<long>(q * n),
                           relevancy.values.begin() + static_cast<long>((q + 1) * n));
    r.map.adjusted.assign(adjusted.values.begin() + static_cast<long>(q * n),
                          adjusted.values.begin() + static_cast<long>((q + 1) * n));
    for (std::size_t p = 0; p < n; ++p) r.map.mask.push_back(masks.values[q * n + p] != 0.0 ? 1 : 0);
    for (std::size_t p = 0; p < n; ++p) r.map.covered.push_back(covered.values[q * n + p] != 0.0 ? 1 : 0);
    if (steps) {
      const std::size_t t_count = steps->shape.at(1);
      for (std::size_t t = 0; t < t_count; ++t) {
        const auto begin = steps->values.begin() + static_cast<long>((q * t_count + t) * n);
        r.map.step_scores.emplace_back(begin, begin + static_cast<long>(n));
      }
    }
    out.records.push_back(std::move(r));
  }
  return out;
}

void write_gray(const fs::path& path, int h, int w, int maxval, const std::function<std::uint16_t(std::size_t)>& at) {
  GrayImage img;
  img.height = h;
  img.width = w;
  img.maxval = maxval;
  img.pixels.resize(static_cast<std::size_t>(h) * w);
  for (std::size_t p = 0; p < img.pixels.size(); ++p) img.pixels[p] = at(p);
  write_pgm(path, img);
}

}  // namespace

// ------------------------------------------------------------------- gen

void cmd_gen(const PipelineConfig& cfg) {
  StageWriter w(cfg, Stage::gen, {});
  const auto data = generate(cfg);
  const auto& scene = data.scene;

  json tree = json::array();
  for (const auto& n : scene.tree.nodes) tree.push_back({{"id", n.id}, {"label", n.label}, {"parent", n.parent}});
  json regions = json::array();
  for (const auto& r : scene.regions) regions.push_back({r.row, r.col, r.height, r.width});
  json views = json::array();
  for (const auto& v : data.views) {
    const auto vdir = w.dir() / v.view.id;
    fs::create_directories(vdir);
    json masks = json::array();
    for (std::size_t m = 0; m < v.masks.size(); ++m) {
      const auto& mask = v.masks[m];
      const auto path = vdir / (mask.id() + ".pgm");
      write_gray(path, mask.height(), mask.width(), 255, [&](std::size_t p) { return mask.bitmap()[p] ? 255 : 0; });
      w.add(path);
      masks.push_back({{"id", mask.id()}, {"concept", v.mask_concepts[m]}});
    }
    Eigen::MatrixXd f(static_cast<Eigen::Index>(v.features.size()), scene.tree.feature_dim);
    for (std::size_t m = 0; m < v.features.size(); ++m) f.row(static_cast<Eigen::Index>(m)) = v.features[m].feature.transpose();
    write_tensor(vdir / "features.oht", matrix_tensor(f));
    w.add(vdir / "features.oht");
    views.push_back({{"id", v.view.id},
                     {"row", v.view.row},
                     {"col", v.view.col},
                     {"height", v.view.height},
                     {"width", v.view.width},
                     {"masks", masks}});
  }
  Eigen::MatrixXd gt(static_cast<Eigen::Index>(scene.gt_features.size()), scene.tree.feature_dim);
  for (std::size_t i = 0; i < scene.gt_features.size(); ++i) gt.row(static_cast<Eigen::Index>(i)) = scene.gt_features[i].transpose();
  write_tensor(w.dir() / "features.oht", matrix_tensor(gt));
  w.add(w.dir() / "features.oht");
  write_json(w.dir() / "scene.json", json{{"config_hash", w.hash()},
                                          {"height", scene.height},
                                          {"width", scene.width},
                                          {"feature_dim", scene.tree.feature_dim},
                                          {"tree", tree},
                                          {"regions", regions},
                                          {"grid", scene.grid},
                                          {"views", views}});
  w.add(w.dir() / "scene.json");
  w.finish();
}

SceneData load_scene(const PipelineConfig& cfg) {
  require(cfg, Stage::gen);
  const auto dir = stage_dir(cfg, Stage::gen);
  const auto j = read_json(dir / "scene.json");
  SceneData data;
  try {
    auto& scene = data.scene;
    scene.height = j.at("height").get<int>();
    scene.width = j.at("width").get<int>();
    scene.tree.feature_dim = j.at("feature_dim").get<int>();
    for (const auto& n : j.at("tree")) {
      scene.tree.nodes.push_back({n.at("id").get<int>(), n.at("label").get<std::string>(), n.at("parent").get<int>()});
    }
    for (const auto& r : j.at("regions")) scene.regions.push_back({r.at(0), r.at(1), r.at(2), r.at(3)});
    scene.grid = j.at("grid").get<std::vector<int>>();
    const auto gt = tensor_matrix(read_tensor(dir / "features.oht"), dir / "features.oht");
    for (Eigen::Index i = 0; i < gt.rows(); ++i) scene.gt_features.push_back(gt.row(i).transpose());
    for (const auto& v : j.at("views")) {
      synth::RenderedView rv;
      rv.view = {v.at("id").get<std::string>(), v.at("row").get<int>(), v.at("col").get<int>(),
                 v.at("height").get<int>(), v.at("width").get<int>()};
      const auto vdir = dir / rv.view.id;
      const auto f = tensor_matrix(read_tensor(vdir / "features.oht"), vdir / "features.oht");
      Eigen::Index row = 0;
      for (const auto& m : v.at("masks")) {
        const auto id = m.at("id").get<std::string>();
        const auto img = read_pgm(vdir / (id + ".pgm"));
        std::vector<std::uint8_t> bits(img.pixels.size());
        for (std::size_t p = 0; p < bits.size(); ++p) bits[p] = img.pixels[p] ? 1 : 0;
        rv.masks.emplace_back(id, rv.view.id, img.height, img.width, std::move(bits));
        rv.features.push_back({id, f.row(row++).transpose()});
        rv.mask_concepts.push_back(m.at("concept").get<int>());
      }
      data.views.push_back(std::move(rv));
    }
  } catch (const json::exception& e) {
    throw FormatError("bad scene file: " + std::string(e.what()));
  }
  return data;
}

// ------------------------------------------------------------- hierarchy

void cmd_hierarchy(const PipelineConfig& cfg) {
  StageWriter w(cfg, Stage::hierarchy, {Stage::gen});
  const auto data = load_scene(cfg);
  json views = json::array();
  for (const auto& h : build_hierarchies(cfg, data)) views.push_back(hierarchy_json(h));
  write_json(w.dir() / "hierarchies.json", json{{"config_hash", w.hash()}, {"views", views}});
  w.add(w.dir() / "hierarchies.json");
  w.finish();
}

// ------------------------------------------------------------ train-ae

void cmd_train_ae(const PipelineConfig& cfg) {
  StageWriter w(cfg, Stage::train_ae, {Stage::gen, Stage::hierarchy});
  const auto data = load_scene(cfg);
  const auto hs = load_hierarchies(cfg, data);
  const auto stage = train_autoencoder(cfg, data, hs);
  json curve = json::array();
  for (const auto& l : stage.curve) {
    curve.push_back({{"total", l.total}, {"distance", l.distance}, {"angle", l.angle}, {"reconstruction", l.reconstruction}});
  }
  const auto& s = stage.structure;
  json report{{"config_hash", w.hash()},
              {"failure", stage.failure},
              {"structure",
               {{"pairs", s.pairs},
                {"ordered_fraction", s.ordered_fraction},
                {"median_pair_angle", s.median_pair_angle},
                {"median_other_angle", s.median_other_angle},
                {"mean_radius", s.mean_radius},
                {"radius_spread", s.radius_spread},
                {"mean_reconstruction_cosine", s.mean_reconstruction_cosine},
                {"min_reconstruction_cosine", s.min_reconstruction_cosine}}},
              {"curve", curve}};
  if (stage.failure.rfind("nan", 0) != 0) {
    ae::save_checkpoint(w.dir() / "model.oht", stage.model, w.hash());
    w.add(w.dir() / "model.oht");
    w.add(w.dir() / "model.oht.json");
  }
  write_json(w.dir() / "report.json", report);
  w.add(w.dir() / "report.json");
  w.finish();
}

// ---------------------------------------------------------- train-field

void cmd_train_field(const PipelineConfig& cfg) {
  StageWriter w(cfg, Stage::train_field, {Stage::gen, Stage::hierarchy, Stage::train_ae});
  const auto data = load_scene(cfg);
  const auto hs = load_hierarchies(cfg, data);
  const auto model = load_model(cfg);
  const auto stage = train_field(cfg, data, hs, model);
  field::save_field(w.dir() / "field.oht", stage.result.field, cfg.supervision, cfg.field.lambda, w.hash());
  w.add(w.dir() / "field.oht");
  w.add(w.dir() / "field.oht.json");
  json report{{"config_hash", w.hash()},
              {"supervision", field::to_string(cfg.supervision)},
              {"samples", stage.samples},
              {"skipped", stage.skipped},
              {"mean_distance", stage.result.mean_distance},
              {"mean_squared_error", stage.result.mean_squared_error},
              {"part_cells", stage.part_cells},
              {"part_consolidation", stage.part_consolidation},
              {"curve", stage.result.curve}};
  write_json(w.dir() / "report.json", report);
  w.add(w.dir() / "report.json");
  w.finish();
}

// ---------------------------------------------------------------- query

void cmd_query(const PipelineConfig& cfg) {
  StageWriter w(cfg, Stage::query, {Stage::gen, Stage::train_ae, Stage::train_field});
  const auto data = load_scene(cfg);
  const auto model = load_model(cfg);
  const auto grid = load_grid(cfg);
  const auto records = run_queries(cfg, data, score_grid(cfg, data, model, grid), cfg.oracle_levels);

  const auto n = static_cast<std::uint64_t>(cfg.scene.view_height) * static_cast<std::uint64_t>(cfg.scene.view_width);
  Tensor relevancy, adjusted, masks, covered, steps;
  relevancy.shape = adjusted.shape = masks.shape = covered.shape = {
      records.size(), static_cast<std::uint64_t>(cfg.scene.view_height), static_cast<std::uint64_t>(cfg.scene.view_width)};
  masks.dtype = covered.dtype = DType::f32;
  json list = json::array();
  for (const auto& r : records) {
    relevancy.values.insert(relevancy.values.end(), r.map.relevancy.begin(), r.map.relevancy.end());
    adjusted.values.insert(adjusted.values.end(), r.map.adjusted.begin(), r.map.adjusted.end());
    for (auto m : r.map.mask) masks.values.push_back(m);
    if (r.map.covered.empty()) {
      covered.values.insert(covered.values.end(), r.map.relevancy.size(), 1.0);
    } else {
      for (auto c : r.map.covered) covered.values.push_back(c);
    }
    for (const auto& s : r.map.step_scores) steps.values.insert(steps.values.end(), s.begin(), s.end());
    list.push_back({{"view", r.view_id}, {"concept", r.concept_id}, {"label", r.label}, {"kind", r.object ? "object" : "part"}});
  }
  if (relevancy.values.size() != records.size() * n) throw DimensionError("query maps do not share the view size");
  write_tensor(w.dir() / "relevancy.oht", relevancy);
  write_tensor(w.dir() / "adjusted.oht", adjusted);
  write_tensor(w.dir() / "masks.oht", masks);
  write_tensor(w.dir() / "covered.oht", covered);
  for (const char* f : {"relevancy.oht", "adjusted.oht", "masks.oht", "covered.oht"}) w.add(w.dir() / f);
  fs::remove(w.dir() / "steps.oht");
  if (cfg.oracle_levels && !records.empty()) {
    steps.shape = {records.size(), records.front().map.step_scores.size(), static_cast<std::uint64_t>(cfg.scene.view_height),
                   static_cast<std::uint64_t>(cfg.scene.view_width)};
    write_tensor(w.dir() / "steps.oht", steps);
    w.add(w.dir() / "steps.oht");
  }
  write_json(w.dir() / "queries.json", json{{"config_hash", w.hash()},
                                            {"height", cfg.scene.view_height},
                                            {"width", cfg.scene.view_width},
                                            {"queries", list}});
  w.add(w.dir() / "queries.json");
  w.finish();
}

// ----------------------------------------------------------------- eval

EvalReport cmd_eval(const PipelineConfig& cfg) {
  StageWriter w(cfg, Stage::eval, {Stage::gen, Stage::query});
  const auto data = load_scene(cfg);
  auto report = evaluate(cfg, data, load_queries(cfg).records);
  for (Stage s : {Stage::gen, Stage::hierarchy, Stage::train_ae, Stage::train_field, Stage::query}) {
    const auto m = read_json(stage_dir(cfg, s) / "manifest.json");
    report.runtime_seconds[to_string(s)] = m.value("runtime_seconds", 0.0);
  }
  report.runtime_seconds["eval"] = w.elapsed();
  auto j = report_json(report);
  j["config_hash"] = w.hash();
  write_json(w.dir() / "report.json", j);
  write_json(w.dir() / "runtime.json", json(report.runtime_seconds));
  w.add(w.dir() / "report.json");
  w.add(w.dir() / "runtime.json");
  w.finish();
  return report;
}

// --------------------------------------------------------------- export

void cmd_export(const PipelineConfig& cfg) {
  StageWriter w(cfg, Stage::query, {Stage::query}, "export", cfg.output / "export");
  const auto data = load_scene(cfg);
  const auto stored = load_queries(cfg);
  const auto& dir = w.dir();
  json index = json::array();
  for (const auto& r : stored.records) {
    const auto vdir = dir / r.view_id;
    fs::create_directories(vdir);
    const auto base = slug(r.label);
    const auto& m = r.map;
    write_gray(vdir / (base + ".relevancy.pgm"), m.height, m.width, 65535, [&](std::size_t p) {
      return static_cast<std::uint16_t>(std::lround(std::clamp(m.relevancy[p], 0.0, 1.0) * 65535.0));
    });
    write_gray(vdir / (base + ".mask.pgm"), m.height, m.width, 255, [&](std::size_t p) { return m.mask[p] ? 255 : 0; });

    synth::ViewSpec view;
    for (const auto& v : data.views) {
      if (v.view.id == r.view_id) view = v.view;
    }
    const auto gt = synth::concept_mask(data.scene, view, r.concept_id);
    const auto [pr, pc] = query::peak(m);
    json side{{"prompt", r.label},
              {"concept", r.concept_id},
              {"view", r.view_id},
              {"kind", r.object ? "object" : "part"},
              {"config_hash", stage_hash(cfg, Stage::query)},
              {"query",
               {{"steps", cfg.query.steps},
                {"aggregation", query::to_string(cfg.query.aggregation)},
                {"negatives", query::to_string(cfg.query.negatives)},
                {"threshold", cfg.query.threshold},
                {"threshold_mode", query::to_string(cfg.query.threshold_mode)},
                {"t_max", cfg.query.t_max}}},
              {"relevancy_scale", 65535},
              {"metrics",
               {{"iou", iou(m.mask, gt)},
                {"localized", query::localize(m, bounding_box(gt, m.height, m.width))},
                {"peak", {pr, pc}},
                {"max_relevancy", *std::max_element(m.relevancy.begin(), m.relevancy.end())},
                {"mask_area", std::count(m.mask.begin(), m.mask.end(), std::uint8_t{1})}}}};
    write_json(vdir / (base + ".json"), side);
    for (const char* ext : {".relevancy.pgm", ".mask.pgm", ".json"}) w.add(vdir / (base + ext));
    index.push_back(r.view_id + "/" + base);
  }
  write_json(dir / "index.json", json{{"config_hash", w.hash()}, {"maps", index}});
  w.add(dir / "index.json");
  w.finish();
}

// --------------------------------------------------------------- ablate

void cmd_ablate(const PipelineConfig& cfg, const std::vector<AblationSwitch>& switches) {
  const auto rows = run_ablation(cfg, switches);
  const auto dir = cfg.output / "ablate";
  fs::create_directories(dir);
  std::ofstream(dir / "table.csv") << ablation_csv(switches, rows);
  json table = json::array();
  for (const auto& r : rows) {
    json e{{"switches", r.key}, {"status", r.status}};
    if (r.report) e["report"] = report_json(*r.report);
    table.push_back(std::move(e));
  }
  write_json(dir / "table.json", json{{"base_config_hash", stage_hash(cfg, Stage::eval)}, {"rows", table}});
}

// --------------------------------------------------------------- entail

json cmd_entail(const PipelineConfig& cfg) {
  require(cfg, Stage::train_ae);
  const auto data = load_scene(cfg);
  const auto model = load_model(cfg);
  const auto& tree = data.scene.tree;
  std::map<int, geo::HyperPoint> enc;
  for (const auto& n : tree.nodes) {
    const Eigen::MatrixXd f = data.scene.feature(n.id).transpose();
    enc.emplace(n.id, ae::encode(model, f)[0]);
  }
  json pairs = json::array();
  int inside_true = 0, n_true = 0, inside_other = 0, n_other = 0;
  for (const auto& a : tree.nodes) {
    for (const auto& b : tree.nodes) {
      if (a.id == b.id) continue;
      double score = 0.0;
      try {
        score = geo::entailment_score(enc.at(a.id), enc.at(b.id), cfg.geometry);
      } catch (const DegenerateAngleError&) {
        continue;
      }
      const bool related = tree.is_ancestor(a.id, b.id);
      const bool inside = score == 0.0;
      (related ? inside_true : inside_other) += inside ? 1 : 0;
      (related ? n_true : n_other) += 1;
      pairs.push_back({{"parent", a.label}, {"child", b.label}, {"related", related}, {"score", score}});
    }
  }
  return json{{"config_hash", stage_hash(cfg, Stage::train_ae)},
              {"related_inside_fraction", n_true ? static_cast<double>(inside_true) / n_true : 0.0},
              {"unrelated_inside_fraction", n_other ? static_cast<double>(inside_other) / n_other : 0.0},
              {"pairs", pairs}};
}

}  // namespace hypelift::pipeline
