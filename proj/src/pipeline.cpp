#include "hypelift/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <sstream>

#include "hypelift/util.hpp"

namespace hypelift::pipeline {

const char* to_string(Stage s) {
  switch (s) {
    case Stage::gen: return "gen";
    case Stage::hierarchy: return "hierarchy";
    case Stage::train_ae: return "train-ae";
    case Stage::train_field: return "train-field";
    case Stage::query: return "query";
    case Stage::eval: return "eval";
  }
  return "?";
}

namespace {

// Canonical config text split by section; the root section loses `output`,
// which never changes results.
std::map<std::string, std::string> config_sections(const PipelineConfig& cfg) {
  std::map<std::string, std::string> out;
  std::istringstream in(to_text(cfg));
  std::string line, current;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line.front() == '[') {
      current = line.substr(1, line.size() - 2);
      continue;
    }
    if (current.empty() && line.rfind("output", 0) == 0) continue;
    out[current] += line + "\n";
  }
  return out;
}

std::string file_text(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

std::string stage_hash(const PipelineConfig& cfg, Stage stage) {
  auto sections = config_sections(cfg);
  std::string text = "hypelift-1\n" + sections[""] + sections["scene"];
  if (cfg.scene.tree != "builtin") text += file_text(cfg.base_dir / cfg.scene.tree);
  if (stage >= Stage::hierarchy) text += sections["hierarchy"];
  if (stage >= Stage::train_ae) text += sections["geometry"] + sections["autoencoder"];
  if (stage >= Stage::train_field) text += sections["field"];
  if (stage >= Stage::query) text += sections["query"];
  if (stage >= Stage::eval) text += sections["eval"];
  return hex64(fnv1a64(text));
}

// ------------------------------------------------------------ in memory

SceneData generate(const PipelineConfig& cfg) {
  cfg.validate();
  SceneData data;
  data.scene = synth::generate_scene(cfg.seed, cfg.concept_tree(), cfg.scene.height, cfg.scene.width);
  const auto views =
      synth::spread_views(data.scene, cfg.scene.views, cfg.scene.view_height, cfg.scene.view_width, cfg.seed);
  for (const auto& v : views) {
    data.views.push_back(
        synth::render_view(data.scene, v, {cfg.scene.noise_sigma, cfg.scene.part_dropout}, cfg.seed));
  }
  return data;
}

std::vector<hier::MaskHierarchy> build_hierarchies(const PipelineConfig& cfg, const SceneData& data) {
  std::vector<hier::MaskHierarchy> out;
  for (const auto& v : data.views) {
    auto h = hier::build_hierarchy(v.masks, cfg.hierarchy);
    if (h.image.empty()) h.image = v.view.id;
    out.push_back(std::move(h));
  }
  return out;
}

namespace {

ae::Matrix feature_matrix(const synth::RenderedView& v) {
  if (v.features.empty()) return ae::Matrix(0, 0);
  ae::Matrix f(static_cast<Eigen::Index>(v.features.size()), v.features.front().feature.size());
  for (std::size_t i = 0; i < v.features.size(); ++i) f.row(static_cast<Eigen::Index>(i)) = v.features[i].feature.transpose();
  return f;
}

}  // namespace

std::vector<ae::TrainingImage> training_images(const SceneData& data,
                                               const std::vector<hier::MaskHierarchy>& hierarchies) {
  if (hierarchies.size() != data.views.size()) throw DimensionError("one hierarchy per view is required");
  std::vector<ae::TrainingImage> out;
  for (std::size_t k = 0; k < data.views.size(); ++k) {
    const auto& v = data.views[k];
    ae::TrainingImage img;
    img.hierarchy = hierarchies[k];
    if (img.hierarchy.nodes.empty()) continue;
    img.features.resize(static_cast<Eigen::Index>(img.hierarchy.nodes.size()), v.features.front().feature.size());
    for (std::size_t i = 0; i < img.hierarchy.nodes.size(); ++i) {
      const auto& id = img.hierarchy.nodes[i].mask_id;
      const auto it = std::find_if(v.features.begin(), v.features.end(),
                                   [&](const synth::FeatureRecord& r) { return r.mask_id == id; });
      if (it == v.features.end()) throw DimensionError("no feature for mask '" + id + "'");
      img.features.row(static_cast<Eigen::Index>(i)) = it->feature.transpose();
    }
    out.push_back(std::move(img));
  }
  return out;
}

AutoencoderStage train_autoencoder(const PipelineConfig& cfg, const SceneData& data,
                                   const std::vector<hier::MaskHierarchy>& hierarchies) {
  const auto images = training_images(data, hierarchies);
  AutoencoderStage out;
  ae::TrainConfig tc = cfg.autoencoder;
  tc.seed = cfg.seed;
  try {
    auto result = ae::train(ae::AutoencoderModel::create(cfg.ae_dims, cfg.geometry, cfg.seed), images, tc);
    out.model = std::move(result.model);
    out.curve = std::move(result.curve);
  } catch (const NumericalError& e) {
    out.failure = std::string("nan: ") + e.what();
    return out;
  }
  out.structure = ae::assess(out.model, images);
  const auto reason = out.structure.collapse_reason();
  if (!reason.empty()) out.failure = "collapsed: " + reason;
  return out;
}

namespace {

std::vector<field::ViewSupervision> supervision(const SceneData& data,
                                                const std::vector<hier::MaskHierarchy>& hierarchies,
                                                const ae::AutoencoderModel& model) {
  std::vector<field::ViewSupervision> out;
  for (std::size_t k = 0; k < data.views.size(); ++k) {
    const auto& v = data.views[k];
    field::ViewSupervision s;
    s.view = v.view;
    s.hierarchy = hierarchies[k];
    s.masks = v.masks;
    s.features = feature_matrix(v);
    if (s.features.rows() > 0) s.encoded = ae::encode(model, s.features);
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace

FieldStage train_field(const PipelineConfig& cfg, const SceneData& data,
                       const std::vector<hier::MaskHierarchy>& hierarchies, const ae::AutoencoderModel& model) {
  const auto views = supervision(data, hierarchies, model);
  const auto targets = field::build_targets(views, cfg.supervision, cfg.geometry);
  const int dim = cfg.supervision == field::Supervision::raw_feature ? cfg.scene.feature_dim : cfg.latent_dim();
  field::FieldTrainConfig fc = cfg.field;
  fc.seed = cfg.seed;

  FieldStage out;
  out.samples = static_cast<int>(targets.samples.size());
  out.skipped = targets.skipped;
  out.result = field::train_field(field::FieldGrid::zeros(cfg.scene.height, cfg.scene.width, dim, cfg.geometry),
                                  targets.samples, cfg.supervision, fc);
  if (cfg.supervision == field::Supervision::raw_feature) return out;

  // Noise-free references: each concept's clean feature, encoded and pushed to the boundary.
  const auto& scene = data.scene;
  std::map<int, geo::HyperPoint> clean;
  for (const auto& n : scene.tree.nodes) {
    const ae::Matrix f = scene.feature(n.id).transpose();
    const auto h = ae::encode(model, f)[0];
    if (geo::distance_to_origin(h) < 1e-12) continue;
    clean.emplace(n.id, geo::extrapolate_to_boundary(h, cfg.geometry));
  }
  std::vector<std::uint8_t> seen(static_cast<std::size_t>(scene.height) * scene.width, 0);
  for (const auto& s : targets.samples) seen[static_cast<std::size_t>(s.row) * scene.width + s.col] = 1;
  int good = 0, total = 0;
  for (int r = 0; r < scene.height; ++r) {
    for (int c = 0; c < scene.width; ++c) {
      const int leaf = scene.at(r, c);
      if (leaf == synth::kEmpty || !seen[static_cast<std::size_t>(r) * scene.width + c]) continue;
      const int parent = scene.tree.node(leaf).parent;
      if (parent == synth::kRoot || !clean.count(leaf)) continue;
      const auto siblings = scene.tree.children(parent);
      if (siblings.size() < 2) continue;
      const auto p = out.result.field.point(r, c);
      const double own = geo::geodesic_distance(p, clean.at(leaf));
      bool closest = true;
      for (int sib : siblings) {
        if (sib != leaf && clean.count(sib) && geo::geodesic_distance(p, clean.at(sib)) <= own) closest = false;
      }
      good += closest ? 1 : 0;
      ++total;
    }
  }
  out.part_cells = total;
  if (total > 0) out.part_consolidation = static_cast<double>(good) / total;
  return out;
}

GridScores score_grid(const PipelineConfig& cfg, const SceneData& data, const ae::AutoencoderModel& model,
                      const field::FieldGrid& grid) {
  const auto& tree = data.scene.tree;
  const auto neutrals = query::neutral_features(cfg.scene.feature_dim, cfg.query.neutral_labels.size());
  ae::Matrix text(cfg.scene.feature_dim, static_cast<Eigen::Index>(tree.nodes.size() + neutrals.size()));
  GridScores out;
  out.height = grid.height;
  out.width = grid.width;
  out.observed = grid.observed;
  Eigen::Index col = 0;
  for (const auto& n : tree.nodes) {
    out.concepts.push_back(n.id);
    text.col(col++) = data.scene.feature(n.id).normalized();
  }
  for (const auto& n : neutrals) text.col(col++) = n;

  if (cfg.supervision == field::Supervision::raw_feature) {
    out.sims = query::direct_similarities(grid.cells, text);
    return out;
  }
  std::vector<geo::HyperPoint> points;
  points.reserve(static_cast<std::size_t>(grid.cells.cols()));
  for (int r = 0; r < grid.height; ++r) {
    for (int c = 0; c < grid.width; ++c) points.push_back(grid.point(r, c));
  }
  out.sims = query::step_similarities(model, points, text, cfg.query.steps, cfg.query.t_max);
  return out;
}

std::vector<QueryRecord> run_queries(const PipelineConfig& cfg, const SceneData& data, const GridScores& scores,
                                     bool keep_steps) {
  const auto& tree = data.scene.tree;
  std::vector<Eigen::Index> neutral_rows;
  for (std::size_t j = 0; j < cfg.query.neutral_labels.size(); ++j) {
    neutral_rows.push_back(static_cast<Eigen::Index>(scores.concepts.size() + j));
  }
  const Eigen::Index cells = scores.sims.per_step.front().cols();

  std::vector<QueryRecord> out;
  for (std::size_t k = 0; k < scores.concepts.size(); ++k) {
    const int id = scores.concepts[k];
    const auto prompt = static_cast<Eigen::Index>(k);
    const Eigen::VectorXd cell_scores = query::point_scores(scores.sims, prompt, neutral_rows, cfg.query);
    std::vector<Eigen::VectorXd> step_scores;
    if (keep_steps) {
      step_scores.assign(scores.sims.per_step.size(), Eigen::VectorXd(cells));
      for (Eigen::Index i = 0; i < cells; ++i) {
        if (neutral_rows.empty() || cfg.query.negatives == query::NegativeMode::none) {
          for (std::size_t t = 0; t < step_scores.size(); ++t) step_scores[t](i) = scores.sims.per_step[t](prompt, i);
        } else {
          const auto series = query::step_relevancy(scores.sims, i, prompt, neutral_rows);
          for (std::size_t t = 0; t < series.size(); ++t) step_scores[t](i) = series[t];
        }
      }
    }
    for (const auto& rv : data.views) {
      const auto gt = synth::concept_mask(data.scene, rv.view, id);
      if (std::find(gt.begin(), gt.end(), 1) == gt.end()) continue;
      const auto& v = rv.view;
      Eigen::VectorXd view_scores(static_cast<Eigen::Index>(v.height) * v.width);
      std::vector<Eigen::Index> cell_of(static_cast<std::size_t>(view_scores.size()));
      std::vector<std::uint8_t> covered(cell_of.size(), 1);
      for (int r = 0; r < v.height; ++r) {
        for (int c = 0; c < v.width; ++c) {
          const auto p = static_cast<std::size_t>(r) * v.width + c;
          cell_of[p] = static_cast<Eigen::Index>(v.row + r) * scores.width + (v.col + c);
          view_scores(static_cast<Eigen::Index>(p)) = cell_scores(cell_of[p]);
          if (!scores.observed.empty()) covered[p] = scores.observed[static_cast<std::size_t>(cell_of[p])];
        }
      }
      QueryRecord rec;
      rec.view_id = v.id;
      rec.concept_id = id;
      rec.label = tree.node(id).label;
      rec.object = tree.node(id).parent == synth::kRoot;
      rec.map = query::make_map(v.height, v.width, std::move(view_scores), cfg.query, std::move(covered));
      for (const auto& s : step_scores) {
        std::vector<double> row(cell_of.size());
        for (std::size_t p = 0; p < cell_of.size(); ++p) row[p] = s(cell_of[p]);
        rec.map.step_scores.push_back(std::move(row));
      }
      out.push_back(std::move(rec));
    }
  }
  return out;
}

double iou(const std::vector<std::uint8_t>& pred, const std::vector<std::uint8_t>& truth) {
  if (pred.size() != truth.size()) throw DimensionError("prediction and ground truth differ in size");
  std::size_t inter = 0, uni = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const bool p = pred[i] != 0, t = truth[i] != 0;
    inter += (p && t) ? 1 : 0;
    uni += (p || t) ? 1 : 0;
  }
  return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

synth::Rect bounding_box(const std::vector<std::uint8_t>& mask, int height, int width) {
  int r0 = height, c0 = width, r1 = -1, c1 = -1;
  for (int r = 0; r < height; ++r) {
    for (int c = 0; c < width; ++c) {
      if (!mask[static_cast<std::size_t>(r) * width + c]) continue;
      r0 = std::min(r0, r);
      c0 = std::min(c0, c);
      r1 = std::max(r1, r);
      c1 = std::max(c1, c);
    }
  }
  if (r1 < 0) return {};
  return {r0, c0, r1 - r0 + 1, c1 - c0 + 1};
}

namespace {

const synth::ViewSpec& find_view(const SceneData& data, const std::string& id) {
  for (const auto& v : data.views) {
    if (v.view.id == id) return v.view;
  }
  throw DimensionError("unknown view '" + id + "'");
}

double mean_of(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

}  // namespace

EvalReport evaluate(const PipelineConfig& cfg, const SceneData& data, const std::vector<QueryRecord>& queries) {
  EvalReport rep;
  std::vector<double> obj, part, all, obj_oracle, part_oracle;
  int localized = 0;
  for (const auto& q : queries) {
    const auto& view = find_view(data, q.view_id);
    const auto gt = synth::concept_mask(data.scene, view, q.concept_id);
    QueryEval e;
    e.view_id = q.view_id;
    e.concept_id = q.concept_id;
    e.label = q.label;
    e.object = q.object;
    e.iou = iou(q.map.mask, gt);
    e.localized = query::localize(q.map, bounding_box(gt, view.height, view.width));
    if (!q.map.step_scores.empty()) {
      for (std::size_t t = 0; t < q.map.step_scores.size(); ++t) {
        auto s = q.map.step_scores[t];
        const auto m = query::make_map(view.height, view.width,
                                       Eigen::Map<Eigen::VectorXd>(s.data(), static_cast<Eigen::Index>(s.size())),
                                       cfg.query, q.map.covered);
        const double v = iou(m.mask, gt);
        if (!e.oracle_iou || v > *e.oracle_iou) {
          e.oracle_iou = v;
          e.oracle_step = static_cast<int>(t);
        }
      }
      (q.object ? obj_oracle : part_oracle).push_back(*e.oracle_iou);
    }
    (q.object ? obj : part).push_back(e.iou);
    all.push_back(e.iou);
    localized += e.localized ? 1 : 0;
    rep.queries.push_back(std::move(e));
  }
  rep.object_miou = mean_of(obj);
  rep.part_miou = mean_of(part);
  rep.overall_miou = mean_of(all);
  rep.localization_accuracy = queries.empty() ? 0.0 : static_cast<double>(localized) / static_cast<double>(queries.size());
  if (!obj_oracle.empty() || !part_oracle.empty()) {
    rep.oracle_object_miou = mean_of(obj_oracle);
    rep.oracle_part_miou = mean_of(part_oracle);
  }
  return rep;
}

nlohmann::json report_json(const EvalReport& report) {
  nlohmann::json j;
  j["object_miou"] = report.object_miou;
  j["part_miou"] = report.part_miou;
  j["overall_miou"] = report.overall_miou;
  j["localization_accuracy"] = report.localization_accuracy;
  int objects = 0;
  for (const auto& q : report.queries) objects += q.object ? 1 : 0;
  j["object_queries"] = objects;
  j["part_queries"] = static_cast<int>(report.queries.size()) - objects;
  if (report.oracle_object_miou) {
    j["oracle_object_miou"] = *report.oracle_object_miou;
    j["oracle_part_miou"] = *report.oracle_part_miou;
  }
  j["queries"] = nlohmann::json::array();
  for (const auto& q : report.queries) {
    nlohmann::json e{{"view", q.view_id},  {"concept", q.concept_id}, {"label", q.label},
                     {"kind", q.object ? "object" : "part"}, {"iou", q.iou}, {"localized", q.localized}};
    if (q.oracle_iou) {
      e["oracle_iou"] = *q.oracle_iou;
      e["oracle_step"] = *q.oracle_step;
    }
    j["queries"].push_back(std::move(e));
  }
  return j;
}

RunResult run_all(const PipelineConfig& cfg) {
  RunResult out;
  std::map<std::string, double> times;
  auto t0 = std::chrono::steady_clock::now();
  const auto data = generate(cfg);
  times["gen"] = seconds_since(t0);
  t0 = std::chrono::steady_clock::now();
  const auto hierarchies = build_hierarchies(cfg, data);
  times["hierarchy"] = seconds_since(t0);
  t0 = std::chrono::steady_clock::now();
  out.autoencoder = train_autoencoder(cfg, data, hierarchies);
  times["train-ae"] = seconds_since(t0);
  if (!out.autoencoder.valid()) return out;
  t0 = std::chrono::steady_clock::now();
  out.field = train_field(cfg, data, hierarchies, out.autoencoder.model);
  times["train-field"] = seconds_since(t0);
  t0 = std::chrono::steady_clock::now();
  const auto scores = score_grid(cfg, data, out.autoencoder.model, out.field->result.field);
  const auto queries = run_queries(cfg, data, scores, cfg.oracle_levels);
  times["query"] = seconds_since(t0);
  t0 = std::chrono::steady_clock::now();
  out.report = evaluate(cfg, data, queries);
  times["eval"] = seconds_since(t0);
  out.report->runtime_seconds = times;
  return out;
}

// ------------------------------------------------------------ ablations

AblationSwitch parse_switch(const std::string& text) {
  const auto eq = text.find('=');
  if (eq == std::string::npos || eq == 0 || eq + 1 >= text.size()) {
    throw ConfigError("ablation switch '" + text + "' must look like name=v1,v2");
  }
  AblationSwitch sw;
  sw.name = text.substr(0, eq);
  std::istringstream in(text.substr(eq + 1));
  std::string v;
  while (std::getline(in, v, ',')) {
    if (!v.empty()) sw.values.push_back(v);
  }
  // Validates names and values against a throwaway config.
  PipelineConfig probe;
  for (const auto& value : sw.values) apply_switch(probe, sw.name, value);
  return sw;
}

void apply_switch(PipelineConfig& cfg, const std::string& name, const std::string& value) {
  const auto as_int = [&] {
    try {
      std::size_t used = 0;
      const int v = std::stoi(value, &used);
      if (used == value.size() && v > 0) return v;
    } catch (const std::exception&) {
    }
    throw ConfigError("ablation value '" + value + "' for '" + name + "' must be a positive integer");
  };
  if (name == "supervision") {
    cfg.supervision = field::supervision_from_string(value);
  } else if (name == "negatives") {
    cfg.query.negatives = query::negative_mode_from_string(value);
  } else if (name == "aggregation") {
    cfg.query.aggregation = query::aggregation_from_string(value);
  } else if (name == "loss") {
    if (value == "dist") {
      cfg.autoencoder.weights.distance = 1.0;
      cfg.autoencoder.weights.angle = 0.0;
    } else if (value == "angle") {
      cfg.autoencoder.weights.distance = 0.0;
      cfg.autoencoder.weights.angle = 1.0;
    } else if (value == "dist+angle") {
      cfg.autoencoder.weights.distance = 1.0;
      cfg.autoencoder.weights.angle = 1.0;
    } else {
      throw ConfigError("ablation value '" + value + "' for 'loss' must be dist, angle or dist+angle");
    }
  } else if (name == "latent_dim") {
    cfg.ae_dims.back() = as_int();
  } else if (name == "steps") {
    cfg.query.steps = as_int();
  } else {
    throw ConfigError("unknown ablation switch '" + name +
                      "' (supervision, negatives, aggregation, loss, latent_dim, steps)");
  }
}

std::vector<AblationRow> run_ablation(const PipelineConfig& base, const std::vector<AblationSwitch>& switches) {
  std::vector<std::map<std::string, std::string>> keys{{}};
  for (const auto& sw : switches) {
    std::vector<std::map<std::string, std::string>> next;
    for (const auto& k : keys) {
      for (const auto& v : sw.values) {
        auto e = k;
        e[sw.name] = v;
        next.push_back(std::move(e));
      }
    }
    keys = std::move(next);
  }

  std::map<std::string, SceneData> scenes;
  std::map<std::string, std::vector<hier::MaskHierarchy>> hierarchies;
  std::map<std::string, AutoencoderStage> models;
  std::map<std::string, FieldStage> fields;
  std::map<std::string, GridScores> grids;

  std::vector<AblationRow> rows;
  for (const auto& key : keys) {
    PipelineConfig cfg = base;
    for (const auto& sw : switches) apply_switch(cfg, sw.name, key.at(sw.name));
    cfg.validate();
    AblationRow row;
    row.key = key;

    const auto h_gen = stage_hash(cfg, Stage::gen);
    if (!scenes.count(h_gen)) scenes.emplace(h_gen, generate(cfg));
    const auto& data = scenes.at(h_gen);
    const auto h_hier = stage_hash(cfg, Stage::hierarchy);
    if (!hierarchies.count(h_hier)) hierarchies.emplace(h_hier, build_hierarchies(cfg, data));
    const auto& hs = hierarchies.at(h_hier);
    const auto h_ae = stage_hash(cfg, Stage::train_ae);
    if (!models.count(h_ae)) models.emplace(h_ae, train_autoencoder(cfg, data, hs));
    const auto& model = models.at(h_ae);
    if (!model.valid()) {
      row.status = model.failure;
      rows.push_back(std::move(row));
      continue;
    }
    const auto h_field = stage_hash(cfg, Stage::train_field);
    if (!fields.count(h_field)) fields.emplace(h_field, train_field(cfg, data, hs, model.model));
    const auto& fs = fields.at(h_field);
    const auto grid_key = h_field + "/" + std::to_string(cfg.query.steps) + "/" + format_double(cfg.query.t_max) +
                          "/" + std::to_string(cfg.query.neutral_labels.size());
    if (!grids.count(grid_key)) grids.emplace(grid_key, score_grid(cfg, data, model.model, fs.result.field));
    row.report = evaluate(cfg, data, run_queries(cfg, data, grids.at(grid_key), cfg.oracle_levels));
    row.status = "ok";
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string ablation_csv(const std::vector<AblationSwitch>& switches, const std::vector<AblationRow>& rows) {
  const auto quote = [](const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string q = "\"";
    for (char c : s) q += c == '"' ? std::string("\"\"") : std::string(1, c);
    return q + "\"";
  };
  std::ostringstream out;
  for (const auto& sw : switches) out << sw.name << ",";
  out << "status,object_miou,part_miou,overall_miou,localization_accuracy\n";
  for (const auto& r : rows) {
    for (const auto& sw : switches) out << quote(r.key.at(sw.name)) << ",";
    out << quote(r.status);
    if (r.report) {
      out << "," << format_double(r.report->object_miou) << "," << format_double(r.report->part_miou) << ","
          << format_double(r.report->overall_miou) << "," << format_double(r.report->localization_accuracy);
    } else {
      out << ",,,,";
    }
    out << "\n";
  }
  return out.str();
}

}  // namespace hypelift::pipeline
