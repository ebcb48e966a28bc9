#pragma once

// The synthetic pipeline: generate a scene, extract mask hierarchies, train
// the autoencoder and the field, query every visible concept in every view
// and score the masks against ground truth.
//
// Every stage exists twice: as an in-memory function (used by ablations and
// the acceptance run) and as a command that reads the previous stage's
// artifacts from the output directory and writes its own, together with a
// manifest carrying the stage's config hash.

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "hypelift/autoencoder.hpp"
#include "hypelift/config.hpp"
#include "hypelift/field.hpp"
#include "hypelift/hierarchy.hpp"
#include "hypelift/query.hpp"
#include "hypelift/synth.hpp"

namespace hypelift::pipeline {

enum class Stage { gen, hierarchy, train_ae, train_field, query, eval };
const char* to_string(Stage s);

/// Hash of every config value that can change the stage's output, including
/// those of the stages it depends on.
std::string stage_hash(const PipelineConfig& cfg, Stage stage);

// ------------------------------------------------------------ in memory

struct SceneData {
  synth::WorldScene scene;
  std::vector<synth::RenderedView> views;
};

SceneData generate(const PipelineConfig& cfg);
std::vector<hier::MaskHierarchy> build_hierarchies(const PipelineConfig& cfg, const SceneData& data);
/// Training images with feature rows ordered like the hierarchy nodes.
std::vector<ae::TrainingImage> training_images(const SceneData& data, const std::vector<hier::MaskHierarchy>& hierarchies);

struct AutoencoderStage {
  ae::AutoencoderModel model;
  std::vector<ae::LossBreakdown> curve;
  ae::StructureReport structure;
  /// Empty for a usable model; otherwise the collapse reason or the
  /// numerical failure that aborted training.
  std::string failure;
  bool valid() const { return failure.empty(); }
};

/// Never throws NumericalError: a NaN abort is recorded in `failure`.
AutoencoderStage train_autoencoder(const PipelineConfig& cfg, const SceneData& data,
                                   const std::vector<hier::MaskHierarchy>& hierarchies);

struct FieldStage {
  field::FieldTrainResult result;
  int samples = 0;
  int skipped = 0;
  /// Fraction of supervised part cells whose rendered feature is closer to
  /// the part's noise-free extrapolated encoding than to any sibling's.
  /// Negative when there is no such cell or the mode is not hyperbolic.
  double part_consolidation = -1.0;
  int part_cells = 0;
};

FieldStage train_field(const PipelineConfig& cfg, const SceneData& data,
                       const std::vector<hier::MaskHierarchy>& hierarchies, const ae::AutoencoderModel& model);

/// Concept prompts scored against the cells of the whole grid; per-view maps
/// are cut from these.
struct GridScores {
  int height = 0;
  int width = 0;
  std::vector<int> concepts;        // prompt order
  query::StepSimilarities sims;     // text rows: concepts, then neutrals
  std::vector<std::uint8_t> observed;  // per cell; unobserved cells carry no feature
};

GridScores score_grid(const PipelineConfig& cfg, const SceneData& data, const ae::AutoencoderModel& model,
                      const field::FieldGrid& grid);

struct QueryRecord {
  std::string view_id;
  int concept_id = 0;
  std::string label;
  bool object = false;  // top-level concept
  query::RelevancyMap map;
};

/// One query per (view, concept visible in the view).
std::vector<QueryRecord> run_queries(const PipelineConfig& cfg, const SceneData& data, const GridScores& scores,
                                     bool keep_steps = false);

struct QueryEval {
  std::string view_id;
  int concept_id = 0;
  std::string label;
  bool object = false;
  double iou = 0.0;
  bool localized = false;
  std::optional<double> oracle_iou;  // best single traversal step
  std::optional<int> oracle_step;
};

struct EvalReport {
  std::vector<QueryEval> queries;
  double object_miou = 0.0;
  double part_miou = 0.0;
  double overall_miou = 0.0;
  double localization_accuracy = 0.0;
  std::optional<double> oracle_object_miou;
  std::optional<double> oracle_part_miou;
  std::map<std::string, double> runtime_seconds;  // kept out of the report file
};

double iou(const std::vector<std::uint8_t>& pred, const std::vector<std::uint8_t>& truth);
synth::Rect bounding_box(const std::vector<std::uint8_t>& mask, int height, int width);

EvalReport evaluate(const PipelineConfig& cfg, const SceneData& data, const std::vector<QueryRecord>& queries);
nlohmann::json report_json(const EvalReport& report);

struct RunResult {
  AutoencoderStage autoencoder;
  std::optional<FieldStage> field;  // absent when the autoencoder is flagged
  std::optional<EvalReport> report;
};

/// Every stage in memory. Stops after the autoencoder when it is flagged.
RunResult run_all(const PipelineConfig& cfg);

// ------------------------------------------------------------ ablations

struct AblationSwitch {
  std::string name;  // supervision, negatives, loss, aggregation, latent_dim, steps
  std::vector<std::string> values;
};

/// Parses "name=v1,v2". Throws ConfigError on unknown names or values.
AblationSwitch parse_switch(const std::string& text);
/// Applies one switch value to a config.
void apply_switch(PipelineConfig& cfg, const std::string& name, const std::string& value);

struct AblationRow {
  std::map<std::string, std::string> key;  // switch name -> value
  std::string status;                      // "ok", "collapsed: ...", "nan: ..."
  std::optional<EvalReport> report;
};

/// Cartesian product of the switches over the base config. Stages whose
/// hash repeats are trained once.
std::vector<AblationRow> run_ablation(const PipelineConfig& base, const std::vector<AblationSwitch>& switches);
std::string ablation_csv(const std::vector<AblationSwitch>& switches, const std::vector<AblationRow>& rows);

// ------------------------------------------------------------ artifacts

/// Each writes <output>/<stage>/ plus manifest.json; they check that the
/// inputs exist (StageDependencyError) and were produced under the same
/// upstream config (StaleArtifactError).
void cmd_gen(const PipelineConfig& cfg);
void cmd_hierarchy(const PipelineConfig& cfg);
void cmd_train_ae(const PipelineConfig& cfg);
void cmd_train_field(const PipelineConfig& cfg);
void cmd_query(const PipelineConfig& cfg);
EvalReport cmd_eval(const PipelineConfig& cfg);
void cmd_export(const PipelineConfig& cfg);
void cmd_ablate(const PipelineConfig& cfg, const std::vector<AblationSwitch>& switches);
/// Entailment-cone diagnostic over the clean concept encodings.
nlohmann::json cmd_entail(const PipelineConfig& cfg);

SceneData load_scene(const PipelineConfig& cfg);

}  // namespace hypelift::pipeline
