// hypelift <subcommand> [--config FILE] [--seed N] [--out DIR]
//
// Failures print one JSON object {"error", "message", "command"} on stderr
// and exit nonzero: 2 for library errors, 64 for usage errors, 70 otherwise.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>

#include <CLI11.hpp>
#include <json.hpp>

#include "hypelift/config.hpp"
#include "hypelift/errors.hpp"
#include "hypelift/pipeline.hpp"

namespace {

using namespace hypelift;
using nlohmann::json;

void error_record(const std::string& kind, const std::string& message, const std::string& command) {
  std::cerr << json{{"error", kind}, {"message", message}, {"command", command}}.dump() << std::endl;
}

void print_summary(const pipeline::EvalReport& r) {
  json j{{"object_miou", r.object_miou},
         {"part_miou", r.part_miou},
         {"overall_miou", r.overall_miou},
         {"localization_accuracy", r.localization_accuracy},
         {"queries", r.queries.size()},
         {"runtime_seconds", r.runtime_seconds}};
  if (r.oracle_object_miou) {
    j["oracle_object_miou"] = *r.oracle_object_miou;
    j["oracle_part_miou"] = *r.oracle_part_miou;
  }
  std::cout << j.dump(2) << std::endl;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hierarchical hyperbolic feature lifting on synthetic multi-view scenes"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
  std::vector<std::string> switches;

  const auto common = [&](CLI::App* sub) {
    sub->add_option("-c,--config", config_path, "pipeline config file (defaults apply when omitted)");
    sub->add_option("--seed", seed, "override the config seed");
    sub->add_option("--out", out_dir, "override the output directory");
    return sub;
  };
  struct Command {
    const char* name;
    const char* help;
  };
  const std::vector<Command> commands{
      {"gen", "generate the synthetic scene and its views"},
      {"hierarchy", "build mask hierarchies per view"},
      {"train-ae", "train the hyperbolic autoencoder"},
      {"train-field", "distill encodings into the world grid"},
      {"query", "score every visible concept in every view"},
      {"eval", "IoU and localization against ground truth"},
      {"export", "write relevancy heatmaps and masks as PGM"},
      {"run", "all stages from gen to eval"},
      {"ablate", "cartesian ablation table (CSV)"},
      {"entail", "entailment-cone diagnostic on clean concept encodings"},
      {"config", "print the effective config in canonical form"},
  };
  for (const auto& c : commands) {
    auto* sub = common(app.add_subcommand(c.name, c.help));
    if (std::string(c.name) == "ablate") {
      sub->add_option("-s,--switch", switches,
                      "name=v1,v2 with name in supervision, negatives, aggregation, loss, latent_dim, steps")
          ->required();
    }
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    error_record("UsageError", e.what(), argc > 1 ? argv[1] : "");
    return 64;
  }

  const std::string command = app.get_subcommands().front()->get_name();
  try {
    PipelineConfig cfg = config_path.empty() ? parse_config("") : load_config(config_path);
    if (seed) cfg.seed = *seed;
    if (out_dir) cfg.output = *out_dir;
    cfg.validate();

    using namespace pipeline;
    if (command == "gen") {
      cmd_gen(cfg);
    } else if (command == "hierarchy") {
      cmd_hierarchy(cfg);
    } else if (command == "train-ae") {
      cmd_train_ae(cfg);
    } else if (command == "train-field") {
      cmd_train_field(cfg);
    } else if (command == "query") {
      cmd_query(cfg);
    } else if (command == "eval") {
      print_summary(cmd_eval(cfg));
    } else if (command == "export") {
      cmd_export(cfg);
    } else if (command == "run") {
      cmd_gen(cfg);
      cmd_hierarchy(cfg);
      cmd_train_ae(cfg);
      cmd_train_field(cfg);
      cmd_query(cfg);
      print_summary(cmd_eval(cfg));
    } else if (command == "ablate") {
      std::vector<AblationSwitch> parsed;
      for (const auto& s : switches) parsed.push_back(parse_switch(s));
      cmd_ablate(cfg, parsed);
      std::ifstream table(cfg.output / "ablate" / "table.csv");
      std::cout << table.rdbuf();
    } else if (command == "entail") {
      std::cout << cmd_entail(cfg).dump(2) << std::endl;
    } else if (command == "config") {
      std::cout << to_text(cfg);
    }
  } catch (const Error& e) {
    error_record(e.kind(), e.what(), command);
    return 2;
  } catch (const std::exception& e) {
    error_record("InternalError", e.what(), command);
    return 70;
  }
  return 0;
}
