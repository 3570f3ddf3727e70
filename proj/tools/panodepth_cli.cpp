#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>

#include "panodepth/errors.hpp"
#include "panodepth/harness.hpp"

namespace fs = std::filesystem;
using namespace panodepth;
using nlohmann::json;

namespace {

struct CommonFlags {
  std::string config_path;
  std::string preset = "paper";
  std::optional<std::uint64_t> seed;
  std::string resolution;
  bool no_srb = false;
  bool no_stp = false;
  std::string attention;
  std::string align;
  std::string manifest;
  std::string output_dir;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--config", f.config_path, "JSON run configuration")->check(CLI::ExistingFile);
  cmd->add_option("--preset", f.preset, "Base configuration")->check(CLI::IsMember({"paper", "desk", "tiny"}));
  cmd->add_option("--seed", f.seed, "Seed for initialization and data order");
  cmd->add_option("--resolution", f.resolution, "Input resolution")->check(CLI::IsMember({"256x512", "512x1024"}));
  cmd->add_flag("--no-srb", f.no_srb, "Disable both spatial residual blocks");
  cmd->add_flag("--no-stp", f.no_stp, "Disable STP in the decoder");
  cmd->add_option("--attention", f.attention, "Encoder attention")->check(CLI::IsMember({"sca", "mhsa"}));
  cmd->add_option("--align", f.align, "Prediction alignment")->check(CLI::IsMember({"median", "none"}));
  cmd->add_option("--manifest", f.manifest, "Dataset manifest (JSON lines)");
  cmd->add_option("--out", f.output_dir, "Output directory");
  cmd->allow_extras();
}

ModelConfig preset_model(const std::string& name) {
  if (name == "desk") return ModelConfig::desk();
  if (name == "tiny") return ModelConfig::tiny();
  return ModelConfig::defaults();
}

// Remaining "--a.b value" pairs become dotted-key overrides.
void apply_extras(json& doc, const std::vector<std::string>& extras) {
  for (std::size_t i = 0; i < extras.size(); ++i) {
    const auto& arg = extras[i];
    if (arg.rfind("--", 0) != 0) throw CLI::ExtrasError({arg});
    auto key = arg.substr(2);
    std::string value;
    if (const auto eq = key.find('='); eq != std::string::npos) {
      value = key.substr(eq + 1);
      key = key.substr(0, eq);
    } else {
      if (i + 1 >= extras.size()) throw ConfigError("override --" + key + " needs a value");
      value = extras[++i];
    }
    apply_override(doc, key, value);
  }
}

RunConfig build_config(const CommonFlags& f, const std::vector<std::string>& extras) {
  RunConfig base;
  base.model = preset_model(f.preset);
  json doc = base;
  if (!f.config_path.empty()) {
    std::ifstream in(f.config_path);
    const json file = json::parse(in, nullptr, false);
    if (file.is_discarded() || !file.is_object()) throw ConfigError(f.config_path + ": not a JSON object");
    doc.merge_patch(file);
  }
  if (f.seed) doc["optim"]["seed"] = *f.seed;
  if (!f.resolution.empty()) {
    doc["model"]["height"] = f.resolution == "256x512" ? 256 : 512;
    doc["model"]["width"] = f.resolution == "256x512" ? 512 : 1024;
  }
  if (f.no_srb) doc["model"]["srb"]["enabled"] = false;
  if (f.no_stp) doc["model"]["transformer"]["use_stp"] = false;
  if (!f.attention.empty()) doc["model"]["transformer"]["use_sca"] = f.attention == "sca";
  if (!f.align.empty()) doc["align"] = f.align;
  if (!f.manifest.empty()) doc["manifest"] = f.manifest;
  if (!f.output_dir.empty()) doc["output_dir"] = f.output_dir;
  apply_extras(doc, extras);
  RunConfig cfg;
  try {
    cfg = doc.get<RunConfig>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("invalid configuration: ") + e.what());
  }
  cfg.model.validate();
  return cfg;
}

void print_metrics(const DepthMetrics& m) {
  std::cout << std::fixed << std::setprecision(5) << "abs_rel " << m.abs_rel << "  sq_rel " << m.sq_rel << "  rmse "
            << m.rmse << "  rmse_log " << m.rmse_log << "  delta1 " << m.delta1 << "  delta2 " << m.delta2
            << "  delta3 " << m.delta3 << '\n';
}

int run(int argc, char** argv) {
  CLI::App app{"Panoramic monocular depth estimation: training, evaluation and diagnostics"};
  app.require_subcommand(1);

  CommonFlags train_flags, eval_flags, predict_flags, ablate_flags, params_flags;

  auto* train_cmd = app.add_subcommand("train", "Train a model from a manifest");
  add_common(train_cmd, train_flags);

  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint on a split");
  std::string eval_checkpoint, eval_split = "test";
  bool eval_strict = false;
  add_common(eval_cmd, eval_flags);
  eval_cmd->add_option("--checkpoint", eval_checkpoint, "Checkpoint file")->required();
  eval_cmd->add_option("--split", eval_split, "Split to evaluate")->check(CLI::IsMember({"train", "val", "test"}));
  eval_cmd->add_flag("--check-config", eval_strict, "Fail when the given configuration differs from the checkpoint's");

  auto* predict_cmd = app.add_subcommand("predict", "Predict depth for one image");
  std::string predict_checkpoint, predict_image;
  add_common(predict_cmd, predict_flags);
  predict_cmd->add_option("--checkpoint", predict_checkpoint, "Checkpoint file")->required();
  predict_cmd->add_option("--image", predict_image, "Input PNG")->required();

  auto* ablate_cmd = app.add_subcommand("ablate", "Run the six-configuration module ablation");
  std::string ablate_split = "val";
  bool counts_only = false;
  add_common(ablate_cmd, ablate_flags);
  ablate_cmd->add_option("--split", ablate_split, "Evaluation split")->check(CLI::IsMember({"train", "val", "test"}));
  ablate_cmd->add_flag("--counts-only", counts_only, "Report parameter counts without training");

  auto* grad_cmd = app.add_subcommand("gradcheck", "Finite-difference gradient checks");
  std::string grad_block = "all", corrupt;
  grad_cmd->add_option("--block", grad_block, "Block to check (or all)");
  grad_cmd->add_option("--corrupt", corrupt, "Parameter whose analytic gradient is deliberately scaled");

  auto* params_cmd = app.add_subcommand("params", "Parameter counts per block");
  bool params_json = false;
  add_common(params_cmd, params_flags);
  params_cmd->add_flag("--json", params_json, "Print JSON");

  auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic room dataset");
  SynthDatasetOptions synth;
  std::string synth_resolution = "128x256";
  synth_cmd->add_option("--out", synth.out_dir, "Output directory")->required();
  synth_cmd->add_option("--count", synth.count, "Number of images");
  synth_cmd->add_option("--seed", synth.seed, "Seed");
  synth_cmd->add_option("--resolution", synth_resolution, "HxW, e.g. 128x256");
  synth_cmd->add_option("--train-fraction", synth.train_fraction, "Fraction of records in the train split");
  synth_cmd->add_option("--val-fraction", synth.val_fraction, "Fraction of records in the val split");
  synth_cmd->add_option("--holes", synth.hole_fraction, "Fraction of pixels punched out of the depth");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  if (train_cmd->parsed()) {
    const auto cfg = build_config(train_flags, train_cmd->remaining());
    if (cfg.manifest.empty()) throw ConfigError("train: --manifest is required");
    const auto result = train(cfg);
    std::cout << "steps " << result.step_losses.size() << "  final epoch loss "
              << (result.epochs.empty() ? 0.0 : result.epochs.back().mean_loss) << '\n';
    std::cout << "checkpoint " << (fs::path(cfg.output_dir) / "checkpoint.bin").string() << '\n';
  } else if (eval_cmd->parsed()) {
    auto ck = load_checkpoint(eval_checkpoint);
    if (eval_strict) {
      const auto expected = build_config(eval_flags, eval_cmd->remaining());
      if (json(expected.model) != json(ck.config.model)) {
        throw VersionError(eval_checkpoint + ": model configuration differs from the requested one");
      }
    }
    const std::string manifest_path = eval_flags.manifest.empty() ? ck.config.manifest : eval_flags.manifest;
    const std::string align = eval_flags.align.empty() ? ck.config.align : eval_flags.align;
    const auto manifest = read_manifest(manifest_path);
    const auto samples = load_split(manifest, eval_split, ck.config.model.height, ck.config.model.width);
    const auto report = evaluate_model(*ck.model, samples, align == "median");
    const std::string out = eval_flags.output_dir.empty() ? ck.config.output_dir : eval_flags.output_dir;
    fs::create_directories(out);
    report.write((fs::path(out) / ("eval_" + eval_split + ".csv")).string(),
                 (fs::path(out) / ("eval_" + eval_split + ".json")).string());
    std::cout << samples.size() << " images\n";
    print_metrics(report.aggregate().depth);
  } else if (predict_cmd->parsed()) {
    const auto ck = load_checkpoint(predict_checkpoint);
    const std::string out = predict_flags.output_dir.empty() ? "prediction" : predict_flags.output_dir;
    const auto files = predict_to_files(*ck.model, predict_image, out);
    std::cout << files.pfm << '\n' << files.png16 << '\n' << files.sidecar << '\n' << files.color << '\n';
  } else if (ablate_cmd->parsed()) {
    const auto cfg = build_config(ablate_flags, ablate_cmd->remaining());
    if (!counts_only && cfg.manifest.empty()) throw ConfigError("ablate: --manifest is required unless --counts-only");
    const auto report = counts_only ? ablation_parameter_counts(cfg.model) : ablate(cfg, ablate_split, true);
    fs::create_directories(cfg.output_dir);
    std::ofstream(fs::path(cfg.output_dir) / "ablation.csv") << report.csv();
    std::ofstream(fs::path(cfg.output_dir) / "ablation.json") << report.json().dump(2) << '\n';
    std::cout << report.csv();
    for (const auto& v : report.ordering_violations) std::cout << "ordering: " << v << '\n';
    for (const auto& r : report.rows) {
      if (!r.failure.empty()) return 2;
    }
  } else if (grad_cmd->parsed()) {
    std::vector<std::string> blocks = grad_block == "all" ? gradcheck_blocks() : std::vector<std::string>{grad_block};
    GradcheckOptions options;
    options.corrupt_parameter = corrupt;
    bool ok = true;
    for (const auto& b : blocks) {
      const auto r = gradcheck(b, options);
      std::cout << std::left << std::setw(14) << r.block << (r.passed ? "PASS" : "FAIL") << "  max_rel_error "
                << std::scientific << std::setprecision(3) << r.max_rel_error << "  worst " << r.worst_parameter
                << std::fixed << std::setprecision(2) << "  " << r.seconds << " s\n";
      ok = ok && r.passed;
    }
    if (!ok) return 3;
  } else if (params_cmd->parsed()) {
    const auto cfg = build_config(params_flags, params_cmd->remaining());
    DepthModel<float> model(cfg.model, cfg.optim.seed);
    const auto groups = model.parameter_groups();
    const std::size_t total = model.parameter_count();
    if (params_json) {
      std::cout << json{{"groups", groups}, {"total", total}, {"reference_total", 79.67e6}}.dump(2) << '\n';
    } else {
      for (const auto& [name, n] : groups) std::cout << std::left << std::setw(14) << name << n << '\n';
      std::cout << std::left << std::setw(14) << "total" << total << "  (reference model: 79.67M)\n";
      std::cout << "backbone layers " << model.backbone.layer_count() << '\n';
    }
  } else if (synth_cmd->parsed()) {
    const auto x = synth_resolution.find('x');
    if (x == std::string::npos) throw ConfigError("--resolution must look like HxW");
    synth.height = std::stoul(synth_resolution.substr(0, x));
    synth.width = std::stoul(synth_resolution.substr(x + 1));
    std::cout << write_synthetic_dataset(synth) << '\n';
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return e.exit_code();
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
}
