#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sys/wait.h>
#include <unistd.h>

#include "panodepth/errors.hpp"
#include "panodepth/harness.hpp"

namespace panodepth {
namespace {

namespace fs = std::filesystem;

class HarnessTest : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    dir_ = fs::temp_directory_path() / ("panodepth_harness_" + std::string(info->name()) + "_" + std::to_string(::getpid()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }
  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  static RunConfig tiny_run() {
    RunConfig cfg;
    cfg.model = ModelConfig::tiny();
    cfg.optim.batch_size = 2;
    cfg.optim.epochs = 1;
    cfg.optim.seed = 11;
    return cfg;
  }

  static std::vector<ImageSample> samples(std::size_t n, std::size_t h = 8, std::size_t w = 16) {
    std::vector<ImageSample> out;
    for (std::size_t i = 0; i < n; ++i) {
      auto s = synth_room(random_room(5, i, h, w));
      s.id = "s" + std::to_string(i);
      out.push_back(std::move(s));
    }
    return out;
  }

  static TrainOptions quiet() {
    TrainOptions o;
    o.write_outputs = false;
    o.quiet = true;
    return o;
  }

  fs::path dir_;
};

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

TEST_F(HarnessTest, ZeroLearningRateLeavesParametersUnchanged) {
  auto cfg = tiny_run();
  cfg.optim.learning_rate = 0;
  const auto data = samples(4);
  const DepthModel<float> fresh(cfg.model, cfg.optim.seed);
  const auto trained = train_on(cfg, data, quiet());
  EXPECT_EQ(trained.step_losses.size(), 2u);
  const auto before = fresh.parameters();
  const auto after = trained.model->parameters();
  ASSERT_EQ(before.size(), after.size());
  for (std::size_t k = 0; k < before.size(); ++k) {
    for (std::size_t i = 0; i < before[k].tensor.size(); ++i) {
      ASSERT_EQ(before[k].tensor[i], after[k].tensor[i]) << before[k].name;
    }
  }
}

TEST_F(HarnessTest, SameSeedGivesSameLossCurve) {
  auto cfg = tiny_run();
  cfg.optim.epochs = 3;
  const auto data = samples(4);
  const auto a = train_on(cfg, data, quiet());
  const auto b = train_on(cfg, data, quiet());
  ASSERT_EQ(a.step_losses.size(), 6u);
  ASSERT_EQ(a.step_losses.size(), b.step_losses.size());
  for (std::size_t i = 0; i < a.step_losses.size(); ++i) EXPECT_NEAR(a.step_losses[i], b.step_losses[i], 1e-6);
  cfg.optim.seed = 12;
  const auto c = train_on(cfg, data, quiet());
  EXPECT_NE(a.step_losses, c.step_losses);
}

TEST_F(HarnessTest, MaxStepsStopsMidEpoch) {
  auto cfg = tiny_run();
  cfg.optim.max_steps = 3;
  cfg.optim.epochs = 100;
  EXPECT_EQ(train_on(cfg, samples(4), quiet()).step_losses.size(), 3u);
}

TEST_F(HarnessTest, L1LossOption) {
  auto cfg = tiny_run();
  cfg.optim.loss = "l1";
  const auto r = train_on(cfg, samples(2), quiet());
  ASSERT_EQ(r.step_losses.size(), 1u);
  EXPECT_GT(r.step_losses[0], 0.0);
}

TEST_F(HarnessTest, CheckpointRoundTripPreservesEvaluation) {
  auto cfg = tiny_run();
  cfg.optim.epochs = 2;
  cfg.output_dir = path("run");
  const auto data = samples(4);
  TrainOptions options;
  options.quiet = true;
  const auto trained = train_on(cfg, data, options);
  ASSERT_TRUE(fs::exists(path("run/checkpoint.bin")));
  ASSERT_TRUE(fs::exists(path("run/train_log.jsonl")));

  const auto loaded = load_checkpoint(path("run/checkpoint.bin"));
  EXPECT_EQ(nlohmann::json(loaded.config), nlohmann::json(cfg));
  EXPECT_EQ(loaded.adam.step, trained.adam.step);
  const auto before = evaluate_model(*trained.model, data, true).aggregate().depth;
  const auto after = evaluate_model(*loaded.model, data, true).aggregate().depth;
  EXPECT_NEAR(before.abs_rel, after.abs_rel, 1e-7);
  EXPECT_NEAR(before.rmse, after.rmse, 1e-7);
  EXPECT_NEAR(before.delta1, after.delta1, 1e-7);
}

TEST_F(HarnessTest, CheckpointRejectsCorruptAndMismatchedFiles) {
  std::ofstream(path("junk.bin")) << "definitely not a checkpoint";
  EXPECT_THROW(load_checkpoint(path("junk.bin")), IoError);
  EXPECT_THROW(load_checkpoint(path("absent.bin")), IoError);

  auto cfg = tiny_run();
  const DepthModel<float> model(cfg.model, 1);
  std::vector<Tensor<float>> params;
  for (const auto& p : model.parameters()) params.push_back(p.tensor);
  const auto adam = AdamState<float>::for_parameters(params, {});
  save_checkpoint(path("ok.bin"), cfg, model, adam);
  // Truncation anywhere in the payload is a data error.
  const auto bytes = slurp(path("ok.bin"));
  std::ofstream(path("short.bin"), std::ios::binary).write(bytes.data(), static_cast<std::streamsize>(bytes.size() / 2));
  EXPECT_THROW(load_checkpoint(path("short.bin")), IoError);
}

TEST_F(HarnessTest, EvaluationReportRows) {
  const auto data = samples(3);
  const auto report = evaluate_predictions(
      data, [](const ImageSample& s) { return s.depth.values; }, true);
  ASSERT_EQ(report.images.size(), 3u);
  const auto csv = report.csv();
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 1 + 3 + 1);
  const auto agg = report.aggregate().depth;
  EXPECT_EQ(agg.delta1, 1.0);
  EXPECT_EQ(agg.delta2, 1.0);
  EXPECT_EQ(agg.delta3, 1.0);
  EXPECT_NEAR(agg.rmse, 0.0, 1e-6);
  EXPECT_THROW(evaluate_predictions({}, [](const ImageSample& s) { return s.depth.values; }, true), IoError);
}

TEST_F(HarnessTest, UnalignedScaleErrorGrowsLinearly) {
  const auto data = samples(2, 16, 32);
  auto scaled = [](double f) {
    return [f](const ImageSample& s) {
      auto v = s.depth.values;
      for (auto& x : v) x = static_cast<float>(x * f);
      return v;
    };
  };
  const double aligned = evaluate_predictions(data, scaled(2.0), true).aggregate().depth.rmse;
  const double off_by_one = evaluate_predictions(data, scaled(2.0), false).aggregate().depth.rmse;
  const double off_by_two = evaluate_predictions(data, scaled(3.0), false).aggregate().depth.rmse;
  EXPECT_NEAR(aligned, 0.0, 1e-5);
  EXPECT_GT(off_by_one, 0.5);
  // |2g - g| = g and |3g - g| = 2g: doubling the scale error doubles RMSE.
  EXPECT_NEAR(off_by_two, 2.0 * off_by_one, 1e-5 * off_by_one);
}

TEST_F(HarnessTest, PredictWritesConsistentFiles) {
  auto cfg = tiny_run();
  const DepthModel<float> model(cfg.model, 3);
  // Input extent differs from the model resolution on purpose.
  std::vector<std::uint8_t> px(3 * 12 * 20);
  Rng rng(4);
  for (auto& v : px) v = static_cast<std::uint8_t>(rng.below(256));
  write_png8(path("in.png"), 12, 20, 3, px);

  const auto files = predict_to_files(model, path("in.png"), path("out1"));
  const auto pfm = read_pfm(files.pfm);
  EXPECT_EQ(pfm.height, 12u);
  EXPECT_EQ(pfm.width, 20u);
  const auto png = read_png(files.png16);
  ASSERT_EQ(png.bit_depth, 16);
  ASSERT_EQ(png.samples.size(), pfm.values.size());
  for (std::size_t i = 0; i < pfm.values.size(); ++i) {
    EXPECT_LE(std::abs(png.samples[i] * files.png_scale - pfm.values[i]), 0.5 * files.png_scale + 1e-9);
  }
  const auto side = nlohmann::json::parse(slurp(files.sidecar));
  EXPECT_DOUBLE_EQ(side.at("depth_scale").get<double>(), files.png_scale);
  const auto color = read_png(files.color);
  EXPECT_EQ(color.channels, 3u);
  EXPECT_EQ(color.height, 12u);

  const auto again = predict_to_files(model, path("in.png"), path("out2"));
  EXPECT_EQ(slurp(files.pfm), slurp(again.pfm));
  EXPECT_EQ(slurp(files.png16), slurp(again.png16));
  EXPECT_EQ(slurp(files.color), slurp(again.color));
}

TEST_F(HarnessTest, AblationRowsAndStpAudit) {
  const auto report = ablation_parameter_counts(ModelConfig::tiny());
  ASSERT_EQ(report.rows.size(), 6u);
  std::map<std::string, std::size_t> counts;
  for (const auto& r : report.rows) counts[r.name] = r.parameters;
  EXPECT_EQ(counts.size(), 6u);
  std::size_t stp = 0;
  for (const auto& block : DepthModel<float>(ModelConfig::tiny(), 0).decoder) stp += block.stp.parameter_count();
  EXPECT_EQ(counts["full"] - counts["no_stp"], stp);
  for (const auto& v : report.ordering_violations) EXPECT_EQ(v.find("STP audit"), std::string::npos) << v;
  const auto csv = report.csv();
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 7);
  EXPECT_EQ(report.json()["rows"].size(), 6u);
}

TEST_F(HarnessTest, ResolutionIndependentParameterCount) {
  auto low = ModelConfig::defaults();
  auto high = low;
  high.height = 512;
  high.width = 1024;
  EXPECT_EQ(DepthModel<float>(low, 0).parameter_count(), DepthModel<float>(high, 0).parameter_count());
}

TEST_F(HarnessTest, GradcheckPassesAndCatchesCorruption) {
  for (const char* block : {"srb", "encoder"}) {
    const auto r = gradcheck(block);
    EXPECT_TRUE(r.passed) << block << " " << r.max_rel_error << " at " << r.worst_parameter;
    EXPECT_LT(r.max_rel_error, 1e-5);
  }
  GradcheckOptions corrupt;
  corrupt.corrupt_parameter = "widen.weight";
  const auto bad = gradcheck("srb", corrupt);
  EXPECT_FALSE(bad.passed);
  EXPECT_EQ(bad.worst_parameter, "widen.weight");
  EXPECT_THROW(gradcheck("nonexistent"), ConfigError);
}

#ifdef PANODEPTH_CLI
int run_cli(const std::string& args) {
  const std::string cmd = std::string(PANODEPTH_CLI) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

TEST_F(HarnessTest, CliExitCodes) {
  EXPECT_EQ(run_cli(""), 1);
  EXPECT_EQ(run_cli("frobnicate"), 1);
  EXPECT_EQ(run_cli("params --preset tiny --resolution 100x100"), 1);
  EXPECT_EQ(run_cli("params --preset tiny"), 0);
  EXPECT_EQ(run_cli("params --preset tiny --model.transformer.d_model 7"), 1);
  EXPECT_EQ(run_cli("eval --checkpoint " + path("missing.bin")), 2);
  EXPECT_EQ(run_cli("train --preset tiny --manifest " + path("missing.jsonl") + " --out " + path("r")), 2);
  EXPECT_EQ(run_cli("gradcheck --block srb"), 0);
  EXPECT_EQ(run_cli("gradcheck --block srb --corrupt widen.weight"), 3);
  EXPECT_EQ(run_cli("synth --out " + path("syn") + " --count 3 --resolution 8x16"), 0);
  EXPECT_TRUE(fs::exists(path("syn/manifest.jsonl")));
  EXPECT_EQ(run_cli("train --preset tiny --manifest " + path("syn/manifest.jsonl") + " --out " + path("r") +
                    " --optim.max_steps 1"),
            0);
  EXPECT_EQ(run_cli("eval --checkpoint " + path("r/checkpoint.bin") + " --split train"), 0);
  EXPECT_TRUE(fs::exists(path("r/eval_train.csv")));
  EXPECT_EQ(run_cli("eval --checkpoint " + path("r/checkpoint.bin") + " --split train --check-config --preset desk"),
            2);
}
#endif

}  // namespace
}  // namespace panodepth
