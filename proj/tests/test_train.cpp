#include <doctest.h>

#include <filesystem>
#include <fstream>

#include <nlohmann/json.hpp>

#include <psstr/synth.hpp>
#include <psstr/trainer.hpp>

using namespace psstr;

namespace {

struct TempDir {
  std::filesystem::path path;
  explicit TempDir(const char* tag) {
    path = std::filesystem::temp_directory_path() /
           (std::string("psstr_train_") + tag + "_" + std::to_string(::getpid()));
    std::filesystem::remove_all(path);
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
};

std::vector<Sample> toy_samples(int64_t count, int64_t size, uint64_t seed) {
  SynthConfig cfg;
  cfg.count = count;
  cfg.image_size = {size, size};
  cfg.seed = seed;
  std::vector<Sample> samples;
  for (int64_t i = 0; i < count; ++i) {
    auto s = synth_sample(cfg, i);
    Sample sample;
    char name[16];
    std::snprintf(name, sizeof(name), "%06lld", static_cast<long long>(i));
    sample.name = name;
    sample.input = s.input;
    sample.gt = s.gt;
    sample.mask_gt = s.mask;
    samples.push_back(std::move(sample));
  }
  return samples;
}

TrainConfig tiny_train_config(int64_t epochs, int64_t iterations = 2) {
  TrainConfig cfg;
  cfg.model.base_channels = 8;
  cfg.model.iterations = iterations;
  cfg.model.input_size = {32, 32};
  cfg.weights = LossWeights::for_iterations(iterations);
  cfg.epochs = epochs;
  cfg.batch_size = 6;
  cfg.seed = 7;
  cfg.checkpoint_interval = 100;
  return cfg;
}

std::vector<nlohmann::json> read_log(const std::filesystem::path& p) {
  std::vector<nlohmann::json> lines;
  std::ifstream in(p);
  std::string line;
  while (std::getline(in, line))
    if (!line.empty()) lines.push_back(nlohmann::json::parse(line));
  return lines;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

}  // namespace

TEST_CASE("learning rate schedule") {
  TrainConfig cfg;
  CHECK(lr_at(0, cfg) == 0.001);
  CHECK(lr_at(9, cfg) == 0.001);
  CHECK(lr_at(10, cfg) == 0.0005);
  CHECK(lr_at(25, cfg) == doctest::Approx(0.00025).epsilon(1e-12));
  for (int64_t e = 1; e < 40; ++e) CHECK(lr_at(e, cfg) <= lr_at(e - 1, cfg));
}

TEST_CASE("train runs the expected number of optimizer steps") {
  TempDir tmp("steps");
  auto samples = toy_samples(12, 32, 1);
  auto cfg = tiny_train_config(2);
  auto report = train(cfg, samples, tmp.path / "run");
  CHECK(report.steps == 4);  // 2 epochs x (12 / 6)
  CHECK(std::filesystem::exists(report.final_checkpoint));
  CHECK(std::filesystem::exists(tmp.path / "run" / "config.json"));
  auto log = read_log(tmp.path / "run" / "train_log.jsonl");
  CHECK(log.size() == 4);
  CHECK(log[0].at("epoch") == 0);
  CHECK(log[3].at("epoch") == 1);
  CHECK(report.parameter_count > 0);
}

TEST_CASE("fixed-batch training reduces the loss") {
  TempDir tmp("overfit");
  auto samples = toy_samples(6, 32, 2);
  auto cfg = tiny_train_config(50, 1);
  cfg.augment = false;  // one fixed batch
  auto report = train(cfg, samples, tmp.path / "run");
  CHECK(report.steps == 50);
  auto log = read_log(tmp.path / "run" / "train_log.jsonl");
  REQUIRE(log.size() == 50);
  double first = 0, last = 0;
  for (int i = 0; i < 5; ++i) {
    first += log[static_cast<size_t>(i)].at("total").get<double>();
    last += log[log.size() - 1 - static_cast<size_t>(i)].at("total").get<double>();
  }
  CHECK(last < first * 0.8);
}

TEST_CASE("resumed training matches the uninterrupted run") {
  TempDir tmp("resume");
  auto samples = toy_samples(12, 32, 3);

  auto full_cfg = tiny_train_config(2);
  auto full = train(full_cfg, samples, tmp.path / "full");

  auto half_cfg = tiny_train_config(1);
  auto half = train(half_cfg, samples, tmp.path / "half");
  auto resumed_cfg = tiny_train_config(2);
  auto resumed = train(resumed_cfg, samples, tmp.path / "resumed", half.final_checkpoint);

  auto log_full = read_log(tmp.path / "full" / "train_log.jsonl");
  auto log_resumed = read_log(tmp.path / "resumed" / "train_log.jsonl");
  REQUIRE(log_full.size() == 4);
  REQUIRE(log_resumed.size() == 2);  // epoch 1 only
  for (size_t i = 0; i < 2; ++i) {
    const double a = log_full[2 + i].at("total").get<double>();
    const double b = log_resumed[i].at("total").get<double>();
    CHECK(std::abs(a - b) / std::max(std::abs(a), 1e-12) < 1e-5);
  }

  // checkpoint round-trip is byte-identical
  Archive archive = load_archive(full.final_checkpoint);
  save_archive(tmp.path / "copy.ckpt", archive.tensors, archive.config);
  CHECK(slurp(full.final_checkpoint) == slurp(tmp.path / "copy.ckpt"));
}

TEST_CASE("training aborts on non-finite loss with a diagnostic dump") {
  TempDir tmp("nan");
  auto samples = toy_samples(6, 32, 4);
  samples[0].gt[0][5][5] = std::numeric_limits<float>::quiet_NaN();
  auto cfg = tiny_train_config(1);
  cfg.augment = false;
  CHECK_THROWS_AS(train(cfg, samples, tmp.path / "run"), std::runtime_error);
  CHECK(std::filesystem::exists(tmp.path / "run" / "diagnostics" / "meta.json"));
}

TEST_CASE("evaluate_model reports metrics, baseline and IoU") {
  torch::manual_seed(91);
  auto samples = toy_samples(4, 32, 5);
  PSSTRNetConfig cfg;
  cfg.base_channels = 8;
  cfg.iterations = 2;
  PSSTRNet model{cfg};
  auto summary = evaluate_model(model, samples, 2, true, 2);
  CHECK(summary.per_image.size() == 4);
  CHECK(summary.metrics.psnr > 0);
  CHECK(summary.input_baseline.psnr > 0);
  CHECK(summary.mask_iou >= 0.0);
  CHECK(summary.mask_iou <= 1.0);

  // the baseline row is the identity prediction
  auto direct = compute_metrics(samples[0].input, samples[0].gt);
  CHECK(summary.input_baseline.psnr <= 100.0);
  CHECK(direct.psnr > 0);

  // fusion off evaluates the last iteration instead
  auto no_fusion = evaluate_model(model, samples, 2, false, 2);
  CHECK(no_fusion.per_image.size() == 4);
}

TEST_CASE("model checkpoints restore through load_model") {
  TempDir tmp("loadmodel");
  torch::manual_seed(92);
  auto cfg = tiny_train_config(1);
  PSSTRNet model{cfg.model};
  model->eval();
  save_model_checkpoint(tmp.path / "m.ckpt", model, cfg);
  auto loaded = load_model(tmp.path / "m.ckpt");
  CHECK(loaded.config.model.base_channels == cfg.model.base_channels);
  CHECK(loaded.config.model.iterations == cfg.model.iterations);
  torch::NoGradGuard ng;
  auto x = torch::rand({1, 3, 32, 32});
  CHECK(torch::equal(loaded.model->forward(x).output, model->forward(x).output));
}

TEST_CASE("train rejects invalid configurations") {
  auto samples = toy_samples(2, 32, 6);
  auto cfg = tiny_train_config(1);
  cfg.lr = 0;
  TempDir tmp("badcfg");
  CHECK_THROWS(train(cfg, samples, tmp.path / "run"));
  cfg = tiny_train_config(1);
  CHECK_THROWS(train(cfg, {}, tmp.path / "run"));
}
