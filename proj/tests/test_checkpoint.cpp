#include <doctest.h>

#include <fstream>
#include <sstream>

#include <psstr/checkpoint.hpp>
#include <psstr/network.hpp>

using namespace psstr;

namespace {

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

struct TempDir {
  std::filesystem::path path;
  TempDir() {
    path = std::filesystem::temp_directory_path() /
           ("psstr_ckpt_" + std::to_string(::getpid()) + "_" +
            std::to_string(reinterpret_cast<uintptr_t>(this)));
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
};

}  // namespace

TEST_CASE("archive round-trip is bit-exact") {
  TempDir tmp;
  torch::manual_seed(41);
  NamedParameterSet set;
  set.entries["w/a"] = torch::randn({3, 4, 5});
  set.entries["w/b"] = torch::randn({7});
  set.entries["alpha"] = torch::ones({});
  nlohmann::json config{{"note", "roundtrip"}, {"k", 3}};

  const auto p1 = tmp.path / "one.ckpt";
  const auto p2 = tmp.path / "two.ckpt";
  save_archive(p1, set, config);
  auto loaded = load_archive(p1);
  CHECK(loaded.config.at("note") == "roundtrip");
  REQUIRE(loaded.tensors.entries.size() == 3);
  for (const auto& [name, t] : set.entries)
    CHECK(torch::equal(loaded.tensors.entries.at(name), t));

  save_archive(p2, loaded.tensors, loaded.config);
  CHECK(slurp(p1) == slurp(p2));
}

TEST_CASE("archive rejects foreign files") {
  TempDir tmp;
  const auto p = tmp.path / "garbage.ckpt";
  std::ofstream(p) << "definitely not a checkpoint";
  CHECK_THROWS(load_archive(p));
  CHECK_THROWS(load_archive(tmp.path / "missing.ckpt"));
}

TEST_CASE("model state round-trip reproduces outputs bit-exactly") {
  TempDir tmp;
  PSSTRNetConfig cfg;
  cfg.base_channels = 8;
  cfg.iterations = 1;
  torch::manual_seed(42);
  PSSTRNet a{cfg};
  torch::manual_seed(43);
  PSSTRNet b{cfg};

  auto x = torch::rand({1, 3, 32, 32});
  a->eval();
  b->eval();
  {
    torch::NoGradGuard ng;
    CHECK(!torch::equal(a->forward(x).output, b->forward(x).output));
  }

  const auto p = tmp.path / "model.ckpt";
  save_archive(p, named_state_of(*a));
  load_state_into(*b, load_archive(p).tensors);
  torch::NoGradGuard ng;
  CHECK(torch::equal(a->forward(x).output, b->forward(x).output));
}

TEST_CASE("load_state_into reports missing and orphan tensors") {
  PSSTRNetConfig cfg;
  cfg.base_channels = 8;
  PSSTRNet net{cfg};
  auto state = named_state_of(*net);

  auto missing = state;
  missing.entries.erase(missing.entries.begin());
  CHECK_THROWS(load_state_into(*net, missing));

  auto orphan = state;
  orphan.entries["not/a/real/tensor"] = torch::zeros({1});
  CHECK_THROWS(load_state_into(*net, orphan));

  auto wrong_shape = state;
  wrong_shape.entries.begin()->second = torch::zeros({1, 2, 3});
  CHECK_THROWS(load_state_into(*net, wrong_shape));
}

TEST_CASE("named parameter sets keep alpha and beta visible") {
  PSSTRNetConfig cfg;
  cfg.base_channels = 8;
  PSSTRNet net{cfg};
  auto params = named_parameters_of(*net);
  CHECK(params.entries.count("correction.alpha") == 1);
  CHECK(params.entries.count("correction.beta") == 1);
  CHECK(params.entries.at("correction.alpha").item<float>() == 1.0f);
  // buffers (running statistics) appear only in the full state
  auto state = named_state_of(*net);
  CHECK(state.entries.size() > params.entries.size());
}
