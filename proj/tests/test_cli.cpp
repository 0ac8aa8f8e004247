// Drives the installed CLI binary end to end. The binary path arrives via
// the CPCSEQ_CLI_PATH compile definition.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <string>
#include <sys/wait.h>

#include <json.hpp>

#include "checkpoint.hpp"
#include "runner.hpp"
#include "cpc.hpp"
#include "rng.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace cpcseq;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("cpcseq_cli_" + std::to_string(::getpid()));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

int run_cli(const std::string& args) {
  const std::string cmd = std::string(CPCSEQ_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  REQUIRE(status != -1);
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::vector<char> read_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  return std::vector<char>(std::istreambuf_iterator<char>(in), {});
}

json base_config() {
  json cfg;
  cfg["seed"] = 1;
  cfg["data"]["synthetic"] = {{"num_subjects", 4}, {"num_classes", 3}, {"duration_s", 15},
                              {"seed", 5}};
  cfg["pipeline"] = {{"target_hz", 30.0}, {"window_seconds", 1.0}, {"overlap_fraction", 0.5},
                     {"split", {{"policy", "fractional"}, {"seed", 2}}}};
  cfg["encoder"] = {{"family", "conv1d"}, {"layer_widths", {4, 6, 8}}, {"kernel_size", 3}};
  cfg["pretrain"] = {{"k", 4}, {"epochs", 2}, {"batch_size", 16}, {"context_dim", 16},
                     {"learning_rate", 1e-3}};
  cfg["finetune"] = {{"policy", "enc_le3_plus_gar"}, {"epochs", 3}, {"batch_size", 16},
                     {"labels_per_class", 5}};
  return cfg;
}

void write_json(const fs::path& p, const json& j) {
  std::ofstream out(p);
  out << j.dump(1);
}

}  // namespace

TEST_CASE("usage errors exit with code 1") {
  CHECK(run_cli("definitely-not-a-command") == 1);
  CHECK(run_cli("") == 1);
  CHECK(run_cli("pretrain") == 1);                       // missing required flags
  CHECK(run_cli("pretrain --config /nope.json --out /tmp/cpcseq_cli_never") == 1);
}

TEST_CASE("pretrain then finetune then evaluate through the CLI") {
  TempDir dir;
  json cfg = base_config();
  write_json(dir.path / "cfg.json", cfg);
  const std::string cfg_path = (dir.path / "cfg.json").string();
  const std::string run_a = (dir.path / "a").string();

  REQUIRE(run_cli("pretrain --config " + cfg_path + " --out " + run_a) == 0);
  CHECK(fs::exists(run_a + "/checkpoint.bin"));
  CHECK(fs::exists(run_a + "/history.json"));

  SUBCASE("output directories are never silently overwritten") {
    CHECK(run_cli("pretrain --config " + cfg_path + " --out " + run_a) == 1);
    CHECK(run_cli("pretrain --config " + cfg_path + " --out " + run_a + " --force") == 0);
  }

  SUBCASE("finetune and evaluate complete and agree") {
    json ft = cfg;
    ft["finetune"]["checkpoint"] = run_a + "/checkpoint.bin";
    write_json(dir.path / "ft.json", ft);
    const std::string run_b = (dir.path / "b").string();
    REQUIRE(run_cli("finetune --config " + (dir.path / "ft.json").string() + " --out " + run_b) ==
            0);
    CHECK(fs::exists(run_b + "/classifier.bin"));
    CHECK(fs::exists(run_b + "/metrics.json"));
    CHECK(fs::exists(run_b + "/history.json"));

    json ev = cfg;
    ev["evaluate"] = {{"classifier", run_b + "/classifier.bin"}, {"split", "test"}};
    write_json(dir.path / "ev.json", ev);
    const std::string run_c = (dir.path / "c").string();
    REQUIRE(run_cli("evaluate --config " + (dir.path / "ev.json").string() + " --out " + run_c) ==
            0);

    json ft_metrics = json::parse(std::ifstream(run_b + "/metrics.json"));
    json ev_metrics = json::parse(std::ifstream(run_c + "/metrics.json"));
    CHECK(ft_metrics.at("test").at("mean_f1") == ev_metrics.at("metrics").at("mean_f1"));
  }

  SUBCASE("deterministic reruns are bit-identical") {
    const std::string d1 = (dir.path / "d1").string();
    const std::string d2 = (dir.path / "d2").string();
    REQUIRE(run_cli("pretrain --config " + cfg_path + " --out " + d1 + " --deterministic") == 0);
    REQUIRE(run_cli("pretrain --config " + cfg_path + " --out " + d2 + " --deterministic") == 0);
    CHECK(read_bytes(d1 + "/checkpoint.bin") == read_bytes(d2 + "/checkpoint.bin"));
    CHECK(read_bytes(d1 + "/history.json") == read_bytes(d2 + "/history.json"));
  }

  SUBCASE("the stored resolved config reproduces the run") {
    // re-execute from <out>/config.json and compare artifacts byte for byte
    const std::string replay = (dir.path / "replay").string();
    REQUIRE(run_cli("pretrain --config " + run_a + "/config.json --out " + replay) == 0);
    CHECK(read_bytes(run_a + "/checkpoint.bin") == read_bytes(replay + "/checkpoint.bin"));
    CHECK(read_bytes(run_a + "/history.json") == read_bytes(replay + "/history.json"));
  }
}

TEST_CASE("worker thread resolution honors the env cap and determinism") {
  nlohmann::json cfg;
  cfg["threads"] = 8;
  ::setenv("CPC_SEQ_THREADS", "2", 1);
  CHECK(run::resolve_threads(cfg) == 2);
  cfg["deterministic"] = true;
  CHECK(run::resolve_threads(cfg) == 1);
  ::unsetenv("CPC_SEQ_THREADS");
  cfg["deterministic"] = false;
  CHECK(run::resolve_threads(cfg) == 8);
}

TEST_CASE("data errors exit with code 2") {
  TempDir dir;
  json cfg = base_config();
  cfg["data"].erase("synthetic");
  cfg["data"]["path"] = (dir.path / "missing.csv").string();
  write_json(dir.path / "cfg.json", cfg);
  CHECK(run_cli("pretrain --config " + (dir.path / "cfg.json").string() + " --out " +
                (dir.path / "x").string()) == 2);
}

TEST_CASE("a non-finite loss exits with code 3 and keeps the partial history") {
  TempDir dir;
  // checkpoint whose weights are NaN: the first finetune batch goes non-finite
  json cfg = base_config();
  model::ModelConfig mc;
  mc.spec = model::EncoderSpec::from_json(cfg["encoder"]);
  mc.in_channels = 6;
  mc.k_horizon = 4;
  mc.window_len = 30;
  mc.dims.context = 16;
  Rng rng(1);
  model::CpcModel m = model::CpcModel::make(mc.spec, mc.in_channels, mc.k_horizon, rng, mc.dims);
  for (auto* p : m.params()) p->value.setConstant(std::numeric_limits<double>::quiet_NaN());
  json ck_cfg;
  ck_cfg["model"] = mc.to_json();
  model::Checkpoint ck = model::checkpoint_from_params(m.params(), ck_cfg);
  const std::string ck_path = (dir.path / "nan.bin").string();
  ck.save(ck_path);

  cfg["finetune"]["checkpoint"] = ck_path;  // frozen NaN features poison the loss
  write_json(dir.path / "cfg.json", cfg);
  const std::string out = (dir.path / "out").string();
  CHECK(run_cli("finetune --config " + (dir.path / "cfg.json").string() + " --out " + out) == 3);
  CHECK(fs::exists(out + "/history.json"));
}
