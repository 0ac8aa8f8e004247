#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "checkpoint.hpp"
#include "cpc.hpp"
#include "errors.hpp"
#include "rng.hpp"

using namespace cpcseq;
using namespace cpcseq::model;
namespace fs = std::filesystem;

namespace {

std::vector<char> read_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::vector<char>(std::istreambuf_iterator<char>(in), {});
}

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("cpcseq_ck_" + std::to_string(::getpid()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

CpcModel small_model(Rng& rng) {
  EncoderSpec spec;
  spec.family = EncoderFamily::Conv1d;
  spec.layer_widths = {4, 6, 8};
  CpcDims dims;
  dims.context = 8;
  return CpcModel::make(spec, 3, 3, rng, dims);
}

}  // namespace

TEST_CASE("checkpoint round trip restores every tensor bit-exactly") {
  TempDir dir;
  Rng rng(1);
  CpcModel m = small_model(rng);

  ModelConfig mc;
  mc.spec = m.encoder.spec;
  mc.in_channels = 3;
  mc.k_horizon = 3;
  mc.window_len = 16;
  mc.dims = m.dims;
  nlohmann::json cfg;
  cfg["model"] = mc.to_json();
  Checkpoint ck = checkpoint_from_params(m.params(), cfg);

  const auto p1 = dir.path / "a.bin";
  ck.save(p1.string());
  Checkpoint back = Checkpoint::load(p1.string());
  CHECK(back.version == kCheckpointVersion);
  CHECK(back.config == ck.config);
  REQUIRE(back.tensors.size() == ck.tensors.size());
  for (const auto& [name, blob] : ck.tensors) {
    REQUIRE(back.tensors.count(name) == 1);
    CHECK(back.tensors.at(name).dims == blob.dims);
    CHECK(back.tensors.at(name).data == blob.data);
  }

  SUBCASE("save -> load -> save produces byte-identical files") {
    const auto p2 = dir.path / "b.bin";
    back.save(p2.string());
    CHECK(read_bytes(p1) == read_bytes(p2));
  }

  SUBCASE("filling parameters reproduces the float32 values") {
    Rng rng2(99);
    CpcModel fresh = small_model(rng2);
    for (auto* p : fresh.params()) back.fill(*p);
    auto orig = m.params();
    auto restored = fresh.params();
    for (std::size_t i = 0; i < orig.size(); ++i) {
      // stored at float precision: compare after the same cast
      Eigen::MatrixXf a = orig[i]->value.cast<float>();
      Eigen::MatrixXf b = restored[i]->value.cast<float>();
      CHECK(a == b);
    }
  }
}

TEST_CASE("expected tensor names are present") {
  Rng rng(2);
  CpcModel m = small_model(rng);
  Checkpoint ck = checkpoint_from_params(m.params(), nlohmann::json::object());
  for (const char* name :
       {"enc.layer0.weight", "enc.layer0.bias", "enc.layer2.weight", "gar.layer0.w_ih",
        "gar.layer0.w_hh", "gar.layer0.b_ih", "gar.layer1.w_hh", "head1.weight", "head1.bias",
        "head3.weight"})
    CHECK(ck.has(name));
  // conv weights keep their logical rank
  CHECK(ck.tensors.at("enc.layer0.weight").dims == std::vector<std::uint64_t>{4, 3, 3});
  CHECK(ck.tensors.at("enc.layer0.bias").dims == std::vector<std::uint64_t>{4});
  CHECK(ck.tensors.at("head1.weight").dims == std::vector<std::uint64_t>{8, 8});
}

TEST_CASE("loading errors") {
  TempDir dir;
  SUBCASE("missing file") {
    CHECK_THROWS_AS(Checkpoint::load((dir.path / "nope.bin").string()), DataError);
  }
  SUBCASE("truncated file") {
    Rng rng(3);
    CpcModel m = small_model(rng);
    Checkpoint ck = checkpoint_from_params(m.params(), nlohmann::json::object());
    const auto p = dir.path / "trunc.bin";
    ck.save(p.string());
    auto bytes = read_bytes(p);
    std::ofstream out(p, std::ios::binary);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size() / 2));
    out.close();
    CHECK_THROWS_AS(Checkpoint::load(p.string()), DataError);
  }
  SUBCASE("shape mismatch on fill") {
    Rng rng(4);
    CpcModel m = small_model(rng);
    Checkpoint ck = checkpoint_from_params(m.params(), nlohmann::json::object());
    nn::Parameter wrong = nn::make_parameter("head1.weight", {4, 4});
    CHECK_THROWS_AS(ck.fill(wrong), DataError);
    nn::Parameter missing = nn::make_parameter("head9.weight", {8, 8});
    CHECK_THROWS_AS(ck.fill(missing), DataError);
  }
}
