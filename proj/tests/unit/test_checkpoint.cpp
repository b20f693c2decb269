#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "sltrl/checkpoint.hpp"
#include "sltrl/errors.hpp"
#include "support.hpp"

using namespace sltrl;
namespace fs = std::filesystem;

namespace {
fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "sltrl_ckpt_test";
  fs::create_directories(dir);
  return dir / name;
}
}  // namespace

TEST_CASE("checkpoint round trip is bit-exact") {
  const EnvSpec spec = testsupport::small_spec(5);
  for (const ArchSpec& arch : {ArchSpec::mlp_for(spec, {16, 8}), ArchSpec::conv_for(spec, {4, 8}, 16)}) {
    const PolicyParams p = init_params(arch, 3);
    const fs::path path = scratch("a.bin");
    save_checkpoint(path, p, 1234);
    CHECK(fs::exists(sidecar_path(path)));
    const Checkpoint c = load_checkpoint(path);
    CHECK(c.step == 1234);
    CHECK(c.params.arch == p.arch);
    CHECK(c.params.theta == p.theta);
    CHECK(fs::file_size(path) == 16 + 8 * p.size());
  }
}

TEST_CASE("corrupt and missing checkpoints are reported") {
  CHECK_THROWS_AS(load_checkpoint(scratch("missing.bin")), IoError);
  const EnvSpec spec = testsupport::small_spec(4);
  const PolicyParams p = testsupport::small_mlp(spec, 1);
  const fs::path path = scratch("b.bin");
  save_checkpoint(path, p, 1);
  fs::resize_file(path, fs::file_size(path) - 8);
  CHECK_THROWS_AS(load_checkpoint(path), IoError);
  save_checkpoint(path, p, 1);
  {
    std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(0);
    f.write("XXXX", 4);
  }
  CHECK_THROWS_AS(load_checkpoint(path), IoError);
}

TEST_CASE("architecture json round trip") {
  ArchSpec a = ArchSpec::conv_for(testsupport::small_spec(5), {4, 8}, 32);
  a.output_init_gain = 0.25;
  CHECK(arch_from_json(arch_to_json(a)) == a);
  CHECK_THROWS_AS(arch_from_json(nlohmann::json{{"kind", "rnn"}}), ConfigError);
}

TEST_CASE("atomic write leaves no temporary files") {
  const fs::path path = scratch("c.txt");
  write_file_atomic(path, "hello\n");
  std::ifstream in(path);
  std::string s;
  std::getline(in, s);
  CHECK(s == "hello");
  for (const auto& e : fs::directory_iterator(path.parent_path())) {
    CHECK(e.path().filename().string().find(".tmp") == std::string::npos);
  }
}
