#include "sltrl/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "sltrl/errors.hpp"

namespace sltrl {
namespace {

static_assert(std::endian::native == std::endian::little,
              "checkpoint writer assumes a little-endian host");

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

std::uint32_t get_u32(const char* p) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(p[i])) << (8 * i);
  return v;
}

std::string read_all(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

void write_file_atomic(const std::filesystem::path& path, const std::string& contents) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + tmp.string() + " for writing");
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) throw IoError("write failed for " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot rename " + tmp.string() + " -> " + path.string() + ": " + ec.message());
}

nlohmann::json arch_to_json(const ArchSpec& arch) {
  return {{"kind", to_string(arch.kind)},
          {"widths", arch.widths},
          {"embedding_dim", arch.embedding_dim},
          {"grid_side", arch.grid_side},
          {"output_init_gain", arch.output_init_gain}};
}

ArchSpec arch_from_json(const nlohmann::json& j) {
  ArchSpec a;
  try {
    a.kind = arch_kind_from_string(j.at("kind").get<std::string>());
    a.widths = j.at("widths").get<std::vector<int>>();
    a.embedding_dim = j.value("embedding_dim", a.embedding_dim);
    a.grid_side = j.at("grid_side").get<int>();
    a.output_init_gain = j.value("output_init_gain", a.output_init_gain);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("invalid architecture descriptor: ") + e.what());
  }
  a.validate();
  return a;
}

std::filesystem::path sidecar_path(const std::filesystem::path& bin_path) {
  std::filesystem::path p = bin_path;
  p.replace_extension(".json");
  return p;
}

void save_checkpoint(const std::filesystem::path& path, const PolicyParams& params,
                     std::int64_t step) {
  std::string buf;
  buf.reserve(16 + params.theta.size() * 8);
  buf.append(kCheckpointMagic, 8);
  put_u32(buf, kCheckpointVersion);
  put_u32(buf, static_cast<std::uint32_t>(params.theta.size()));
  for (double v : params.theta) {
    const auto bits = std::bit_cast<std::uint64_t>(v);
    for (int i = 0; i < 8; ++i) buf.push_back(static_cast<char>((bits >> (8 * i)) & 0xFF));
  }
  write_file_atomic(path, buf);

  nlohmann::json side = {{"version", kCheckpointVersion},
                         {"param_count", params.theta.size()},
                         {"step", step},
                         {"arch", arch_to_json(params.arch)}};
  write_file_atomic(sidecar_path(path), side.dump(2) + "\n");
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  const std::string buf = read_all(path);
  if (buf.size() < 16 || std::memcmp(buf.data(), kCheckpointMagic, 8) != 0) {
    throw IoError(path.string() + " is not a checkpoint file");
  }
  const std::uint32_t version = get_u32(buf.data() + 8);
  const std::uint32_t count = get_u32(buf.data() + 12);
  if (version != kCheckpointVersion) {
    throw IoError(path.string() + ": unsupported checkpoint version " + std::to_string(version));
  }
  if (buf.size() != 16 + static_cast<std::size_t>(count) * 8) {
    throw IoError(path.string() + ": truncated checkpoint");
  }
  nlohmann::json side;
  try {
    side = nlohmann::json::parse(read_all(sidecar_path(path)));
  } catch (const nlohmann::json::parse_error& e) {
    throw IoError(sidecar_path(path).string() + ": " + e.what());
  }
  Checkpoint ck;
  ck.params.arch = arch_from_json(side.at("arch"));
  ck.step = side.value("step", std::int64_t{0});
  ck.params.theta.resize(count);
  for (std::uint32_t k = 0; k < count; ++k) {
    std::uint64_t bits = 0;
    const char* p = buf.data() + 16 + static_cast<std::size_t>(k) * 8;
    for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(p[i])) << (8 * i);
    ck.params.theta[k] = std::bit_cast<double>(bits);
  }
  if (ck.params.arch.param_count() != count) {
    throw ConfigError(path.string() + ": parameter count does not match architecture");
  }
  return ck;
}

}  // namespace sltrl
