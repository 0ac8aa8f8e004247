#include "checkpoint.hpp"

#include <fstream>

#include "errors.hpp"

namespace cpcseq::model {

namespace {

template <typename T>
void write_pod(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& in, const std::string& path) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw DataError("checkpoint: truncated file: " + path);
  return v;
}

}  // namespace

void Checkpoint::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("checkpoint: cannot write " + path);
  write_pod<std::uint32_t>(out, version);
  const std::string cfg = config.dump();
  write_pod<std::uint64_t>(out, cfg.size());
  out.write(cfg.data(), static_cast<std::streamsize>(cfg.size()));
  write_pod<std::uint64_t>(out, tensors.size());
  for (const auto& [name, blob] : tensors) {
    write_pod<std::uint64_t>(out, name.size());
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    write_pod<std::uint64_t>(out, blob.dims.size());
    for (auto d : blob.dims) write_pod<std::uint64_t>(out, d);
    out.write(reinterpret_cast<const char*>(blob.data.data()),
              static_cast<std::streamsize>(blob.data.size() * sizeof(float)));
  }
  if (!out) throw DataError("checkpoint: write failed: " + path);
}

Checkpoint Checkpoint::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("checkpoint: cannot open " + path);
  Checkpoint ck;
  ck.version = read_pod<std::uint32_t>(in, path);
  if (ck.version != kCheckpointVersion)
    throw DataError("checkpoint: unsupported format version " + std::to_string(ck.version));
  const auto cfg_len = read_pod<std::uint64_t>(in, path);
  std::string cfg(cfg_len, '\0');
  in.read(cfg.data(), static_cast<std::streamsize>(cfg_len));
  if (!in) throw DataError("checkpoint: truncated config: " + path);
  ck.config = nlohmann::json::parse(cfg, nullptr, false);
  if (ck.config.is_discarded()) throw DataError("checkpoint: malformed config JSON: " + path);

  const auto count = read_pod<std::uint64_t>(in, path);
  for (std::uint64_t i = 0; i < count; ++i) {
    const auto name_len = read_pod<std::uint64_t>(in, path);
    std::string name(name_len, '\0');
    in.read(name.data(), static_cast<std::streamsize>(name_len));
    const auto rank = read_pod<std::uint64_t>(in, path);
    TensorBlob blob;
    std::uint64_t total = 1;
    for (std::uint64_t r = 0; r < rank; ++r) {
      blob.dims.push_back(read_pod<std::uint64_t>(in, path));
      total *= blob.dims.back();
    }
    blob.data.resize(total);
    in.read(reinterpret_cast<char*>(blob.data.data()),
            static_cast<std::streamsize>(total * sizeof(float)));
    if (!in) throw DataError("checkpoint: truncated tensor '" + name + "': " + path);
    ck.tensors.emplace(std::move(name), std::move(blob));
  }
  return ck;
}

void Checkpoint::put(const nn::Parameter& p) {
  TensorBlob blob;
  blob.dims = p.dims;
  blob.data.reserve(static_cast<std::size_t>(p.value.size()));
  for (long r = 0; r < p.value.rows(); ++r)
    for (long c = 0; c < p.value.cols(); ++c)
      blob.data.push_back(static_cast<float>(p.value(r, c)));
  tensors[p.name] = std::move(blob);
}

void Checkpoint::fill(nn::Parameter& p) const {
  auto it = tensors.find(p.name);
  if (it == tensors.end()) throw DataError("checkpoint: missing tensor '" + p.name + "'");
  const TensorBlob& blob = it->second;
  if (blob.dims != p.dims)
    throw DataError("checkpoint: tensor '" + p.name + "' has mismatched shape");
  std::size_t i = 0;
  for (long r = 0; r < p.value.rows(); ++r)
    for (long c = 0; c < p.value.cols(); ++c) p.value(r, c) = static_cast<double>(blob.data[i++]);
}

Checkpoint checkpoint_from_params(const std::vector<nn::Parameter*>& params,
                                  nlohmann::json config) {
  Checkpoint ck;
  ck.config = std::move(config);
  for (const auto* p : params) ck.put(*p);
  return ck;
}

}  // namespace cpcseq::model
