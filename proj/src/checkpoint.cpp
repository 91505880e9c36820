#include "blendnet/checkpoint.hpp"

#include <algorithm>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>

#include "blendnet/common.hpp"

namespace blendnet {
namespace {

constexpr char kMagic[8] = {'B', 'L', 'N', 'D', 'C', 'K', 'P', 'T'};
constexpr uint8_t kVersion = 1;

// The build targets little-endian hosts only; serialize by memcpy and verify
// the assumption once at runtime rather than byte-swapping everywhere.
void check_little_endian() {
  const uint32_t probe = 1;
  uint8_t first;
  std::memcpy(&first, &probe, 1);
  check(first == 1, "checkpoint IO requires a little-endian host");
}

void write_u32(std::ostream& os, uint32_t v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

uint32_t read_u32(std::istream& is, const std::string& what) {
  uint32_t v = 0;
  is.read(reinterpret_cast<char*>(&v), sizeof v);
  check(is.good(), "checkpoint: truncated file while reading ", what);
  return v;
}

}  // namespace

void save_checkpoint(const std::string& path, const NamedTensors& params) {
  check_little_endian();
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  check(os.is_open(), "checkpoint: cannot open ", path, " for writing");
  os.write(kMagic, sizeof kMagic);
  os.write(reinterpret_cast<const char*>(&kVersion), 1);
  for (const auto& [name, t] : params) {
    check(t.defined(), "checkpoint: undefined tensor for record ", name);
    write_u32(os, static_cast<uint32_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    write_u32(os, static_cast<uint32_t>(t.ndim()));
    for (size_t d : t.shape()) write_u32(os, static_cast<uint32_t>(d));
    os.write(reinterpret_cast<const char*>(t.data()),
             static_cast<std::streamsize>(t.numel() * sizeof(double)));
  }
  os.flush();
  check(os.good(), "checkpoint: write failed for ", path);
}

NamedTensors load_checkpoint(const std::string& path) {
  check_little_endian();
  std::ifstream is(path, std::ios::binary);
  check(is.is_open(), "checkpoint: cannot open ", path);
  char magic[8];
  is.read(magic, sizeof magic);
  check(is.good() && std::memcmp(magic, kMagic, sizeof magic) == 0,
        "checkpoint: bad magic in ", path);
  uint8_t version = 0;
  is.read(reinterpret_cast<char*>(&version), 1);
  check(is.good(), "checkpoint: truncated header in ", path);
  check(version == kVersion, "checkpoint: unsupported version ", int(version));

  NamedTensors out;
  while (true) {
    uint32_t name_len = 0;
    is.read(reinterpret_cast<char*>(&name_len), sizeof name_len);
    if (is.eof()) break;
    check(is.good(), "checkpoint: truncated record header in ", path);
    std::string name(name_len, '\0');
    is.read(name.data(), name_len);
    check(is.good(), "checkpoint: truncated name in ", path);
    const uint32_t rank = read_u32(is, "rank of " + name);
    check(rank <= 8, "checkpoint: implausible rank ", rank, " for record ", name);
    std::vector<size_t> shape(rank);
    size_t numel = 1;
    for (uint32_t i = 0; i < rank; ++i) {
      shape[i] = read_u32(is, "shape of " + name);
      numel *= shape[i];
    }
    std::vector<double> data(numel);
    is.read(reinterpret_cast<char*>(data.data()),
            static_cast<std::streamsize>(numel * sizeof(double)));
    check(is.good() || (is.eof() && is.gcount() == std::streamsize(numel * sizeof(double))),
          "checkpoint: truncated data for record ", name);
    out.emplace_back(name, Tensor::from_data(std::move(shape), std::move(data)));
  }
  return out;
}

void load_checkpoint_into(const std::string& path, const NamedTensors& params) {
  NamedTensors loaded = load_checkpoint(path);
  std::map<std::string, Tensor> by_name;
  for (auto& [name, t] : loaded) {
    check(by_name.emplace(name, t).second, "checkpoint: duplicate record ", name);
  }
  for (const auto& [name, dst] : params) {
    auto it = by_name.find(name);
    check(it != by_name.end(), "checkpoint: record ", name, " missing from ", path);
    const Tensor& src = it->second;
    check(src.shape() == dst.shape(), "checkpoint: shape mismatch for record ", name,
          ": file has ", shape_str(src.shape()), ", model expects ", shape_str(dst.shape()));
    Tensor target = dst;  // same storage, non-const handle
    std::copy(src.values().begin(), src.values().end(), target.values().begin());
  }
}

}  // namespace blendnet
