#include "ccd/tensorcore/checkpoint.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include "ccd/common/error.hpp"

namespace ccd::tc {

namespace {

constexpr std::array<char, 8> kMagic = {'C', 'C', 'D', 'C', 'K', 'P', 'T', '\0'};

template <typename U>
void put_le(std::ostream& out, U v) {
  std::array<char, sizeof(U)> bytes{};
  for (std::size_t i = 0; i < sizeof(U); ++i) bytes[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  out.write(bytes.data(), bytes.size());
}

template <typename U>
U get_le(std::istream& in) {
  std::array<unsigned char, sizeof(U)> bytes{};
  in.read(reinterpret_cast<char*>(bytes.data()), bytes.size());
  if (!in) throw DataError("checkpoint truncated");
  U v = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(bytes[i]) << (8 * i);
  return v;
}

}  // namespace

void write_checkpoint(std::ostream& out, const TensorTable& table) {
  out.write(kMagic.data(), kMagic.size());
  put_le<std::uint32_t>(out, kCheckpointVersion);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(table.size()));
  for (const auto& [name, t] : table) {
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(t.rank()));
    for (std::size_t d : t.shape()) put_le<std::uint64_t>(out, d);
    for (double x : t.values()) put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(x));
  }
  if (!out) throw DataError("failed writing checkpoint");
}

TensorTable read_checkpoint(std::istream& in) {
  std::array<char, 8> magic{};
  in.read(magic.data(), magic.size());
  if (!in || magic != kMagic) throw DataError("not a checkpoint file (bad magic)");
  const auto version = get_le<std::uint32_t>(in);
  if (version != kCheckpointVersion) {
    throw DataError("unsupported checkpoint version " + std::to_string(version));
  }
  const auto count = get_le<std::uint32_t>(in);
  TensorTable table;
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto name_len = get_le<std::uint32_t>(in);
    std::string name(name_len, '\0');
    in.read(name.data(), name_len);
    const auto rank = get_le<std::uint32_t>(in);
    if (rank > Shape::kMaxRank) throw DataError("checkpoint tensor '" + name + "' has rank " + std::to_string(rank));
    std::vector<std::size_t> shape(rank);
    std::size_t n = 1;
    for (auto& d : shape) {
      d = static_cast<std::size_t>(get_le<std::uint64_t>(in));
      n *= d;
    }
    std::vector<double> values(n);
    for (double& x : values) x = std::bit_cast<double>(get_le<std::uint64_t>(in));
    if (!table.emplace(name, Tensor(Shape(shape), std::move(values))).second) {
      throw DataError("checkpoint has duplicate tensor '" + name + "'");
    }
  }
  return table;
}

void save_checkpoint(const std::filesystem::path& path, const TensorTable& table) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open " + path.string() + " for writing");
  write_checkpoint(out, table);
}

TensorTable load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint " + path.string());
  return read_checkpoint(in);
}

TensorTable snapshot(const std::vector<Parameter*>& params, const std::string& prefix) {
  TensorTable t;
  for (const Parameter* p : params) {
    if (!t.emplace(prefix + p->name, p->value).second) {
      throw Error("duplicate parameter name '" + prefix + p->name + "'");
    }
  }
  return t;
}

void restore(const std::vector<Parameter*>& params, const TensorTable& table, const std::string& prefix) {
  for (Parameter* p : params) {
    auto it = table.find(prefix + p->name);
    if (it == table.end()) throw DataError("checkpoint lacks tensor '" + prefix + p->name + "'");
    if (!it->second.same_shape(p->value)) {
      throw ShapeError("checkpoint tensor '" + prefix + p->name + "' has shape " +
                       shape_string(it->second.shape()) + ", model expects " + shape_string(p->value.shape()));
    }
    p->value = it->second;
  }
}

}  // namespace ccd::tc
