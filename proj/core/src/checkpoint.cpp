#include "dga/checkpoint.hpp"

#include <array>
#include <bit>
#include <cstdint>
#include <fstream>
#include <limits>
#include <unordered_map>

namespace dga {
namespace {

constexpr std::array<char, 4> kMagic{'D', 'G', 'A', '1'};

void put_u32(std::ostream& os, std::uint64_t value) {
  if (value > std::numeric_limits<std::uint32_t>::max()) {
    throw IoError("checkpoint field exceeds 32 bits");
  }
  const auto v = static_cast<std::uint32_t>(value);
  const char bytes[4] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                         static_cast<char>((v >> 16) & 0xff), static_cast<char>((v >> 24) & 0xff)};
  os.write(bytes, 4);
}

std::uint32_t get_u32(std::istream& is) {
  unsigned char b[4];
  if (!is.read(reinterpret_cast<char*>(b), 4)) throw IoError("truncated checkpoint");
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

std::string get_string(std::istream& is) {
  const std::uint32_t n = get_u32(is);
  std::string s(n, '\0');
  if (n && !is.read(s.data(), n)) throw IoError("truncated checkpoint");
  return s;
}

void open_and_check_magic(std::ifstream& in, const std::filesystem::path& path) {
  in.open(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path.string());
  std::array<char, 4> magic{};
  if (!in.read(magic.data(), 4) || magic != kMagic) {
    throw IoError(path.string() + " is not a DGA1 checkpoint");
  }
}

}  // namespace

template <typename T>
void write_checkpoint(const std::filesystem::path& path, const Model<T>& model,
                      const KeyValues& extra) {
  KeyValues header;
  write_model_config(header, model.config());
  write_init_spec(header, model.init());
  for (const auto& [k, v] : extra.entries()) header.set(k, v);

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write checkpoint " + path.string());
  out.write(kMagic.data(), 4);
  const std::string text = header.to_text();
  put_u32(out, text.size());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));

  const auto params = model.parameters();
  put_u32(out, params.size());
  for (const auto& p : params) {
    put_u32(out, p.name.size());
    out.write(p.name.data(), static_cast<std::streamsize>(p.name.size()));
    put_u32(out, p.tensor->rank());
    for (std::size_t e : p.tensor->shape()) put_u32(out, e);
    for (T v : p.tensor->data()) put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
  }
  if (!out) throw IoError("failed writing checkpoint " + path.string());
}

KeyValues read_checkpoint_config(const std::filesystem::path& path) {
  std::ifstream in;
  open_and_check_magic(in, path);
  return KeyValues::parse(get_string(in), path.string());
}

template <typename T>
Model<T> read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in;
  open_and_check_magic(in, path);
  const KeyValues header = KeyValues::parse(get_string(in), path.string());
  Model<T> model(read_model_config(header), read_init_spec(header));

  std::unordered_map<std::string, Tensor<T>*> by_name;
  for (auto& p : model.parameters()) by_name.emplace(p.name, p.tensor);

  const std::uint32_t count = get_u32(in);
  if (count != by_name.size()) {
    throw IoError("checkpoint has " + std::to_string(count) + " parameter records, model expects " +
                  std::to_string(by_name.size()));
  }
  for (std::uint32_t r = 0; r < count; ++r) {
    const std::string name = get_string(in);
    auto it = by_name.find(name);
    if (it == by_name.end()) throw IoError("unexpected parameter '" + name + "' in checkpoint");
    Shape shape(get_u32(in));
    for (auto& e : shape) e = get_u32(in);
    Tensor<T>& dst = *it->second;
    if (shape != dst.shape()) {
      throw IoError("parameter '" + name + "' has shape " + to_string(shape) + ", expected " +
                    to_string(dst.shape()));
    }
    for (T& v : dst.data()) v = static_cast<T>(std::bit_cast<float>(get_u32(in)));
  }
  return model;
}

template void write_checkpoint(const std::filesystem::path&, const Model<float>&,
                               const KeyValues&);
template void write_checkpoint(const std::filesystem::path&, const Model<double>&,
                               const KeyValues&);
template Model<float> read_checkpoint(const std::filesystem::path&);
template Model<double> read_checkpoint(const std::filesystem::path&);

}  // namespace dga
