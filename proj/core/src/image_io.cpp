#include "dga/image_io.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <string>

namespace dga {
namespace {

// Next whitespace-delimited header token, skipping '#' comments.
std::string header_token(std::istream& in, const std::filesystem::path& path) {
  std::string tok;
  int c;
  while ((c = in.get()) != EOF) {
    if (c == '#') {
      while ((c = in.get()) != EOF && c != '\n') {
      }
      continue;
    }
    if (std::isspace(c)) {
      if (!tok.empty()) return tok;
      continue;
    }
    tok.push_back(static_cast<char>(c));
  }
  if (tok.empty()) throw IoError("truncated netpbm header in " + path.string());
  return tok;
}

std::size_t header_number(std::istream& in, const std::filesystem::path& path) {
  const std::string tok = header_token(in, path);
  if (tok.empty() || !std::all_of(tok.begin(), tok.end(), ::isdigit)) {
    throw IoError("bad netpbm header field '" + tok + "' in " + path.string());
  }
  return std::stoul(tok);
}

}  // namespace

Image read_pnm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open image " + path.string());
  char magic[2] = {0, 0};
  in.read(magic, 2);
  Image img;
  if (magic[0] == 'P' && magic[1] == '5') {
    img.channels = 1;
  } else if (magic[0] == 'P' && magic[1] == '6') {
    img.channels = 3;
  } else {
    throw IoError("unsupported image magic in " + path.string() + " (expected P5 or P6)");
  }
  img.width = header_number(in, path);
  img.height = header_number(in, path);
  const std::size_t maxval = header_number(in, path);
  if (img.width == 0 || img.height == 0 || maxval == 0 || maxval > 65535) {
    throw IoError("invalid netpbm dimensions or maxval in " + path.string());
  }
  img.maxval = static_cast<std::uint32_t>(maxval);
  // header_number consumed exactly one whitespace byte after maxval.
  const std::size_t n = img.width * img.height * img.channels;
  const std::size_t bytes_per = img.maxval > 255 ? 2 : 1;
  std::vector<unsigned char> raw(n * bytes_per);
  if (!in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()))) {
    throw IoError("truncated raster in " + path.string());
  }
  img.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    img.samples[i] = bytes_per == 1
                         ? raw[i]
                         : static_cast<std::uint16_t>((raw[2 * i] << 8) | raw[2 * i + 1]);
    if (img.samples[i] > img.maxval) {
      throw IoError("sample exceeds maxval in " + path.string());
    }
  }
  return img;
}

void write_pnm(const std::filesystem::path& path, const Image& image) {
  if (image.channels != 1 && image.channels != 3) {
    throw IoError("netpbm supports 1 or 3 channels, got " + std::to_string(image.channels));
  }
  if (image.maxval == 0 || image.maxval > 65535 ||
      image.samples.size() != image.width * image.height * image.channels) {
    throw IoError("inconsistent image for " + path.string());
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write image " + path.string());
  out << (image.channels == 1 ? "P5" : "P6") << '\n'
      << image.width << ' ' << image.height << '\n'
      << image.maxval << '\n';
  std::vector<unsigned char> raw;
  raw.reserve(image.samples.size() * 2);
  for (std::uint16_t s : image.samples) {
    if (image.maxval > 255) raw.push_back(static_cast<unsigned char>(s >> 8));
    raw.push_back(static_cast<unsigned char>(s & 0xff));
  }
  out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (!out) throw IoError("failed writing image " + path.string());
}

Tensor<float> to_unit_tensor(const Image& image) {
  Tensor<float> t(Shape{image.height, image.width, image.channels});
  const float inv = 1.0f / static_cast<float>(image.maxval);
  for (std::size_t i = 0; i < image.samples.size(); ++i)
    t[i] = static_cast<float>(image.samples[i]) * inv;
  return t;
}

template <typename T>
Image from_unit_tensor(const Tensor<T>& tensor, std::uint32_t maxval) {
  if (tensor.rank() != 3 || (tensor.extent(2) != 1 && tensor.extent(2) != 3)) {
    throw ShapeError("image tensor must be H x W x 1 or H x W x 3, got " +
                     to_string(tensor.shape()));
  }
  Image img;
  img.height = tensor.extent(0);
  img.width = tensor.extent(1);
  img.channels = tensor.extent(2);
  img.maxval = maxval;
  img.samples.resize(tensor.size());
  for (std::size_t i = 0; i < tensor.size(); ++i) {
    const double v = std::clamp(static_cast<double>(tensor[i]), 0.0, 1.0);
    img.samples[i] = static_cast<std::uint16_t>(std::lround(v * maxval));
  }
  return img;
}

template Image from_unit_tensor(const Tensor<float>&, std::uint32_t);
template Image from_unit_tensor(const Tensor<double>&, std::uint32_t);

}  // namespace dga
