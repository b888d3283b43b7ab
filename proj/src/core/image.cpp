#include "core/image.hpp"

#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <vector>

#include "core/error.hpp"

namespace agman {

namespace {

int read_pnm_token(std::istream& in) {
  // Skips whitespace and '#' comments, then reads one unsigned integer.
  int c = in.get();
  for (;;) {
    while (c != EOF && std::isspace(c)) c = in.get();
    if (c == '#') {
      while (c != EOF && c != '\n') c = in.get();
      continue;
    }
    break;
  }
  if (c == EOF || !std::isdigit(c)) throw ParseError("PPM: expected integer token");
  int v = 0;
  while (c != EOF && std::isdigit(c)) {
    v = v * 10 + (c - '0');
    c = in.get();
  }
  return v;
}

}  // namespace

Tensor read_ppm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open image file: " + path);
  char magic[2];
  in.read(magic, 2);
  if (!in || magic[0] != 'P' || magic[1] != '6') throw ParseError("not a binary PPM (P6) file: " + path);
  const int w = read_pnm_token(in);
  const int h = read_pnm_token(in);
  const int maxval = read_pnm_token(in);
  if (maxval != 255) throw ParseError("PPM: only maxval 255 supported: " + path);
  if (w <= 0 || h <= 0) throw ParseError("PPM: bad dimensions in " + path);
  std::vector<unsigned char> raw(static_cast<size_t>(w) * h * 3);
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (!in) throw ParseError("PPM: truncated pixel data in " + path);
  Tensor img({3, h, w});
  for (long y = 0; y < h; ++y)
    for (long x = 0; x < w; ++x)
      for (long ch = 0; ch < 3; ++ch)
        img.at(ch, y, x) = static_cast<double>(raw[static_cast<size_t>((y * w + x) * 3 + ch)]) / 255.0;
  return img;
}

void write_ppm(const std::string& path, const Tensor& image) {
  if (image.ndim() != 3 || image.dim(0) != 3) throw ArgumentError("write_ppm: image must be [3,H,W]");
  const long h = image.dim(1), w = image.dim(2);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write image file: " + path);
  out << "P6\n" << w << " " << h << "\n255\n";
  std::vector<unsigned char> raw(static_cast<size_t>(w) * h * 3);
  for (long y = 0; y < h; ++y)
    for (long x = 0; x < w; ++x)
      for (long ch = 0; ch < 3; ++ch) {
        double v = image.at(ch, y, x);
        v = v < 0 ? 0 : (v > 1 ? 1 : v);
        raw[static_cast<size_t>((y * w + x) * 3 + ch)] = static_cast<unsigned char>(std::lround(v * 255.0));
      }
  out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (!out) throw IoError("short write to image file: " + path);
}

Tensor normalize_image(const Tensor& image, const std::array<double, 3>& mean, const std::array<double, 3>& std_dev) {
  Tensor out(image.shape());
  const long hw = image.dim(1) * image.dim(2);
  for (long ch = 0; ch < 3; ++ch)
    for (long p = 0; p < hw; ++p) out[ch * hw + p] = (image[ch * hw + p] - mean[ch]) / std_dev[ch];
  return out;
}

}  // namespace agman
