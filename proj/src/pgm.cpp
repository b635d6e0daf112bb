#include "lsdnn/pgm.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace lsdnn {

namespace {

// Next whitespace-delimited header token, skipping '#' comments.
std::string next_token(std::istream& in) {
  std::string tok;
  int c;
  while ((c = in.get()) != EOF) {
    if (c == '#') {
      while ((c = in.get()) != EOF && c != '\n') {
      }
      continue;
    }
    if (std::isspace(c)) {
      if (!tok.empty()) break;
      continue;
    }
    tok.push_back(static_cast<char>(c));
  }
  return tok;
}

std::size_t parse_size(const std::string& tok, const std::filesystem::path& path) {
  if (tok.empty() || !std::all_of(tok.begin(), tok.end(), ::isdigit))
    throw FormatError("malformed PGM header: " + path.string());
  return std::stoul(tok);
}

}  // namespace

GrayImage read_pgm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open: " + path.string());
  const std::string magic = next_token(in);
  if (magic != "P5" && magic != "P2") throw FormatError("not a PGM file: " + path.string());
  GrayImage img;
  img.width = parse_size(next_token(in), path);
  img.height = parse_size(next_token(in), path);
  const std::size_t maxval = parse_size(next_token(in), path);
  if (img.width == 0 || img.height == 0 || maxval == 0 || maxval > 65535)
    throw FormatError("unsupported PGM geometry or maxval: " + path.string());
  img.maxval = static_cast<std::uint32_t>(maxval);
  const std::size_t n = img.width * img.height;
  img.pixels.resize(n);

  if (magic == "P2") {
    for (std::size_t i = 0; i < n; ++i) {
      const std::string tok = next_token(in);
      if (tok.empty()) throw FormatError("truncated PGM: " + path.string());
      img.pixels[i] = static_cast<std::uint16_t>(std::min<std::size_t>(parse_size(tok, path), maxval));
    }
    return img;
  }
  const bool wide = maxval > 255;
  std::vector<unsigned char> raw(n * (wide ? 2 : 1));
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (in.gcount() != static_cast<std::streamsize>(raw.size()))
    throw FormatError("truncated PGM payload: " + path.string());
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint16_t v = wide ? static_cast<std::uint16_t>((raw[2 * i] << 8) | raw[2 * i + 1]) : raw[i];
    img.pixels[i] = std::min<std::uint16_t>(v, static_cast<std::uint16_t>(maxval));
  }
  return img;
}

void write_pgm(const std::filesystem::path& path, const GrayImage& image) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot open for writing: " + path.string());
  out << "P5\n" << image.width << ' ' << image.height << '\n' << image.maxval << '\n';
  const bool wide = image.maxval > 255;
  for (std::uint16_t v : image.pixels) {
    if (wide) out.put(static_cast<char>(v >> 8));
    out.put(static_cast<char>(v & 0xff));
  }
  if (!out) throw FormatError("write failed: " + path.string());
}

void export_pgm16(const std::filesystem::path& path, const RealField& field) {
  const auto [lo_it, hi_it] = std::minmax_element(field.values.begin(), field.values.end());
  const double lo = *lo_it, hi = *hi_it;
  const double range = hi - lo;
  GrayImage img;
  img.width = field.nx();
  img.height = field.ny();
  img.maxval = 65535;
  img.pixels.resize(field.size());
  for (std::size_t i = 0; i < field.size(); ++i) {
    const double t = range > 0.0 ? (field.values[i] - lo) / range : 0.0;
    img.pixels[i] = static_cast<std::uint16_t>(std::lround(t * 65535.0));
  }
  write_pgm(path, img);
  std::ofstream side(path.string() + ".scale.txt", std::ios::trunc);
  side << std::setprecision(17) << "min=" << lo << "\nmax=" << hi << "\nmaxval=65535\n";
}

std::vector<double> resample_bilinear(const GrayImage& image, std::size_t ny, std::size_t nx) {
  std::vector<double> out(ny * nx);
  const auto src = [&](std::size_t y, std::size_t x) {
    return static_cast<double>(image.pixels[y * image.width + x]);
  };
  const auto coord = [](std::size_t i, std::size_t n_out, std::size_t n_in) {
    return n_out > 1 ? static_cast<double>(i) * static_cast<double>(n_in - 1) /
                           static_cast<double>(n_out - 1)
                     : 0.0;
  };
  for (std::size_t oy = 0; oy < ny; ++oy) {
    const double y = coord(oy, ny, image.height);
    const auto y0 = std::min(static_cast<std::size_t>(std::floor(y)), image.height - 1);
    const std::size_t y1 = std::min(y0 + 1, image.height - 1);
    const double ty = y - static_cast<double>(y0);
    for (std::size_t ox = 0; ox < nx; ++ox) {
      const double x = coord(ox, nx, image.width);
      const auto x0 = std::min(static_cast<std::size_t>(std::floor(x)), image.width - 1);
      const std::size_t x1 = std::min(x0 + 1, image.width - 1);
      const double tx = x - static_cast<double>(x0);
      const double top = src(y0, x0) * (1 - tx) + src(y0, x1) * tx;
      const double bottom = src(y1, x0) * (1 - tx) + src(y1, x1) * tx;
      out[oy * nx + ox] = top * (1 - ty) + bottom * ty;
    }
  }
  return out;
}

}  // namespace lsdnn
