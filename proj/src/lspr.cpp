#include "lsdnn/lspr.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <vector>

namespace lsdnn {

static_assert(std::endian::native == std::endian::little,
              "LSPR I/O assumes a little-endian host");

namespace {

struct Header {
  LsprType type;
  std::uint32_t ny, nx;
  double dy, dx;
};

std::size_t scalar_count(LsprType t) {
  return (t == LsprType::Complex64 || t == LsprType::Complex128) ? 2 : 1;
}

std::size_t scalar_bytes(LsprType t) {
  return (t == LsprType::Real32 || t == LsprType::Complex64) ? 4 : 8;
}

template <class T>
void put(std::vector<char>& buf, T v) {
  const auto* p = reinterpret_cast<const char*>(&v);
  buf.insert(buf.end(), p, p + sizeof(T));
}

template <class T>
T get(const std::vector<char>& buf, std::size_t& pos) {
  T v;
  std::memcpy(&v, buf.data() + pos, sizeof(T));
  pos += sizeof(T);
  return v;
}

void write_file(const std::filesystem::path& path, const Grid2D& grid, LsprType type,
                const std::vector<double>& scalars) {
  std::vector<char> buf;
  buf.reserve(kLsprHeaderBytes + scalars.size() * scalar_bytes(type));
  buf.insert(buf.end(), {'L', 'S', 'P', 'R'});
  put<std::uint32_t>(buf, kLsprVersion);
  put<std::uint8_t>(buf, static_cast<std::uint8_t>(type));
  buf.insert(buf.end(), 3, '\0');
  put<std::uint32_t>(buf, static_cast<std::uint32_t>(grid.ny));
  put<std::uint32_t>(buf, static_cast<std::uint32_t>(grid.nx));
  put<double>(buf, grid.dy);
  put<double>(buf, grid.dx);
  if (scalar_bytes(type) == 4)
    for (double v : scalars) put<float>(buf, static_cast<float>(v));
  else
    for (double v : scalars) put<double>(buf, v);

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot open for writing: " + path.string());
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out) throw FormatError("write failed: " + path.string());
}

std::vector<char> read_all(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open: " + path.string());
  return std::vector<char>(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

Header parse_header(const std::vector<char>& buf, const std::filesystem::path& path) {
  if (buf.size() < kLsprHeaderBytes) throw FormatError("truncated LSPR header: " + path.string());
  if (std::memcmp(buf.data(), "LSPR", 4) != 0) throw FormatError("bad LSPR magic: " + path.string());
  std::size_t pos = 4;
  const auto version = get<std::uint32_t>(buf, pos);
  if (version != kLsprVersion) throw FormatError("unsupported LSPR version: " + path.string());
  const auto type = get<std::uint8_t>(buf, pos);
  if (type > 3) throw FormatError("unknown LSPR dtype: " + path.string());
  pos += 3;
  Header h;
  h.type = static_cast<LsprType>(type);
  h.ny = get<std::uint32_t>(buf, pos);
  h.nx = get<std::uint32_t>(buf, pos);
  h.dy = get<double>(buf, pos);
  h.dx = get<double>(buf, pos);
  const std::size_t expected = kLsprHeaderBytes + static_cast<std::size_t>(h.ny) * h.nx *
                                                      scalar_count(h.type) * scalar_bytes(h.type);
  if (buf.size() < expected) throw FormatError("truncated LSPR payload: " + path.string());
  if (buf.size() > expected) throw FormatError("trailing bytes after LSPR payload: " + path.string());
  return h;
}

std::vector<double> read_scalars(const std::vector<char>& buf, const Header& h,
                                 const std::filesystem::path& path) {
  const std::size_t n = static_cast<std::size_t>(h.ny) * h.nx * scalar_count(h.type);
  std::vector<double> out(n);
  std::size_t pos = kLsprHeaderBytes;
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = scalar_bytes(h.type) == 4 ? static_cast<double>(get<float>(buf, pos))
                                       : get<double>(buf, pos);
    if (!std::isfinite(out[i])) throw FormatError("non-finite value in " + path.string());
  }
  return out;
}

Grid2D header_grid(const Header& h) { return {h.nx, h.ny, h.dx, h.dy}; }

}  // namespace

void save_field(const std::filesystem::path& path, const RealField& field, LsprType type) {
  if (type != LsprType::Real32 && type != LsprType::Real64)
    throw UsageError("real fields must be stored with a real dtype");
  require_finite(field.values, "save_field");
  write_file(path, field.grid, type, field.values);
}

void save_field(const std::filesystem::path& path, const ComplexField& field, LsprType type) {
  if (type != LsprType::Complex64 && type != LsprType::Complex128)
    throw UsageError("complex fields must be stored with a complex dtype");
  std::vector<double> scalars;
  scalars.reserve(field.size() * 2);
  for (const Complex& v : field.values) {
    if (!std::isfinite(v.real()) || !std::isfinite(v.imag()))
      throw DegenerateError("save_field: non-finite value");
    scalars.push_back(v.real());
    scalars.push_back(v.imag());
  }
  write_file(path, field.grid, type, scalars);
}

RealField load_real_field(const std::filesystem::path& path) {
  const auto buf = read_all(path);
  const Header h = parse_header(buf, path);
  if (scalar_count(h.type) != 1) throw FormatError("expected a real LSPR field: " + path.string());
  return RealField(header_grid(h), read_scalars(buf, h, path));
}

ComplexField load_complex_field(const std::filesystem::path& path) {
  const auto buf = read_all(path);
  const Header h = parse_header(buf, path);
  const auto scalars = read_scalars(buf, h, path);
  ComplexField f(header_grid(h));
  if (scalar_count(h.type) == 1) {
    for (std::size_t i = 0; i < f.size(); ++i) f.values[i] = Complex(scalars[i], 0.0);
  } else {
    for (std::size_t i = 0; i < f.size(); ++i)
      f.values[i] = Complex(scalars[2 * i], scalars[2 * i + 1]);
  }
  return f;
}

LsprType peek_field_type(const std::filesystem::path& path) {
  return parse_header(read_all(path), path).type;
}

}  // namespace lsdnn
