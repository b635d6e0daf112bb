#include "lsdnn/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <numeric>
#include <sstream>

#include "lsdnn/noise.hpp"
#include "lsdnn/pgm.hpp"

namespace lsdnn {

namespace fs = std::filesystem;

std::vector<const PhaseItem*> PhaseDataset::with_role(const std::string& role) const {
  std::vector<const PhaseItem*> out;
  for (const PhaseItem& item : items)
    if (item.role == role) out.push_back(&item);
  return out;
}

SplitSpec SplitSpec::paper_ratios(std::size_t n) {
  SplitSpec s;
  s.validation = n * 45 / 1000;
  s.test = n * 5 / 1000;
  s.train = n - s.validation - s.test;
  return s;
}

namespace {

std::string item_id(std::size_t index) {
  std::ostringstream os;
  os << "img" << std::setw(5) << std::setfill('0') << index;
  return os.str();
}

void rescale_to_range(std::vector<double>& v, double f_max) {
  const auto [lo_it, hi_it] = std::minmax_element(v.begin(), v.end());
  const double lo = *lo_it, range = *hi_it - *lo_it;
  if (!(range > 0.0)) throw DegenerateError("cannot rescale a constant phase object");
  for (double& x : v) x = (x - lo) / range * f_max;
}

}  // namespace

RealField powerlaw_phase(const Grid2D& grid, double exponent, std::uint64_t seed,
                         std::uint64_t index, double f_max) {
  const auto [nu_x, nu_y] = frequency_axes(grid);
  RngStream rng(seed, index);
  ComplexField spectrum(grid);
  const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
  for (std::size_t iy = 0; iy < grid.ny; ++iy)
    for (std::size_t ix = 0; ix < grid.nx; ++ix) {
      const double re = rng.normal() * inv_sqrt2;
      const double im = rng.normal() * inv_sqrt2;
      const double nu2 = nu_x[ix] * nu_x[ix] + nu_y[iy] * nu_y[iy];
      const double amp = nu2 == 0.0 ? 0.0 : std::pow(nu2, -exponent / 4.0);
      spectrum(iy, ix) = Complex(re, im) * amp;
    }
  RealField f = real_part(idft2(spectrum));
  rescale_to_range(f.values, f_max);
  return f;
}

PhaseDataset gen_powerlaw_phase(const Grid2D& grid, double exponent, std::size_t count,
                                std::uint64_t seed, double f_max) {
  grid.validate();
  if (!(exponent >= 0.0) || !std::isfinite(exponent)) throw UsageError("exponent must be >= 0");
  if (count < 1) throw UsageError("count must be >= 1");
  if (!(f_max > 0.0)) throw UsageError("f_max must be > 0");
  PhaseDataset ds;
  ds.grid = grid;
  ds.f_max = f_max;
  std::ostringstream prov;
  prov << std::setprecision(17) << "generator=powerlaw exponent=" << exponent << " count=" << count
       << " seed=" << seed << " f_max=" << f_max;
  ds.provenance = prov.str();
  ds.items.reserve(count);
  for (std::size_t i = 0; i < count; ++i)
    ds.items.push_back({item_id(i), powerlaw_phase(grid, exponent, seed, i, f_max), ""});
  return ds;
}

IngestResult ingest_images(const fs::path& directory, const Grid2D& grid, double f_max) {
  grid.validate();
  if (!fs::is_directory(directory)) throw FormatError("not a directory: " + directory.string());
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(directory))
    if (e.is_regular_file() && e.path().extension() == ".pgm") files.push_back(e.path());
  std::sort(files.begin(), files.end());

  IngestResult result;
  result.dataset.grid = grid;
  result.dataset.f_max = f_max;
  result.dataset.provenance = "ingest dir=" + directory.string();
  for (const fs::path& file : files) {
    try {
      const GrayImage img = read_pgm(file);
      if (img.width < 2 || img.height < 2) throw FormatError("image smaller than 2x2");
      std::vector<double> v = resample_bilinear(img, grid.ny, grid.nx);
      const double scale = f_max / static_cast<double>(img.maxval);
      for (double& x : v) x = std::clamp(x * scale, 0.0, f_max);
      result.dataset.items.push_back({file.stem().string(), RealField(grid, std::move(v)), ""});
    } catch (const Error& e) {
      result.problems.push_back(file.filename().string() + ": " + e.what());
    }
  }
  if (result.dataset.items.empty())
    throw FormatError("no usable PGM images in " + directory.string());
  return result;
}

SplitIndices split(std::size_t dataset_size, const SplitSpec& spec, std::uint64_t seed) {
  if (spec.total() > dataset_size) {
    std::ostringstream os;
    os << "split requests " << spec.total() << " items but dataset has " << dataset_size;
    throw UsageError(os.str());
  }
  std::vector<std::size_t> order(dataset_size);
  std::iota(order.begin(), order.end(), 0);
  RngStream rng(seed, 0x5711c0deULL);
  for (std::size_t i = dataset_size; i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng.next_u64() % i);
    std::swap(order[i - 1], order[j]);
  }
  SplitIndices parts;
  auto it = order.begin();
  parts.train.assign(it, it + static_cast<std::ptrdiff_t>(spec.train));
  it += static_cast<std::ptrdiff_t>(spec.train);
  parts.validation.assign(it, it + static_cast<std::ptrdiff_t>(spec.validation));
  it += static_cast<std::ptrdiff_t>(spec.validation);
  parts.test.assign(it, it + static_cast<std::ptrdiff_t>(spec.test));
  for (auto* v : {&parts.train, &parts.validation, &parts.test}) std::sort(v->begin(), v->end());
  return parts;
}

void assign_roles(PhaseDataset& dataset, const SplitIndices& parts) {
  for (PhaseItem& item : dataset.items) item.role.clear();
  for (std::size_t i : parts.train) dataset.items.at(i).role = "train";
  for (std::size_t i : parts.validation) dataset.items.at(i).role = "validation";
  for (std::size_t i : parts.test) dataset.items.at(i).role = "test";
}

void write_manifest(const fs::path& directory, const std::vector<ManifestEntry>& entries) {
  std::ofstream out(directory / kManifestName, std::ios::trunc);
  if (!out) throw FormatError("cannot write manifest in " + directory.string());
  for (const ManifestEntry& e : entries) out << e.id << '\t' << e.filename << '\t' << e.role << '\n';
}

std::vector<ManifestEntry> read_manifest(const fs::path& directory) {
  std::ifstream in(directory / kManifestName);
  if (!in) throw FormatError("missing manifest in " + directory.string());
  std::vector<ManifestEntry> entries;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    ManifestEntry e;
    std::istringstream row(line);
    if (!std::getline(row, e.id, '\t') || !std::getline(row, e.filename, '\t'))
      throw FormatError("malformed manifest line: " + line);
    std::getline(row, e.role);
    entries.push_back(std::move(e));
  }
  return entries;
}

void save_dataset(const fs::path& directory, const PhaseDataset& dataset) {
  fs::create_directories(directory);
  std::vector<ManifestEntry> entries;
  for (const PhaseItem& item : dataset.items) {
    const std::string file = item.id + ".lspr";
    save_field(directory / file, item.phase, LsprType::Real32);
    entries.push_back({item.id, file, item.role});
  }
  write_manifest(directory, entries);
  std::ofstream prov(directory / kProvenanceName, std::ios::trunc);
  prov << std::setprecision(17) << "f_max=" << dataset.f_max << "\nsource=" << dataset.provenance
       << '\n';
}

PhaseDataset load_dataset(const fs::path& directory) {
  PhaseDataset ds;
  std::ifstream prov(directory / kProvenanceName);
  std::string line;
  while (std::getline(prov, line)) {
    if (line.rfind("f_max=", 0) == 0) ds.f_max = std::stod(line.substr(6));
    if (line.rfind("source=", 0) == 0) ds.provenance = line.substr(7);
  }
  for (const ManifestEntry& e : read_manifest(directory)) {
    RealField f = load_real_field(directory / e.filename);
    if (ds.items.empty())
      ds.grid = f.grid;
    else
      require_same_grid(f.grid, ds.grid, "load_dataset");
    ds.items.push_back({e.id, std::move(f), e.role});
  }
  if (ds.items.empty()) throw FormatError("empty dataset in " + directory.string());
  return ds;
}

}  // namespace lsdnn
