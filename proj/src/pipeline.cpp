#include "lsdnn/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <map>
#include <numbers>
#include <sstream>

#include "lsdnn/lspr.hpp"
#include "lsdnn/pgm.hpp"
#include "lsdnn/retrieval.hpp"
#include "lsdnn/spectral.hpp"

namespace fs = std::filesystem;

namespace lsdnn {

namespace {

constexpr const char* kInputsInfo = "inputs.txt";

std::vector<RealField> pick(const std::vector<RealField>& all, const std::vector<std::size_t>& idx) {
  std::vector<RealField> out;
  out.reserve(idx.size());
  for (std::size_t i : idx) out.push_back(all[i]);
  return out;
}

std::vector<RealField> phases_of(const PhaseDataset& data, const std::vector<std::size_t>& idx) {
  std::vector<RealField> out;
  out.reserve(idx.size());
  for (std::size_t i : idx) out.push_back(data.items[i].phase);
  return out;
}

std::vector<RealField> filtered(const std::vector<RealField>& phases, const Grid2D& grid, double q) {
  if (q == 0.0) return phases;
  const RealField transfer = filter_transfer(PowerLawFilter{q, grid});
  std::vector<RealField> out;
  out.reserve(phases.size());
  for (const RealField& f : phases) out.push_back(apply_transfer(f, transfer));
  return out;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc | std::ios::binary);
  if (!out) throw FormatError("cannot write: " + path.string());
  out << text;
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot read: " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::map<std::string, std::string> read_kv(const fs::path& path) {
  std::map<std::string, std::string> kv;
  std::istringstream in(read_text(path));
  std::string line;
  while (std::getline(in, line)) {
    const auto eq = line.find('=');
    if (eq != std::string::npos) kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  return kv;
}

// Fresh output directory: created if missing, must be empty unless force.
void prepare_out_dir(const fs::path& dir, bool force) {
  if (fs::exists(dir)) {
    if (!fs::is_directory(dir)) throw UsageError("not a directory: " + dir.string());
    if (!fs::is_empty(dir)) {
      if (!force) throw UsageError("output directory is not empty (use --force): " + dir.string());
      for (const auto& entry : fs::directory_iterator(dir)) fs::remove_all(entry.path());
    }
  }
  fs::create_directories(dir);
}

class DirLock {
 public:
  explicit DirLock(const fs::path& dir) : path_(dir / ".lock") {
    std::FILE* f = std::fopen(path_.c_str(), "wx");
    if (!f) throw UsageError("experiment directory is locked: " + path_.string());
    std::fclose(f);
  }
  ~DirLock() {
    std::error_code ec;
    fs::remove(path_, ec);
  }
  DirLock(const DirLock&) = delete;
  DirLock& operator=(const DirLock&) = delete;

 private:
  fs::path path_;
};

// Id -> field for a directory with a manifest.
std::map<std::string, RealField> load_indexed(const fs::path& dir) {
  std::map<std::string, RealField> out;
  for (const ManifestEntry& e : read_manifest(dir)) out.emplace(e.id, load_real_field(dir / e.filename));
  return out;
}

std::string inputs_kind(const fs::path& dir) {
  const fs::path info = dir / kInputsInfo;
  if (fs::exists(info)) {
    const auto kv = read_kv(info);
    if (auto it = kv.find("kind"); it != kv.end()) return it->second;
  }
  return "phase";
}

std::vector<RealField> gather(const std::map<std::string, RealField>& by_id, const PhaseDataset& data,
                              const std::vector<std::size_t>& idx, const char* what) {
  std::vector<RealField> out;
  out.reserve(idx.size());
  for (std::size_t i : idx) {
    const auto it = by_id.find(data.items[i].id);
    if (it == by_id.end()) throw FormatError(std::string(what) + ": no entry for " + data.items[i].id);
    require_same_grid(it->second.grid, data.grid, what);
    out.push_back(it->second);
  }
  return out;
}

fs::path state_path(const fs::path& dir, NetworkRole role, double q) {
  switch (role) {
    case NetworkRole::L: return dir / "L.lsnn";
    case NetworkRole::L3: return dir / "L3.lsnn";
    case NetworkRole::H: return dir / ("H_q" + format_q(q) + ".lsnn");
    case NetworkRole::S: return dir / ("S_q" + format_q(q) + ".lsnn");
  }
  return dir;
}

fs::path loss_path(const fs::path& dir, NetworkRole role, double q) {
  fs::path p = state_path(dir, role, q);
  p.replace_extension(".csv");
  return p;
}

TrainedNet load_trained(const fs::path& path) {
  auto [spec, state] = load_network(path);
  return TrainedNet{std::move(spec), std::move(state), {}, 0};
}

TrainingSet make_set(const std::vector<RealField>& inputs, const std::vector<RealField>& targets,
                     const std::vector<RealField>* aux = nullptr) {
  TrainingSet s;
  s.inputs = network_batch(inputs, true);
  if (aux) s.aux = network_batch(*aux, true);
  s.targets = network_batch(targets, false);
  return s;
}

TrainedNet fit(const NetworkSpec& spec, const TrainingSet& tr, const TrainingSet* va,
               const ExperimentConfig& ec) {
  TrainResult r = train(spec, tr, ec.train, va);
  return TrainedNet{spec, std::move(r.state), std::move(r.history), r.skipped};
}

std::vector<RealField> resolved(const std::vector<RealField>& recon, const std::vector<RealField>& refs,
                                AffineMethod method) {
  std::vector<RealField> out;
  out.reserve(recon.size());
  for (std::size_t i = 0; i < recon.size(); ++i) out.push_back(resolve_affine(recon[i], refs[i], method));
  return out;
}

std::vector<double> diag_of(const std::vector<RealField>& images) { return psd_diagonal(psd2d(images)); }

std::vector<std::string> ids_of(const PhaseDataset& data, const std::vector<std::size_t>& idx) {
  std::vector<std::string> ids;
  for (std::size_t i : idx) ids.push_back(data.items[i].id);
  return ids;
}

MetricReport labelled(MetricReport r, std::string label) {
  r.label = std::move(label);
  return r;
}

void write_summary(const fs::path& path, const std::vector<std::pair<std::string, const MetricReport*>>& reps) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw FormatError("cannot write: " + path.string());
  out << std::setprecision(17);
  out << "method,PCC_mean,PCC_std,PSNR_dB_mean,PSNR_dB_std,SSIM_mean,SSIM_std,MSE_mean,MSE_std,MAE_mean,MAE_std\n";
  for (const auto& [name, r] : reps)
    out << name << ',' << r->mean.pcc << ',' << r->std.pcc << ',' << r->mean.psnr << ',' << r->std.psnr
        << ',' << r->mean.ssim << ',' << r->std.ssim << ',' << r->mean.mse << ',' << r->std.mse << ','
        << r->mean.mae << ',' << r->std.mae << '\n';
}

void export_examples(const fs::path& dir, const std::vector<std::string>& ids, std::size_t count,
                     const std::vector<std::pair<std::string, const std::vector<RealField>*>>& sets) {
  if (count == 0) return;
  fs::create_directories(dir);
  const std::size_t n = std::min(count, ids.size());
  for (std::size_t i = 0; i < n; ++i)
    for (const auto& [name, fields] : sets) export_pgm16(dir / (ids[i] + "_" + name + ".pgm"), (*fields)[i]);
}

}  // namespace

const char* scheme_name(Scheme s) { return s == Scheme::Approximant ? "approximant" : "end-to-end"; }

Scheme parse_scheme(const std::string& s) {
  if (s == "approximant") return Scheme::Approximant;
  if (s == "end-to-end" || s == "end_to_end") return Scheme::EndToEnd;
  throw UsageError("unknown scheme: " + s + " (expected approximant or end-to-end)");
}

std::string format_q(double q) {
  std::ostringstream os;
  os << q;
  return os.str();
}

std::string fnv1a_file(const fs::path& path) {
  const std::string bytes = read_text(path);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

ExperimentConfig ExperimentConfig::from(const Config& c) {
  ExperimentConfig ec;
  ec.optics.grid = Grid2D::square(c.get_size("size"), c.get_double("dx"));
  ec.optics.wavelength = c.get_double("wavelength");
  ec.optics.z = c.get_double("z");
  ec.optics.pad_factor = c.get_size("pad");
  ec.optics.validate();
  ec.noise.photons = c.get_double("photons");
  ec.noise.sigma = c.get_double("sigma");
  ec.noise.seed = c.get_u64("noise_seed");
  ec.noise.validate();
  ec.exponent = c.get_double("exponent");
  ec.f_max = c.get_double("fmax");
  if (!(ec.f_max > 0.0) || !std::isfinite(ec.f_max)) throw UsageError("fmax must be finite and > 0");
  ec.split_counts = SplitSpec{c.get_size("n_train"), c.get_size("n_val"), c.get_size("n_test")};
  ec.data_seed = c.get_u64("data_seed");
  ec.split_seed = c.get_u64("split_seed");
  ec.ingest_dir = c.get("ingest_dir");
  ec.scheme = parse_scheme(c.get("scheme"));
  ec.gs_iterations = static_cast<int>(c.get_size("gs_iters"));
  if (ec.gs_iterations < 1) throw UsageError("gs_iters must be >= 1");
  ec.q = c.get_double("q");
  if (ec.q < 0.0) throw UsageError("q must be >= 0");
  ec.q_sweep = c.get_doubles("q_sweep");
  for (double q : ec.q_sweep)
    if (q < 0.0) throw UsageError("q_sweep values must be >= 0");
  ec.widths = c.get_sizes("widths");
  ec.kernel = c.get_size("kernel");
  ec.slope = c.get_double("slope");
  ec.s_residual = c.get_bool("s_residual");
  ec.l3 = c.get_bool("l3");
  ec.train.epochs = c.get_size("epochs");
  ec.train.learning_rate = c.get_double("lr");
  ec.train.beta1 = c.get_double("beta1");
  ec.train.beta2 = c.get_double("beta2");
  ec.train.epsilon = c.get_double("eps");
  ec.train.batch = c.get_size("batch");
  ec.train.loss = parse_loss(c.get("loss"));
  ec.train.seed = c.get_u64("train_seed");
  ec.train.validate();
  const std::string& affine = c.get("affine");
  if (affine == "least_squares") ec.affine = AffineMethod::LeastSquares;
  else if (affine == "histogram") ec.affine = AffineMethod::Histogram;
  else throw UsageError("unknown affine method: " + affine);
  ec.export_pgm = c.get_size("export_pgm");
  ec.spec(NetworkRole::S).validate();
  return ec;
}

NetworkSpec ExperimentConfig::spec(NetworkRole role) const {
  NetworkSpec s = NetworkSpec::for_role(role, widths);
  s.kernel = kernel;
  s.slope = slope;
  if (role == NetworkRole::S) s.residual = s_residual;
  return s;
}

PhaseDataset build_dataset(const ExperimentConfig& ec) {
  PhaseDataset data;
  if (!ec.ingest_dir.empty()) {
    IngestResult r = ingest_images(ec.ingest_dir, ec.optics.grid, ec.f_max);
    for (const std::string& p : r.problems) warn("ingest: " + p);
    data = std::move(r.dataset);
  } else {
    data = gen_powerlaw_phase(ec.optics.grid, ec.exponent, ec.split_counts.total(), ec.data_seed, ec.f_max);
  }
  // Stored datasets are float32; keep the in-memory copy identical to a reload.
  for (PhaseItem& item : data.items)
    for (double& v : item.phase.values) v = static_cast<double>(static_cast<float>(v));
  const SplitSpec spec = ec.split_counts.total() == data.size() ? ec.split_counts
                                                                 : SplitSpec::paper_ratios(data.size());
  assign_roles(data, split(data.size(), spec, ec.split_seed));
  return data;
}

PreparedInputs prepare_inputs(const PhaseDataset& data, const ExperimentConfig& ec) {
  PreparedInputs in;
  in.scheme = ec.scheme;
  for (std::size_t i = 0; i < data.size(); ++i) {
    RngStream rng(ec.noise.seed, i);
    Measurement m = measure(data.items[i].phase, ec.optics, ec.noise, rng);
    in.ids.push_back(data.items[i].id);
    if (ec.scheme == Scheme::Approximant) {
      in.xi.push_back(ec.gs_iterations == 1 ? approximant(m.counts, ec.optics)
                                            : gs_solve(m.counts, ec.optics, ec.gs_iterations).phase);
      ++in.approximant_calls;
    } else {
      in.xi.push_back(m.counts);
    }
    in.g0.push_back(std::move(m.noiseless));
    in.g.push_back(std::move(m.counts));
  }
  return in;
}

Tensor4 network_batch(const std::vector<RealField>& images, bool standardize) {
  if (images.empty()) return Tensor4{};
  const Grid2D& grid = images.front().grid;
  Tensor4 t(images.size(), 1, grid.ny, grid.nx);
  for (std::size_t i = 0; i < images.size(); ++i) {
    require_same_grid(images[i].grid, grid, "network_batch");
    double* dst = t.item(i);
    const auto& v = images[i].values;
    if (!standardize) {
      std::copy(v.begin(), v.end(), dst);
      continue;
    }
    const double m = mean(v);
    const double s = std::sqrt(variance(v));
    for (std::size_t k = 0; k < v.size(); ++k) dst[k] = s > 0.0 ? (v[k] - m) / s : 0.0;
  }
  return t;
}

std::vector<RealField> unbatch(const Tensor4& t, const Grid2D& grid) {
  std::vector<RealField> out;
  for (std::size_t i = 0; i < t.n; ++i) {
    RealField f(grid);
    std::copy(t.item(i), t.item(i) + t.plane(), f.values.begin());
    out.push_back(std::move(f));
  }
  return out;
}

RoleSplit role_split(const PhaseDataset& data) {
  RoleSplit r;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const std::string& role = data.items[i].role;
    if (role == "train") r.train.push_back(i);
    else if (role == "validation") r.validation.push_back(i);
    else if (role == "test") r.test.push_back(i);
  }
  return r;
}

TrainedNet train_low(const PhaseDataset& data, const PreparedInputs& in, const RoleSplit& roles,
                     const ExperimentConfig& ec) {
  if (roles.train.empty()) throw UsageError("no training items");
  const TrainingSet tr = make_set(pick(in.xi, roles.train), phases_of(data, roles.train));
  if (roles.validation.empty()) return fit(ec.spec(NetworkRole::L), tr, nullptr, ec);
  const TrainingSet va = make_set(pick(in.xi, roles.validation), phases_of(data, roles.validation));
  return fit(ec.spec(NetworkRole::L), tr, &va, ec);
}

TrainedNet train_high(const PhaseDataset& data, const PreparedInputs& in, const RoleSplit& roles,
                      const ExperimentConfig& ec, double q) {
  if (roles.train.empty()) throw UsageError("no training items");
  const TrainingSet tr =
      make_set(pick(in.xi, roles.train), filtered(phases_of(data, roles.train), data.grid, q));
  if (roles.validation.empty()) return fit(ec.spec(NetworkRole::H), tr, nullptr, ec);
  const TrainingSet va =
      make_set(pick(in.xi, roles.validation), filtered(phases_of(data, roles.validation), data.grid, q));
  return fit(ec.spec(NetworkRole::H), tr, &va, ec);
}

TrainedNet train_synth(const PhaseDataset& data, const PreparedInputs& in, const RoleSplit& roles,
                       const ExperimentConfig& ec, const TrainedNet& low, const TrainedNet& high) {
  if (roles.train.empty()) throw UsageError("no training items");
  auto stage = [&](const std::vector<std::size_t>& idx) {
    const std::vector<RealField> xi = pick(in.xi, idx);
    const std::vector<RealField> lf = infer(low, xi), hf = infer(high, xi);
    return make_set(lf, phases_of(data, idx), &hf);
  };
  const TrainingSet tr = stage(roles.train);
  if (roles.validation.empty()) return fit(ec.spec(NetworkRole::S), tr, nullptr, ec);
  const TrainingSet va = stage(roles.validation);
  return fit(ec.spec(NetworkRole::S), tr, &va, ec);
}

TrainedNet train_l3(const PhaseDataset& data, const PreparedInputs& in, const RoleSplit& roles,
                    const ExperimentConfig& ec, const TrainedNet& low, const TrainedNet& high,
                    const TrainedNet& synth) {
  NetworkSpec spec = l3_spec_matching(low.spec, high.spec, synth.spec);
  const TrainingSet tr = make_set(pick(in.xi, roles.train), phases_of(data, roles.train));
  if (roles.validation.empty()) return fit(spec, tr, nullptr, ec);
  const TrainingSet va = make_set(pick(in.xi, roles.validation), phases_of(data, roles.validation));
  return fit(spec, tr, &va, ec);
}

LsModels train_ls(const PhaseDataset& data, const PreparedInputs& in, const RoleSplit& roles,
                  const ExperimentConfig& ec, double q, const TrainedNet* reuse_low) {
  LsModels m;
  m.q = q;
  m.low = reuse_low ? *reuse_low : train_low(data, in, roles, ec);
  m.high = train_high(data, in, roles, ec, q);
  m.synth = train_synth(data, in, roles, ec, m.low, m.high);
  return m;
}

std::vector<RealField> infer(const TrainedNet& net, const std::vector<RealField>& xi) {
  if (xi.empty()) return {};
  return unbatch(predict(net.spec, net.state, network_batch(xi, true)), xi.front().grid);
}

LsOutputs infer_ls(const LsModels& models, const std::vector<RealField>& xi) {
  LsOutputs out;
  if (xi.empty()) return out;
  out.low = infer(models.low, xi);
  out.high = infer(models.high, xi);
  const Tensor4 lf = network_batch(out.low, true), hf = network_batch(out.high, true);
  out.synth = unbatch(predict(models.synth.spec, models.synth.state, lf, &hf), xi.front().grid);
  return out;
}

void write_psd_csv(const fs::path& path, const PsdTable& table) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw FormatError("cannot write: " + path.string());
  out << std::setprecision(17) << "k,nu_diag";
  for (const std::string& n : table.names) out << ',' << n;
  out << '\n';
  for (std::size_t k = 0; k < table.n / 2; ++k) {
    out << k << ',' << std::numbers::sqrt2 * static_cast<double>(k) / (static_cast<double>(table.n) * table.dx);
    for (const auto& col : table.columns) out << ',' << col[k];
    out << '\n';
  }
}

RunSummary run_ls(const Config& config, const fs::path& dir, bool force) {
  const ExperimentConfig ec = ExperimentConfig::from(config);
  if (fs::exists(dir / ".lock")) throw UsageError("experiment directory is locked: " + dir.string());
  prepare_out_dir(dir, force);
  DirLock lock(dir);

  write_text(dir / "config.txt", config.to_text());
  PhaseDataset data = build_dataset(ec);
  save_dataset(dir / "data", data);
  const RoleSplit roles = role_split(data);
  if (roles.test.empty()) throw UsageError("no test items");

  const PreparedInputs in = prepare_inputs(data, ec);
  {
    std::vector<ManifestEntry> meas, inputs;
    fs::create_directories(dir / "measurements");
    for (std::size_t i = 0; i < data.size(); ++i) {
      const std::string& id = data.items[i].id;
      save_field(dir / "measurements" / ("g0_" + id + ".lspr"), in.g0[i]);
      save_field(dir / "measurements" / ("g_" + id + ".lspr"), in.g[i]);
      meas.push_back({id, "g_" + id + ".lspr", data.items[i].role});
    }
    write_manifest(dir / "measurements", meas);
    write_text(dir / "measurements" / kInputsInfo, "kind=measurement\n");
    if (ec.scheme == Scheme::Approximant) {
      fs::create_directories(dir / "inputs");
      for (std::size_t i = 0; i < data.size(); ++i) {
        const std::string& id = data.items[i].id;
        save_field(dir / "inputs" / ("xi_" + id + ".lspr"), in.xi[i]);
        inputs.push_back({id, "xi_" + id + ".lspr", data.items[i].role});
      }
      write_manifest(dir / "inputs", inputs);
      write_text(dir / "inputs" / kInputsInfo,
                 std::string("kind=") + (ec.gs_iterations == 1 ? "approximant" : "gs") + "\n");
    }
  }

  const fs::path states = dir / "states", losses = dir / "loss", eval = dir / "eval";
  fs::create_directories(states);
  fs::create_directories(losses);
  fs::create_directories(eval);

  RunSummary summary;
  summary.approximant_calls = in.approximant_calls;
  std::ostringstream artifacts;
  auto persist = [&](const TrainedNet& net, NetworkRole role, double q) {
    const fs::path sp = state_path(states, role, q);
    save_network(sp, net.spec, net.state);
    write_loss_csv(loss_path(losses, role, q), net.history);
    const std::string h = fnv1a_file(sp);
    artifacts << "artifact.state." << sp.stem().string() << '=' << h << '\n';
    return h;
  };

  const std::vector<std::string> test_ids = ids_of(data, roles.test);
  const std::vector<RealField> truth = phases_of(data, roles.test);
  const std::vector<RealField> xi_test = pick(in.xi, roles.test);
  std::vector<std::pair<std::string, const MetricReport*>> table;

  if (ec.scheme == Scheme::Approximant) {
    summary.approximant = labelled(report(xi_test, truth, ec.f_max, test_ids, ec.affine), "approximant");
    write_report_csv(eval / "approximant.csv", summary.approximant);
  }

  const TrainedNet low = train_low(data, in, roles, ec);
  persist(low, NetworkRole::L, 0.0);
  const std::vector<RealField> low_test = infer(low, xi_test);
  summary.low = labelled(report(low_test, truth, ec.f_max, test_ids, ec.affine), "L");
  write_report_csv(eval / "L.csv", summary.low);

  std::vector<double> qs = ec.q_sweep.empty() ? std::vector<double>{ec.q} : ec.q_sweep;
  const std::vector<double> psd_truth = diag_of(truth);
  const std::vector<RealField> low_fit = resolved(low_test, truth, ec.affine);
  const std::vector<double> psd_low = diag_of(low_fit);
  std::vector<RealField> approx_fit;
  if (ec.scheme == Scheme::Approximant) approx_fit = resolved(xi_test, truth, ec.affine);

  std::optional<LsModels> first_models;
  for (double q : qs) {
    LsModels models = train_ls(data, in, roles, ec, q, &low);
    QResult qr;
    qr.q = q;
    qr.low_hash = fnv1a_file(state_path(states, NetworkRole::L, 0.0));
    qr.high_hash = persist(models.high, NetworkRole::H, q);
    qr.synth_hash = persist(models.synth, NetworkRole::S, q);
    const LsOutputs out = infer_ls(models, xi_test);
    qr.synth = labelled(report(out.synth, truth, ec.f_max, test_ids, ec.affine), "S_q" + format_q(q));
    write_report_csv(eval / ("S_q" + format_q(q) + ".csv"), qr.synth);

    const std::vector<RealField> synth_fit = resolved(out.synth, truth, ec.affine);
    qr.psd_truth = psd_truth;
    qr.psd_low = psd_low;
    qr.psd_synth = diag_of(synth_fit);
    PsdTable psd{data.grid.dx, data.grid.nx, {"truth"}, {psd_truth}};
    if (!approx_fit.empty()) {
      psd.names.push_back("approximant");
      psd.columns.push_back(diag_of(approx_fit));
    }
    psd.names.insert(psd.names.end(), {"L", "H", "S"});
    psd.columns.push_back(psd_low);
    psd.columns.push_back(diag_of(out.high));
    psd.columns.push_back(qr.psd_synth);
    write_psd_csv(eval / ("psd_diagonal_q" + format_q(q) + ".csv"), psd);

    if (!first_models) {
      std::vector<std::pair<std::string, const std::vector<RealField>*>> sets = {
          {"truth", &truth}, {"L", &low_fit}, {"S", &synth_fit}};
      if (!approx_fit.empty()) sets.push_back({"approximant", &approx_fit});
      export_examples(dir / "pgm", test_ids, ec.export_pgm, sets);
      first_models = std::move(models);
    }
    summary.sweep.push_back(std::move(qr));
  }

  if (ec.l3) {
    const TrainedNet l3 = train_l3(data, in, roles, ec, first_models->low, first_models->high,
                                   first_models->synth);
    persist(l3, NetworkRole::L3, 0.0);
    summary.l3 = labelled(report(infer(l3, xi_test), truth, ec.f_max, test_ids, ec.affine), "L3");
    write_report_csv(eval / "L3.csv", *summary.l3);
  }

  if (ec.scheme == Scheme::Approximant) table.push_back({"approximant", &summary.approximant});
  table.push_back({"L", &summary.low});
  for (const QResult& qr : summary.sweep) table.push_back({qr.synth.label, &qr.synth});
  if (summary.l3) table.push_back({"L3", &*summary.l3});
  write_summary(eval / "summary.csv", table);

  std::ostringstream manifest;
  manifest << config.to_text() << "software.version=" << kSoftwareVersion << '\n'
           << "artifact.items=" << data.size() << '\n'
           << "artifact.train=" << roles.train.size() << '\n'
           << "artifact.validation=" << roles.validation.size() << '\n'
           << "artifact.test=" << roles.test.size() << '\n'
           << "artifact.retrieval_calls=" << in.approximant_calls << '\n'
           << artifacts.str();
  summary.manifest = dir / "manifest.txt";
  write_text(summary.manifest, manifest.str());
  return summary;
}

void cmd_gen_data(const Config& config, std::size_t count, const fs::path& out, bool force) {
  ExperimentConfig ec = ExperimentConfig::from(config);
  if (count == 0) throw UsageError("gen-data: count must be > 0");
  if (count != ec.split_counts.total()) ec.split_counts = SplitSpec::paper_ratios(count);
  ec.ingest_dir.clear();
  const PhaseDataset data = build_dataset(ec);
  prepare_out_dir(out, force);
  save_dataset(out, data);
}

void cmd_simulate(const Config& config, const fs::path& data_dir, const fs::path& out, bool force) {
  const ExperimentConfig ec = ExperimentConfig::from(config);
  const PhaseDataset data = load_dataset(data_dir);
  OpticalConfig optics = ec.optics;
  optics.grid = Grid2D{data.grid.nx, data.grid.ny, ec.optics.grid.dx, ec.optics.grid.dy};
  prepare_out_dir(out, force);
  std::vector<ManifestEntry> entries;
  for (std::size_t i = 0; i < data.size(); ++i) {
    RngStream rng(ec.noise.seed, i);
    const Measurement m = measure(data.items[i].phase, optics, ec.noise, rng);
    const std::string& id = data.items[i].id;
    save_field(out / ("g0_" + id + ".lspr"), m.noiseless);
    save_field(out / ("g_" + id + ".lspr"), m.counts);
    entries.push_back({id, "g_" + id + ".lspr", data.items[i].role});
  }
  write_manifest(out, entries);
  std::ostringstream info;
  info << std::setprecision(17) << "kind=measurement\nphotons=" << ec.noise.photons
       << "\nsigma=" << ec.noise.sigma << "\nnoise_seed=" << ec.noise.seed << '\n';
  write_text(out / kInputsInfo, info.str());
}

void cmd_retrieve(const Config& config, const fs::path& measurement_dir, int iterations,
                  const fs::path& out, bool force) {
  if (iterations < 1) throw UsageError("iterations must be >= 1");
  const ExperimentConfig ec = ExperimentConfig::from(config);
  if (inputs_kind(measurement_dir) != "measurement")
    throw UsageError("not a measurement directory: " + measurement_dir.string());
  const auto entries = read_manifest(measurement_dir);
  prepare_out_dir(out, force);
  fs::create_directories(out / "residuals");
  std::vector<ManifestEntry> produced;
  for (const ManifestEntry& e : entries) {
    const RealField g = load_real_field(measurement_dir / e.filename);
    OpticalConfig optics = ec.optics;
    optics.grid = g.grid;
    const GsState st = gs_solve(g, optics, iterations);
    save_field(out / ("xi_" + e.id + ".lspr"), st.phase);
    std::ofstream csv(out / "residuals" / (e.id + ".csv"), std::ios::trunc);
    csv << std::setprecision(17) << "iteration,residual\n";
    for (std::size_t k = 0; k < st.residuals.size(); ++k) csv << k << ',' << st.residuals[k] << '\n';
    produced.push_back({e.id, "xi_" + e.id + ".lspr", e.role});
  }
  write_manifest(out, produced);
  write_text(out / kInputsInfo,
             std::string("kind=") + (iterations == 1 ? "approximant" : "gs") +
                 "\niterations=" + std::to_string(iterations) + "\n");
}

namespace {

// Inputs for every dataset item, checked against the configured scheme.
PreparedInputs load_inputs(const PhaseDataset& data, const ExperimentConfig& ec, const fs::path& dir) {
  const std::string kind = inputs_kind(dir);
  if (ec.scheme == Scheme::Approximant && kind == "measurement")
    throw UsageError("scheme=approximant needs retrieved inputs, got raw measurements: " + dir.string());
  if (ec.scheme == Scheme::EndToEnd && kind != "measurement")
    throw UsageError("scheme=end-to-end needs raw measurements, got " + kind + ": " + dir.string());
  const auto by_id = load_indexed(dir);
  PreparedInputs in;
  in.scheme = ec.scheme;
  std::vector<std::size_t> all(data.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  in.xi = gather(by_id, data, all, "inputs");
  in.ids = ids_of(data, all);
  return in;
}

}  // namespace

void cmd_train(const Config& config, NetworkRole role, const fs::path& data_dir,
               const fs::path& inputs_dir, const fs::path& states_dir) {
  const ExperimentConfig ec = ExperimentConfig::from(config);
  const PhaseDataset data = load_dataset(data_dir);
  const RoleSplit roles = role_split(data);
  const PreparedInputs in = load_inputs(data, ec, inputs_dir);
  fs::create_directories(states_dir);
  auto need = [&](NetworkRole r) {
    const fs::path p = state_path(states_dir, r, ec.q);
    if (!fs::exists(p))
      throw UsageError(std::string("training ") + role_name(role) + " requires " + p.string() +
                       " (train " + role_name(r) + " first)");
    return load_trained(p);
  };
  TrainedNet net;
  switch (role) {
    case NetworkRole::L: net = train_low(data, in, roles, ec); break;
    case NetworkRole::H: net = train_high(data, in, roles, ec, ec.q); break;
    case NetworkRole::S: {
      const TrainedNet low = need(NetworkRole::L), high = need(NetworkRole::H);
      net = train_synth(data, in, roles, ec, low, high);
      break;
    }
    case NetworkRole::L3: {
      const NetworkSpec l = ec.spec(NetworkRole::L), h = ec.spec(NetworkRole::H), s = ec.spec(NetworkRole::S);
      const TrainedNet low{l, {}, {}, 0}, high{h, {}, {}, 0}, synth{s, {}, {}, 0};
      net = train_l3(data, in, roles, ec, low, high, synth);
      break;
    }
  }
  if (net.skipped) warn("skipped " + std::to_string(net.skipped) + " degenerate training targets");
  save_network(state_path(states_dir, role, ec.q), net.spec, net.state);
  write_loss_csv(loss_path(states_dir, role, ec.q), net.history);
}

void cmd_evaluate(const Config& config, const fs::path& states_dir, const fs::path& data_dir,
                  const fs::path& inputs_dir, const fs::path& out, bool force) {
  const ExperimentConfig ec = ExperimentConfig::from(config);
  const PhaseDataset data = load_dataset(data_dir);
  RoleSplit roles = role_split(data);
  if (roles.test.empty())
    for (std::size_t i = 0; i < data.size(); ++i) roles.test.push_back(i);
  const auto by_id = load_indexed(inputs_dir);
  const std::vector<RealField> xi = gather(by_id, data, roles.test, "inputs");
  const std::vector<RealField> truth = phases_of(data, roles.test);
  const std::vector<std::string> ids = ids_of(data, roles.test);
  const std::string kind = inputs_kind(inputs_dir);
  prepare_out_dir(out, force);

  std::vector<MetricReport> reps;
  reps.reserve(4);
  std::vector<std::pair<std::string, std::vector<RealField>>> fits;
  if (kind != "measurement") {
    reps.push_back(labelled(report(xi, truth, ec.f_max, ids, ec.affine), "input"));
    fits.push_back({"input", resolved(xi, truth, ec.affine)});
  }
  const fs::path lp = state_path(states_dir, NetworkRole::L, ec.q);
  const fs::path hp = state_path(states_dir, NetworkRole::H, ec.q);
  const fs::path sp = state_path(states_dir, NetworkRole::S, ec.q);
  const fs::path l3p = state_path(states_dir, NetworkRole::L3, ec.q);
  if (fs::exists(lp)) {
    const TrainedNet low = load_trained(lp);
    const auto low_out = infer(low, xi);
    reps.push_back(labelled(report(low_out, truth, ec.f_max, ids, ec.affine), "L"));
    fits.push_back({"L", resolved(low_out, truth, ec.affine)});
    if (fs::exists(hp) && fs::exists(sp)) {
      LsModels m{ec.q, low, load_trained(hp), load_trained(sp)};
      const LsOutputs o = infer_ls(m, xi);
      reps.push_back(labelled(report(o.synth, truth, ec.f_max, ids, ec.affine), "S_q" + format_q(ec.q)));
      fits.push_back({"S", resolved(o.synth, truth, ec.affine)});
    }
  }
  if (fs::exists(l3p)) {
    const auto l3_out = infer(load_trained(l3p), xi);
    reps.push_back(labelled(report(l3_out, truth, ec.f_max, ids, ec.affine), "L3"));
    fits.push_back({"L3", resolved(l3_out, truth, ec.affine)});
  }
  if (reps.empty()) throw UsageError("nothing to evaluate: no retrieved inputs and no states");

  std::vector<std::pair<std::string, const MetricReport*>> table;
  for (const MetricReport& r : reps) {
    write_report_csv(out / (r.label + ".csv"), r);
    table.push_back({r.label, &r});
  }
  write_summary(out / "summary.csv", table);

  PsdTable psd{data.grid.dx, data.grid.nx, {"truth"}, {diag_of(truth)}};
  for (const auto& [name, f] : fits) {
    psd.names.push_back(name);
    psd.columns.push_back(diag_of(f));
  }
  if (data.grid.nx == data.grid.ny) write_psd_csv(out / "psd_diagonal.csv", psd);
}

double cmd_analyze_psd(const fs::path& in_dir, bool diagonal, const fs::path& out) {
  std::vector<RealField> images;
  if (fs::exists(in_dir / kManifestName)) {
    for (const ManifestEntry& e : read_manifest(in_dir)) images.push_back(load_real_field(in_dir / e.filename));
  } else {
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(in_dir))
      if (entry.path().extension() == ".lspr") files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    for (const fs::path& p : files) images.push_back(load_real_field(p));
  }
  if (images.empty()) throw UsageError("no fields found in " + in_dir.string());
  const RealField psd = psd2d(images);
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  save_field(fs::path(out.string() + ".lspr"), psd);
  const double slope = radial_slope(psd);
  std::ostringstream s;
  s << std::setprecision(17) << "slope=" << slope << "\nimages=" << images.size() << '\n';
  write_text(fs::path(out.string() + "_slope.txt"), s.str());
  if (diagonal) {
    if (psd.nx() != psd.ny()) throw DimensionError("diagonal PSD needs a square grid");
    write_psd_csv(fs::path(out.string() + "_diagonal.csv"),
                  PsdTable{psd.grid.dx, psd.nx(), {"psd"}, {psd_diagonal(psd)}});
  }
  return slope;
}

}  // namespace lsdnn
