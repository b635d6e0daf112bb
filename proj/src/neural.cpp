#include "lsdnn/neural.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numeric>
#include <sstream>

#include "lsdnn/noise.hpp"

namespace lsdnn {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMat>;
using MutMap = Eigen::Map<RowMat>;

std::size_t enc_a(std::size_t l) { return 2 * l; }
std::size_t enc_b(std::size_t l) { return 2 * l + 1; }
std::size_t dec_up(const NetworkSpec& s, std::size_t l) {
  return 2 * (s.depth() + 1) + 2 * (s.depth() - 1 - l);
}
std::size_t dec_merge(const NetworkSpec& s, std::size_t l) { return dec_up(s, l) + 1; }
std::size_t final_layer(const NetworkSpec& s) { return 4 * s.depth() + 2; }

// col[(ci*k + ky)*k + kx][y*W + x] = x[ci][y + ky - p][x + kx - p], zero padded.
void im2col(const double* x, std::size_t cin, std::size_t h, std::size_t w, std::size_t k,
            std::vector<double>& col) {
  const auto pad = static_cast<std::ptrdiff_t>(k / 2);
  const std::size_t hw = h * w;
  col.assign(cin * k * k * hw, 0.0);
  for (std::size_t ci = 0; ci < cin; ++ci)
    for (std::size_t ky = 0; ky < k; ++ky)
      for (std::size_t kx = 0; kx < k; ++kx) {
        double* row = col.data() + ((ci * k + ky) * k + kx) * hw;
        const std::ptrdiff_t dy = static_cast<std::ptrdiff_t>(ky) - pad;
        const std::ptrdiff_t dx = static_cast<std::ptrdiff_t>(kx) - pad;
        for (std::size_t y = 0; y < h; ++y) {
          const std::ptrdiff_t sy = static_cast<std::ptrdiff_t>(y) + dy;
          if (sy < 0 || sy >= static_cast<std::ptrdiff_t>(h)) continue;
          const double* src = x + (ci * h + static_cast<std::size_t>(sy)) * w;
          const std::size_t x0 = dx < 0 ? static_cast<std::size_t>(-dx) : 0;
          const std::size_t x1 = dx > 0 ? w - static_cast<std::size_t>(dx) : w;
          for (std::size_t xx = x0; xx < x1; ++xx)
            row[y * w + xx] = src[static_cast<std::ptrdiff_t>(xx) + dx];
        }
      }
}

void col2im(const std::vector<double>& col, std::size_t cin, std::size_t h, std::size_t w,
            std::size_t k, double* dx_out) {
  const auto pad = static_cast<std::ptrdiff_t>(k / 2);
  const std::size_t hw = h * w;
  std::fill(dx_out, dx_out + cin * hw, 0.0);
  for (std::size_t ci = 0; ci < cin; ++ci)
    for (std::size_t ky = 0; ky < k; ++ky)
      for (std::size_t kx = 0; kx < k; ++kx) {
        const double* row = col.data() + ((ci * k + ky) * k + kx) * hw;
        const std::ptrdiff_t dy = static_cast<std::ptrdiff_t>(ky) - pad;
        const std::ptrdiff_t dx = static_cast<std::ptrdiff_t>(kx) - pad;
        for (std::size_t y = 0; y < h; ++y) {
          const std::ptrdiff_t sy = static_cast<std::ptrdiff_t>(y) + dy;
          if (sy < 0 || sy >= static_cast<std::ptrdiff_t>(h)) continue;
          double* dst = dx_out + (ci * h + static_cast<std::size_t>(sy)) * w;
          const std::size_t x0 = dx < 0 ? static_cast<std::size_t>(-dx) : 0;
          const std::size_t x1 = dx > 0 ? w - static_cast<std::size_t>(dx) : w;
          for (std::size_t xx = x0; xx < x1; ++xx)
            dst[static_cast<std::ptrdiff_t>(xx) + dx] += row[y * w + xx];
        }
      }
}

Tensor4 conv_forward(const ConvParams& p, const Tensor4& x, bool activate, double slope) {
  const std::size_t hw = x.plane();
  Tensor4 y(x.n, p.cout, x.h, x.w);
  ConstMap wm(p.weight.data(), static_cast<Eigen::Index>(p.cout),
              static_cast<Eigen::Index>(p.cin * p.k * p.k));
  std::vector<double> col;
  for (std::size_t i = 0; i < x.n; ++i) {
    const double* src = x.item(i);
    if (p.k != 1) {
      im2col(src, p.cin, x.h, x.w, p.k, col);
      src = col.data();
    }
    ConstMap cm(src, static_cast<Eigen::Index>(p.cin * p.k * p.k), static_cast<Eigen::Index>(hw));
    MutMap ym(y.item(i), static_cast<Eigen::Index>(p.cout), static_cast<Eigen::Index>(hw));
    ym.noalias() = wm * cm;
    for (std::size_t co = 0; co < p.cout; ++co) {
      double* row = y.item(i) + co * hw;
      const double b = p.bias[co];
      if (activate)
        for (std::size_t j = 0; j < hw; ++j) {
          const double v = row[j] + b;
          row[j] = v > 0.0 ? v : slope * v;
        }
      else
        for (std::size_t j = 0; j < hw; ++j) row[j] += b;
    }
  }
  return y;
}

// Accumulates into grad; returns dL/dx when requested.
Tensor4 conv_backward(const ConvParams& p, const Tensor4& x, const Tensor4& dy, ConvParams& grad,
                      bool need_dx) {
  const std::size_t hw = x.plane();
  const auto rows = static_cast<Eigen::Index>(p.cin * p.k * p.k);
  ConstMap wm(p.weight.data(), static_cast<Eigen::Index>(p.cout), rows);
  MutMap gw(grad.weight.data(), static_cast<Eigen::Index>(p.cout), rows);
  Tensor4 dx;
  if (need_dx) dx = Tensor4(x.n, p.cin, x.h, x.w);
  std::vector<double> col, dcol;
  RowMat dcol_m;
  for (std::size_t i = 0; i < x.n; ++i) {
    const double* src = x.item(i);
    if (p.k != 1) {
      im2col(src, p.cin, x.h, x.w, p.k, col);
      src = col.data();
    }
    ConstMap cm(src, rows, static_cast<Eigen::Index>(hw));
    ConstMap dym(dy.item(i), static_cast<Eigen::Index>(p.cout), static_cast<Eigen::Index>(hw));
    gw.noalias() += dym * cm.transpose();
    for (std::size_t co = 0; co < p.cout; ++co) {
      const double* row = dy.item(i) + co * hw;
      double s = 0.0;
      for (std::size_t j = 0; j < hw; ++j) s += row[j];
      grad.bias[co] += s;
    }
    if (!need_dx) continue;
    if (p.k == 1) {
      MutMap dxm(dx.item(i), rows, static_cast<Eigen::Index>(hw));
      dxm.noalias() = wm.transpose() * dym;
    } else {
      dcol.resize(static_cast<std::size_t>(rows) * hw);
      MutMap dcm(dcol.data(), rows, static_cast<Eigen::Index>(hw));
      dcm.noalias() = wm.transpose() * dym;
      col2im(dcol, p.cin, x.h, x.w, p.k, dx.item(i));
    }
  }
  return dx;
}

void activation_backward(const Tensor4& out, Tensor4& d, double slope) {
  for (std::size_t j = 0; j < d.v.size(); ++j)
    if (!(out.v[j] > 0.0)) d.v[j] *= slope;
}

Tensor4 avgpool2(const Tensor4& x) {
  Tensor4 y(x.n, x.c, x.h / 2, x.w / 2);
  for (std::size_t i = 0; i < x.n; ++i)
    for (std::size_t c = 0; c < x.c; ++c)
      for (std::size_t yy = 0; yy < y.h; ++yy)
        for (std::size_t xx = 0; xx < y.w; ++xx)
          y.at(i, c, yy, xx) = 0.25 * (x.at(i, c, 2 * yy, 2 * xx) + x.at(i, c, 2 * yy, 2 * xx + 1) +
                                       x.at(i, c, 2 * yy + 1, 2 * xx) +
                                       x.at(i, c, 2 * yy + 1, 2 * xx + 1));
  return y;
}

Tensor4 avgpool2_backward(const Tensor4& dy) {
  Tensor4 dx(dy.n, dy.c, dy.h * 2, dy.w * 2);
  for (std::size_t i = 0; i < dx.n; ++i)
    for (std::size_t c = 0; c < dx.c; ++c)
      for (std::size_t yy = 0; yy < dx.h; ++yy)
        for (std::size_t xx = 0; xx < dx.w; ++xx) dx.at(i, c, yy, xx) = 0.25 * dy.at(i, c, yy / 2, xx / 2);
  return dx;
}

Tensor4 upsample2(const Tensor4& x) {
  Tensor4 y(x.n, x.c, x.h * 2, x.w * 2);
  for (std::size_t i = 0; i < y.n; ++i)
    for (std::size_t c = 0; c < y.c; ++c)
      for (std::size_t yy = 0; yy < y.h; ++yy)
        for (std::size_t xx = 0; xx < y.w; ++xx) y.at(i, c, yy, xx) = x.at(i, c, yy / 2, xx / 2);
  return y;
}

Tensor4 upsample2_backward(const Tensor4& dy) {
  Tensor4 dx(dy.n, dy.c, dy.h / 2, dy.w / 2);
  for (std::size_t i = 0; i < dy.n; ++i)
    for (std::size_t c = 0; c < dy.c; ++c)
      for (std::size_t yy = 0; yy < dy.h; ++yy)
        for (std::size_t xx = 0; xx < dy.w; ++xx) dx.at(i, c, yy / 2, xx / 2) += dy.at(i, c, yy, xx);
  return dx;
}

Tensor4 concat_channels(const Tensor4& a, const Tensor4& b) {
  Tensor4 y(a.n, a.c + b.c, a.h, a.w);
  for (std::size_t i = 0; i < a.n; ++i) {
    std::copy(a.item(i), a.item(i) + a.item_size(), y.item(i));
    std::copy(b.item(i), b.item(i) + b.item_size(), y.item(i) + a.item_size());
  }
  return y;
}

std::pair<Tensor4, Tensor4> split_channels(const Tensor4& d, std::size_t first) {
  Tensor4 a(d.n, first, d.h, d.w), b(d.n, d.c - first, d.h, d.w);
  for (std::size_t i = 0; i < d.n; ++i) {
    std::copy(d.item(i), d.item(i) + a.item_size(), a.item(i));
    std::copy(d.item(i) + a.item_size(), d.item(i) + d.item_size(), b.item(i));
  }
  return {std::move(a), std::move(b)};
}

Gradients zero_like(const std::vector<ConvParams>& layers) {
  Gradients g = layers;
  for (ConvParams& p : g) {
    std::fill(p.weight.begin(), p.weight.end(), 0.0);
    std::fill(p.bias.begin(), p.bias.end(), 0.0);
  }
  return g;
}

// Centered sums for the Pearson correlation of one item.
struct PearsonSums {
  double sab = 0, saa = 0, sbb = 0, ma = 0, mb = 0;
};

PearsonSums pearson_sums(const double* a, const double* b, std::size_t n) {
  PearsonSums s;
  for (std::size_t j = 0; j < n; ++j) {
    s.ma += a[j];
    s.mb += b[j];
  }
  s.ma /= static_cast<double>(n);
  s.mb /= static_cast<double>(n);
  for (std::size_t j = 0; j < n; ++j) {
    const double da = a[j] - s.ma, db = b[j] - s.mb;
    s.sab += da * db;
    s.saa += da * da;
    s.sbb += db * db;
  }
  return s;
}

bool degenerate_spread(double centered_sq, const double* x, std::size_t n) {
  double raw = 0.0;
  for (std::size_t j = 0; j < n; ++j) raw += x[j] * x[j];
  return !(centered_sq > 1e-24 * std::max(raw, 1e-300));
}

void require_loss_shapes(const Tensor4& p, const Tensor4& t) {
  if (!p.same_shape(t)) throw DimensionError("loss: prediction and target shapes differ");
  if (p.n == 0 || p.item_size() == 0) throw DimensionError("loss: empty batch");
}

Tensor4 gather(const Tensor4& src, const std::vector<std::size_t>& idx, std::size_t begin,
               std::size_t end) {
  Tensor4 out(end - begin, src.c, src.h, src.w);
  for (std::size_t i = begin; i < end; ++i)
    std::copy(src.item(idx[i]), src.item(idx[i]) + src.item_size(), out.item(i - begin));
  return out;
}

}  // namespace

const char* role_name(NetworkRole role) {
  switch (role) {
    case NetworkRole::L: return "L";
    case NetworkRole::H: return "H";
    case NetworkRole::S: return "S";
    case NetworkRole::L3: return "L3";
  }
  return "?";
}

NetworkRole parse_role(const std::string& name) {
  if (name == "L") return NetworkRole::L;
  if (name == "H") return NetworkRole::H;
  if (name == "S") return NetworkRole::S;
  if (name == "L3") return NetworkRole::L3;
  throw UsageError("unknown network role: " + name);
}

void NetworkSpec::validate() const {
  if (widths.empty() || std::any_of(widths.begin(), widths.end(), [](std::size_t w) { return w == 0; }))
    throw UsageError("network widths must be nonempty and positive");
  if (kernel == 0 || kernel % 2 == 0) throw UsageError("kernel size must be odd");
  if (!(slope >= 0.0)) throw UsageError("activation slope must be >= 0");
  if (role == NetworkRole::S && (!bypass || in_channels != 2))
    throw UsageError("S-role specs require bypass and two input channels");
  if (role != NetworkRole::S && (bypass || in_channels != 1))
    throw UsageError("L/H/L3 specs take one input channel and no bypass");
}

NetworkSpec NetworkSpec::for_role(NetworkRole role, std::vector<std::size_t> widths) {
  NetworkSpec s;
  s.role = role;
  s.widths = std::move(widths);
  s.bypass = role == NetworkRole::S;
  s.in_channels = s.bypass ? 2 : 1;
  s.residual = true;
  return s;
}

std::string NetworkSpec::to_text() const {
  std::ostringstream os;
  os << std::setprecision(17) << "role=" << role_name(role) << "\nin_channels=" << in_channels
     << "\nwidths=";
  for (std::size_t i = 0; i < widths.size(); ++i) os << (i ? "," : "") << widths[i];
  os << "\nkernel=" << kernel << "\nslope=" << slope << "\nresidual=" << (residual ? 1 : 0)
     << "\nbypass=" << (bypass ? 1 : 0) << '\n';
  return os.str();
}

NetworkSpec NetworkSpec::from_text(const std::string& text) {
  NetworkSpec s;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    const std::string key = line.substr(0, eq), val = line.substr(eq + 1);
    if (key == "role") s.role = parse_role(val);
    else if (key == "in_channels") s.in_channels = std::stoul(val);
    else if (key == "kernel") s.kernel = std::stoul(val);
    else if (key == "slope") s.slope = std::stod(val);
    else if (key == "residual") s.residual = val == "1";
    else if (key == "bypass") s.bypass = val == "1";
    else if (key == "widths") {
      s.widths.clear();
      std::istringstream ws(val);
      std::string tok;
      while (std::getline(ws, tok, ',')) s.widths.push_back(std::stoul(tok));
    } else {
      throw FormatError("unknown network spec key: " + key);
    }
  }
  s.validate();
  return s;
}

std::size_t NetworkState::parameter_count() const {
  std::size_t n = 0;
  for (const ConvParams& p : layers) n += p.count();
  return n;
}

std::vector<ConvParams> conv_layout(const NetworkSpec& spec) {
  spec.validate();
  const std::size_t d = spec.depth(), k = spec.kernel;
  std::vector<ConvParams> layers(4 * d + 3);
  auto shape = [](ConvParams& p, std::size_t cin, std::size_t cout, std::size_t kk) {
    p.cin = cin;
    p.cout = cout;
    p.k = kk;
    p.weight.assign(cout * cin * kk * kk, 0.0);
    p.bias.assign(cout, 0.0);
  };
  for (std::size_t l = 0; l <= d; ++l) {
    shape(layers[enc_a(l)], l == 0 ? spec.body_channels() : spec.widths[l - 1], spec.widths[l], k);
    shape(layers[enc_b(l)], spec.widths[l], spec.widths[l], k);
  }
  for (std::size_t l = 0; l < d; ++l) {
    shape(layers[dec_up(spec, l)], spec.widths[l + 1], spec.widths[l], k);
    shape(layers[dec_merge(spec, l)], 2 * spec.widths[l], spec.widths[l], k);
  }
  shape(layers[final_layer(spec)], spec.widths[0] + (spec.bypass ? 1 : 0), 1, 1);
  return layers;
}

std::size_t parameter_count(const NetworkSpec& spec) {
  std::size_t n = 0;
  for (const ConvParams& p : conv_layout(spec)) n += p.count();
  return n;
}

NetworkState init_state(const NetworkSpec& spec, std::uint64_t seed) {
  NetworkState st;
  st.layers = conv_layout(spec);
  for (std::size_t li = 0; li < st.layers.size(); ++li) {
    ConvParams& p = st.layers[li];
    if (li == final_layer(spec) && spec.residual) continue;  // identity start
    RngStream rng(seed, 0x1a7e500ULL + li);
    const double bound = std::sqrt(6.0 / static_cast<double>(p.cin * p.k * p.k));
    for (double& w : p.weight) w = (2.0 * rng.uniform() - 1.0) * bound;
  }
  st.first_moment = zero_like(st.layers);
  st.second_moment = zero_like(st.layers);
  return st;
}

ForwardResult forward(const NetworkSpec& spec, const NetworkState& state, const Tensor4& input,
                      const Tensor4* aux) {
  spec.validate();
  const std::size_t d = spec.depth();
  if (state.layers.size() != 4 * d + 3) throw DimensionError("network state does not match spec");
  if (input.c != spec.body_channels())
    throw DimensionError("input channel count does not match the network spec");
  const std::size_t factor = std::size_t{1} << d;
  if (input.h % factor != 0 || input.w % factor != 0 || input.h == 0 || input.w == 0)
    throw DimensionError("input size must be divisible by 2^depth");
  if (spec.bypass) {
    if (!aux) throw DimensionError("bypass network requires an aux input");
    if (aux->n != input.n || aux->c != 1 || aux->h != input.h || aux->w != input.w)
      throw DimensionError("aux input shape mismatch");
  }

  ForwardResult r;
  ForwardCache& c = r.cache;
  c.step = state.step;
  c.n = input.n;
  c.h = input.h;
  c.w = input.w;
  c.conv_in.resize(state.layers.size());
  c.conv_out.resize(state.layers.size());
  auto run = [&](std::size_t li, Tensor4 x, bool act) -> const Tensor4& {
    c.conv_in[li] = std::move(x);
    c.conv_out[li] = conv_forward(state.layers[li], c.conv_in[li], act, spec.slope);
    return c.conv_out[li];
  };

  Tensor4 h = input;
  for (std::size_t l = 0; l <= d; ++l) {
    run(enc_a(l), std::move(h), true);
    h = run(enc_b(l), c.conv_out[enc_a(l)], true);
    if (l < d) h = avgpool2(h);
  }
  for (std::size_t ll = d; ll-- > 0;) {
    run(dec_up(spec, ll), upsample2(h), true);
    h = run(dec_merge(spec, ll), concat_channels(c.conv_out[dec_up(spec, ll)], c.conv_out[enc_b(ll)]),
            true);
  }
  if (spec.bypass) h = concat_channels(h, *aux);
  r.output = run(final_layer(spec), std::move(h), false);
  if (spec.residual)
    for (std::size_t i = 0; i < input.n; ++i) {
      const double* src = input.item(i);  // channel 0
      double* dst = r.output.item(i);
      for (std::size_t j = 0; j < input.plane(); ++j) dst[j] += src[j];
    }
  return r;
}

Tensor4 predict(const NetworkSpec& spec, const NetworkState& state, const Tensor4& input,
                const Tensor4* aux, std::size_t batch) {
  Tensor4 out(input.n, 1, input.h, input.w);
  std::vector<std::size_t> idx(input.n);
  std::iota(idx.begin(), idx.end(), 0);
  batch = std::max<std::size_t>(batch, 1);
  for (std::size_t b = 0; b < input.n; b += batch) {
    const std::size_t e = std::min(b + batch, input.n);
    const Tensor4 x = gather(input, idx, b, e);
    Tensor4 a;
    if (aux) a = gather(*aux, idx, b, e);
    const ForwardResult r = forward(spec, state, x, aux ? &a : nullptr);
    std::copy(r.output.v.begin(), r.output.v.end(), out.item(b));
  }
  return out;
}

Gradients backward(const NetworkSpec& spec, const NetworkState& state, const ForwardCache& cache,
                   const Tensor4& output_grad) {
  if (cache.step != state.step || cache.conv_in.size() != state.layers.size())
    throw UsageError("stale forward cache: network state changed since forward");
  if (output_grad.n != cache.n || output_grad.c != 1 || output_grad.h != cache.h ||
      output_grad.w != cache.w)
    throw DimensionError("output gradient shape mismatch");
  const std::size_t d = spec.depth();
  Gradients g = zero_like(state.layers);
  auto back = [&](std::size_t li, Tensor4 dout, bool act, bool need_dx) {
    if (act) activation_backward(cache.conv_out[li], dout, spec.slope);
    return conv_backward(state.layers[li], cache.conv_in[li], dout, g[li], need_dx);
  };

  Tensor4 dh = back(final_layer(spec), output_grad, false, true);
  if (spec.bypass) dh = split_channels(dh, spec.widths[0]).first;

  std::vector<Tensor4> dskip(d);
  for (std::size_t l = 0; l < d; ++l) {
    auto [dup, dsk] = split_channels(back(dec_merge(spec, l), std::move(dh), true, true),
                                     spec.widths[l]);
    dskip[l] = std::move(dsk);
    dh = upsample2_backward(back(dec_up(spec, l), std::move(dup), true, true));
  }
  for (std::size_t l = d + 1; l-- > 0;) {
    if (l < d) {
      dh = avgpool2_backward(dh);
      for (std::size_t j = 0; j < dh.v.size(); ++j) dh.v[j] += dskip[l].v[j];
    }
    dh = back(enc_b(l), std::move(dh), true, true);
    dh = back(enc_a(l), std::move(dh), true, l > 0);
  }
  return g;
}

const char* loss_name(LossKind kind) {
  switch (kind) {
    case LossKind::NPCC: return "npcc";
    case LossKind::MSE: return "mse";
    case LossKind::MAE: return "mae";
  }
  return "?";
}

LossKind parse_loss(const std::string& name) {
  if (name == "npcc") return LossKind::NPCC;
  if (name == "mse") return LossKind::MSE;
  if (name == "mae") return LossKind::MAE;
  throw UsageError("unknown loss: " + name);
}

LossResult npcc_loss(const Tensor4& prediction, const Tensor4& target) {
  require_loss_shapes(prediction, target);
  const std::size_t m = prediction.item_size();
  const double inv_n = 1.0 / static_cast<double>(prediction.n);
  LossResult r;
  r.grad = Tensor4(prediction.n, prediction.c, prediction.h, prediction.w);
  for (std::size_t i = 0; i < prediction.n; ++i) {
    const double* a = prediction.item(i);
    const double* b = target.item(i);
    const PearsonSums s = pearson_sums(a, b, m);
    if (degenerate_spread(s.sbb, b, m)) throw DegenerateError("npcc: target has zero variance");
    if (degenerate_spread(s.saa, a, m)) throw DegenerateError("npcc: prediction has zero variance");
    const double norm = std::sqrt(s.saa * s.sbb);
    r.loss += -s.sab / norm * inv_n;
    // d/da_j of -Sab / sqrt(Saa Sbb); the mean terms cancel.
    double* g = r.grad.item(i);
    for (std::size_t j = 0; j < m; ++j) {
      const double da = a[j] - s.ma, db = b[j] - s.mb;
      g[j] = -(db / norm - s.sab * da / (s.saa * norm)) * inv_n;
    }
  }
  return r;
}

LossResult mse_loss(const Tensor4& prediction, const Tensor4& target) {
  require_loss_shapes(prediction, target);
  const double inv = 1.0 / static_cast<double>(prediction.v.size());
  LossResult r;
  r.grad = Tensor4(prediction.n, prediction.c, prediction.h, prediction.w);
  for (std::size_t j = 0; j < prediction.v.size(); ++j) {
    const double d = prediction.v[j] - target.v[j];
    r.loss += d * d * inv;
    r.grad.v[j] = 2.0 * d * inv;
  }
  return r;
}

LossResult mae_loss(const Tensor4& prediction, const Tensor4& target) {
  require_loss_shapes(prediction, target);
  const double inv = 1.0 / static_cast<double>(prediction.v.size());
  LossResult r;
  r.grad = Tensor4(prediction.n, prediction.c, prediction.h, prediction.w);
  for (std::size_t j = 0; j < prediction.v.size(); ++j) {
    const double d = prediction.v[j] - target.v[j];
    r.loss += std::fabs(d) * inv;
    r.grad.v[j] = (d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0)) * inv;
  }
  return r;
}

LossResult compute_loss(LossKind kind, const Tensor4& prediction, const Tensor4& target) {
  switch (kind) {
    case LossKind::NPCC: return npcc_loss(prediction, target);
    case LossKind::MSE: return mse_loss(prediction, target);
    case LossKind::MAE: return mae_loss(prediction, target);
  }
  throw UsageError("unknown loss kind");
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw UsageError("learning rate must be > 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0))
    throw UsageError("moment decay rates must lie in [0, 1)");
  if (!(epsilon > 0.0)) throw UsageError("epsilon must be > 0");
  if (batch == 0) throw UsageError("batch size must be >= 1");
}

void optimizer_step(NetworkState& state, const Gradients& grads, const TrainConfig& config) {
  if (grads.size() != state.layers.size()) throw DimensionError("gradient/state layer mismatch");
  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(config.beta1, t);
  const double c2 = 1.0 - std::pow(config.beta2, t);
  auto update = [&](std::vector<double>& w, const std::vector<double>& g, std::vector<double>& m,
                    std::vector<double>& v) {
    if (g.size() != w.size()) throw DimensionError("gradient shape mismatch");
    for (std::size_t j = 0; j < w.size(); ++j) {
      m[j] = config.beta1 * m[j] + (1.0 - config.beta1) * g[j];
      v[j] = config.beta2 * v[j] + (1.0 - config.beta2) * g[j] * g[j];
      w[j] -= config.learning_rate * (m[j] / c1) / (std::sqrt(v[j] / c2) + config.epsilon);
    }
  };
  for (std::size_t li = 0; li < state.layers.size(); ++li) {
    update(state.layers[li].weight, grads[li].weight, state.first_moment[li].weight,
           state.second_moment[li].weight);
    update(state.layers[li].bias, grads[li].bias, state.first_moment[li].bias,
           state.second_moment[li].bias);
  }
}

double evaluate_loss(const NetworkSpec& spec, const NetworkState& state, const TrainingSet& data,
                     LossKind loss, std::size_t batch) {
  std::vector<std::size_t> idx(data.size());
  std::iota(idx.begin(), idx.end(), 0);
  double total = 0.0;
  for (std::size_t b = 0; b < data.size(); b += batch) {
    const std::size_t e = std::min(b + batch, data.size());
    const Tensor4 x = gather(data.inputs, idx, b, e);
    Tensor4 a;
    if (data.aux) a = gather(*data.aux, idx, b, e);
    const ForwardResult fr = forward(spec, state, x, data.aux ? &a : nullptr);
    total += compute_loss(loss, fr.output, gather(data.targets, idx, b, e)).loss *
             static_cast<double>(e - b);
  }
  return total / static_cast<double>(data.size());
}

TrainResult train(const NetworkSpec& spec, const TrainingSet& data, const TrainConfig& config,
                  const TrainingSet* validation) {
  config.validate();
  if (data.size() == 0) throw UsageError("training set is empty");
  if (spec.bypass != data.aux.has_value()) throw DimensionError("aux inputs must match the bypass flag");

  // Drop targets whose spread vanishes (NPCC is undefined for them).
  std::vector<std::size_t> usable;
  TrainResult result;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const double* t = data.targets.item(i);
    const std::size_t m = data.targets.item_size();
    const PearsonSums s = pearson_sums(t, t, m);
    if (config.loss == LossKind::NPCC && degenerate_spread(s.saa, t, m)) {
      ++result.skipped;
      continue;
    }
    usable.push_back(i);
  }
  if (result.skipped > 0)
    warn("train: skipped " + std::to_string(result.skipped) + " degenerate target(s)");
  if (usable.empty()) throw DegenerateError("train: every target is degenerate");

  NetworkState state = init_state(spec, config.seed);
  NetworkState best = state;
  double best_val = std::numeric_limits<double>::infinity();

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    std::vector<std::size_t> order = usable;
    RngStream rng(config.seed, 0xe90c0000ULL + epoch);
    for (std::size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1], order[static_cast<std::size_t>(rng.next_u64() % i)]);

    double epoch_loss = 0.0;
    for (std::size_t b = 0; b < order.size(); b += config.batch) {
      const std::size_t e = std::min(b + config.batch, order.size());
      const Tensor4 x = gather(data.inputs, order, b, e);
      Tensor4 a;
      if (data.aux) a = gather(*data.aux, order, b, e);
      const Tensor4 t = gather(data.targets, order, b, e);
      const ForwardResult fr = forward(spec, state, x, data.aux ? &a : nullptr);
      const LossResult lr = compute_loss(config.loss, fr.output, t);
      epoch_loss += lr.loss * static_cast<double>(e - b);
      const Gradients g = backward(spec, state, fr.cache, lr.grad);
      optimizer_step(state, g, config);
    }
    EpochLog log;
    log.epoch = epoch;
    log.train_loss = epoch_loss / static_cast<double>(order.size());
    log.validation_loss = std::numeric_limits<double>::quiet_NaN();
    if (validation && validation->size() > 0) {
      log.validation_loss = evaluate_loss(spec, state, *validation, config.loss, config.batch);
      if (log.validation_loss < best_val) {
        best_val = log.validation_loss;
        best = state;
        result.best_epoch = epoch;
      }
    }
    result.history.push_back(log);
  }
  if (validation && validation->size() > 0 && result.best_epoch > 0) {
    result.state = std::move(best);
  } else {
    result.state = std::move(state);
    result.best_epoch = config.epochs;
  }
  return result;
}

void save_network(const std::filesystem::path& path, const NetworkSpec& spec,
                  const NetworkState& state) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot open for writing: " + path.string());
  auto put32 = [&](std::uint32_t v) { out.write(reinterpret_cast<const char*>(&v), 4); };
  const std::string text = spec.to_text();
  out.write("LSNN", 4);
  put32(1);
  put32(static_cast<std::uint32_t>(text.size()));
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  const std::uint64_t step = state.step;
  out.write(reinterpret_cast<const char*>(&step), 8);
  put32(static_cast<std::uint32_t>(state.layers.size()));
  for (const ConvParams& p : state.layers) {
    put32(static_cast<std::uint32_t>(p.cout));
    put32(static_cast<std::uint32_t>(p.cin));
    put32(static_cast<std::uint32_t>(p.k));
    for (double w : p.weight) {
      const auto f = static_cast<float>(w);
      out.write(reinterpret_cast<const char*>(&f), 4);
    }
    for (double b : p.bias) {
      const auto f = static_cast<float>(b);
      out.write(reinterpret_cast<const char*>(&f), 4);
    }
  }
  if (!out) throw FormatError("write failed: " + path.string());
}

std::pair<NetworkSpec, NetworkState> load_network(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open: " + path.string());
  auto read = [&](void* dst, std::size_t n) {
    in.read(static_cast<char*>(dst), static_cast<std::streamsize>(n));
    if (in.gcount() != static_cast<std::streamsize>(n))
      throw FormatError("truncated network file: " + path.string());
  };
  auto get32 = [&] {
    std::uint32_t v;
    read(&v, 4);
    return v;
  };
  char magic[4];
  read(magic, 4);
  if (std::memcmp(magic, "LSNN", 4) != 0) throw FormatError("bad LSNN magic: " + path.string());
  if (get32() != 1) throw FormatError("unsupported LSNN version: " + path.string());
  std::string text(get32(), '\0');
  read(text.data(), text.size());
  NetworkSpec spec = NetworkSpec::from_text(text);
  NetworkState state;
  state.layers = conv_layout(spec);
  read(&state.step, 8);
  if (get32() != state.layers.size()) throw FormatError("layer count mismatch: " + path.string());
  for (ConvParams& p : state.layers) {
    if (get32() != p.cout || get32() != p.cin || get32() != p.k)
      throw FormatError("layer shape mismatch: " + path.string());
    auto fill = [&](std::vector<double>& dst) {
      for (double& w : dst) {
        float f;
        read(&f, 4);
        if (!std::isfinite(f)) throw FormatError("non-finite weight: " + path.string());
        w = f;
      }
    };
    fill(p.weight);
    fill(p.bias);
  }
  state.first_moment = zero_like(state.layers);
  state.second_moment = zero_like(state.layers);
  return {spec, state};
}

void write_loss_csv(const std::filesystem::path& path, const std::vector<EpochLog>& history) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw FormatError("cannot write: " + path.string());
  out << "epoch,train_loss,validation_loss\n" << std::setprecision(17);
  for (const EpochLog& e : history) {
    out << e.epoch << ',' << e.train_loss << ',';
    if (std::isnan(e.validation_loss)) out << "nan";
    else out << e.validation_loss;
    out << '\n';
  }
}

NetworkSpec l3_spec_matching(const NetworkSpec& l, const NetworkSpec& h, const NetworkSpec& s) {
  const double target =
      static_cast<double>(parameter_count(l) + parameter_count(h) + parameter_count(s));
  NetworkSpec best = NetworkSpec::for_role(NetworkRole::L3, l.widths);
  best.kernel = l.kernel;
  best.slope = l.slope;
  double best_err = std::numeric_limits<double>::infinity();
  for (int step = 100; step <= 400; ++step) {
    const double scale = step / 100.0;
    NetworkSpec cand = best;
    for (std::size_t i = 0; i < l.widths.size(); ++i)
      cand.widths[i] = std::max<std::size_t>(
          1, static_cast<std::size_t>(std::lround(static_cast<double>(l.widths[i]) * scale)));
    const double err = std::fabs(static_cast<double>(parameter_count(cand)) - target) / target;
    if (err < best_err) {
      best_err = err;
      best = cand;
    }
  }
  if (best_err > 0.10) {
    std::ostringstream os;
    os << "L3 capacity mismatch: best width scaling is " << best_err * 100 << "% off L+H+S";
    throw UsageError(os.str());
  }
  return best;
}

}  // namespace lsdnn
