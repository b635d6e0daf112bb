#include "lsdnn/lsdnn.h"

#include <cstring>
#include <exception>
#include <new>
#include <string>

#include "lsdnn/config.hpp"
#include "lsdnn/lspr.hpp"
#include "lsdnn/metrics.hpp"
#include "lsdnn/pgm.hpp"
#include "lsdnn/pipeline.hpp"
#include "lsdnn/retrieval.hpp"

struct lsdnn_config {
  lsdnn::Config config;
};

struct lsdnn_field {
  lsdnn::RealField field;
};

namespace {

thread_local std::string g_last_error;

lsdnn_status fail(lsdnn_status s, const std::string& msg) {
  g_last_error = msg;
  return s;
}

template <typename F>
lsdnn_status guarded(F&& body) {
  g_last_error.clear();
  try {
    body();
    return LSDNN_OK;
  } catch (const lsdnn::Error& e) {
    return fail(static_cast<lsdnn_status>(static_cast<int>(e.kind())), e.what());
  } catch (const std::bad_alloc&) {
    return fail(LSDNN_ERR_INTERNAL, "out of memory");
  } catch (const std::filesystem::filesystem_error& e) {
    return fail(LSDNN_ERR_DATA, e.what());
  } catch (const std::exception& e) {
    return fail(LSDNN_ERR_INTERNAL, e.what());
  } catch (...) {
    return fail(LSDNN_ERR_INTERNAL, "unknown error");
  }
}

void require(const void* p, const char* what) {
  if (!p) throw lsdnn::UsageError(std::string("null argument: ") + what);
}

void copy_out(const std::string& s, char* buf, std::size_t capacity, std::size_t* needed) {
  if (needed) *needed = s.size() + 1;
  if (buf && capacity > s.size()) std::memcpy(buf, s.c_str(), s.size() + 1);
  else if (buf && capacity > 0) throw lsdnn::UsageError("buffer too small");
}

lsdnn::OpticalConfig optics_for(const lsdnn_config* config, const lsdnn::Grid2D& grid) {
  lsdnn::OpticalConfig o = lsdnn::ExperimentConfig::from(config->config).optics;
  o.grid = grid;
  o.validate();
  return o;
}

}  // namespace

extern "C" {

const char* lsdnn_version(void) { return lsdnn::kSoftwareVersion; }
const char* lsdnn_last_error(void) { return g_last_error.c_str(); }
void lsdnn_set_warnings(int enabled) { lsdnn::set_warnings_enabled(enabled != 0); }

lsdnn_status lsdnn_config_create(lsdnn_config** out) {
  return guarded([&] {
    require(out, "out");
    *out = new lsdnn_config{};
  });
}

void lsdnn_config_destroy(lsdnn_config* config) { delete config; }

lsdnn_status lsdnn_config_load(lsdnn_config* config, const char* path) {
  return guarded([&] {
    require(config, "config");
    require(path, "path");
    lsdnn::Config next = config->config;
    next.load(path);
    config->config = std::move(next);
  });
}

lsdnn_status lsdnn_config_set(lsdnn_config* config, const char* key, const char* value) {
  return guarded([&] {
    require(config, "config");
    require(key, "key");
    require(value, "value");
    config->config.set(key, value);
  });
}

lsdnn_status lsdnn_config_get(const lsdnn_config* config, const char* key, char* buf,
                              size_t capacity, size_t* needed) {
  return guarded([&] {
    require(config, "config");
    require(key, "key");
    copy_out(config->config.get(key), buf, capacity, needed);
  });
}

lsdnn_status lsdnn_config_dump(const lsdnn_config* config, char* buf, size_t capacity,
                               size_t* needed) {
  return guarded([&] {
    require(config, "config");
    copy_out(config->config.to_text(), buf, capacity, needed);
  });
}

lsdnn_status lsdnn_field_create(size_t ny, size_t nx, double dy, double dx, lsdnn_field** out) {
  return guarded([&] {
    require(out, "out");
    lsdnn::Grid2D grid{nx, ny, dx, dy};
    grid.validate();
    *out = new lsdnn_field{lsdnn::RealField(grid)};
  });
}

lsdnn_status lsdnn_field_load(const char* path, lsdnn_field** out) {
  return guarded([&] {
    require(path, "path");
    require(out, "out");
    *out = new lsdnn_field{lsdnn::load_real_field(path)};
  });
}

lsdnn_status lsdnn_field_save(const lsdnn_field* field, const char* path, int single_precision) {
  return guarded([&] {
    require(field, "field");
    require(path, "path");
    lsdnn::save_field(path, field->field,
                      single_precision ? lsdnn::LsprType::Real32 : lsdnn::LsprType::Real64);
  });
}

void lsdnn_field_destroy(lsdnn_field* field) { delete field; }

lsdnn_status lsdnn_field_shape(const lsdnn_field* field, size_t* ny, size_t* nx, double* dy,
                               double* dx) {
  return guarded([&] {
    require(field, "field");
    if (ny) *ny = field->field.grid.ny;
    if (nx) *nx = field->field.grid.nx;
    if (dy) *dy = field->field.grid.dy;
    if (dx) *dx = field->field.grid.dx;
  });
}

double* lsdnn_field_data(lsdnn_field* field) { return field ? field->field.values.data() : nullptr; }

lsdnn_status lsdnn_export_pgm(const lsdnn_field* field, const char* path) {
  return guarded([&] {
    require(field, "field");
    require(path, "path");
    lsdnn::export_pgm16(path, field->field);
  });
}

lsdnn_status lsdnn_pcc(const lsdnn_field* a, const lsdnn_field* b, double* out) {
  return guarded([&] {
    require(a, "a");
    require(b, "b");
    require(out, "out");
    *out = lsdnn::pcc(a->field, b->field);
  });
}

lsdnn_status lsdnn_psnr(const lsdnn_field* a, const lsdnn_field* b, double peak, double* out) {
  return guarded([&] {
    require(a, "a");
    require(b, "b");
    require(out, "out");
    *out = lsdnn::psnr(a->field, b->field, peak);
  });
}

lsdnn_status lsdnn_ssim(const lsdnn_field* a, const lsdnn_field* b, double dynamic_range, double* out) {
  return guarded([&] {
    require(a, "a");
    require(b, "b");
    require(out, "out");
    *out = dynamic_range > 0.0 ? lsdnn::ssim(a->field, b->field, dynamic_range)
                               : lsdnn::ssim(a->field, b->field);
  });
}

lsdnn_status lsdnn_forward_intensity(const lsdnn_config* config, const lsdnn_field* phase,
                                     lsdnn_field** out) {
  return guarded([&] {
    require(config, "config");
    require(phase, "phase");
    require(out, "out");
    *out = new lsdnn_field{lsdnn::forward_intensity(phase->field, optics_for(config, phase->field.grid))};
  });
}

lsdnn_status lsdnn_approximant(const lsdnn_config* config, const lsdnn_field* g, lsdnn_field** out) {
  return guarded([&] {
    require(config, "config");
    require(g, "g");
    require(out, "out");
    *out = new lsdnn_field{lsdnn::approximant(g->field, optics_for(config, g->field.grid))};
  });
}

lsdnn_status lsdnn_gen_data(const lsdnn_config* config, size_t count, const char* out_dir, int force) {
  return guarded([&] {
    require(config, "config");
    require(out_dir, "out_dir");
    lsdnn::cmd_gen_data(config->config, count, out_dir, force != 0);
  });
}

lsdnn_status lsdnn_simulate(const lsdnn_config* config, const char* data_dir, const char* out_dir,
                            int force) {
  return guarded([&] {
    require(config, "config");
    require(data_dir, "data_dir");
    require(out_dir, "out_dir");
    lsdnn::cmd_simulate(config->config, data_dir, out_dir, force != 0);
  });
}

lsdnn_status lsdnn_retrieve(const lsdnn_config* config, const char* measurement_dir, int iterations,
                            const char* out_dir, int force) {
  return guarded([&] {
    require(config, "config");
    require(measurement_dir, "measurement_dir");
    require(out_dir, "out_dir");
    lsdnn::cmd_retrieve(config->config, measurement_dir, iterations, out_dir, force != 0);
  });
}

lsdnn_status lsdnn_train(const lsdnn_config* config, const char* role, const char* data_dir,
                         const char* inputs_dir, const char* states_dir) {
  return guarded([&] {
    require(config, "config");
    require(role, "role");
    require(data_dir, "data_dir");
    require(inputs_dir, "inputs_dir");
    require(states_dir, "states_dir");
    lsdnn::cmd_train(config->config, lsdnn::parse_role(role), data_dir, inputs_dir, states_dir);
  });
}

lsdnn_status lsdnn_run_ls(const lsdnn_config* config, const char* experiment_dir, int force) {
  return guarded([&] {
    require(config, "config");
    require(experiment_dir, "experiment_dir");
    lsdnn::run_ls(config->config, experiment_dir, force != 0);
  });
}

lsdnn_status lsdnn_evaluate(const lsdnn_config* config, const char* states_dir, const char* data_dir,
                            const char* inputs_dir, const char* out_dir, int force) {
  return guarded([&] {
    require(config, "config");
    require(states_dir, "states_dir");
    require(data_dir, "data_dir");
    require(inputs_dir, "inputs_dir");
    require(out_dir, "out_dir");
    lsdnn::cmd_evaluate(config->config, states_dir, data_dir, inputs_dir, out_dir, force != 0);
  });
}

lsdnn_status lsdnn_analyze_psd(const char* in_dir, int diagonal, const char* out_prefix, double* slope) {
  return guarded([&] {
    require(in_dir, "in_dir");
    require(out_prefix, "out_prefix");
    const double s = lsdnn::cmd_analyze_psd(in_dir, diagonal != 0, out_prefix);
    if (slope) *slope = s;
  });
}

}  // extern "C"
