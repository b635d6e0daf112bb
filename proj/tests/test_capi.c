/* Exercises the C interface from plain C. */
#include <math.h>
#include <stdio.h>
#include <stdlib.h>
#include <string.h>

#include "lsdnn/lsdnn.h"

static int failures = 0;

#define EXPECT(cond)                                                 \
  do {                                                               \
    if (!(cond)) {                                                   \
      fprintf(stderr, "%s:%d: expectation failed: %s\n", __FILE__, __LINE__, #cond); \
      ++failures;                                                    \
    }                                                                \
  } while (0)

int main(int argc, char** argv) {
  const char* dir = argc > 1 ? argv[1] : "capi_tmp";
  char path[1024];
  lsdnn_set_warnings(0);

  EXPECT(strlen(lsdnn_version()) > 0);

  lsdnn_config* cfg = NULL;
  EXPECT(lsdnn_config_create(&cfg) == LSDNN_OK);
  EXPECT(lsdnn_config_set(cfg, "bogus", "1") == LSDNN_ERR_USAGE);
  EXPECT(strstr(lsdnn_last_error(), "bogus") != NULL);
  EXPECT(lsdnn_config_set(cfg, "size", "32") == LSDNN_OK);
  EXPECT(strlen(lsdnn_last_error()) == 0);
  EXPECT(lsdnn_config_set(cfg, "dx", "92e-6") == LSDNN_OK);

  char buf[64];
  size_t needed = 0;
  EXPECT(lsdnn_config_get(cfg, "size", buf, sizeof buf, &needed) == LSDNN_OK);
  EXPECT(strcmp(buf, "32") == 0);
  EXPECT(needed == 3);
  EXPECT(lsdnn_config_get(cfg, "size", buf, 2, &needed) == LSDNN_ERR_USAGE);
  EXPECT(lsdnn_config_dump(cfg, NULL, 0, &needed) == LSDNN_OK);
  EXPECT(needed > 100);
  EXPECT(lsdnn_config_load(cfg, "/nonexistent/config.txt") == LSDNN_ERR_USAGE);

  lsdnn_field* phase = NULL;
  EXPECT(lsdnn_field_create(32, 32, 92e-6, 92e-6, &phase) == LSDNN_OK);
  EXPECT(lsdnn_field_create(31, 32, 1.0, 1.0, &phase) == LSDNN_ERR_DATA);
  size_t ny = 0, nx = 0;
  double dy = 0, dx = 0;
  EXPECT(lsdnn_field_shape(phase, &ny, &nx, &dy, &dx) == LSDNN_OK);
  EXPECT(ny == 32 && nx == 32 && dx == 92e-6);
  double* v = lsdnn_field_data(phase);
  for (size_t i = 0; i < 32 * 32; ++i) v[i] = 0.5 * sin(0.1 * (double)i) + 0.2 * cos(0.37 * (double)i);

  lsdnn_field* g = NULL;
  EXPECT(lsdnn_forward_intensity(cfg, phase, &g) == LSDNN_OK);
  double s = 0.0;
  for (size_t i = 0; i < 32 * 32; ++i) s += lsdnn_field_data(g)[i];
  EXPECT(fabs(s / 1024.0 - 1.0) < 1e-10);

  lsdnn_field* ap = NULL;
  EXPECT(lsdnn_approximant(cfg, g, &ap) == LSDNN_OK);

  double r = 0.0;
  EXPECT(lsdnn_pcc(phase, phase, &r) == LSDNN_OK);
  EXPECT(fabs(r - 1.0) < 1e-12);
  EXPECT(lsdnn_ssim(phase, phase, 0.0, &r) == LSDNN_OK);
  EXPECT(fabs(r - 1.0) < 1e-12);
  EXPECT(lsdnn_psnr(phase, phase, 1.0, &r) == LSDNN_OK);
  EXPECT(isinf(r));
  EXPECT(lsdnn_psnr(phase, phase, -1.0, &r) == LSDNN_ERR_USAGE);

  lsdnn_field* flat = NULL;
  EXPECT(lsdnn_field_create(32, 32, 92e-6, 92e-6, &flat) == LSDNN_OK);
  EXPECT(lsdnn_pcc(phase, flat, &r) == LSDNN_ERR_NUMERICAL);
  lsdnn_field* small = NULL;
  EXPECT(lsdnn_field_create(16, 16, 92e-6, 92e-6, &small) == LSDNN_OK);
  EXPECT(lsdnn_pcc(phase, small, &r) == LSDNN_ERR_DATA);
  EXPECT(lsdnn_pcc(NULL, small, &r) == LSDNN_ERR_USAGE);

  snprintf(path, sizeof path, "%s/phase.lspr", dir);
  EXPECT(lsdnn_field_save(phase, path, 0) == LSDNN_OK);
  lsdnn_field* back = NULL;
  EXPECT(lsdnn_field_load(path, &back) == LSDNN_OK);
  EXPECT(lsdnn_field_data(back)[17] == v[17]);
  snprintf(path, sizeof path, "%s/phase.pgm", dir);
  EXPECT(lsdnn_export_pgm(phase, path) == LSDNN_OK);
  EXPECT(lsdnn_field_load("/nonexistent.lspr", &back) == LSDNN_ERR_DATA);

  /* Directory commands on a tiny experiment. */
  lsdnn_config_set(cfg, "widths", "2,4");
  lsdnn_config_set(cfg, "epochs", "1");
  char data[1024], meas[1024], inputs[1024], states[1024], out[1024];
  snprintf(data, sizeof data, "%s/data", dir);
  snprintf(meas, sizeof meas, "%s/meas", dir);
  snprintf(inputs, sizeof inputs, "%s/ap", dir);
  snprintf(states, sizeof states, "%s/states", dir);
  snprintf(out, sizeof out, "%s/eval", dir);
  EXPECT(lsdnn_gen_data(cfg, 24, data, 1) == LSDNN_OK);
  EXPECT(lsdnn_gen_data(cfg, 24, data, 0) == LSDNN_ERR_USAGE);
  EXPECT(lsdnn_simulate(cfg, data, meas, 1) == LSDNN_OK);
  EXPECT(lsdnn_retrieve(cfg, meas, 1, inputs, 1) == LSDNN_OK);
  EXPECT(lsdnn_train(cfg, "S", data, inputs, states) == LSDNN_ERR_USAGE);
  EXPECT(lsdnn_train(cfg, "Q", data, inputs, states) == LSDNN_ERR_USAGE);
  EXPECT(lsdnn_train(cfg, "L", data, inputs, states) == LSDNN_OK);
  EXPECT(lsdnn_evaluate(cfg, states, data, inputs, out, 1) == LSDNN_OK);
  double slope = 0.0;
  snprintf(path, sizeof path, "%s/psd/data", dir);
  EXPECT(lsdnn_analyze_psd(data, 1, path, &slope) == LSDNN_OK);
  EXPECT(slope < -1.5 && slope > -2.5);

  lsdnn_field_destroy(phase);
  lsdnn_field_destroy(g);
  lsdnn_field_destroy(ap);
  lsdnn_field_destroy(flat);
  lsdnn_field_destroy(small);
  lsdnn_field_destroy(back);
  lsdnn_field_destroy(NULL);
  lsdnn_config_destroy(cfg);

  if (failures) fprintf(stderr, "%d failure(s)\n", failures);
  else printf("capi: all checks passed\n");
  return failures ? 1 : 0;
}
