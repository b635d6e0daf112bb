// lsdnn command-line front end. Talks to the library only through lsdnn.h.
#include <CLI11.hpp>

#include <cstdio>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "lsdnn/lsdnn.h"

namespace {

struct ConfigHandle {
  lsdnn_config* ptr = nullptr;
  ConfigHandle() { lsdnn_config_create(&ptr); }
  ~ConfigHandle() { lsdnn_config_destroy(ptr); }
};

int report(lsdnn_status s) {
  if (s != LSDNN_OK) std::fprintf(stderr, "lsdnn: %s\n", lsdnn_last_error());
  return static_cast<int>(s);
}

// Flags land in a key -> value map and are applied after --config.
struct Overrides {
  std::string config_file;
  std::vector<std::string> sets;
  std::map<std::string, std::string> flags;

  void bind(CLI::App* cmd, const std::string& flag, const std::string& key, const std::string& help) {
    cmd->add_option_function<std::string>(
        flag, [this, key](const std::string& v) { flags[key] = v; }, help);
  }

  lsdnn_status apply(lsdnn_config* cfg) const {
    if (!config_file.empty())
      if (lsdnn_status s = lsdnn_config_load(cfg, config_file.c_str()); s != LSDNN_OK) return s;
    for (const std::string& kv : sets) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) {
        std::fprintf(stderr, "lsdnn: --set expects key=value, got '%s'\n", kv.c_str());
        return LSDNN_ERR_USAGE;
      }
      const std::string key = kv.substr(0, eq), value = kv.substr(eq + 1);
      if (lsdnn_status s = lsdnn_config_set(cfg, key.c_str(), value.c_str()); s != LSDNN_OK) return s;
    }
    for (const auto& [key, value] : flags)
      if (lsdnn_status s = lsdnn_config_set(cfg, key.c_str(), value.c_str()); s != LSDNN_OK) return s;
    return LSDNN_OK;
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Learning-synthesis phase retrieval from defocused intensity"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(lsdnn_version()));
  bool quiet = false;
  app.add_flag("-q,--quiet", quiet, "Suppress warnings");

  Overrides ov;
  bool force = false;
  std::function<lsdnn_status(lsdnn_config*)> action;

  auto common = [&](CLI::App* cmd) {
    cmd->add_option("--config", ov.config_file, "key=value config file")->check(CLI::ExistingFile);
    cmd->add_option("--set", ov.sets, "Config override key=value (repeatable)");
  };
  auto with_force = [&](CLI::App* cmd) { cmd->add_flag("--force", force, "Overwrite a non-empty output directory"); };

  std::size_t n = 0;
  std::string out, data, meas, inputs, states, in_dir, role;
  int iters = 1;
  bool diagonal = false;

  auto* gen = app.add_subcommand("gen-data", "Generate a power-law phase dataset");
  common(gen);
  with_force(gen);
  gen->add_option("--n", n, "Number of images")->required();
  ov.bind(gen, "--size", "size", "Grid size (pixels)");
  ov.bind(gen, "--exponent", "exponent", "PSD exponent");
  ov.bind(gen, "--fmax", "fmax", "Maximum phase (rad)");
  ov.bind(gen, "--seed", "data_seed", "Generator seed");
  gen->add_option("--out", out, "Output directory")->required();
  gen->callback([&] {
    action = [&](lsdnn_config* c) { return lsdnn_gen_data(c, n, out.c_str(), force); };
  });

  auto* sim = app.add_subcommand("simulate", "Simulate defocused raw images g0 and noisy g");
  common(sim);
  with_force(sim);
  sim->add_option("--data", data, "Phase dataset directory")->required();
  ov.bind(sim, "--lambda", "wavelength", "Wavelength (m)");
  ov.bind(sim, "--z", "z", "Defocus distance (m)");
  ov.bind(sim, "--dx", "dx", "Pixel pitch (m)");
  ov.bind(sim, "--photons", "photons", "Mean photons per pixel, or inf");
  ov.bind(sim, "--sigma", "sigma", "Gaussian read noise (photons)");
  ov.bind(sim, "--seed", "noise_seed", "Noise seed");
  sim->add_option("--out", out, "Output directory")->required();
  sim->callback([&] {
    action = [&](lsdnn_config* c) { return lsdnn_simulate(c, data.c_str(), out.c_str(), force); };
  });

  auto retrieval = [&](CLI::App* cmd, bool with_iters) {
    common(cmd);
    with_force(cmd);
    cmd->add_option("--meas", meas, "Measurement directory (from simulate)")->required();
    cmd->add_option("--out", out, "Output directory")->required();
    ov.bind(cmd, "--lambda", "wavelength", "Wavelength (m)");
    ov.bind(cmd, "--z", "z", "Defocus distance (m)");
    ov.bind(cmd, "--dx", "dx", "Pixel pitch (m)");
    if (with_iters) cmd->add_option("--iters", iters, "Iterations")->check(CLI::PositiveNumber);
    cmd->callback([&] {
      action = [&](lsdnn_config* c) { return lsdnn_retrieve(c, meas.c_str(), iters, out.c_str(), force); };
    });
  };
  retrieval(app.add_subcommand("approximant", "One GS iterate from the uniform field"), false);
  retrieval(app.add_subcommand("gs", "Iterated Gerchberg-Saxton retrieval"), true);

  auto* tr = app.add_subcommand("train", "Train one network role");
  common(tr);
  tr->add_option("--role", role, "L, H, S or L3")->required()->check(CLI::IsMember({"L", "H", "S", "L3"}));
  tr->add_option("--data", data, "Phase dataset directory")->required();
  tr->add_option("--inputs", inputs, "Network inputs (approximant/gs output, or simulate output)")->required();
  tr->add_option("--states", states, "State directory")->required();
  ov.bind(tr, "--q", "q", "Power-law filter exponent");
  ov.bind(tr, "--epochs", "epochs", "Epochs");
  ov.bind(tr, "--lr", "lr", "Learning rate");
  ov.bind(tr, "--batch", "batch", "Batch size");
  ov.bind(tr, "--seed", "train_seed", "Training seed");
  ov.bind(tr, "--scheme", "scheme", "approximant or end-to-end");
  tr->callback([&] {
    action = [&](lsdnn_config* c) {
      return lsdnn_train(c, role.c_str(), data.c_str(), inputs.c_str(), states.c_str());
    };
  });

  auto* run = app.add_subcommand("run-ls", "Full learning-synthesis experiment");
  common(run);
  with_force(run);
  run->add_option("--out", out, "Experiment directory")->required();
  run->callback([&] {
    action = [&](lsdnn_config* c) { return lsdnn_run_ls(c, out.c_str(), force); };
  });

  auto* ev = app.add_subcommand("evaluate", "Metric tables for trained states on a test set");
  common(ev);
  with_force(ev);
  ev->add_option("--states", states, "State directory")->required();
  ev->add_option("--test", data, "Phase dataset directory (test role, or all items)")->required();
  ev->add_option("--inputs", inputs, "Network inputs for the same items")->required();
  ev->add_option("--out", out, "Output directory")->required();
  ov.bind(ev, "--q", "q", "Filter exponent selecting the H/S states");
  ev->callback([&] {
    action = [&](lsdnn_config* c) {
      return lsdnn_evaluate(c, states.c_str(), data.c_str(), inputs.c_str(), out.c_str(), force);
    };
  });

  auto* psd = app.add_subcommand("analyze-psd", "Average PSD and radial slope of a field set");
  psd->add_option("--in", in_dir, "Directory of LSPR fields")->required();
  psd->add_flag("--diagonal", diagonal, "Also write the diagonal cross-section CSV");
  psd->add_option("--out", out, "Output path prefix")->required();
  psd->callback([&] {
    action = [&](lsdnn_config*) {
      double slope = 0.0;
      const lsdnn_status s = lsdnn_analyze_psd(in_dir.c_str(), diagonal, out.c_str(), &slope);
      if (s == LSDNN_OK) std::printf("radial slope %.4f\n", slope);
      return s;
    };
  });

  std::string pgm_in;
  auto* pgm = app.add_subcommand("export-pgm", "Write a field as a 16-bit PGM with a scale sidecar");
  pgm->add_option("--in", pgm_in, "LSPR field")->required();
  pgm->add_option("--out", out, "PGM path")->required();
  pgm->callback([&] {
    action = [&](lsdnn_config*) {
      lsdnn_field* f = nullptr;
      lsdnn_status s = lsdnn_field_load(pgm_in.c_str(), &f);
      if (s == LSDNN_OK) s = lsdnn_export_pgm(f, out.c_str());
      lsdnn_field_destroy(f);
      return s;
    };
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return LSDNN_ERR_USAGE;
  }

  lsdnn_set_warnings(quiet ? 0 : 1);
  ConfigHandle cfg;
  if (lsdnn_status s = ov.apply(cfg.ptr); s != LSDNN_OK) return report(s);
  return report(action(cfg.ptr));
}
