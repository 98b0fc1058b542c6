#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ge2ae/analysis.hpp"
#include "ge2ae/config.hpp"
#include "ge2ae/fourier.hpp"
#include "ge2ae/image_io.hpp"
#include "ge2ae/pretrain.hpp"
#include "ge2ae/selftest.hpp"

namespace fs = std::filesystem;
using namespace ge2ae;

namespace {

struct CheckpointBundle {
  train::Checkpoint cp;
  model::ModelConfig model;
  model::Params params;
};

CheckpointBundle load_bundle(const std::string& path) {
  CheckpointBundle b;
  b.cp = train::load_checkpoint(path);
  if (b.cp.config_text.empty())
    throw std::runtime_error("checkpoint " + path + " carries no config snapshot");
  b.model = config::from_snapshot(b.cp.config_text).model;
  b.params = train::params_from_checkpoint(b.cp);
  return b;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << text;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Ge2-AE: masked-image pretraining with geminated pixel/frequency decoders"};
  app.require_subcommand(1);

  // ---- pretrain ----
  auto* cmd_pre = app.add_subcommand("pretrain", "Run masked-image pretraining");
  std::string pre_config, pre_preset;
  std::vector<std::string> pre_sets;
  cmd_pre->add_option("--config", pre_config, "key = value config file");
  cmd_pre->add_option("--set", pre_sets, "override, e.g. --set loss.lambda=0.2");
  cmd_pre->add_option("--preset", pre_preset,
                      "loss-term preset: pix-only|no-fd|freq-only|no-pd|no-con|full");
  std::string pre_seed, pre_out, pre_data;
  cmd_pre->add_option("--seed", pre_seed, "shorthand for --set training.seed=S");
  cmd_pre->add_option("--out", pre_out, "shorthand for --set training.out_dir=DIR");
  cmd_pre->add_option("--data", pre_data, "shorthand for --set training.dataset=PATH");

  // ---- probe ----
  auto* cmd_probe = app.add_subcommand("probe", "Linear probe of a frozen encoder");
  std::string probe_ckpt, probe_train, probe_test, probe_fmt = "cifar10-bin", probe_out;
  analysis::ProbeOptions probe_opts;
  cmd_probe->add_option("--checkpoint", probe_ckpt)->required();
  cmd_probe->add_option("--train-data", probe_train)->required();
  cmd_probe->add_option("--test-data", probe_test)->required();
  cmd_probe->add_option("--format", probe_fmt, "cifar10-bin|ppm-dir");
  cmd_probe->add_option("--out", probe_out, "directory for probe.csv");
  cmd_probe->add_option("--epochs", probe_opts.epochs);
  cmd_probe->add_option("--lr", probe_opts.lr);
  cmd_probe->add_option("--batch", probe_opts.batch_size);
  cmd_probe->add_option("--seed", probe_opts.seed);

  // ---- analyze ----
  auto* cmd_an = app.add_subcommand("analyze", "Power-law eigenspectrum and CKA similarity");
  std::string an_ckpt, an_ckpt_b, an_data, an_fmt = "cifar10-bin", an_out = ".";
  int an_j0 = 0, an_j1 = 0, an_samples = 512;
  bool an_center = false;
  cmd_an->add_option("--checkpoint", an_ckpt)->required();
  cmd_an->add_option("--checkpoint-b", an_ckpt_b, "second checkpoint for cross-model CKA");
  cmd_an->add_option("--data", an_data)->required();
  cmd_an->add_option("--format", an_fmt);
  cmd_an->add_option("--out", an_out);
  cmd_an->add_option("--j0", an_j0, "power-law fit window start (1-based)");
  cmd_an->add_option("--j1", an_j1, "power-law fit window end");
  cmd_an->add_option("--cka-samples", an_samples, "images used for CKA Gram matrices");
  cmd_an->add_flag("--center", an_center, "mean-center features before the covariance");

  // ---- visualize ----
  auto* cmd_vis = app.add_subcommand("visualize", "Reconstruction/spectrum/phase dumps");
  std::string vis_ckpt, vis_data, vis_fmt = "cifar10-bin", vis_out = ".";
  int vis_count = 4;
  std::uint64_t vis_seed = 0;
  cmd_vis->add_option("--checkpoint", vis_ckpt)->required();
  cmd_vis->add_option("--data", vis_data)->required();
  cmd_vis->add_option("--format", vis_fmt);
  cmd_vis->add_option("--out", vis_out);
  cmd_vis->add_option("--count", vis_count);
  cmd_vis->add_option("--seed", vis_seed);

  // ---- fft ----
  auto* cmd_fft = app.add_subcommand("fft", "Spectrum and phase-only maps of one PPM image");
  std::string fft_in, fft_out = ".";
  cmd_fft->add_option("--in", fft_in)->required();
  cmd_fft->add_option("--out", fft_out);

  // ---- selftest ----
  auto* cmd_self = app.add_subcommand("selftest", "Run the built-in oracle suites");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (cmd_pre->parsed()) {
      if (!pre_seed.empty()) pre_sets.push_back("training.seed=" + pre_seed);
      if (!pre_out.empty()) pre_sets.push_back("training.out_dir=" + pre_out);
      if (!pre_data.empty()) pre_sets.push_back("training.dataset=" + pre_data);
      train::TrainRunConfig cfg = config::parse_config(pre_config, pre_sets);
      if (!pre_preset.empty()) config::apply_preset(cfg, pre_preset);
      cfg.validate();
      const std::string snapshot = config::serialize(cfg);
      fs::create_directories(cfg.out_dir);
      write_text(cfg.out_dir + "/resolved.cfg", snapshot);
      train::TrainResult res = train::pretrain(cfg, snapshot);
      std::cout << "final checkpoint: " << res.checkpoint_path << "\n";
      if (!res.log.empty())
        std::cout << "final epoch mean total loss: " << res.log.back().mean.total << "\n";
    } else if (cmd_probe->parsed()) {
      CheckpointBundle b = load_bundle(probe_ckpt);
      const auto fmt = data::parse_format(probe_fmt);
      const auto train_set = data::ingest_dataset(probe_train, fmt);
      const auto test_set = data::ingest_dataset(probe_test, fmt);
      analysis::ProbeResult res = analysis::linear_probe(b.model, b.params, train_set, test_set,
                                                         probe_opts);
      if (!probe_out.empty()) {
        fs::create_directories(probe_out);
        std::string csv = "epoch,train_loss,test_acc\n";
        char line[96];
        for (const auto& e : res.log) {
          std::snprintf(line, sizeof(line), "%d,%.17g,%.17g\n", e.epoch, e.train_loss, e.test_acc);
          csv += line;
        }
        write_text(probe_out + "/probe.csv", csv);
      }
      std::printf("test top-1 accuracy: %.4f\n", res.test_accuracy);
    } else if (cmd_an->parsed()) {
      CheckpointBundle b = load_bundle(an_ckpt);
      const auto records = data::ingest_dataset(an_data, data::parse_format(an_fmt));
      fs::create_directories(an_out);

      auto layers = analysis::extract_features(b.model, b.params, records);
      const auto& final_features = layers.back().features;
      auto [dj0, dj1] = analysis::default_fit_window(final_features.shape[1],
                                                     final_features.shape[0]);
      if (an_j0 > 0) dj0 = an_j0;
      if (an_j1 > 0) dj1 = an_j1;
      analysis::PowerLawFit fit = analysis::fit_power_law(final_features, dj0, dj1, an_center);
      {
        std::string csv = "j,lambda\n";
        char line[64];
        for (std::size_t j = 0; j < fit.eigenvalues.size(); ++j) {
          std::snprintf(line, sizeof(line), "%zu,%.17g\n", j + 1, fit.eigenvalues[j]);
          csv += line;
        }
        write_text(an_out + "/powerlaw.csv", csv);
      }
      std::printf("power-law alpha: %.6f (fit window [%d,%d])\n", fit.alpha, fit.j0, fit.j1);

      // CKA over a deterministic subset to keep Gram matrices small.
      std::vector<data::ImageRecord> subset(
          records.begin(),
          records.begin() + std::min<std::size_t>(records.size(),
                                                  static_cast<std::size_t>(an_samples)));
      auto layers_a = analysis::extract_features(b.model, b.params, subset);
      std::vector<analysis::FeatureMatrix> layers_b;
      if (!an_ckpt_b.empty()) {
        CheckpointBundle b2 = load_bundle(an_ckpt_b);
        layers_b = analysis::extract_features(b2.model, b2.params, subset);
      } else {
        layers_b = layers_a;
      }
      const auto heat = analysis::cka_heatmap(layers_a, layers_b);
      std::string csv = "layer_a,layer_b,cka\n";
      char line[64];
      for (std::size_t i = 0; i < heat.size(); ++i)
        for (std::size_t j = 0; j < heat[i].size(); ++j) {
          std::snprintf(line, sizeof(line), "%zu,%zu,%.17g\n", i, j, heat[i][j]);
          csv += line;
        }
      write_text(an_out + "/cka.csv", csv);
      std::cout << "similarity to last layer:";
      for (std::size_t i = 0; i < heat.size(); ++i)
        std::printf(" %.4f", heat[i][heat[i].size() - 1]);
      std::cout << "\n";
    } else if (cmd_vis->parsed()) {
      CheckpointBundle b = load_bundle(vis_ckpt);
      const auto records = data::ingest_dataset(vis_data, data::parse_format(vis_fmt));
      analysis::emit_visualizations(b.model, b.params, records, vis_out, vis_count, vis_seed);
      std::cout << "wrote visualizations under " << vis_out << "\n";
    } else if (cmd_fft->parsed()) {
      const Tensor img = io::read_ppm(fft_in);
      fs::create_directories(fft_out);
      const auto spec = fourier::dft2d(img);
      Tensor mag({spec.height, spec.width});
      for (int u = 0; u < spec.height; ++u)
        for (int v = 0; v < spec.width; ++v) {
          double a = 0.0;
          for (int c = 0; c < spec.channels; ++c) {
            const std::size_t i =
                (static_cast<std::size_t>(u) * spec.width + v) * spec.channels + c;
            a += std::hypot(spec.values.re[i], spec.values.im[i]);
          }
          mag.at2(u, v) = std::log1p(a);
        }
      io::write_scaled_map(fft_out + "/spectrum.ppm", fourier::fftshift(mag));
      Tensor phase = fourier::phase_only_image(img);
      double lo = phase.data[0], hi = phase.data[0];
      for (double v : phase.data) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
      for (auto& v : phase.data) v = hi > lo ? (v - lo) / (hi - lo) : 0.0;
      io::write_ppm(fft_out + "/phase_only.ppm", phase);
      std::cout << "wrote spectrum.ppm and phase_only.ppm under " << fft_out << "\n";
    } else if (cmd_self->parsed()) {
      const int failures = selftest::run_selftest(std::cout);
      return failures == 0 ? 0 : 2;
    }
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "runtime error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
