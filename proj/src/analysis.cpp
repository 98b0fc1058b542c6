#include "ge2ae/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <set>
#include <stdexcept>

#include "ge2ae/fourier.hpp"
#include "ge2ae/image_io.hpp"
#include "ge2ae/losses.hpp"
#include "ge2ae/parallel.hpp"

namespace ge2ae::analysis {

namespace {

Tensor mean_pool_rows(const Tensor& tokens) {
  const int n = tokens.shape[0], d = tokens.shape[1];
  Tensor out({d});
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < d; ++j) out.data[static_cast<std::size_t>(j)] += tokens.at2(i, j);
  for (auto& x : out.data) x /= n;
  return out;
}

}  // namespace

std::vector<FeatureMatrix> extract_features(const model::ModelConfig& cfg,
                                            const model::Params& params,
                                            const std::vector<data::ImageRecord>& records) {
  if (records.empty()) throw std::invalid_argument("extract_features: empty dataset");
  const int n_layers = cfg.enc_depth + 2;
  const int N = static_cast<int>(records.size());
  std::vector<FeatureMatrix> out(static_cast<std::size_t>(n_layers));
  for (int l = 0; l < n_layers; ++l) {
    out[static_cast<std::size_t>(l)].features = Tensor({N, cfg.enc_dim});
    out[static_cast<std::size_t>(l)].layer_tag =
        l == 0 ? "embed" : (l == n_layers - 1 ? "final" : "block" + std::to_string(l));
  }
  const model::MaskPlan plan = model::full_visibility(cfg.tokens());
  parallel_for(N, [&](int i) {
    Graph g;
    model::Forward fwd(g, cfg, params, /*trainable=*/false);
    model::EncodeResult enc = fwd.encode(records[static_cast<std::size_t>(i)].image, plan);
    for (int l = 0; l < n_layers; ++l) {
      const Tensor pooled = mean_pool_rows(enc.layers[static_cast<std::size_t>(l)].tensor());
      for (int j = 0; j < cfg.enc_dim; ++j)
        out[static_cast<std::size_t>(l)].features.at2(i, j) = pooled.data[static_cast<std::size_t>(j)];
    }
  });
  return out;
}

FeatureMatrix extract_layer_features(const model::ModelConfig& cfg, const model::Params& params,
                                     const std::vector<data::ImageRecord>& records, int layer) {
  const int n_layers = cfg.enc_depth + 2;
  if (layer < 0) layer += n_layers;
  if (layer < 0 || layer >= n_layers)
    throw std::invalid_argument("extract_features: layer index out of range");
  auto all = extract_features(cfg, params, records);
  return all[static_cast<std::size_t>(layer)];
}

std::vector<double> symmetric_eigenvalues(const Tensor& sym) {
  if (sym.rank() != 2 || sym.shape[0] != sym.shape[1])
    throw std::invalid_argument("eigenvalues: expects a square matrix, got " +
                                shape_str(sym.shape));
  const int n = sym.shape[0];
  std::vector<double> a(sym.data);
  auto at = [&](int i, int j) -> double& { return a[static_cast<std::size_t>(i) * n + j]; };

  double fro = 0.0;
  for (double v : a) fro += v * v;
  fro = std::sqrt(fro);
  const double tol = 1e-12 * (fro > 0.0 ? fro : 1.0);

  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j) off += 2.0 * at(i, j) * at(i, j);
    if (std::sqrt(off) <= tol) break;
    for (int p = 0; p < n - 1; ++p) {
      for (int q = p + 1; q < n; ++q) {
        const double apq = at(p, q);
        if (apq == 0.0) continue;
        const double theta = (at(q, q) - at(p, p)) / (2.0 * apq);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                         (std::fabs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (int k = 0; k < n; ++k) {
          const double akp = at(k, p), akq = at(k, q);
          at(k, p) = c * akp - s * akq;
          at(k, q) = s * akp + c * akq;
        }
        for (int k = 0; k < n; ++k) {
          const double apk = at(p, k), aqk = at(q, k);
          at(p, k) = c * apk - s * aqk;
          at(q, k) = s * apk + c * aqk;
        }
      }
    }
  }
  std::vector<double> eig(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) eig[static_cast<std::size_t>(i)] = at(i, i);
  std::sort(eig.begin(), eig.end(), std::greater<double>());
  return eig;
}

std::pair<int, int> default_fit_window(int feature_dim, int sample_count) {
  int hi = std::min(std::min(feature_dim, sample_count), 512) / 2;
  if (hi < 5) hi = std::min(feature_dim, sample_count);
  int lo = hi > 13 ? 10 : 1;
  return {lo, hi};
}

PowerLawFit fit_power_law(const Tensor& features, int j0, int j1, bool center) {
  if (features.rank() != 2)
    throw std::invalid_argument("power law: expects an [N,C] feature matrix");
  const int N = features.shape[0], C = features.shape[1];
  if (N < 2) throw std::invalid_argument("power law: need at least 2 samples");
  for (double v : features.data)
    if (!std::isfinite(v)) throw std::invalid_argument("power law: non-finite feature entry");
  if (j0 < 1 || j1 > std::min(N, C) || j1 - j0 < 3)
    throw std::invalid_argument("power law: fit window [" + std::to_string(j0) + "," +
                                std::to_string(j1) + "] invalid for N=" + std::to_string(N) +
                                ", C=" + std::to_string(C));

  Tensor x = features;
  if (center) {
    for (int j = 0; j < C; ++j) {
      double mu = 0.0;
      for (int i = 0; i < N; ++i) mu += x.at2(i, j);
      mu /= N;
      for (int i = 0; i < N; ++i) x.at2(i, j) -= mu;
    }
  }

  Tensor sigma({C, C});
  for (int i = 0; i < N; ++i) {
    const double* row = &x.data[static_cast<std::size_t>(i) * C];
    for (int a = 0; a < C; ++a) {
      const double va = row[a];
      if (va == 0.0) continue;
      double* srow = &sigma.data[static_cast<std::size_t>(a) * C];
      for (int b = 0; b < C; ++b) srow[b] += va * row[b];
    }
  }
  for (auto& v : sigma.data) v /= N;

  PowerLawFit fit;
  fit.eigenvalues = symmetric_eigenvalues(sigma);
  const double lmax = fit.eigenvalues.empty() ? 0.0 : std::max(fit.eigenvalues[0], 0.0);
  for (auto& l : fit.eigenvalues) {
    if (l < -1e-10 * std::max(1.0, lmax))
      throw std::runtime_error("power law: covariance produced a significantly negative eigenvalue");
    if (l < 0.0) l = 0.0;
  }

  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int m = 0;
  for (int j = j0; j <= j1; ++j) {
    const double lambda = fit.eigenvalues[static_cast<std::size_t>(j - 1)];
    if (lambda <= 0.0) continue;
    const double lx = std::log(static_cast<double>(j));
    const double ly = std::log(lambda);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
    ++m;
  }
  if (m < 2)
    throw std::runtime_error("power law: all eigenvalues in the fit range are degenerate");
  const double denom = m * sxx - sx * sx;
  const double slope = (m * sxy - sx * sy) / denom;
  const double intercept = (sy - slope * sx) / m;
  fit.alpha = -slope;
  fit.j0 = j0;
  fit.j1 = j1;
  double rss = 0.0;
  for (int j = j0; j <= j1; ++j) {
    const double lambda = fit.eigenvalues[static_cast<std::size_t>(j - 1)];
    if (lambda <= 0.0) continue;
    const double pred = intercept + slope * std::log(static_cast<double>(j));
    const double r = std::log(lambda) - pred;
    rss += r * r;
  }
  fit.residual = std::sqrt(rss / m);
  return fit;
}

namespace {

// vec(HKH) with H = I - (1/m)11^T, computed by double-centering in place.
void double_center(Tensor& k) {
  const int m = k.shape[0];
  std::vector<double> row_mean(static_cast<std::size_t>(m), 0.0);
  std::vector<double> col_mean(static_cast<std::size_t>(m), 0.0);
  double grand = 0.0;
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) {
      const double v = k.at2(i, j);
      row_mean[static_cast<std::size_t>(i)] += v;
      col_mean[static_cast<std::size_t>(j)] += v;
      grand += v;
    }
  for (auto& v : row_mean) v /= m;
  for (auto& v : col_mean) v /= m;
  grand /= static_cast<double>(m) * m;
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j)
      k.at2(i, j) += grand - row_mean[static_cast<std::size_t>(i)] -
                     col_mean[static_cast<std::size_t>(j)];
}

Tensor gram(const Tensor& x) {
  const int m = x.shape[0], c = x.shape[1];
  Tensor k({m, m});
  for (int i = 0; i < m; ++i)
    for (int j = 0; j <= i; ++j) {
      double acc = 0.0;
      const double* a = &x.data[static_cast<std::size_t>(i) * c];
      const double* b = &x.data[static_cast<std::size_t>(j) * c];
      for (int t = 0; t < c; ++t) acc += a[t] * b[t];
      k.at2(i, j) = acc;
      k.at2(j, i) = acc;
    }
  return k;
}

}  // namespace

double hsic(const Tensor& K, const Tensor& L) {
  if (K.rank() != 2 || K.shape[0] != K.shape[1] || !K.same_shape(L))
    throw std::invalid_argument("hsic: expects two m x m matrices");
  const int m = K.shape[0];
  if (m < 2) throw std::invalid_argument("hsic: need m >= 2");
  Tensor kc = K, lc = L;
  double_center(kc);
  double_center(lc);
  double dot = 0.0;
  for (std::size_t i = 0; i < kc.numel(); ++i) dot += kc.data[i] * lc.data[i];
  return dot / (static_cast<double>(m - 1) * (m - 1));
}

double cka(const Tensor& X1, const Tensor& X2) {
  if (X1.rank() != 2 || X2.rank() != 2 || X1.shape[0] != X2.shape[0])
    throw std::invalid_argument("cka: expects [m,c1] and [m,c2] with equal m");
  const Tensor k = gram(X1);
  const Tensor l = gram(X2);
  const double cross = hsic(k, l);
  const double kk = hsic(k, k);
  const double ll = hsic(l, l);
  if (kk <= 0.0 || ll <= 0.0)
    throw std::invalid_argument("cka: degenerate (constant) features give a zero denominator");
  return cross / std::sqrt(kk * ll);
}

std::vector<std::vector<double>> cka_heatmap(const std::vector<FeatureMatrix>& layers_a,
                                             const std::vector<FeatureMatrix>& layers_b) {
  std::vector<std::vector<double>> out(layers_a.size(),
                                       std::vector<double>(layers_b.size(), 0.0));
  for (std::size_t i = 0; i < layers_a.size(); ++i)
    for (std::size_t j = 0; j < layers_b.size(); ++j)
      out[i][j] = cka(layers_a[i].features, layers_b[j].features);
  return out;
}

ProbeResult linear_probe_features(const Tensor& train_x, const std::vector<int>& train_y,
                                  const Tensor& test_x, const std::vector<int>& test_y,
                                  const ProbeOptions& opts) {
  const int N = train_x.shape[0], C = train_x.shape[1];
  if (static_cast<std::size_t>(N) != train_y.size() ||
      static_cast<std::size_t>(test_x.shape[0]) != test_y.size())
    throw std::invalid_argument("probe: feature/label count mismatch");
  std::set<int> classes(train_y.begin(), train_y.end());
  if (classes.size() < 2) throw std::invalid_argument("probe: need at least 2 classes");
  const int K = *classes.rbegin() + 1;

  Tensor w({C, K});
  Tensor b({K});
  Tensor mw({C, K}), vw({C, K}), mb({K}), vb({K});
  long long step = 0;

  auto logits_of = [&](const double* x, double* out_row) {
    for (int k = 0; k < K; ++k) out_row[k] = b.data[static_cast<std::size_t>(k)];
    for (int c = 0; c < C; ++c) {
      const double xv = x[c];
      if (xv == 0.0) continue;
      const double* wr = &w.data[static_cast<std::size_t>(c) * K];
      for (int k = 0; k < K; ++k) out_row[k] += xv * wr[k];
    }
  };
  auto eval_test = [&]() {
    int correct = 0;
    std::vector<double> row(static_cast<std::size_t>(K));
    for (int i = 0; i < test_x.shape[0]; ++i) {
      logits_of(&test_x.data[static_cast<std::size_t>(i) * C], row.data());
      int arg = 0;
      for (int k = 1; k < K; ++k)
        if (row[static_cast<std::size_t>(k)] > row[static_cast<std::size_t>(arg)]) arg = k;
      if (arg == test_y[static_cast<std::size_t>(i)]) ++correct;
    }
    return static_cast<double>(correct) / test_x.shape[0];
  };

  ProbeResult res;
  std::vector<int> order(static_cast<std::size_t>(N));
  for (int i = 0; i < N; ++i) order[static_cast<std::size_t>(i)] = i;

  for (int epoch = 0; epoch < opts.epochs; ++epoch) {
    Rng rng = stream_rng(opts.seed, Stream::kProbe, static_cast<std::uint64_t>(epoch));
    rng.shuffle(order.data(), order.size());
    double loss_sum = 0.0;
    for (int lo = 0; lo < N; lo += opts.batch_size) {
      const int hi = std::min(N, lo + opts.batch_size);
      const int bn = hi - lo;
      Tensor dw({C, K}), db({K});
      std::vector<double> row(static_cast<std::size_t>(K));
      for (int bi = lo; bi < hi; ++bi) {
        const int i = order[static_cast<std::size_t>(bi)];
        const double* x = &train_x.data[static_cast<std::size_t>(i) * C];
        logits_of(x, row.data());
        double mx = row[0];
        for (int k = 1; k < K; ++k) mx = std::max(mx, row[static_cast<std::size_t>(k)]);
        double z = 0.0;
        for (int k = 0; k < K; ++k) {
          row[static_cast<std::size_t>(k)] = std::exp(row[static_cast<std::size_t>(k)] - mx);
          z += row[static_cast<std::size_t>(k)];
        }
        const int y = train_y[static_cast<std::size_t>(i)];
        loss_sum += -std::log(row[static_cast<std::size_t>(y)] / z);
        for (int k = 0; k < K; ++k) {
          const double p = row[static_cast<std::size_t>(k)] / z;
          const double d = (p - (k == y ? 1.0 : 0.0)) / bn;
          db.data[static_cast<std::size_t>(k)] += d;
          for (int c = 0; c < C; ++c)
            dw.data[static_cast<std::size_t>(c) * K + k] += d * x[c];
        }
      }
      // AdamW on the head, wd = 0.
      step += 1;
      const double bc1 = 1.0 - std::pow(0.9, static_cast<double>(step));
      const double bc2 = 1.0 - std::pow(0.999, static_cast<double>(step));
      auto update = [&](Tensor& theta, Tensor& m, Tensor& v, const Tensor& grad) {
        for (std::size_t i = 0; i < theta.numel(); ++i) {
          m.data[i] = 0.9 * m.data[i] + 0.1 * grad.data[i];
          v.data[i] = 0.999 * v.data[i] + 0.001 * grad.data[i] * grad.data[i];
          theta.data[i] -= opts.lr * (m.data[i] / bc1) / (std::sqrt(v.data[i] / bc2) + 1e-8);
        }
      };
      update(w, mw, vw, dw);
      update(b, mb, vb, db);
    }
    res.log.push_back({epoch + 1, loss_sum / N, eval_test()});
  }
  res.test_accuracy = res.log.empty() ? 0.0 : res.log.back().test_acc;
  return res;
}

ProbeResult linear_probe(const model::ModelConfig& cfg, const model::Params& params,
                         const std::vector<data::ImageRecord>& train,
                         const std::vector<data::ImageRecord>& test, const ProbeOptions& opts) {
  FeatureMatrix train_f = extract_layer_features(cfg, params, train, -1);
  FeatureMatrix test_f = extract_layer_features(cfg, params, test, -1);
  std::vector<int> train_y, test_y;
  train_y.reserve(train.size());
  for (const auto& r : train) train_y.push_back(r.label);
  test_y.reserve(test.size());
  for (const auto& r : test) test_y.push_back(r.label);
  return linear_probe_features(train_f.features, train_y, test_f.features, test_y, opts);
}

namespace {

Tensor log_magnitude_map(const fourier::Spectrum2D& spec) {
  // Channel-summed magnitude, log(1+A), centered.
  Tensor map({spec.height, spec.width});
  for (int u = 0; u < spec.height; ++u)
    for (int v = 0; v < spec.width; ++v) {
      double a = 0.0;
      for (int c = 0; c < spec.channels; ++c) {
        const std::size_t i =
            (static_cast<std::size_t>(u) * spec.width + v) * spec.channels + c;
        a += std::hypot(spec.values.re[i], spec.values.im[i]);
      }
      map.at2(u, v) = std::log1p(a);
    }
  return fourier::fftshift(map);
}

Tensor phase_only_of(const fourier::Spectrum2D& spec) {
  fourier::Spectrum2D unit = spec;
  for (std::size_t i = 0; i < unit.values.numel(); ++i) {
    const double a = std::hypot(unit.values.re[i], unit.values.im[i]);
    if (a == 0.0) {
      unit.values.re[i] = 1.0;
      unit.values.im[i] = 0.0;
    } else {
      unit.values.re[i] /= a;
      unit.values.im[i] /= a;
    }
  }
  Tensor img = fourier::idft2d(unit).real_part();
  // Min-max per image for display.
  double lo = img.data[0], hi = img.data[0];
  for (double v : img.data) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  const double span = hi - lo;
  for (auto& v : img.data) v = span > 0 ? (v - lo) / span : 0.0;
  return img;
}

}  // namespace

void emit_visualizations(const model::ModelConfig& cfg, const model::Params& params,
                         const std::vector<data::ImageRecord>& records, const std::string& out_dir,
                         int count, std::uint64_t seed) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (!fs::is_directory(out_dir))
    throw std::runtime_error("visualize: cannot create output directory " + out_dir);

  const int n = cfg.tokens();
  count = std::min<int>(count, static_cast<int>(records.size()));
  char name[128];
  for (int i = 0; i < count; ++i) {
    const Tensor& image = records[static_cast<std::size_t>(i)].image;
    Rng mask_rng = stream_rng(seed, Stream::kMask, static_cast<std::uint64_t>(i));
    model::MaskPlan plan = model::random_masking_rng(n, cfg.mask_ratio, mask_rng);

    // Masked input: visible patches kept, masked patches mid-gray.
    Tensor rows = model::patchify(image, cfg.patch_size);
    for (int row : plan.masked())
      for (int j = 0; j < rows.shape[1]; ++j) rows.at2(row, j) = 0.5;
    Tensor masked_img = model::unpatchify(rows, cfg.patch_size, cfg.grid_side(), cfg.channels);
    std::snprintf(name, sizeof(name), "%s/img%03d_masked.ppm", out_dir.c_str(), i);
    io::write_ppm(name, masked_img);

    model::GeminatedOutput out = model::run_geminated(cfg, params, image, plan);

    // Composed prediction: P at masked patches, original elsewhere.
    Tensor pred_rows = model::patchify(out.pixels, cfg.patch_size);
    Tensor comp_rows = model::patchify(image, cfg.patch_size);
    for (int row : plan.masked())
      for (int j = 0; j < comp_rows.shape[1]; ++j) comp_rows.at2(row, j) = pred_rows.at2(row, j);
    Tensor composed =
        model::unpatchify(comp_rows, cfg.patch_size, cfg.grid_side(), cfg.channels);
    std::snprintf(name, sizeof(name), "%s/img%03d_recon.ppm", out_dir.c_str(), i);
    io::write_ppm(name, composed);

    const fourier::Spectrum2D p_tilde = fourier::dft2d(composed);
    std::snprintf(name, sizeof(name), "%s/img%03d_spec_pd.ppm", out_dir.c_str(), i);
    io::write_scaled_map(name, log_magnitude_map(p_tilde));

    std::snprintf(name, sizeof(name), "%s/img%03d_spec_fd.ppm", out_dir.c_str(), i);
    io::write_scaled_map(name, log_magnitude_map(out.spectrum));

    Tensor q = fourier::idft2d(out.spectrum).real_part();
    for (auto& v : q.data) v = std::clamp(v, 0.0, 1.0);
    std::snprintf(name, sizeof(name), "%s/img%03d_q.ppm", out_dir.c_str(), i);
    io::write_ppm(name, q);

    std::snprintf(name, sizeof(name), "%s/img%03d_phase_pd.ppm", out_dir.c_str(), i);
    io::write_ppm(name, phase_only_of(p_tilde));
    std::snprintf(name, sizeof(name), "%s/img%03d_phase_fd.ppm", out_dir.c_str(), i);
    io::write_ppm(name, phase_only_of(out.spectrum));
  }

  // FSP weights: one mosaic per frequency-decoder block, G x G tile per channel.
  const int G = cfg.grid_side();
  for (int blk = 0;; ++blk) {
    auto it = params.find("fd." + std::to_string(blk) + ".omega");
    if (it == params.end()) break;
    const Tensor& omega = it->second;
    const int D = omega.shape[2];
    const int tiles = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(D))));
    Tensor mosaic({tiles * G, tiles * G});
    double lo = omega.data[0], hi = omega.data[0];
    for (double v : omega.data) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    const double span = hi - lo;
    for (int d = 0; d < D; ++d) {
      const int tr = d / tiles, tc = d % tiles;
      for (int u = 0; u < G; ++u)
        for (int v = 0; v < G; ++v) {
          const double val = omega.at3(u, v, d);
          mosaic.at2(tr * G + u, tc * G + v) = span > 0 ? (val - lo) / span : 0.0;
        }
    }
    std::snprintf(name, sizeof(name), "%s/fsp_block%02d_omega.ppm", out_dir.c_str(), blk);
    Tensor img({mosaic.shape[0], mosaic.shape[1], 1});
    img.data = mosaic.data;
    io::write_ppm(name, img);
  }
}

}  // namespace ge2ae::analysis
