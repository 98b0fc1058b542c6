#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ge2ae/dataset.hpp"
#include "ge2ae/model.hpp"
#include "ge2ae/tensor.hpp"

namespace ge2ae::analysis {

struct FeatureMatrix {
  Tensor features;  // [N, C]
  std::string layer_tag;
  std::string pooling_tag = "mean";
};

// Runs the encoder unmasked (r = 0) over every record and mean-pools tokens
// at each layer boundary: embedding, each block output, final LN. Rows follow
// dataset order.
std::vector<FeatureMatrix> extract_features(const model::ModelConfig& cfg,
                                            const model::Params& params,
                                            const std::vector<data::ImageRecord>& records);
// Single layer variant; layer in [0, enc_depth+1], negative counts from the
// end (-1 = final LN output).
FeatureMatrix extract_layer_features(const model::ModelConfig& cfg, const model::Params& params,
                                     const std::vector<data::ImageRecord>& records, int layer);

// Eigenvalues of a symmetric matrix via cyclic Jacobi, descending order.
// Off-diagonal convergence tolerance 1e-12 relative to the Frobenius norm.
std::vector<double> symmetric_eigenvalues(const Tensor& sym);

struct PowerLawFit {
  std::vector<double> eigenvalues;  // sorted descending, clamped at 0
  double alpha = 0.0;
  int j0 = 1, j1 = 2;
  double residual = 0.0;  // RMS residual of the log-log fit
};

// Covariance spectrum slope: Sigma = (1/N) X^T X (uncentered by default),
// eigendecompose, least-squares fit of log lambda_j against log j over
// [j0, j1] (1-based); alpha is the negated slope.
PowerLawFit fit_power_law(const Tensor& features, int j0, int j1, bool center = false);
std::pair<int, int> default_fit_window(int feature_dim, int sample_count);

double hsic(const Tensor& K, const Tensor& L);
double cka(const Tensor& X1, const Tensor& X2);

// Pairwise linear CKA between two layer stacks; entry [i][j] compares
// layers_a[i] with layers_b[j].
std::vector<std::vector<double>> cka_heatmap(const std::vector<FeatureMatrix>& layers_a,
                                             const std::vector<FeatureMatrix>& layers_b);

struct ProbeOptions {
  double lr = 1e-3;
  int epochs = 50;
  int batch_size = 256;
  std::uint64_t seed = 0;
};

struct ProbeEpoch {
  int epoch;
  double train_loss;
  double test_acc;
};

struct ProbeResult {
  double test_accuracy = 0.0;
  std::vector<ProbeEpoch> log;
};

// Softmax head on frozen features via AdamW; reports test top-1.
ProbeResult linear_probe_features(const Tensor& train_x, const std::vector<int>& train_y,
                                  const Tensor& test_x, const std::vector<int>& test_y,
                                  const ProbeOptions& opts);

// Frozen-encoder probe: final-layer mean-pooled features on both splits.
ProbeResult linear_probe(const model::ModelConfig& cfg, const model::Params& params,
                         const std::vector<data::ImageRecord>& train,
                         const std::vector<data::ImageRecord>& test, const ProbeOptions& opts);

// Reconstruction, spectrum-map, phase-only, and FSP-weight dumps as P6 files.
void emit_visualizations(const model::ModelConfig& cfg, const model::Params& params,
                         const std::vector<data::ImageRecord>& records, const std::string& out_dir,
                         int count, std::uint64_t seed);

}  // namespace ge2ae::analysis
