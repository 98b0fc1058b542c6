#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "ge2ae/fourier.hpp"
#include "ge2ae/graph.hpp"
#include "ge2ae/rng.hpp"
#include "ge2ae/tensor.hpp"

namespace ge2ae::model {

struct ModelConfig {
  int image_size = 32;
  int patch_size = 4;
  int channels = 3;
  int enc_depth = 4;
  int enc_heads = 4;
  int enc_dim = 128;
  int dec_dim = 64;
  int dec_depth = 8;  // block count L, shared by both decoders
  double mask_ratio = 0.75;
  bool norm_pix_target = false;

  int grid_side() const { return image_size / patch_size; }
  int tokens() const { return grid_side() * grid_side(); }
  int patch_dim() const { return patch_size * patch_size * channels; }
  int head_width() const { return enc_dim / enc_heads; }
  // Decoders reuse the encoder's head width.
  int dec_heads() const { return dec_dim / head_width(); }
  void validate() const;
};

// Per-image masking record: a permutation of token indices whose prefix of
// length `kept` is the visible set.
struct MaskPlan {
  std::vector<int> permutation;
  int kept = 0;

  std::vector<int> visible() const {
    return {permutation.begin(), permutation.begin() + kept};
  }
  std::vector<int> masked() const { return {permutation.begin() + kept, permutation.end()}; }
  int total() const { return static_cast<int>(permutation.size()); }
};

MaskPlan random_masking(int n, double ratio, std::uint64_t seed);
MaskPlan random_masking_rng(int n, double ratio, Rng& rng);
MaskPlan full_visibility(int n);  // r = 0 plan used for feature extraction

using Params = std::map<std::string, Tensor>;

Params init_params(const ModelConfig& cfg, std::uint64_t seed);

// Eager patch geometry. Row i of the patch matrix holds the patch at grid
// position (i / G, i % G), pixels row-major, channel fastest.
Tensor patchify(const Tensor& image, int patch);
Tensor unpatchify(const Tensor& rows, int patch, int grid, int channels);
std::vector<int> patchify_index(int H, int W, int C, int p);

struct EncodeResult {
  Value tokens;               // [k, enc_dim], post final LN
  std::vector<Value> layers;  // embedding, after each block, final LN
};

struct DecodeResult {
  Value image;  // [H,W,C]
  Value rows;   // [n, p*p*C] pre-unpatchify head output
};

// Builds the differentiable forward passes of one image on a caller-owned
// graph. Parameters become graph leaves on first use; with trainable=false
// they are recorded as constants so backward skips them.
class Forward {
 public:
  Forward(Graph& g, const ModelConfig& cfg, const Params& params, bool trainable);

  EncodeResult encode(const Tensor& image, const MaskPlan& plan);
  DecodeResult pixel_decode(Value visible_tokens, const MaskPlan& plan);
  Value frequency_decode(Value visible_tokens, const MaskPlan& plan);  // -> [2,H,W,C]
  Value fsp_block(Value tokens, const std::string& prefix);            // [n,D] -> [n,D]

  // P's patches at masked indices, the original's at visible indices.
  // Gradients flow through the masked patches only.
  Value compose_full_image(Value pixel_rows, const Tensor& original, const MaskPlan& plan);

  Value patchify_value(Value image_hwc);
  Value unpatchify_value(Value rows);

  Graph& graph() { return *g_; }
  const ModelConfig& config() const { return cfg_; }

 private:
  Value param(const std::string& name);
  Value vit_block(Value x, const std::string& prefix, int heads);
  Value attention(Value x, const std::string& prefix, int heads);
  Value ffn(Value x, const std::string& prefix);
  Value insert_mask_tokens(Value visible_tokens, const MaskPlan& plan, const std::string& dec);
  void check_finite(Value v, const std::string& where) const;

  Graph* g_;
  ModelConfig cfg_;
  const Params* params_;
  bool trainable_;
  std::map<std::string, Value> leaf_cache_;
  std::map<std::string, std::pair<Value, Value>> fused_cache_;
};

struct GeminatedOutput {
  Tensor pixels;                 // P, [H,W,C]
  fourier::Spectrum2D spectrum;  // Q tilde
  MaskPlan plan;
};

// Convenience eager wrapper: full forward of both decoders, no gradients.
GeminatedOutput run_geminated(const ModelConfig& cfg, const Params& params, const Tensor& image,
                              const MaskPlan& plan);

}  // namespace ge2ae::model
