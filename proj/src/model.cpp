#include "ge2ae/model.hpp"

#include <cmath>
#include <stdexcept>

namespace ge2ae::model {

using namespace ge2ae::ops;

void ModelConfig::validate() const {
  if (image_size < 1 || patch_size < 1 || image_size % patch_size != 0)
    throw std::invalid_argument("model: image size " + std::to_string(image_size) +
                                " must be divisible by patch size " + std::to_string(patch_size));
  if (channels < 1) throw std::invalid_argument("model: channels must be >= 1");
  if (enc_depth < 1 || dec_depth < 1) throw std::invalid_argument("model: depths must be >= 1");
  if (enc_heads < 1 || enc_dim % enc_heads != 0)
    throw std::invalid_argument("model: enc_dim must be divisible by enc_heads");
  if (dec_dim % head_width() != 0)
    throw std::invalid_argument("model: dec_dim must be a multiple of the encoder head width " +
                                std::to_string(head_width()));
  if (mask_ratio < 0.0 || mask_ratio >= 1.0)
    throw std::invalid_argument("model: mask_ratio must lie in [0,1)");
}

MaskPlan random_masking_rng(int n, double ratio, Rng& rng) {
  if (ratio < 0.0 || ratio >= 1.0)
    throw std::invalid_argument("random_masking: ratio must lie in [0,1)");
  const int kept = static_cast<int>(std::floor(n * (1.0 - ratio)));
  if (kept < 1)
    throw std::invalid_argument("random_masking: ratio " + std::to_string(ratio) +
                                " keeps no visible patches for n=" + std::to_string(n));
  MaskPlan plan;
  plan.permutation.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) plan.permutation[static_cast<std::size_t>(i)] = i;
  rng.shuffle(plan.permutation.data(), plan.permutation.size());
  plan.kept = kept;
  return plan;
}

MaskPlan random_masking(int n, double ratio, std::uint64_t seed) {
  Rng rng = stream_rng(seed, Stream::kMask);
  return random_masking_rng(n, ratio, rng);
}

MaskPlan full_visibility(int n) {
  MaskPlan plan;
  plan.permutation.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) plan.permutation[static_cast<std::size_t>(i)] = i;
  plan.kept = n;
  return plan;
}

std::vector<int> patchify_index(int H, int W, int C, int p) {
  const int G = W / p;
  std::vector<int> idx(static_cast<std::size_t>(H) * W * C);
  std::size_t o = 0;
  for (int gr = 0; gr < H / p; ++gr)
    for (int gc = 0; gc < G; ++gc)
      for (int dr = 0; dr < p; ++dr)
        for (int dc = 0; dc < p; ++dc)
          for (int c = 0; c < C; ++c)
            idx[o++] = ((gr * p + dr) * W + (gc * p + dc)) * C + c;
  return idx;
}

Tensor patchify(const Tensor& image, int patch) {
  if (image.rank() != 3)
    throw std::invalid_argument("patchify: expects [H,W,C], got " + shape_str(image.shape));
  const int H = image.shape[0], W = image.shape[1], C = image.shape[2];
  if (H != W || H % patch != 0)
    throw std::invalid_argument("patchify: image side " + std::to_string(H) +
                                " not divisible by patch " + std::to_string(patch));
  const int G = H / patch;
  const auto idx = patchify_index(H, W, C, patch);
  Tensor out({G * G, patch * patch * C});
  for (std::size_t i = 0; i < idx.size(); ++i)
    out.data[i] = image.data[static_cast<std::size_t>(idx[i])];
  return out;
}

Tensor unpatchify(const Tensor& rows, int patch, int grid, int channels) {
  const int H = grid * patch;
  if (rows.rank() != 2 || rows.shape[0] != grid * grid ||
      rows.shape[1] != patch * patch * channels)
    throw std::invalid_argument("unpatchify: rows shape " + shape_str(rows.shape) +
                                " does not match geometry");
  const auto idx = patchify_index(H, H, channels, patch);
  Tensor out({H, H, channels});
  for (std::size_t i = 0; i < idx.size(); ++i)
    out.data[static_cast<std::size_t>(idx[i])] = rows.data[i];
  return out;
}

Params init_params(const ModelConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  const int De = cfg.enc_dim, Dd = cfg.dec_dim, n = cfg.tokens(), G = cfg.grid_side();
  const int pd = cfg.patch_dim();
  Params params;
  std::uint64_t counter = 0;

  auto trunc_normal = [&](std::vector<int> shape) {
    Rng rng = stream_rng(seed, Stream::kInit, counter++);
    Tensor t(std::move(shape));
    for (auto& x : t.data) x = rng.truncated_normal(0.02);
    t.requires_grad = true;
    return t;
  };
  auto zeros = [&](std::vector<int> shape) {
    ++counter;
    Tensor t(std::move(shape));
    t.requires_grad = true;
    return t;
  };
  auto ones = [&](std::vector<int> shape) {
    ++counter;
    Tensor t = Tensor::ones(std::move(shape));
    t.requires_grad = true;
    return t;
  };
  auto ln = [&](const std::string& prefix, int dim) {
    params[prefix + ".scale"] = ones({dim});
    params[prefix + ".shift"] = zeros({dim});
  };
  auto vit_block = [&](const std::string& prefix, int dim) {
    ln(prefix + ".ln1", dim);
    for (const char* w : {"wq", "wk", "wv", "wo"})
      params[prefix + ".attn." + w] = trunc_normal({dim, dim});
    for (const char* b : {"bq", "bk", "bv", "bo"})
      params[prefix + ".attn." + b] = zeros({dim});
    ln(prefix + ".ln2", dim);
    params[prefix + ".ffn.w1"] = trunc_normal({dim, 4 * dim});
    params[prefix + ".ffn.b1"] = zeros({4 * dim});
    params[prefix + ".ffn.w2"] = trunc_normal({4 * dim, dim});
    params[prefix + ".ffn.b2"] = zeros({dim});
  };

  params["patch_embed.w"] = trunc_normal({pd, De});
  params["patch_embed.b"] = zeros({De});
  params["enc.pos"] = trunc_normal({n, De});
  for (int i = 0; i < cfg.enc_depth; ++i) vit_block("enc." + std::to_string(i), De);
  ln("enc.norm", De);

  params["pd.proj.w"] = trunc_normal({De, Dd});
  params["pd.proj.b"] = zeros({Dd});
  params["pd.mask_token"] = trunc_normal({1, Dd});
  params["pd.pos"] = trunc_normal({n, Dd});
  for (int i = 0; i < cfg.dec_depth; ++i) vit_block("pd." + std::to_string(i), Dd);
  ln("pd.norm", Dd);
  params["pd.head.w"] = trunc_normal({Dd, pd});
  params["pd.head.b"] = zeros({pd});

  params["fd.proj.w"] = trunc_normal({De, Dd});
  params["fd.proj.b"] = zeros({Dd});
  params["fd.mask_token"] = trunc_normal({1, Dd});
  params["fd.pos"] = trunc_normal({n, Dd});
  for (int i = 0; i < cfg.dec_depth; ++i) {
    const std::string prefix = "fd." + std::to_string(i);
    ln(prefix + ".ln1", Dd);
    params[prefix + ".omega"] = ones({G, G, Dd});  // identity spectral filter at start
    ln(prefix + ".ln2", Dd);
    params[prefix + ".ffn.w1"] = trunc_normal({Dd, 4 * Dd});
    params[prefix + ".ffn.b1"] = zeros({4 * Dd});
    params[prefix + ".ffn.w2"] = trunc_normal({4 * Dd, Dd});
    params[prefix + ".ffn.b2"] = zeros({Dd});
  }
  ln("fd.norm", Dd);
  params["fd.head.w"] = trunc_normal({2 * Dd, 2 * pd});
  params["fd.head.b"] = zeros({2 * pd});

  return params;
}

Forward::Forward(Graph& g, const ModelConfig& cfg, const Params& params, bool trainable)
    : g_(&g), cfg_(cfg), params_(&params), trainable_(trainable) {
  cfg_.validate();
}

Value Forward::param(const std::string& name) {
  auto it = leaf_cache_.find(name);
  if (it != leaf_cache_.end()) return it->second;
  auto pit = params_->find(name);
  if (pit == params_->end()) throw std::runtime_error("model: missing parameter '" + name + "'");
  Value v;
  if (trainable_) {
    Tensor t = pit->second;
    t.requires_grad = true;
    v = g_->leaf(name, std::move(t));
  } else {
    v = g_->constant(pit->second);
  }
  leaf_cache_.emplace(name, v);
  return v;
}

void Forward::check_finite(Value v, const std::string& where) const {
  for (double x : v.tensor().data)
    if (!std::isfinite(x)) throw std::runtime_error("model: non-finite activation at " + where);
}

Value Forward::attention(Value x, const std::string& prefix, int heads) {
  const int D = x.tensor().shape[1];
  const int dh = D / heads;
  // Single fused QKV projection; the concatenated weight node is cached so
  // repeated forwards on one graph share it.
  Value wqkv, bqkv;
  if (auto it = fused_cache_.find(prefix); it != fused_cache_.end()) {
    wqkv = it->second.first;
    bqkv = it->second.second;
  } else {
    wqkv = concat({param(prefix + ".wq"), param(prefix + ".wk"), param(prefix + ".wv")}, 1);
    bqkv = concat({param(prefix + ".bq"), param(prefix + ".bk"), param(prefix + ".bv")}, 0);
    fused_cache_.emplace(prefix, std::make_pair(wqkv, bqkv));
  }
  Value qkv = linear(x, wqkv, bqkv);
  std::vector<Value> ctx;
  ctx.reserve(static_cast<std::size_t>(heads));
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  for (int h = 0; h < heads; ++h) {
    Value qh = slice(qkv, 1, h * dh, dh);
    Value kh = slice(qkv, 1, D + h * dh, dh);
    Value vh = slice(qkv, 1, 2 * D + h * dh, dh);
    Value scores = scalar_mul(matmul(qh, transpose(kh)), scale);
    ctx.push_back(matmul(softmax(scores), vh));
  }
  Value merged = heads == 1 ? ctx[0] : concat(ctx, 1);
  return linear(merged, param(prefix + ".wo"), param(prefix + ".bo"));
}

Value Forward::ffn(Value x, const std::string& prefix) {
  Value h = gelu(linear(x, param(prefix + ".w1"), param(prefix + ".b1")));
  return linear(h, param(prefix + ".w2"), param(prefix + ".b2"));
}

Value Forward::vit_block(Value x, const std::string& prefix, int heads) {
  Value a = layer_norm(x, param(prefix + ".ln1.scale"), param(prefix + ".ln1.shift"));
  x = x + attention(a, prefix + ".attn", heads);
  Value f = layer_norm(x, param(prefix + ".ln2.scale"), param(prefix + ".ln2.shift"));
  return x + ffn(f, prefix + ".ffn");
}

Value Forward::patchify_value(Value image_hwc) {
  const auto& s = image_hwc.tensor().shape;
  const int H = s[0], W = s[1], C = s[2];
  Value flat = reshape(image_hwc, {H * W * C, 1});
  Value rows = gather_rows(flat, patchify_index(H, W, C, cfg_.patch_size));
  return reshape(rows, {cfg_.tokens(), cfg_.patch_dim()});
}

Value Forward::unpatchify_value(Value rows) {
  const int H = cfg_.image_size, C = cfg_.channels;
  const auto fwd = patchify_index(H, H, C, cfg_.patch_size);
  std::vector<int> inv(fwd.size());
  for (std::size_t i = 0; i < fwd.size(); ++i) inv[static_cast<std::size_t>(fwd[i])] =
      static_cast<int>(i);
  Value flat = reshape(rows, {static_cast<int>(fwd.size()), 1});
  Value img = gather_rows(flat, inv);
  return reshape(img, {H, H, C});
}

EncodeResult Forward::encode(const Tensor& image, const MaskPlan& plan) {
  if (image.rank() != 3 || image.shape[0] != cfg_.image_size || image.shape[1] != cfg_.image_size ||
      image.shape[2] != cfg_.channels)
    throw std::invalid_argument("encode: image shape " + shape_str(image.shape) +
                                " does not match config");
  if (plan.total() != cfg_.tokens())
    throw std::invalid_argument("encode: mask plan token count mismatch");

  EncodeResult res;
  Value img = g_->constant(image);
  Value rows = patchify_value(img);
  Value emb = linear(rows, param("patch_embed.w"), param("patch_embed.b"));
  emb = emb + param("enc.pos");
  Value x = gather_rows(emb, plan.visible());
  res.layers.push_back(x);
  for (int i = 0; i < cfg_.enc_depth; ++i) {
    x = vit_block(x, "enc." + std::to_string(i), cfg_.enc_heads);
    check_finite(x, "encoder block " + std::to_string(i));
    res.layers.push_back(x);
  }
  x = layer_norm(x, param("enc.norm.scale"), param("enc.norm.shift"));
  res.layers.push_back(x);
  res.tokens = x;
  return res;
}

Value Forward::insert_mask_tokens(Value visible_tokens, const MaskPlan& plan,
                                  const std::string& dec) {
  const int n = cfg_.tokens();
  Value proj = linear(visible_tokens, param(dec + ".proj.w"), param(dec + ".proj.b"));
  Value full = scatter_rows(proj, plan.visible(), n);
  const auto masked = plan.masked();
  if (!masked.empty()) {
    Value ones_col = g_->constant(Tensor::ones({static_cast<int>(masked.size()), 1}));
    Value tiled = matmul(ones_col, param(dec + ".mask_token"));
    full = full + scatter_rows(tiled, masked, n);
  }
  return full + param(dec + ".pos");
}

DecodeResult Forward::pixel_decode(Value visible_tokens, const MaskPlan& plan) {
  Value x = insert_mask_tokens(visible_tokens, plan, "pd");
  for (int i = 0; i < cfg_.dec_depth; ++i) {
    x = vit_block(x, "pd." + std::to_string(i), cfg_.dec_heads());
    check_finite(x, "pixel decoder block " + std::to_string(i));
  }
  x = layer_norm(x, param("pd.norm.scale"), param("pd.norm.shift"));
  Value rows = linear(x, param("pd.head.w"), param("pd.head.b"));
  DecodeResult res;
  res.rows = rows;
  res.image = unpatchify_value(rows);
  return res;
}

Value Forward::fsp_block(Value tokens, const std::string& prefix) {
  const int G = cfg_.grid_side(), D = cfg_.dec_dim, n = cfg_.tokens();
  Value t = layer_norm(tokens, param(prefix + ".ln1.scale"), param(prefix + ".ln1.shift"));
  Value spec = ops::dft2d(reshape(t, {G, G, D}));
  Value omega = param(prefix + ".omega");
  Value omega4 = reshape(omega, {1, G, G, D});
  Value omega_pair = concat({omega4, omega4}, 0);
  Value filtered = spec * omega_pair;
  Value spatial = ops::idft2d_real(filtered);
  Value u = tokens + reshape(spatial, {n, D});
  Value f = layer_norm(u, param(prefix + ".ln2.scale"), param(prefix + ".ln2.shift"));
  return u + ffn(f, prefix + ".ffn");
}

Value Forward::frequency_decode(Value visible_tokens, const MaskPlan& plan) {
  const int G = cfg_.grid_side(), D = cfg_.dec_dim, n = cfg_.tokens();
  const int pd = cfg_.patch_dim();
  Value x = insert_mask_tokens(visible_tokens, plan, "fd");
  for (int i = 0; i < cfg_.dec_depth; ++i) {
    x = fsp_block(x, "fd." + std::to_string(i));
    check_finite(x, "frequency decoder block " + std::to_string(i));
  }
  x = layer_norm(x, param("fd.norm.scale"), param("fd.norm.shift"));
  Value spec = ops::dft2d(reshape(x, {G, G, D}));
  Value re3 = reshape(slice(spec, 0, 0, 1), {G, G, D});
  Value im3 = reshape(slice(spec, 0, 1, 1), {G, G, D});
  Value feat = reshape(concat({re3, im3}, 2), {n, 2 * D});
  Value head = linear(feat, param("fd.head.w"), param("fd.head.b"));
  Value re_rows = slice(head, 1, 0, pd);
  Value im_rows = slice(head, 1, pd, pd);
  const int H = cfg_.image_size, C = cfg_.channels;
  Value re_img = reshape(unpatchify_value(re_rows), {1, H, H, C});
  Value im_img = reshape(unpatchify_value(im_rows), {1, H, H, C});
  return concat({re_img, im_img}, 0);
}

Value Forward::compose_full_image(Value pixel_rows, const Tensor& original, const MaskPlan& plan) {
  const int n = cfg_.tokens();
  const auto masked = plan.masked();
  const auto visible = plan.visible();
  Value orig_rows = g_->constant(patchify(original, cfg_.patch_size));
  Value composed;
  if (masked.empty()) {
    composed = gather_rows(orig_rows, visible.empty() ? std::vector<int>{} : visible);
    composed = scatter_rows(composed, visible, n);
  } else {
    Value pred_part = scatter_rows(gather_rows(pixel_rows, masked), masked, n);
    Value orig_part = scatter_rows(gather_rows(orig_rows, visible), visible, n);
    composed = pred_part + orig_part;
  }
  return unpatchify_value(composed);
}

GeminatedOutput run_geminated(const ModelConfig& cfg, const Params& params, const Tensor& image,
                              const MaskPlan& plan) {
  Graph g;
  Forward fwd(g, cfg, params, /*trainable=*/false);
  EncodeResult enc = fwd.encode(image, plan);
  DecodeResult pix = fwd.pixel_decode(enc.tokens, plan);
  Value freq = fwd.frequency_decode(enc.tokens, plan);
  GeminatedOutput out;
  out.pixels = pix.image.tensor();
  out.spectrum = fourier::Spectrum2D::wrap(fourier::unpack_pair(freq.tensor()));
  out.plan = plan;
  return out;
}

}  // namespace ge2ae::model
