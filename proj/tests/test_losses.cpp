#include <doctest.h>

#include <cmath>

#include "ge2ae/losses.hpp"
#include "test_util.hpp"

using namespace ge2ae;
using namespace ge2ae::ops;
namespace md = ge2ae::model;
namespace ls = ge2ae::losses;
using testutil::rand_tensor;

namespace {

md::ModelConfig micro_config() {
  md::ModelConfig cfg;
  cfg.image_size = 8;
  cfg.patch_size = 2;
  cfg.channels = 1;
  cfg.enc_depth = 1;
  cfg.enc_heads = 2;
  cfg.enc_dim = 8;
  cfg.dec_dim = 8;
  cfg.dec_depth = 1;
  return cfg;
}

fourier::Spectrum2D random_spectrum(std::vector<int> shape, Rng& rng) {
  ComplexTensor z(std::move(shape));
  for (std::size_t i = 0; i < z.numel(); ++i) {
    z.re[i] = rng.uniform(-2, 2);
    z.im[i] = rng.uniform(-2, 2);
  }
  return fourier::Spectrum2D::wrap(std::move(z));
}

}  // namespace

TEST_SUITE_BEGIN("losses");

TEST_CASE("pixel reconstruction examples") {
  const md::ModelConfig cfg = micro_config();
  Rng rng(3);
  const Tensor image = rand_tensor({8, 8, 1}, rng, 0.0, 1.0);
  const md::MaskPlan plan = md::random_masking(cfg.tokens(), 0.75, 3);

  CHECK(ls::pixel_reconstruction_loss(image, image, plan, 2) == 0.0);

  // A single masked patch with constant per-pixel error e gives e^2.
  md::MaskPlan one;
  one.permutation.resize(static_cast<std::size_t>(cfg.tokens()));
  for (int i = 0; i < cfg.tokens(); ++i) one.permutation[static_cast<std::size_t>(i)] = i;
  one.kept = cfg.tokens() - 1;  // only token index 15 masked
  Tensor pred = image;
  const double e = 0.3;
  Tensor rows = md::patchify(pred, 2);
  for (int j = 0; j < cfg.patch_dim(); ++j) rows.at2(15, j) += e;
  pred = md::unpatchify(rows, 2, 4, 1);
  CHECK(ls::pixel_reconstruction_loss(pred, image, one, 2) == doctest::Approx(e * e).epsilon(1e-12));

  // Random case equals an explicit per-index loop.
  const Tensor p2 = rand_tensor({8, 8, 1}, rng);
  const Tensor t2 = rand_tensor({8, 8, 1}, rng);
  const double got = ls::pixel_reconstruction_loss(p2, t2, plan, 2);
  const Tensor pr = md::patchify(p2, 2), tr = md::patchify(t2, 2);
  double want = 0.0;
  int count = 0;
  for (int r : plan.masked())
    for (int j = 0; j < 4; ++j) {
      const double d = pr.at2(r, j) - tr.at2(r, j);
      want += d * d;
      ++count;
    }
  want /= count;
  CHECK(std::fabs(got - want) <= 1e-12);

  // Empty masked set: zero with the degenerate flag raised.
  bool degenerate = false;
  CHECK(ls::pixel_reconstruction_loss(image, image, md::full_visibility(cfg.tokens()), 2,
                                      &degenerate) == 0.0);
  CHECK(degenerate);
}

TEST_CASE("frequency distance gamma") {
  CHECK(ls::frequency_distance_gamma(3, 4, 0, 0) == doctest::Approx(5.0).epsilon(1e-14));
  CHECK(ls::frequency_distance_gamma(1.5, -2.5, 1.5, -2.5) == 0.0);
  CHECK(ls::frequency_distance_gamma(1, 1, 1, -1) == doctest::Approx(2.0).epsilon(1e-14));
}

TEST_CASE("focal frequency loss examples") {
  Rng rng(7);
  auto spec = random_spectrum({4, 4, 1}, rng);
  CHECK(ls::focal_frequency_loss(spec, spec, 1.0) == 0.0);

  auto pred = fourier::Spectrum2D::wrap(ComplexTensor({1, 1, 1}, {2.0}, {0.0}));
  auto tgt = fourier::Spectrum2D::wrap(ComplexTensor({1, 1, 1}, {0.0}, {0.0}));
  CHECK(ls::focal_frequency_loss(pred, tgt, 1.0) == doctest::Approx(8.0).epsilon(1e-9));

  // beta = 0 reduces to the unweighted frequency MSE.
  auto a = random_spectrum({4, 4, 1}, rng);
  auto b = random_spectrum({4, 4, 1}, rng);
  double mean_g2 = 0.0;
  for (std::size_t i = 0; i < a.values.numel(); ++i) {
    const double dr = a.values.re[i] - b.values.re[i];
    const double di = a.values.im[i] - b.values.im[i];
    mean_g2 += dr * dr + di * di;
  }
  mean_g2 /= static_cast<double>(a.values.numel());
  CHECK(std::fabs(ls::focal_frequency_loss(a, b, 0.0) - mean_g2) <= 1e-12);

  CHECK_THROWS_AS(ls::focal_frequency_loss(a, random_spectrum({2, 2, 1}, rng), 1.0),
                  std::invalid_argument);
}

TEST_CASE("total loss identities") {
  const md::ModelConfig cfg = micro_config();
  const md::Params params = md::init_params(cfg, 5);
  Rng rng(11);
  const Tensor image = rand_tensor({8, 8, 1}, rng, 0.0, 1.0);
  const md::MaskPlan plan = md::random_masking(cfg.tokens(), 0.75, 5);

  // Perfect predictions: every enabled term vanishes.
  {
    Graph g;
    md::Forward fwd(g, cfg, params, false);
    md::DecodeResult pix;
    pix.rows = g.constant(md::patchify(image, 2));
    pix.image = fwd.unpatchify_value(pix.rows);
    Value freq = g.constant(fourier::pack_pair(fourier::dft2d(image).values));
    ls::LossConfig lc;
    const auto tl = ls::total_loss(fwd, pix, freq, image, plan, lc);
    CHECK(std::fabs(tl.values.total) <= 1e-12);
    CHECK(tl.values.pix_re == 0.0);
    CHECK(tl.values.freq_re == 0.0);
  }

  // Pixel-only toggles: total equals pix_re alone.
  Rng rng2(13);
  const Tensor pred_rows = rand_tensor({cfg.tokens(), cfg.patch_dim()}, rng2);
  const Tensor freq_pair = rand_tensor({2, 8, 8, 1}, rng2);
  auto run = [&](ls::LossConfig lc) {
    Graph g;
    md::Forward fwd(g, cfg, params, false);
    md::DecodeResult pix;
    pix.rows = g.constant(pred_rows);
    pix.image = fwd.unpatchify_value(pix.rows);
    std::optional<md::DecodeResult> pix_opt;
    std::optional<Value> freq_opt;
    if (lc.needs_pixel_decoder()) pix_opt = pix;
    if (lc.needs_frequency_decoder()) freq_opt = g.constant(freq_pair);
    return ls::total_loss(fwd, pix_opt, freq_opt, image, plan, lc);
  };

  ls::LossConfig pix_only;
  pix_only.freq_con = pix_only.freq_re = pix_only.pix_con = false;
  const auto tl_pix = run(pix_only);
  CHECK(tl_pix.values.total == tl_pix.values.pix_re);
  CHECK(tl_pix.values.freq_con == 0.0);

  ls::LossConfig zero_lambda;
  zero_lambda.lambda = 0.0;
  const auto tl_l0 = run(zero_lambda);
  CHECK(tl_l0.values.total == tl_l0.values.pix_re + tl_l0.values.freq_con);

  // Toggle consistency: enabling other terms never changes an enabled term.
  ls::LossConfig full;
  const auto tl_full = run(full);
  CHECK(tl_full.values.pix_re == tl_pix.values.pix_re);
  CHECK(tl_full.values.freq_con == tl_l0.values.freq_con);
  CHECK(tl_full.values.total ==
        tl_full.values.pix_re + tl_full.values.freq_con +
            full.lambda * (tl_full.values.freq_re + tl_full.values.pix_con));

  // Non-negativity of every term.
  CHECK(tl_full.values.pix_re >= 0.0);
  CHECK(tl_full.values.freq_con >= 0.0);
  CHECK(tl_full.values.freq_re >= 0.0);
  CHECK(tl_full.values.pix_con >= 0.0);

  // At least one toggle must stay enabled.
  ls::LossConfig none;
  none.pix_re = none.freq_con = none.freq_re = none.pix_con = false;
  CHECK_THROWS_AS(none.validate(), std::invalid_argument);
}

TEST_CASE("freq_con gradient support excludes visible patches") {
  const md::ModelConfig cfg = micro_config();
  const md::Params params = md::init_params(cfg, 7);
  Rng rng(17);
  const Tensor image = rand_tensor({8, 8, 1}, rng, 0.0, 1.0);
  const md::MaskPlan plan = md::random_masking(cfg.tokens(), 0.5, 7);

  Graph g;
  md::Forward fwd(g, cfg, params, false);
  Tensor rows_t = rand_tensor({cfg.tokens(), cfg.patch_dim()}, rng);
  rows_t.requires_grad = true;
  Value rows = g.leaf("rows", rows_t);
  Value composed = fwd.compose_full_image(rows, image, plan);
  Value freq_con = ls::focal_frequency_loss_value(
      ops::dft2d(composed), fourier::pack_pair(fourier::dft2d(image).values), 1.0);
  const GradMap grads = g.backward(freq_con);
  const Tensor& grad = grads.at("rows");
  for (int r : plan.visible())
    for (int j = 0; j < cfg.patch_dim(); ++j) CHECK(grad.at2(r, j) == 0.0);
  // ... but masked patches do receive gradient.
  double masked_mag = 0.0;
  for (int r : plan.masked())
    for (int j = 0; j < cfg.patch_dim(); ++j) masked_mag += std::fabs(grad.at2(r, j));
  CHECK(masked_mag > 0.0);
}

TEST_CASE("total loss differentiable end to end on selected parameters") {
  const md::ModelConfig cfg = micro_config();
  const md::Params params = md::init_params(cfg, 19);
  Rng rng(23);
  const Tensor image = rand_tensor({8, 8, 1}, rng, 0.0, 1.0);
  const md::MaskPlan plan = md::random_masking(cfg.tokens(), 0.75, 11);
  // beta = 0 keeps the focal weight at exactly 1 so the stop-gradient
  // objective and the finite-difference probe describe the same function;
  // the frozen-weight beta = 1 sweep lives in the acceptance suite.
  ls::LossConfig lc;
  lc.beta = 0.0;

  auto build = [&](md::Forward& fwd) {
    auto enc = fwd.encode(image, plan);
    auto pix = fwd.pixel_decode(enc.tokens, plan);
    auto freq = fwd.frequency_decode(enc.tokens, plan);
    return ls::total_loss(fwd, pix, freq, image, plan, lc).total;
  };

  Graph g;
  md::Forward fwd(g, cfg, params, true);
  const GradMap grads = g.backward(build(fwd));

  md::Params probe = params;
  const double h = 1e-5;
  double worst = 0.0;
  for (const std::string name :
       {"fd.0.omega", "patch_embed.w", "pd.mask_token", "enc.0.attn.wq", "fd.head.w"}) {
    const Tensor& base = params.at(name);
    const Tensor& analytic = grads.at(name);
    const std::size_t lim = std::min<std::size_t>(base.numel(), 12);
    for (std::size_t i = 0; i < lim; ++i) {
      auto value_at = [&](double delta) {
        probe[name].data[i] = base.data[i] + delta;
        Graph g2;
        md::Forward f2(g2, cfg, probe, true);
        const double v = build(f2).tensor().scalar_value();
        probe[name].data[i] = base.data[i];
        return v;
      };
      const double numeric = (value_at(h) - value_at(-h)) / (2 * h);
      worst = std::max(worst, std::fabs(analytic.data[i] - numeric) /
                                  std::max(1.0, std::fabs(analytic.data[i]) + std::fabs(numeric)));
    }
  }
  CHECK(worst <= 1e-3);
}

TEST_SUITE_END();
