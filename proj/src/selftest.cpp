#include "ge2ae/selftest.hpp"

#include <cmath>
#include <ostream>

#include "ge2ae/fourier.hpp"
#include "ge2ae/losses.hpp"
#include "ge2ae/rng.hpp"

namespace ge2ae::selftest {

using namespace ge2ae::ops;

double gradcheck(const LossBuilder& build, const model::Params& leaves, double step) {
  model::Params work = leaves;
  for (auto& [name, t] : work) t.requires_grad = true;
  Graph g;
  Value loss = build(g, work);
  const GradMap grads = g.backward(loss);

  auto eval = [&](const model::Params& p) {
    Graph g2;
    model::Params frozen = p;
    for (auto& [name, t] : frozen) t.requires_grad = true;
    return build(g2, frozen).tensor().scalar_value();
  };

  double max_rel = 0.0;
  model::Params probe = leaves;
  for (const auto& [name, t] : leaves) {
    const Tensor& analytic = grads.at(name);
    for (std::size_t i = 0; i < t.numel(); ++i) {
      probe[name].data[i] = t.data[i] + step;
      const double fp = eval(probe);
      probe[name].data[i] = t.data[i] - step;
      const double fm = eval(probe);
      probe[name].data[i] = t.data[i];
      const double numeric = (fp - fm) / (2.0 * step);
      const double rel = std::fabs(analytic.data[i] - numeric) /
                         std::max(1.0, std::fabs(analytic.data[i]) + std::fabs(numeric));
      max_rel = std::max(max_rel, rel);
    }
  }
  return max_rel;
}

namespace {

Tensor random_tensor(std::vector<int> shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor t(std::move(shape));
  for (auto& x : t.data) x = rng.uniform(lo, hi);
  return t;
}

struct Suite {
  std::ostream& out;
  int failures = 0;

  void check(const std::string& name, bool ok, const std::string& detail = "") {
    out << "[selftest] " << name << ": " << (ok ? "PASS" : "FAIL");
    if (!ok && !detail.empty()) out << " (" << detail << ")";
    out << "\n";
    if (!ok) ++failures;
  }
};

void fft_suite(Suite& s) {
  Rng rng(11);
  double max_fwd = 0.0, max_inv = 0.0, max_round = 0.0, max_parseval = 0.0;
  for (int trial = 0; trial < 5; ++trial) {
    const Tensor img = random_tensor({16, 16, 3}, rng);
    const auto fast = fourier::dft2d(img);
    const auto naive = fourier::dft2d_naive(img);
    for (std::size_t i = 0; i < fast.values.numel(); ++i) {
      max_fwd = std::max(max_fwd, std::fabs(fast.values.re[i] - naive.values.re[i]));
      max_fwd = std::max(max_fwd, std::fabs(fast.values.im[i] - naive.values.im[i]));
    }
    const auto inv_fast = fourier::idft2d(fast);
    const auto inv_naive = fourier::idft2d_naive(fast);
    for (std::size_t i = 0; i < inv_fast.numel(); ++i) {
      max_inv = std::max(max_inv, std::fabs(inv_fast.re[i] - inv_naive.re[i]));
      max_round = std::max(max_round, std::fabs(inv_fast.re[i] - img.data[i]));
      max_round = std::max(max_round, std::fabs(inv_fast.im[i]));
    }
    double spatial = 0.0, spectral = 0.0;
    for (double v : img.data) spatial += v * v;
    for (std::size_t i = 0; i < fast.values.numel(); ++i)
      spectral += fast.values.re[i] * fast.values.re[i] + fast.values.im[i] * fast.values.im[i];
    spectral /= 16.0 * 16.0;
    max_parseval = std::max(max_parseval, std::fabs(spatial - spectral) / spatial);
  }
  s.check("fft fast-vs-direct forward", max_fwd <= 1e-10, "max delta " + std::to_string(max_fwd));
  s.check("fft fast-vs-direct inverse", max_inv <= 1e-10, "max delta " + std::to_string(max_inv));
  s.check("fft roundtrip", max_round <= 1e-10, "max delta " + std::to_string(max_round));
  s.check("fft parseval", max_parseval <= 1e-9, "rel " + std::to_string(max_parseval));
}

void gradient_suite(Suite& s) {
  Rng rng(23);
  auto run = [&](const std::string& name, const LossBuilder& b, const model::Params& leaves,
                 double tol) {
    double worst = 0.0;
    for (int trial = 0; trial < 3; ++trial) {
      model::Params jittered = leaves;
      for (auto& [k, t] : jittered)
        for (auto& x : t.data) x += rng.uniform(-0.05, 0.05);
      worst = std::max(worst, gradcheck(b, jittered));
    }
    s.check("gradient " + name, worst <= tol, "max rel err " + std::to_string(worst));
  };

  model::Params ab;
  ab["a"] = random_tensor({3, 4}, rng, 0.3, 1.2);
  ab["b"] = random_tensor({3, 4}, rng, 0.3, 1.2);
  auto leaf2 = [](Graph& g, const model::Params& p, const char* x, const char* y) {
    return std::pair<Value, Value>{g.leaf(x, p.at(x)), g.leaf(y, p.at(y))};
  };

  run("add", [&](Graph& g, const model::Params& p) {
    auto [a, b] = leaf2(g, p, "a", "b");
    return sum(power(a + b, 2.0));
  }, ab, 1e-6);
  run("sub", [&](Graph& g, const model::Params& p) {
    auto [a, b] = leaf2(g, p, "a", "b");
    return sum(power(a - b, 2.0));
  }, ab, 1e-6);
  run("mul", [&](Graph& g, const model::Params& p) {
    auto [a, b] = leaf2(g, p, "a", "b");
    return sum(a * b);
  }, ab, 1e-6);

  model::Params sc;
  sc["a"] = random_tensor({2, 3}, rng);
  sc["s"] = random_tensor({1}, rng, 0.5, 1.5);
  run("scalar broadcast", [&](Graph& g, const model::Params& p) {
    auto [a, sv] = leaf2(g, p, "a", "s");
    return sum(power(a * sv + sv, 2.0));
  }, sc, 1e-6);

  model::Params mm;
  mm["a"] = random_tensor({2, 3}, rng);
  mm["b"] = random_tensor({3, 4}, rng);
  run("matmul", [&](Graph& g, const model::Params& p) {
    auto [a, b] = leaf2(g, p, "a", "b");
    return sum(power(matmul(a, b), 2.0));
  }, mm, 1e-6);

  model::Params lin;
  lin["x"] = random_tensor({3, 4}, rng);
  lin["w"] = random_tensor({4, 2}, rng);
  lin["b"] = random_tensor({2}, rng);
  run("linear", [&](Graph& g, const model::Params& p) {
    return sum(power(linear(g.leaf("x", p.at("x")), g.leaf("w", p.at("w")), g.leaf("b", p.at("b"))),
                     2.0));
  }, lin, 1e-6);

  model::Params single;
  single["x"] = random_tensor({4, 6}, rng, 0.4, 1.6);
  run("reshape+transpose+concat+slice", [&](Graph& g, const model::Params& p) {
    Value x = g.leaf("x", p.at("x"));
    Value t = transpose(reshape(x, {6, 4}));
    Value c = concat({slice(t, 1, 0, 3), slice(t, 1, 3, 3)}, 1);
    return sum(power(c, 2.0));
  }, single, 1e-6);
  run("gather+scatter", [&](Graph& g, const model::Params& p) {
    Value x = g.leaf("x", p.at("x"));
    Value gth = gather_rows(x, {3, 1, 1, 0});
    return sum(power(scatter_rows(gth, {0, 2, 5, 7}, 9), 2.0));
  }, single, 1e-6);
  run("mean", [&](Graph& g, const model::Params& p) {
    return mean(power(g.leaf("x", p.at("x")), 2.0));
  }, single, 1e-6);
  run("power", [&](Graph& g, const model::Params& p) {
    return sum(power(g.leaf("x", p.at("x")), 1.7));
  }, single, 1e-6);
  run("sqrt", [&](Graph& g, const model::Params& p) {
    return sum(ops::sqrt(g.leaf("x", p.at("x"))));
  }, single, 1e-6);
  run("exp", [&](Graph& g, const model::Params& p) {
    return sum(ops::exp(g.leaf("x", p.at("x"))));
  }, single, 1e-6);
  run("gelu", [&](Graph& g, const model::Params& p) {
    return sum(gelu(g.leaf("x", p.at("x"))));
  }, single, 1e-6);
  run("softmax", [&](Graph& g, const model::Params& p) {
    Value sm = softmax(g.leaf("x", p.at("x")));
    return sum(power(sm + sm * sm, 2.0));
  }, single, 1e-6);

  model::Params lnp;
  lnp["x"] = random_tensor({3, 5}, rng);
  lnp["scale"] = random_tensor({5}, rng, 0.5, 1.5);
  lnp["shift"] = random_tensor({5}, rng);
  run("layer_norm", [&](Graph& g, const model::Params& p) {
    Value y = layer_norm(g.leaf("x", p.at("x")), g.leaf("scale", p.at("scale")),
                         g.leaf("shift", p.at("shift")));
    return sum(power(y, 2.0));
  }, lnp, 1e-6);

  model::Params fftp;
  fftp["x"] = random_tensor({4, 4, 2}, rng);
  run("dft2d", [&](Graph& g, const model::Params& p) {
    return sum(power(ops::dft2d(g.leaf("x", p.at("x"))), 2.0));
  }, fftp, 1e-6);
  model::Params ifftp;
  ifftp["z"] = random_tensor({2, 4, 4, 2}, rng);
  run("idft2d_real", [&](Graph& g, const model::Params& p) {
    return sum(power(ops::idft2d_real(g.leaf("z", p.at("z"))), 2.0));
  }, ifftp, 1e-6);

  // FSP block including the spectral filter parameter.
  model::ModelConfig micro;
  micro.image_size = 8;
  micro.patch_size = 2;
  micro.channels = 1;
  micro.enc_depth = 1;
  micro.enc_heads = 2;
  micro.enc_dim = 8;
  micro.dec_dim = 8;
  micro.dec_depth = 1;
  model::Params mp = model::init_params(micro, 5);
  model::Params fsp_leaves;
  for (const auto& [k, t] : mp)
    if (k.rfind("fd.0.", 0) == 0) fsp_leaves[k] = t;
  fsp_leaves["x"] = random_tensor({16, 8}, rng);
  double worst = 0.0;
  for (int trial = 0; trial < 3; ++trial) {
    model::Params jittered = fsp_leaves;
    for (auto& [k, t] : jittered)
      for (auto& x : t.data) x += rng.uniform(-0.02, 0.02);
    worst = std::max(worst, gradcheck([&](Graph& g, const model::Params& p) {
      model::Forward fwd(g, micro, p, /*trainable=*/true);
      Value x = g.leaf("x", p.at("x"));
      return sum(power(fwd.fsp_block(x, "fd.0"), 2.0));
    }, jittered));
  }
  s.check("gradient fsp_block (incl. omega)", worst <= 1e-4, "max rel err " + std::to_string(worst));
}

void loss_suite(Suite& s) {
  Rng rng(31);
  model::ModelConfig micro;
  micro.image_size = 8;
  micro.patch_size = 2;
  micro.channels = 1;
  micro.enc_depth = 1;
  micro.enc_heads = 2;
  micro.enc_dim = 8;
  micro.dec_dim = 8;
  micro.dec_depth = 1;
  model::Params params = model::init_params(micro, 3);
  const Tensor image = random_tensor({8, 8, 1}, rng, 0.0, 1.0);
  const model::MaskPlan plan = model::random_masking(micro.tokens(), 0.75, 17);

  // Perfect predictions: total vanishes.
  {
    Graph g;
    model::Forward fwd(g, micro, params, false);
    model::DecodeResult pix;
    pix.rows = g.constant(model::patchify(image, micro.patch_size));
    pix.image = fwd.unpatchify_value(pix.rows);
    Value freq = g.constant(fourier::pack_pair(fourier::dft2d(image).values));
    losses::LossConfig lc;
    auto tl = losses::total_loss(fwd, pix, freq, image, plan, lc);
    s.check("loss perfect-prediction zero", std::fabs(tl.values.total) <= 1e-12,
            "total " + std::to_string(tl.values.total));
  }

  // lambda = 0 collapses the frequency group.
  {
    Graph g;
    model::Forward fwd(g, micro, params, false);
    model::DecodeResult pix;
    pix.rows = g.constant(random_tensor({micro.tokens(), micro.patch_dim()}, rng));
    pix.image = fwd.unpatchify_value(pix.rows);
    Value freq = g.constant(random_tensor({2, 8, 8, 1}, rng));
    losses::LossConfig lc;
    lc.lambda = 0.0;
    auto tl = losses::total_loss(fwd, pix, freq, image, plan, lc);
    const double expect = tl.values.pix_re + tl.values.freq_con;
    s.check("loss lambda-zero collapse", tl.values.total == expect,
            "total " + std::to_string(tl.values.total) + " vs " + std::to_string(expect));
  }

  // beta = 0 reduces the focal loss to the unweighted frequency MSE.
  {
    auto pred = fourier::Spectrum2D::wrap(
        ComplexTensor({4, 4, 1}, random_tensor({4, 4, 1}, rng).data,
                      random_tensor({4, 4, 1}, rng).data));
    auto tgt = fourier::Spectrum2D::wrap(
        ComplexTensor({4, 4, 1}, random_tensor({4, 4, 1}, rng).data,
                      random_tensor({4, 4, 1}, rng).data));
    const double focal = losses::focal_frequency_loss(pred, tgt, 0.0);
    double manual = 0.0;
    for (std::size_t i = 0; i < pred.values.numel(); ++i) {
      const double dr = pred.values.re[i] - tgt.values.re[i];
      const double di = pred.values.im[i] - tgt.values.im[i];
      manual += dr * dr + di * di;
    }
    manual /= static_cast<double>(pred.values.numel());
    s.check("loss beta-zero is frequency mse", std::fabs(focal - manual) <= 1e-12,
            "delta " + std::to_string(focal - manual));
  }

  // 1x1 hand value: f = 2, fhat = 0, beta = 1 -> 8.
  {
    auto pred = fourier::Spectrum2D::wrap(ComplexTensor({1, 1, 1}, {2.0}, {0.0}));
    auto tgt = fourier::Spectrum2D::wrap(ComplexTensor({1, 1, 1}, {0.0}, {0.0}));
    const double focal = losses::focal_frequency_loss(pred, tgt, 1.0);
    s.check("loss focal 1x1 hand value", std::fabs(focal - 8.0) <= 1e-9,
            "got " + std::to_string(focal));
  }

  // Masked-only gradient support for pix_re and freq_con.
  {
    Graph g;
    model::Forward fwd(g, micro, params, false);
    Tensor rows_t = random_tensor({micro.tokens(), micro.patch_dim()}, rng);
    rows_t.requires_grad = true;
    Value rows = g.leaf("rows", rows_t);
    bool degenerate = false;
    Value pix_re = losses::pixel_reconstruction_loss_value(fwd, rows, image, plan, &degenerate);
    Value composed = fwd.compose_full_image(rows, image, plan);
    Value freq_con = losses::focal_frequency_loss_value(
        ops::dft2d(composed), fourier::pack_pair(fourier::dft2d(image).values), 1.0);
    GradMap grads = g.backward(pix_re + freq_con);
    const Tensor& grad = grads.at("rows");
    double max_visible = 0.0;
    for (int row : plan.visible())
      for (int j = 0; j < micro.patch_dim(); ++j)
        max_visible = std::max(max_visible, std::fabs(grad.at2(row, j)));
    s.check("loss masked-only gradient support", max_visible == 0.0,
            "max visible-row grad " + std::to_string(max_visible));
  }
}

}  // namespace

int run_selftest(std::ostream& out) {
  Suite s{out};
  fft_suite(s);
  gradient_suite(s);
  loss_suite(s);
  out << "[selftest] " << (s.failures == 0 ? "all suites passed" : "FAILURES present") << "\n";
  return s.failures;
}

}  // namespace ge2ae::selftest
