#include <doctest.h>

#include <cmath>
#include <limits>

#include "groupcdl/errors.hpp"
#include "groupcdl/image.hpp"
#include "groupcdl/parallel.hpp"
#include "groupcdl/solver.hpp"
#include "oracles.hpp"

using namespace groupcdl;

namespace {

ConvDictionary random_filters(Rng& rng, int m, int c, int p, int s) {
  ConvDictionary d(m, c, p, s);
  for (double& v : d.taps()) v = rng.normal();
  return project_constraint(d);
}

Image smooth_image(Rng& rng, int c, int rows, int cols) {
  Image x(c, rows, cols);
  const double f1 = 0.2 + 0.3 * rng.uniform();
  const double f2 = 0.2 + 0.3 * rng.uniform();
  for (int ch = 0; ch < c; ++ch) {
    for (int r = 0; r < rows; ++r) {
      for (int k = 0; k < cols; ++k) x(ch, r, k) = 0.5 + 0.3 * std::sin(f1 * r + ch) * std::cos(f2 * k);
    }
  }
  return add_awgn(x, 10.0, rng);
}

ClassicalConfig small_config(int window, int stride = 1) {
  ClassicalConfig c;
  c.subbands = 9;
  c.filter_size = 5;
  c.stride = stride;
  c.layers = 6;
  c.window = window;
  c.update_period = 2;
  c.similarity_scale = 50.0;
  c.tau1 = 0.2;
  c.power_iters = 60;
  c.probe_size = 32;
  return c;
}

Image shift(const Image& x, int dr, int dc) {
  Image out(x.channels(), x.rows(), x.cols());
  for (int c = 0; c < x.channels(); ++c) {
    for (int r = 0; r < x.rows(); ++r) {
      for (int k = 0; k < x.cols(); ++k) {
        out(c, (r + dr) % x.rows(), (k + dc) % x.cols()) = x(c, r, k);
      }
    }
  }
  return out;
}

}  // namespace

TEST_CASE("ista_l1: objective is nonincreasing over 200 iterations") {
  Rng rng(1);
  for (int t = 0; t < 10; ++t) {
    const int s = 1 + t % 2;
    const ConvDictionary d = random_filters(rng, 4, 1 + 2 * (t % 2), 5, s);
    const double norm = spectral_norm(d, 16, 16, 200);
    const Image y = oracle::random_image(rng, d.channels(), 16, 16);
    const IstaResult r = ista_l1(y, d, 0.05 + 0.1 * rng.uniform(), 1.0 / (norm * norm), 200);
    REQUIRE(r.report.objective.size() == 201);
    for (std::size_t k = 1; k < r.report.objective.size(); ++k) {
      CHECK(r.report.objective[k] <= r.report.objective[k - 1] + 1e-10);
    }
  }
}

TEST_CASE("ista_l1: orthonormal dictionary reaches the prox fixed point in one step") {
  Rng rng(2);
  ConvDictionary delta(1, 1, 3, 1);
  delta.tap(0, 0, 1, 1) = 1.0;
  const Image y = oracle::random_image(rng, 1, 9, 11);
  const double lambda = 0.4;
  const IstaResult one = ista_l1(y, delta, lambda, 1.0, 1);
  LatentCode as_code(1, 9, 11);
  std::copy(y.data().begin(), y.data().end(), as_code.data().begin());
  const std::vector<double> tau{lambda};
  const LatentCode expect = soft_threshold(as_code, tau);
  CHECK(oracle::max_abs_diff(one.code.data(), expect.data()) <= 1e-15);
  const IstaResult more = ista_l1(y, delta, lambda, 1.0, 5);
  CHECK(oracle::max_abs_diff(more.code.data(), expect.data()) <= 1e-15);
}

TEST_CASE("ista_l1: a large lambda shrinks everything to zero") {
  Rng rng(3);
  const ConvDictionary d = random_filters(rng, 3, 1, 5, 1);
  const Image y = oracle::random_image(rng, 1, 12, 12);
  const double norm = spectral_norm(d, 12, 12, 100);
  const double eta = 1.0 / (norm * norm);
  const double lambda = oracle::max_abs(analyze(d, y).data()) * 1.01;
  const IstaResult r = ista_l1(y, d, lambda, eta, 20);
  CHECK(oracle::max_abs(r.code.data()) == 0.0);
  CHECK(r.report.objective.back() == doctest::Approx(0.5 * std::pow(norm2(y.data()), 2)));
}

TEST_CASE("ista_l1: recovers the dominant entries of a planted code") {
  Rng rng(4);
  const ConvDictionary d = random_filters(rng, 3, 1, 5, 1);
  LatentCode z0(3, 16, 16);
  std::vector<std::size_t> support;
  for (int k = 0; k < 6; ++k) {
    const std::size_t i = rng.below(z0.size());
    z0.data()[i] = (rng.uniform() < 0.5 ? -1.0 : 1.0) * (2.0 + rng.uniform());
    support.push_back(i);
  }
  Image y = synthesize(d, z0);
  for (double& v : y.data()) v += 0.01 * rng.normal();
  const double norm = spectral_norm(d, 16, 16, 100);
  const IstaResult r = ista_l1(y, d, 0.05, 1.0 / (norm * norm), 500);
  for (std::size_t i : support) {
    CHECK(std::abs(r.code.data()[i]) > 0.5);
    CHECK(r.code.data()[i] * z0.data()[i] > 0.0);
  }
}

TEST_CASE("ista_l1: warm start and kept iterates") {
  Rng rng(5);
  const ConvDictionary d = random_filters(rng, 2, 1, 3, 1);
  const Image y = oracle::random_image(rng, 1, 8, 8);
  IstaOptions keep;
  keep.keep_iterates = true;
  const IstaResult full = ista_l1(y, d, 0.1, 0.2, 6, keep);
  CHECK(full.report.iterates.size() == 6);
  const IstaResult first = ista_l1(y, d, 0.1, 0.2, 3);
  IstaOptions warm;
  warm.warm_start = &first.code;
  const IstaResult rest = ista_l1(y, d, 0.1, 0.2, 3, warm);
  CHECK(rest.code == full.code);
  CHECK(l1_objective(y, d, full.code, 0.1) == full.report.objective.back());
}

TEST_CASE("groupcdl_forward: degenerate configuration follows the ista trajectory") {
  Rng rng(6);
  const ConvDictionary d = random_filters(rng, 5, 1, 5, 2);
  ClassicalConfig cfg = small_config(1, 2);
  cfg.subbands = 5;
  cfg.layers = 12;
  cfg.tau0 = 0.03;
  cfg.tau1 = 0.0;
  cfg.free_subbands = 0;
  cfg.spectral_normalize = false;
  const ModelParams params = classical_params(cfg, d);
  const double eta = classical_step(params);

  const Image y = smooth_image(rng, 1, 16, 16);
  ForwardOptions fo;
  fo.keep_iterates = true;
  const ForwardResult fr = groupcdl_forward(y, 25.0, params, fo);

  const MeanRemoved centered = subtract_mean(y);
  IstaOptions io;
  io.keep_iterates = true;
  const IstaResult ir = ista_l1(centered.image, d, 0.03 / eta, eta, 12, io);
  REQUIRE(fr.report.iterates.size() == 12);
  for (int k = 0; k < 12; ++k) {
    CHECK(oracle::max_abs_diff(fr.report.iterates[k].data(), ir.report.iterates[k].data()) <= 1e-8);
  }
  const Image expect = add_mean(synthesize(d, ir.code), centered.mean);
  CHECK(oracle::max_abs_diff(fr.estimate.data(), expect.data()) <= 1e-8);
}

TEST_CASE("groupcdl_forward: constant image and zero layers return the mean") {
  ModelParams params = classical_params(small_config(3));
  const Image flat(1, 12, 10, 0.37);
  const ForwardResult r = groupcdl_forward(flat, 25.0, params);
  CHECK(r.estimate == flat);

  Rng rng(7);
  const Image y = smooth_image(rng, 1, 12, 10);
  params.layers.clear();
  const ForwardResult k0 = groupcdl_forward(y, 25.0, params);
  const double mean = channel_means(y)[0];
  for (double v : k0.estimate.data()) CHECK(v == mean);
}

TEST_CASE("groupcdl_forward: covariant under circular shifts by stride multiples") {
  Rng rng(8);
  for (int s : {1, 2}) {
    const ModelParams params = classical_params(small_config(3, s));
    const Image y = smooth_image(rng, 1, 16, 12);
    const Image shifted = shift(y, 2 * s, 3 * s);
    const Image a = shift(groupcdl_forward(y, 25.0, params).estimate, 2 * s, 3 * s);
    const Image b = groupcdl_forward(shifted, 25.0, params).estimate;
    CHECK(oracle::max_abs_diff(a.data(), b.data()) <= 1e-8);
  }
}

TEST_CASE("groupcdl_forward: deterministic and independent of the thread count") {
  Rng rng(9);
  ClassicalConfig cfg = small_config(5);
  cfg.channels = 3;
  const ModelParams params = classical_params(cfg);
  const Image y = smooth_image(rng, 3, 20, 18);
  const int before = num_threads();
  set_num_threads(1);
  const Image one = groupcdl_forward(y, 25.0, params).estimate;
  set_num_threads(3);
  const Image three = groupcdl_forward(y, 25.0, params).estimate;
  set_num_threads(before);
  CHECK(one == three);
  CHECK(groupcdl_forward(y, 25.0, params).estimate == one);
}

TEST_CASE("groupcdl_forward: odd sizes are padded and cropped back") {
  Rng rng(10);
  const ModelParams params = classical_params(small_config(3, 2));
  const Image y = smooth_image(rng, 1, 15, 13);
  const ForwardResult r = groupcdl_forward(y, 25.0, params);
  CHECK(r.estimate.rows() == 15);
  CHECK(r.estimate.cols() == 13);
  CHECK(all_finite(r.estimate));
}

TEST_CASE("groupcdl_forward: thresholds are monotone in the noise level") {
  Rng rng(11);
  ModelParams params = classical_params(small_config(3));
  for (auto& layer : params.layers) {
    for (double& t : layer.thresholds.tau1) t = rng.uniform();
  }
  const Image y = smooth_image(rng, 1, 12, 12);
  std::vector<double> prev;
  for (double sigma : {0.0, 5.0, 15.0, 25.0, 50.0}) {
    const auto used = groupcdl_forward(y, sigma, params).thresholds_used;
    if (!prev.empty()) {
      for (std::size_t i = 0; i < used.size(); ++i) CHECK(used[i] >= prev[i]);
    }
    prev = used;
  }
  for (auto& layer : params.layers) {
    for (double& t : layer.thresholds.tau1) t = 0.0;
  }
  const Image base = groupcdl_forward(y, 0.0, params).estimate;
  CHECK(groupcdl_forward(y, 75.0, params).estimate == base);
}

TEST_CASE("groupcdl_forward: adjacency capture and the update schedule") {
  CHECK_FALSE(refreshes_adjacency(0, 5));
  CHECK(refreshes_adjacency(1, 5));
  CHECK_FALSE(refreshes_adjacency(2, 5));
  CHECK(refreshes_adjacency(4, 5));
  CHECK(refreshes_adjacency(9, 5));
  CHECK_FALSE(refreshes_adjacency(0, 1));
  CHECK(refreshes_adjacency(1, 2));
  CHECK(refreshes_adjacency(3, 2));
  CHECK_FALSE(refreshes_adjacency(2, 2));

  Rng rng(12);
  const ModelParams params = classical_params(small_config(3));
  const Image y = smooth_image(rng, 1, 10, 10);
  ForwardOptions o;
  o.capture_adjacency_layer = 0;
  const auto g0 = groupcdl_forward(y, 25.0, params, o).captured_adjacency;
  REQUIRE(g0);
  CHECK(*g0 == identity_adjacency(g0->geometry()));
  o.capture_adjacency_layer = 6;
  const auto g6 = groupcdl_forward(y, 25.0, params, o).captured_adjacency;
  REQUIRE(g6);
  for (std::size_t i = 0; i < g6->geometry().pixels(); ++i) {
    double sum = 0.0;
    for (double v : g6->row(i)) sum += v;
    CHECK(std::abs(sum - 1.0) <= 1e-12);
  }
}

TEST_CASE("groupcdl_forward: objective trace and stage timings") {
  Rng rng(13);
  const ModelParams params = classical_params(small_config(3));
  const Image y = smooth_image(rng, 1, 12, 12);
  ForwardOptions o;
  o.objective_lambda = 0.1;
  const ForwardResult r = groupcdl_forward(y, 25.0, params, o);
  CHECK(r.report.objective.size() == 6);
  for (double v : r.report.objective) CHECK(std::isfinite(v));
  CHECK(r.report.seconds.conv >= 0.0);
  CHECK(r.report.seconds.similarity >= 0.0);
  CHECK(r.report.seconds.matvec >= 0.0);
}

TEST_CASE("groupcdl_forward: rejects bad inputs and aborts on non-finite values") {
  Rng rng(14);
  ModelParams params = classical_params(small_config(3));
  CHECK_THROWS_AS(groupcdl_forward(Image(3, 8, 8), 25.0, params), GeometryError);
  CHECK_THROWS(groupcdl_forward(Image(1, 8, 8), -1.0, params));
  for (auto& layer : params.layers) layer.analysis = layer.analysis.scaled(1e300);
  CHECK_THROWS_AS(groupcdl_forward(smooth_image(rng, 1, 8, 8), 25.0, params), NumericalError);
}

TEST_CASE("model params: validation") {
  const ModelParams good = classical_params(small_config(3));
  CHECK_NOTHROW(good.validate());
  ModelParams p = good;
  p.gamma = 1.5;
  CHECK_THROWS(p.validate());
  p = good;
  p.window = 4;
  CHECK_THROWS(p.validate());
  p = good;
  p.layers[2].thresholds.tau0[0] = -1.0;
  CHECK_THROWS(p.validate());
  p = good;
  p.layers[1].synthesis = ConvDictionary(9, 1, 3, 1);
  CHECK_THROWS(p.validate());
  p = good;
  p.update_period = 0;
  CHECK_THROWS(p.validate());
}

TEST_CASE("architecture presets") {
  const Architecture g = grayscale_architecture();
  CHECK(g.layers == 30);
  CHECK(g.subbands == 169);
  CHECK(g.compressed_subbands == 64);
  CHECK(g.window == 35);
  CHECK(g.stride == 2);
  CHECK(g.filter_size == 7);
  CHECK(g.update_period == 5);
  const Architecture c = color_architecture();
  CHECK(c.layers == 24);
  CHECK(c.subbands == 96);
  CHECK(c.compressed_subbands == 48);
  CHECK(c.channels == 3);
}

TEST_CASE("classical setup: step size and window-dependent thresholds") {
  const ClassicalConfig l1 = classical_config(25.0, 1);
  const ClassicalConfig gt = classical_config(25.0, 7);
  CHECK(l1.window == 1);
  CHECK(gt.window == 7);
  CHECK(l1.tau1 > gt.tau1);
  CHECK(gt.similarity_scale == doctest::Approx(std::pow(255.0 / 25.0, 2)));
  CHECK_THROWS(classical_config(0.0, 7));

  ClassicalConfig cfg = small_config(3);
  const ModelParams p = classical_params(cfg);
  CHECK(classical_step(p) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(spectral_norm(p.dictionary, 32, 32, 60) == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(p.tied);
  CHECK(p.layers[0].thresholds.tau1[0] == 0.0);
  CHECK(p.layers[0].thresholds.tau1[1] == cfg.tau1);
}

TEST_CASE("similarity kind names") {
  CHECK(to_string(SimilarityKind::Distance) == "distance");
  CHECK(similarity_from_string("dot") == SimilarityKind::Dot);
  CHECK_THROWS(similarity_from_string("cosine"));
}
