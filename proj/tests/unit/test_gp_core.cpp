#include "doctest.h"

#include "eulbo/exact_gp.hpp"
#include "test_support.hpp"

#include <numbers>

using namespace eulbo;
using namespace eulbo::testing;

TEST_CASE("kernel_eval closed forms") {
  const auto unit = Hyperparams<double>::isotropic(1, 1.0, 1.0, 0.1);
  Vec a(1), b(1);
  a << 0.0;
  b << 1.0;
  CHECK(kernel_eval(a, a, unit, KernelFamily::rbf) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(kernel_eval(a, b, unit, KernelFamily::rbf) == doctest::Approx(std::exp(-0.5)).epsilon(1e-14));
  // (1 + √5 + 5/3)·exp(−√5), evaluated independently.
  CHECK(kernel_eval(a, b, unit, KernelFamily::matern52) == doctest::Approx(0.5239941088318203).epsilon(1e-13));
  CHECK(kernel_eval(a, a, unit, KernelFamily::matern52) == doctest::Approx(1.0));
}

TEST_CASE("kernel_eval rejects dimension mismatch") {
  const auto t = Hyperparams<double>::isotropic(2, 1.0, 1.0, 0.1);
  Vec a = Vec::Zero(3), b = Vec::Zero(2);
  CHECK_THROWS_AS(kernel_eval(a, b, t, KernelFamily::rbf), InvalidArgument);
  Mat X = Mat::Zero(4, 3);
  CHECK_THROWS_AS(kernel_matrix(X, t, KernelFamily::rbf), InvalidArgument);
}

TEST_CASE("kernel_eval is symmetric and bounded by the outputscale") {
  std::mt19937_64 rng(7);
  for (int rep = 0; rep < 50; ++rep) {
    const auto t = random_hypers(rng, 3);
    const Vec a = random_uniform(rng, 3, 1), b = random_uniform(rng, 3, 1);
    for (auto fam : {KernelFamily::rbf, KernelFamily::matern52}) {
      const double kab = kernel_eval(a, b, t, fam);
      CHECK(kab == doctest::Approx(kernel_eval(b, a, t, fam)).epsilon(1e-15));
      CHECK(kab > 0.0);
      CHECK(kab <= t.outputscale);
    }
  }
}

TEST_CASE("kernel_matrix matches entrywise oracle") {
  std::mt19937_64 rng(11);
  const auto t = random_hypers(rng, 2);
  const Mat X = random_uniform(rng, 5, 2);
  const Mat Y = random_uniform(rng, 3, 2);
  for (auto fam : {KernelFamily::rbf, KernelFamily::matern52}) {
    CHECK((kernel_matrix(X, t, fam) - kernel_reference_matrix(X, X, t, fam)).cwiseAbs().maxCoeff() < 1e-14);
    CHECK((kernel_matrix(X, Y, t, fam) - kernel_reference_matrix(X, Y, t, fam)).cwiseAbs().maxCoeff() < 1e-14);
  }
  Mat one(1, 2);
  one << 0.3, 0.4;
  CHECK(kernel_matrix(one, t, KernelFamily::matern52)(0, 0) == doctest::Approx(t.outputscale));
  Mat twin(2, 1);
  twin << 0.5, 0.5;
  const auto unit = Hyperparams<double>::isotropic(1, 1.0, 1.0, 0.1);
  CHECK(kernel_matrix(twin, unit, KernelFamily::rbf).isApprox(Mat::Ones(2, 2)));
}

TEST_CASE("jittered cholesky escalates deterministically and reports its trace") {
  Mat twin = Mat::Ones(2, 2);
  const auto a = jittered_cholesky<double>(twin, 1.0, false);
  const auto b = jittered_cholesky<double>(twin, 1.0, false);
  CHECK(a.jitter == b.jitter);
  CHECK(a.jitter >= 1e-8);
  CHECK(a.jitter <= 1e-4);

  Mat bad = Mat::Identity(2, 2);
  bad(1, 1) = -1.0;
  try {
    (void)jittered_cholesky<double>(bad, 1.0, true);
    FAIL("expected NumericalError");
  } catch (const NumericalError& e) {
    CHECK(e.jitter_trace().size() == 6);
    CHECK(e.jitter_trace().front() == 0.0);
    CHECK(e.jitter_trace().back() == doctest::Approx(1e-4));
  }
}

TEST_CASE("cholesky_backward matches finite differences") {
  std::mt19937_64 rng(5);
  const Mat B = random_uniform(rng, 4, 4);
  const Mat A = B * B.transpose() + Mat::Identity(4, 4);
  const Mat W = random_uniform(rng, 4, 4);  // loss = sum(W ∘ chol(A)) on the lower triangle
  auto loss = [&](const Mat& M) {
    const Mat L = Eigen::LLT<Mat>(M).matrixL();
    return (W.array() * L.array()).sum();
  };
  const Mat L = Eigen::LLT<Mat>(A).matrixL();
  const Mat G = cholesky_backward<double>(L, W.triangularView<Eigen::Lower>().toDenseMatrix());
  // Symmetric perturbation of (i, j) and (j, i) together.
  for (Index i = 0; i < 4; ++i) {
    for (Index j = 0; j <= i; ++j) {
      Mat E = Mat::Zero(4, 4);
      E(i, j) = E(j, i) = 1.0;
      const double h = 1e-6;
      const double fd = (loss(A + h * E) - loss(A - h * E)) / (2 * h);
      const double an = (i == j) ? G(i, i) : 2.0 * G(i, j);
      CHECK(an == doctest::Approx(fd).epsilon(1e-6));
    }
  }
}

TEST_CASE("exact posterior: prior, interpolation, dense oracle") {
  const auto t = Hyperparams<double>::isotropic(1, 0.3, 1.7, 1e-10);
  Dataset<double> empty{Mat(0, 1), Vec(0), Bounds<double>::unit(1)};
  Vec xs(1);
  xs << 0.4;
  auto prior = exact_gp_posterior(empty, t, xs);
  CHECK(prior.mean == 0.0);
  CHECK(prior.variance == doctest::Approx(1.7));

  Dataset<double> single{Mat::Constant(1, 1, 0.4), Vec::Constant(1, 2.5), Bounds<double>::unit(1)};
  auto post = exact_gp_posterior(single, t, xs);
  CHECK(post.mean == doctest::Approx(2.5).epsilon(1e-8));
  CHECK(post.variance < 1e-8);

  // 1-D, 3 points: μ = k*ᵀ(K + σ²I)⁻¹y via a pivoted LU inverse.
  auto t3 = Hyperparams<double>::isotropic(1, 0.25, 1.3, 0.05);
  Dataset<double> d3{Mat(3, 1), Vec(3), Bounds<double>::unit(1)};
  d3.inputs << 0.1, 0.5, 0.8;
  d3.targets << -0.3, 1.2, 0.4;
  for (auto fam : {KernelFamily::rbf, KernelFamily::matern52}) {
    Mat K = kernel_reference_matrix(d3.inputs, d3.inputs, t3, fam) + 0.05 * Mat::Identity(3, 3);
    const Mat Kinv = K.fullPivLu().inverse();
    for (double x : {0.0, 0.33, 0.5, 0.97}) {
      Vec q(1);
      q << x;
      const Vec ks = kernel_reference_matrix(d3.inputs, q.transpose(), t3, fam);
      const double mu = ks.dot(Kinv * d3.targets);
      const double var = t3.outputscale - ks.dot(Kinv * ks);
      const auto p = exact_gp_posterior(d3, t3, q, fam);
      CHECK(std::abs(p.mean - mu) < 1e-10);
      CHECK(std::abs(p.variance - var) < 1e-10);
    }
  }
}

TEST_CASE("exact posterior variance is nonincreasing on nested datasets") {
  std::mt19937_64 rng(3);
  const auto full = random_dataset(rng, 12, 2);
  const auto t = random_hypers(rng, 2);
  const Mat queries = random_uniform(rng, 10, 2);
  for (Index q = 0; q < queries.rows(); ++q) {
    double prev = std::numeric_limits<double>::infinity();
    for (Index n = 0; n <= full.size(); ++n) {
      std::vector<Index> rows(static_cast<std::size_t>(n));
      std::iota(rows.begin(), rows.end(), Index(0));
      const auto v = exact_gp_posterior(full.subset(rows), t, Vec(queries.row(q).transpose())).variance;
      CHECK(v <= prev + 1e-8);
      CHECK(v <= t.outputscale + 1e-12);
      prev = v;
    }
  }
}

TEST_CASE("exact posterior input gradients match finite differences") {
  std::mt19937_64 rng(21);
  const auto data = random_dataset(rng, 8, 2);
  const auto t = random_hypers(rng, 2);
  ExactGpPosterior<double> gp(data, t, KernelFamily::matern52);
  const Vec x = random_uniform(rng, 2, 1);
  Vec dm, dv;
  gp.predict(x, &dm, &dv);
  const Vec fdm = central_difference([&](const Vec& z) { return gp.predict(z).mean; }, x);
  const Vec fdv = central_difference([&](const Vec& z) { return gp.predict(z).variance; }, x);
  CHECK(relative_error(dm, fdm) < 1e-6);
  CHECK(relative_error(dv, fdv) < 1e-6);
}

TEST_CASE("log marginal likelihood closed forms and dense oracle") {
  const auto t = Hyperparams<double>::isotropic(1, 1.0, 1.0, 1.0);
  Dataset<double> d1{Mat::Constant(1, 1, 0.5), Vec::Zero(1), Bounds<double>::unit(1)};
  CHECK(log_marginal_likelihood(d1, t) == doctest::Approx(-0.5 * std::log(4 * std::numbers::pi)).epsilon(1e-14));
  d1.targets(0) = 2.0;
  CHECK(log_marginal_likelihood(d1, t) == doctest::Approx(-0.5 * std::log(4 * std::numbers::pi) - 1.0).epsilon(1e-14));

  std::mt19937_64 rng(9);
  const auto d5 = random_dataset(rng, 5, 2);
  const auto t5 = random_hypers(rng, 2);
  const Mat K = kernel_reference_matrix(d5.inputs, d5.inputs, t5, KernelFamily::matern52) +
                t5.noise_variance * Mat::Identity(5, 5);
  const auto lu = K.partialPivLu();
  const double oracle = -0.5 * d5.targets.dot(lu.solve(d5.targets)) - 0.5 * std::log(lu.determinant()) -
                        2.5 * std::log(2 * std::numbers::pi);
  CHECK(std::abs(log_marginal_likelihood(d5, t5) - oracle) < 1e-9);
}

TEST_CASE("log marginal likelihood gradient matches finite differences") {
  std::mt19937_64 rng(2024);
  for (int rep = 0; rep < 20; ++rep) {
    const Index d = 1 + rep % 3;
    const auto data = random_dataset(rng, 6 + rep % 5, d);
    const auto t = random_hypers(rng, d);
    const auto fam = rep % 2 ? KernelFamily::rbf : KernelFamily::matern52;
    const auto res = log_marginal_likelihood_with_gradient(data, t, fam);
    const Vec fd = central_difference(
        [&](const Vec& z) { return log_marginal_likelihood(data, Hyperparams<double>::from_log(z), fam); }, t.to_log());
    CHECK(relative_error(res.gradient.to_vector(), fd) < 1e-4);
  }
}

TEST_CASE("fit_exact_hyperparams recovers a generating lengthscale") {
  std::mt19937_64 rng(42);
  const Index n = 200;
  const auto truth = Hyperparams<double>::isotropic(1, 0.2, 1.0, 0.01);
  Dataset<double> data{random_uniform(rng, n, 1), Vec(n), Bounds<double>::unit(1)};
  Mat K = kernel_reference_matrix(data.inputs, data.inputs, truth, KernelFamily::matern52) +
          truth.noise_variance * Mat::Identity(n, n);
  const Mat L = Eigen::LLT<Mat>(K).matrixL();
  data.targets = L * random_normal(rng, n);

  const auto init = Hyperparams<double>::isotropic(1, 0.693, 0.693, 0.693);
  const auto fit = fit_exact_hyperparams(data, init);
  CHECK(std::abs(fit.lengthscales(0) - 0.2) / 0.2 < 0.25);
  CHECK(log_marginal_likelihood(data, fit) >= log_marginal_likelihood(data, init));

  // A converged fit is a fixed point.
  const auto refit = fit_exact_hyperparams(data, fit);
  CHECK(std::abs(log_marginal_likelihood(data, refit) - log_marginal_likelihood(data, fit)) < 1e-6);
}

TEST_CASE("fit_exact_hyperparams on constant targets drives the noise down") {
  std::mt19937_64 rng(4);
  Dataset<double> data{random_uniform(rng, 10, 2), Vec::Constant(10, 0.7), Bounds<double>::unit(2)};
  const auto init = Hyperparams<double>::isotropic(2, 0.5, 1.0, 0.5);
  const auto fit = fit_exact_hyperparams(data, init);
  CHECK(fit.noise_variance < init.noise_variance);
  CHECK(log_marginal_likelihood(data, fit) > log_marginal_likelihood(data, init));
}

TEST_CASE("dataset validation") {
  Dataset<double> d{Mat::Constant(2, 1, 1.5), Vec::Zero(2), Bounds<double>::unit(1)};
  CHECK_THROWS_AS(d.validate(), InvalidArgument);
  d.inputs.setConstant(0.5);
  d.targets(1) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(d.validate(), InvalidArgument);
  Hyperparams<double> bad = Hyperparams<double>::isotropic(1, -1.0, 1.0, 1.0);
  CHECK_THROWS_AS(bad.validate(), InvalidArgument);
}
