#include "eulbo/svgp.hpp"
#include "svgp_support.hpp"

#include <doctest.h>

using namespace eulbo;
using namespace eulbo::testing;

TEST_CASE("svgp prediction recovers the prior when q(u) equals p(u)") {
  std::mt19937_64 rng(3);
  for (int rep = 0; rep < 5; ++rep) {
    const auto theta = random_hypers(rng, 2);
    const auto model = SvgpModel<double>::from_prior(random_uniform(rng, 6, 2), theta, KernelFamily::matern52);
    for (int k = 0; k < 10; ++k) {
      const auto p = svgp_predict(model, Vec(random_uniform(rng, 2, 1)));
      CHECK(std::abs(p.mean) < 1e-12);
      CHECK(p.variance == doctest::Approx(theta.outputscale).epsilon(1e-8));
    }
  }
}

TEST_CASE("svgp mean at an inducing point equals its variational mean") {
  std::mt19937_64 rng(4);
  Mat Z(5, 2);
  Z << 0.1, 0.1, 0.9, 0.1, 0.5, 0.5, 0.1, 0.9, 0.9, 0.9;
  Z += random_uniform(rng, 5, 2, -0.05, 0.05);
  auto model = SvgpModel<double>::from_prior(Z, random_hypers(rng, 2), KernelFamily::rbf);
  model.state.mean = random_normal(rng, 5);
  for (Index i = 0; i < 5; ++i) {
    const auto p = svgp_predict(model, Vec(model.state.inducing_points.row(i).transpose()));
    CHECK(p.mean == doctest::Approx(model.state.mean(i)).epsilon(1e-6));
  }
}

TEST_CASE("svgp prediction matches the dense formula") {
  std::mt19937_64 rng(5);
  for (auto family : {KernelFamily::rbf, KernelFamily::matern52}) {
    for (int rep = 0; rep < 10; ++rep) {
      const Index d = rep % 2 ? 1 : 3;
      const auto model = random_model(rng, 3, d, family);
      const Mat X = random_uniform(rng, 7, d);
      Vec mean, var;
      dense_predict(model, X, mean, var);
      for (Index i = 0; i < X.rows(); ++i) {
        const auto p = svgp_predict(model, Vec(X.row(i).transpose()));
        CHECK(std::abs(p.mean - mean(i)) < 1e-10);
        CHECK(std::abs(p.variance - var(i)) < 1e-10);
      }
    }
  }
}

TEST_CASE("svgp predictive variance is nonnegative") {
  std::mt19937_64 rng(6);
  int negatives = 0;
  for (int rep = 0; rep < 10; ++rep) {
    auto model = random_model(rng, 8, 2);
    model.state.cov_factor *= 1e-3;
    const auto factor = factor_inducing(model);
    const auto p = predictive(model, factor, Mat(random_uniform(rng, 100, 2)), false);
    for (Index i = 0; i < 100; ++i) {
      const auto q = svgp_predict(model, factor, Vec(p.points.row(i).transpose()));
      negatives += q.variance < 0;
      CHECK(p.var(i) > -1e-10);
    }
  }
  CHECK(negatives == 0);
}

TEST_CASE("elbo single-point closed form") {
  SvgpModel<double> model;
  model.family = KernelFamily::rbf;
  model.hypers = Hyperparams<double>::isotropic(1, 1.0, 1.0, 0.1);
  model.state.inducing_points = Mat::Zero(1, 1);
  model.state.mean = Vec::Zero(1);
  model.state.cov_factor = Mat::Ones(1, 1);
  const Dataset<double> data{Mat::Zero(1, 1), Vec::Ones(1), Bounds<double>{Vec::Constant(1, -1), Vec::Ones(1)}};
  const double expected = -0.5 * std::log(2.0 * M_PI * 0.1) - 5.0 - 5.0;
  CHECK(expected == doctest::Approx(-9.76765).epsilon(1e-6));
  CHECK(std::abs(elbo(model, data, 1) - expected) < 1e-6);
}

TEST_CASE("elbo with q equal to the prior is the expected log-likelihood") {
  std::mt19937_64 rng(7);
  const auto data = random_dataset(rng, 12, 2);
  const auto theta = random_hypers(rng, 2);
  const auto model = SvgpModel<double>::from_prior(random_uniform(rng, 5, 2), theta, KernelFamily::matern52);
  // Predictive is the prior: mean 0, variance outputscale.
  double ell = 0.0;
  for (Index i = 0; i < data.size(); ++i) {
    ell += -0.5 * std::log(2.0 * M_PI * theta.noise_variance) -
           (data.targets(i) * data.targets(i) + theta.outputscale) / (2.0 * theta.noise_variance);
  }
  CHECK(elbo(model, data, data.size()) == doctest::Approx(ell).epsilon(1e-9));
}

TEST_CASE("elbo matches the dense oracle") {
  std::mt19937_64 rng(8);
  for (int rep = 0; rep < 20; ++rep) {
    const Index d = 1 + rep % 3;
    const auto model = random_model(rng, 4 + rep % 4, d, rep % 2 ? KernelFamily::rbf : KernelFamily::matern52);
    const auto data = random_dataset(rng, 15, d);
    const double got = elbo(model, data, 40);
    CHECK(got == doctest::Approx(dense_elbo(model, data, 40)).epsilon(1e-9));
  }
}

TEST_CASE("elbo never exceeds the log marginal likelihood") {
  std::mt19937_64 rng(9);
  double worst = std::numeric_limits<double>::infinity();
  for (int rep = 0; rep < 100; ++rep) {
    const Index d = 1 + rep % 3;
    const auto data = random_dataset(rng, 4 + rep % 9, d);
    const auto model = random_model(rng, 1 + rep % 6, d, rep % 2 ? KernelFamily::rbf : KernelFamily::matern52);
    const double gap = log_marginal_likelihood(data, model.hypers, model.family) - elbo(model, data, data.size());
    worst = std::min(worst, gap);
  }
  CHECK(worst >= -1e-8);
}

TEST_CASE("elbo gradients match central differences") {
  std::mt19937_64 rng(10);
  for (int rep = 0; rep < 20; ++rep) {
    const Index d = 1 + rep % 3;
    const auto family = rep % 2 ? KernelFamily::rbf : KernelFamily::matern52;
    const auto model = random_model(rng, 3 + rep % 4, d, family);
    const auto data = random_dataset(rng, 10, d);
    const Index n_total = 25;
    const auto res = elbo_gradients(model, data, n_total);
    CHECK(res.value == doctest::Approx(elbo(model, data, n_total)).epsilon(1e-12));
    const Vec fd = central_difference([&](const Vec& v) { return elbo(unpack(model, v), data, n_total); }, pack(model));
    const Vec an = pack_gradient(res.grad);
    CHECK(relative_error(an, fd) < 1e-4);
    // Strict upper triangle of the factor is not a parameter.
    CHECK(Mat(res.grad.cov_factor.triangularView<Eigen::StrictlyUpper>()).norm() == 0.0);
  }
}

TEST_CASE("elbo directional derivative along one inducing coordinate") {
  std::mt19937_64 rng(11);
  for (int rep = 0; rep < 10; ++rep) {
    const auto model = random_model(rng, 5, 2);
    const auto data = random_dataset(rng, 12, 2);
    const Index i = rep % 5, k = rep % 2;
    const double h = 1e-5;
    auto plus = model, minus = model;
    plus.state.inducing_points(i, k) += h;
    minus.state.inducing_points(i, k) -= h;
    const double fd = (elbo(plus, data, 12) - elbo(minus, data, 12)) / (2 * h);
    const double an = elbo_gradients(model, data, 12).grad.inducing(i, k);
    CHECK(std::abs(an - fd) <= 1e-4 * std::max(std::abs(fd), 1e-3));
  }
}

TEST_CASE("inducing gradient is antisymmetric under a reflection symmetry") {
  std::mt19937_64 rng(12);
  // Pairs (x, y) and (Rx, y) with R reflecting the first coordinate about 0.5.
  const Index half = 6, mh = 3;
  Mat X(2 * half, 2), Z(2 * mh, 2);
  Vec y(2 * half);
  const Mat Xh = random_uniform(rng, half, 2), Zh = random_uniform(rng, mh, 2);
  const Vec yh = random_normal(rng, half);
  for (Index i = 0; i < half; ++i) {
    X.row(i) = Xh.row(i);
    X.row(half + i) << 1.0 - Xh(i, 0), Xh(i, 1);
    y(i) = y(half + i) = yh(i);
  }
  for (Index i = 0; i < mh; ++i) {
    Z.row(i) = Zh.row(i);
    Z.row(mh + i) << 1.0 - Zh(i, 0), Zh(i, 1);
  }
  const Dataset<double> data{X, y, Bounds<double>::unit(2)};
  // Permutation-invariant q(u): m and S commute with swapping the two halves.
  Mat P = Mat::Zero(2 * mh, 2 * mh);
  P.topRightCorner(mh, mh).setIdentity();
  P.bottomLeftCorner(mh, mh).setIdentity();
  const Vec mh_vec = random_normal(rng, mh);
  Vec mvec(2 * mh);
  mvec << mh_vec, mh_vec;
  Mat B = random_uniform(rng, 2 * mh, 2 * mh, -0.5, 0.5);
  Mat S = B * B.transpose() + 0.2 * Mat::Identity(2 * mh, 2 * mh);
  S = 0.5 * (S + P * S * P);
  SvgpModel<double> model;
  model.hypers = random_hypers(rng, 2);
  model.family = KernelFamily::matern52;
  model.state.inducing_points = Z;
  model.state.mean = mvec;
  model.state.cov_factor = S.llt().matrixL();
  const auto g = elbo_gradients(model, data, data.size()).grad;
  for (Index i = 0; i < mh; ++i) {
    CHECK(g.inducing(i, 0) == doctest::Approx(-g.inducing(mh + i, 0)).epsilon(1e-8));
    CHECK(g.inducing(i, 1) == doctest::Approx(g.inducing(mh + i, 1)).epsilon(1e-8));
  }
}

TEST_CASE("Collapsed-bound optimal state is stationary and recovers the exact posterior") {
  std::mt19937_64 rng(13);
  for (int rep = 0; rep < 6; ++rep) {
    const Index d = 1 + rep % 2;
    const auto data = random_dataset(rng, 10, d);
    auto theta = random_hypers(rng, d);
    theta.lengthscales *= 0.5;
    auto model = SvgpModel<double>::from_prior(data.inputs, theta, KernelFamily::matern52);
    collapsed_optimum(model, data);
    const auto g = elbo_gradients(model, data, data.size()).grad;
    const double norm = std::sqrt(g.mean.squaredNorm() + g.cov_factor.squaredNorm());
    CHECK(norm < 1e-4);
    ExactGpPosterior<double> exact(data, theta, KernelFamily::matern52);
    for (int k = 0; k < 50; ++k) {
      const Vec x = random_uniform(rng, d, 1);
      const auto a = svgp_predict(model, x);
      const auto b = exact.predict(x);
      CHECK(std::abs(a.mean - b.mean) < 1e-3);
      CHECK(std::abs(a.variance - b.variance) < 1e-3);
    }
  }
}

TEST_CASE("minibatch elbo averages to the full-batch elbo") {
  std::mt19937_64 rng(14);
  const auto data = random_dataset(rng, 24, 2);
  const auto model = random_model(rng, 5, 2);
  std::vector<Index> perm(24);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  const double full = elbo(model, data, 24);
  double avg = 0.0;
  for (Index b = 0; b < 4; ++b) {
    const std::vector<Index> rows(perm.begin() + 6 * b, perm.begin() + 6 * (b + 1));
    avg += elbo(model, data.subset(rows), 24) / 4.0;
  }
  CHECK(std::abs(avg - full) < 1e-9);
  // Unequal batches: weight each by its share of the data.
  const std::vector<Index> a(perm.begin(), perm.begin() + 10), c(perm.begin() + 10, perm.end());
  const double weighted = elbo(model, data.subset(a), 24) * 10.0 / 24.0 + elbo(model, data.subset(c), 24) * 14.0 / 24.0;
  CHECK(std::abs(weighted - full) < 1e-9);
}

TEST_CASE("elbo argument and state validation") {
  std::mt19937_64 rng(15);
  auto model = random_model(rng, 3, 2);
  const auto data = random_dataset(rng, 5, 2);
  CHECK_THROWS_AS(elbo(model, data, 4), InvalidArgument);
  CHECK_THROWS_AS(elbo(model, data.subset({}), 5), InvalidArgument);
  CHECK_THROWS_AS(elbo(model, random_dataset(rng, 5, 3), 5), InvalidArgument);
  CHECK_NOTHROW(model.validate());
  auto upper = model;
  upper.state.cov_factor(0, 1) = 0.1;
  CHECK_THROWS_AS(upper.validate(), InvalidArgument);
  auto flat = model;
  flat.state.cov_factor(1, 1) = 0.0;
  CHECK_THROWS_AS(flat.validate(), InvalidArgument);
  auto outside = model;
  outside.state.inducing_points(0, 0) = 1.5;
  const auto box = Bounds<double>::unit(2);
  CHECK_THROWS_AS(outside.validate(&box), InvalidArgument);
}

TEST_CASE("model revision tracks parameter content") {
  std::mt19937_64 rng(16);
  const auto model = random_model(rng, 4, 2);
  auto copy = model;
  CHECK(copy.revision() == model.revision());
  copy.state.mean(2) += 1e-12;
  CHECK(copy.revision() != model.revision());
  copy = model;
  copy.hypers.noise_variance *= 1.0000001;
  CHECK(copy.revision() != model.revision());
  copy = model;
  copy.family = KernelFamily::rbf;
  CHECK(copy.revision() != model.revision());
}
