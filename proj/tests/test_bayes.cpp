#include <doctest.h>

#include "rits/bayes.hpp"

#include <Eigen/Dense>

#include <cmath>

using namespace rits;

namespace {

Matrix random_matrix(Rng& rng, int rows, int cols) {
  std::normal_distribution<double> n;
  Matrix m(rows, cols);
  for (int j = 0; j < cols; ++j)
    for (int i = 0; i < rows; ++i) m(i, j) = n(rng);
  return m;
}

}  // namespace

TEST_SUITE("bayes") {
  TEST_CASE("prior is standard normal") {
    const auto p = init_prior(3);
    CHECK(p.mean.isZero());
    CHECK(p.precision.isIdentity());
    CHECK_THROWS_AS(init_prior(0), ConfigError);
  }

  TEST_CASE("informative prior must be symmetric positive definite") {
    Matrix bad(2, 2);
    bad << 1, 2, 2, 1;
    CHECK_THROWS(init_prior(Vector::Zero(2), bad));
    Matrix asym(2, 2);
    asym << 2, 1, 0, 2;
    CHECK_THROWS(init_prior(Vector::Zero(2), asym));
  }

  TEST_CASE("single update in one dimension") {
    Vector x(1);
    x << 1.0;
    const auto post = update(init_prior(1), x, 2.0, 1.0);
    CHECK(post.precision(0, 0) == doctest::Approx(2.0));
    CHECK(post.mean[0] == doctest::Approx(1.0));
  }

  TEST_CASE("dimension mismatch is rejected") {
    Vector x(2);
    x << 1.0, 2.0;
    CHECK_THROWS_AS(update(init_prior(3), x, 1.0, 1.0), ValidationError);
  }

  TEST_CASE("sequential updates equal the closed-form batch posterior") {
    Rng rng(42);
    std::uniform_int_distribution<int> nd(1, 50), dd(1, 6);
    std::uniform_real_distribution<double> s2d(0.25, 4.0);
    for (int rep = 0; rep < 50; ++rep) {
      const int n = nd(rng), d = dd(rng);
      const double s2 = s2d(rng);
      const Matrix X = random_matrix(rng, n, d);
      const Vector y = random_matrix(rng, n, 1).col(0);
      GaussianPosterior post = init_prior(d);
      for (int i = 0; i < n; ++i) post = update(post, Vector(X.row(i).transpose()), y[i], s2);
      const Matrix prec = X.transpose() * X / s2 + Matrix::Identity(d, d);
      const Vector mean = prec.ldlt().solve(X.transpose() * y / s2);
      CHECK((post.precision - prec).cwiseAbs().maxCoeff() < 1e-8);
      CHECK((post.mean - mean).cwiseAbs().maxCoeff() < 1e-8);
    }
  }

  TEST_CASE("posterior draws have the right moments") {
    Matrix prec(2, 2);
    prec << 4.0, 1.0, 1.0, 2.0;
    Vector mean(2);
    mean << 1.0, -2.0;
    const auto post = init_prior(mean, prec);
    Rng rng(7);
    const Matrix draws = sample(post, 200000, rng);
    const Vector m = draws.rowwise().mean();
    const Matrix centered = draws.colwise() - m;
    const Matrix cov = centered * centered.transpose() / static_cast<double>(draws.cols() - 1);
    const Matrix target = prec.inverse();
    CHECK((m - mean).cwiseAbs().maxCoeff() < 0.01);
    CHECK((cov - target).cwiseAbs().maxCoeff() < 0.01);
  }

  TEST_CASE("sampling is deterministic in the stream") {
    Rng a(3), b(3);
    CHECK(sample(init_prior(4), 10, a) == sample(init_prior(4), 10, b));
  }

  TEST_CASE("bank absorbs into the allocated arm only") {
    auto bank = PosteriorBank::prior(3, 2, 1.0);
    ParticipantRecord r;
    r.covariates = Covariates::from_raw(std::vector<double>{0.5});
    r.arm = ArmId(2);
    r.efficacy = 1.0;
    r.safety = -1.0;
    bank.absorb(r);
    CHECK(bank.efficacy[0].mean.isZero());
    CHECK(bank.efficacy[2].mean.isZero());
    CHECK(bank.efficacy[1].mean[0] > 0.0);
    CHECK(bank.safety[1].mean[0] < 0.0);
    ParticipantRecord missing = r;
    missing.safety.reset();
    CHECK_THROWS_AS(bank.absorb(missing), ValidationError);
  }
}
