#include <doctest.h>

#include <cmath>

#include "xgft/rng.hpp"
#include "xgft/svd.hpp"

using namespace xgft;

namespace {
Tensor random_square(int d, Rng& rng) {
  Tensor t = Tensor::zeros({d, d});
  for (double& v : t.data) v = rng.uniform(-2, 2);
  return t;
}

double frob(const Tensor& t) {
  double s = 0;
  for (double v : t.data) s += v * v;
  return std::sqrt(s);
}
}  // namespace

TEST_CASE("svd: identity matrix has unit spectrum") {
  Tensor i4 = Tensor::zeros({4, 4});
  for (int i = 0; i < 4; ++i) i4.at(i, i) = 1.0;
  const SvdResult r = svd_decompose(i4);
  for (double s : r.sigma) CHECK(s == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(svd_reconstruction_error(r, i4) < 1e-12);
}

TEST_CASE("svd: diag(3,-2) gives sorted absolute spectrum") {
  Tensor t = Tensor::zeros({2, 2});
  t.at(0, 0) = 3.0;
  t.at(1, 1) = -2.0;
  const SvdResult r = svd_decompose(t);
  CHECK(r.sigma[0] == doctest::Approx(3.0).epsilon(1e-14));
  CHECK(r.sigma[1] == doctest::Approx(2.0).epsilon(1e-14));
  CHECK(svd_reconstruction_error(r, t) < 1e-13);
  CHECK(orthogonality_defect(r.u) < 1e-14);
  CHECK(orthogonality_defect(r.v) < 1e-14);
}

TEST_CASE("svd: invariants over random matrices at several sizes") {
  Rng rng(2024);
  for (int d : {2, 8, 64}) {
    const int reps = d == 64 ? 8 : 60;
    for (int rep = 0; rep < reps; ++rep) {
      const Tensor a = random_square(d, rng);
      const SvdResult r = svd_decompose(a);
      CHECK(orthogonality_defect(r.u) < 1e-10);
      CHECK(orthogonality_defect(r.v) < 1e-10);
      for (std::size_t i = 0; i + 1 < r.sigma.size(); ++i)
        CHECK(r.sigma[i] >= r.sigma[i + 1]);
      CHECK(r.sigma.back() >= 0.0);
      CHECK(svd_reconstruction_error(r, a) <= 1e-10 * std::max(1.0, frob(a)));
    }
  }
}

TEST_CASE("svd: rank-deficient and zero inputs stay orthogonal") {
  Tensor z = Tensor::zeros({5, 5});
  const SvdResult r = svd_decompose(z);
  CHECK(orthogonality_defect(r.u) < 1e-12);
  for (double s : r.sigma) CHECK(s == 0.0);

  Tensor rank1 = Tensor::zeros({4, 4});
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) rank1.at(i, j) = (i + 1.0) * (j + 1.0);
  const SvdResult r1 = svd_decompose(rank1);
  CHECK(orthogonality_defect(r1.u) < 1e-10);
  CHECK(svd_reconstruction_error(r1, rank1) < 1e-10 * frob(rank1));
  CHECK(r1.sigma[1] < 1e-10);
}

TEST_CASE("svd: deterministic sign convention") {
  Rng rng(5);
  const Tensor a = random_square(8, rng);
  const SvdResult r1 = svd_decompose(a);
  const SvdResult r2 = svd_decompose(a);
  for (std::size_t i = 0; i < r1.u.data.size(); ++i)
    CHECK(r1.u.data[i] == r2.u.data[i]);
  for (int k = 0; k < 8; ++k) {
    double best = 0;
    int arg = 0;
    for (int i = 0; i < 8; ++i)
      if (std::fabs(r1.u.at(i, k)) > best) {
        best = std::fabs(r1.u.at(i, k));
        arg = i;
      }
    CHECK(r1.u.at(arg, k) >= 0.0);
  }
}

TEST_CASE("svd: non-finite input rejected") {
  Tensor bad = Tensor::zeros({2, 2});
  bad.at(0, 0) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(svd_decompose(bad), Error);
}
