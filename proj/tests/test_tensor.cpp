#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <array>
#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "fedmvc/tensor.hpp"

using fedmvc::DenseTensor;
using fedmvc::TuckerFactors;

namespace {

DenseTensor iota_tensor(std::vector<std::size_t> shape) {
  DenseTensor t(std::move(shape));
  for (std::size_t l = 0; l < t.size(); ++l) t[l] = static_cast<double>(l + 1);
  return t;
}

DenseTensor random_tensor(std::vector<std::size_t> shape, std::mt19937_64& rng) {
  DenseTensor t(std::move(shape));
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (std::size_t l = 0; l < t.size(); ++l) t[l] = gauss(rng);
  return t;
}

// Unfolding by definition: row = mode index, columns enumerate the other
// indices with the earliest one varying fastest.
Eigen::MatrixXd matricize_oracle(const DenseTensor& t, std::size_t mode) {
  std::size_t cols = 1;
  for (std::size_t m = 0; m < t.order(); ++m)
    if (m != mode) cols *= t.extent(m);
  Eigen::MatrixXd out(t.extent(mode), cols);
  for (std::size_t l = 0; l < t.size(); ++l) {
    const auto idx = t.multi_index(l);
    std::size_t col = 0;
    for (std::size_t m = t.order(); m-- > 0;) {
      if (m == mode) continue;
      col = col * t.extent(m) + idx[m];
    }
    out(static_cast<Eigen::Index>(idx[mode]), static_cast<Eigen::Index>(col)) = t[l];
  }
  return out;
}

DenseTensor mode_product_oracle(const DenseTensor& t, const Eigen::MatrixXd& m,
                                std::size_t mode) {
  std::vector<std::size_t> shape = t.shape();
  shape[mode] = static_cast<std::size_t>(m.rows());
  DenseTensor out(shape);
  for (std::size_t l = 0; l < out.size(); ++l) {
    auto idx = out.multi_index(l);
    double sum = 0.0;
    for (std::size_t c = 0; c < t.extent(mode); ++c) {
      auto src = idx;
      src[mode] = c;
      sum += m(static_cast<Eigen::Index>(idx[mode]), static_cast<Eigen::Index>(c)) *
             t[t.linear_index(src)];
    }
    out[l] = sum;
  }
  return out;
}

Eigen::MatrixXd random_orthonormal(std::size_t rows, std::size_t cols, std::mt19937_64& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = gauss(rng);
  const Eigen::HouseholderQR<Eigen::MatrixXd> qr(m);
  return Eigen::MatrixXd(qr.householderQ()).leftCols(static_cast<Eigen::Index>(cols));
}

const std::vector<std::vector<std::size_t>> kSmallShapes = {
    {2, 2, 2}, {3, 2, 4}, {4, 4, 4}, {1, 3, 2}, {4, 1, 3}};

}  // namespace

TEST_CASE("linear index is row-major with the first index slowest") {
  const DenseTensor t({3, 4, 5});
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 4; ++j)
      for (std::size_t k = 0; k < 5; ++k)
        CHECK(t.linear_index({i, j, k}) == (i * 4 + j) * 5 + k);
  for (std::size_t l = 0; l < t.size(); ++l) CHECK(t.linear_index(t.multi_index(l)) == l);
}

TEST_CASE("tensor construction rejects bad shapes") {
  CHECK_THROWS_AS(DenseTensor({2, 0, 3}), std::invalid_argument);
  CHECK_THROWS_AS(DenseTensor({2, 2}, std::vector<double>(5)), std::invalid_argument);
}

TEST_CASE("matricize of the 2x2x2 iota tensor") {
  const DenseTensor t = iota_tensor({2, 2, 2});
  const Eigen::MatrixXd m0 = fedmvc::matricize(t, 0);
  Eigen::MatrixXd want(2, 4);
  want << 1, 3, 2, 4, 5, 7, 6, 8;
  CHECK((m0 - want).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("matricize matches the loop oracle on all modes and small shapes") {
  std::mt19937_64 rng(7);
  for (const auto& shape : kSmallShapes) {
    const DenseTensor t = random_tensor(shape, rng);
    for (std::size_t mode = 0; mode < 3; ++mode) {
      const Eigen::MatrixXd got = fedmvc::matricize(t, mode);
      const Eigen::MatrixXd want = matricize_oracle(t, mode);
      REQUIRE(got.rows() == want.rows());
      REQUIRE(got.cols() == want.cols());
      CHECK((got - want).cwiseAbs().maxCoeff() <= 1e-12);
    }
  }
}

TEST_CASE("fold inverts matricize") {
  std::mt19937_64 rng(11);
  for (const auto& shape : kSmallShapes) {
    const DenseTensor t = random_tensor(shape, rng);
    for (std::size_t mode = 0; mode < 3; ++mode) {
      const DenseTensor back = fedmvc::fold(fedmvc::matricize(t, mode), t.shape(), mode);
      REQUIRE(back.shape() == t.shape());
      for (std::size_t l = 0; l < t.size(); ++l) CHECK(back[l] == t[l]);
    }
  }
}

TEST_CASE("vectorize returns storage order") {
  const DenseTensor t = iota_tensor({2, 3, 2});
  const Eigen::VectorXd v = fedmvc::vectorize(t);
  REQUIRE(v.size() == 12);
  for (std::size_t l = 0; l < t.size(); ++l) CHECK(v[static_cast<Eigen::Index>(l)] == t[l]);
}

TEST_CASE("mode-n product matches the triple loop oracle") {
  std::mt19937_64 rng(13);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (const auto& shape : kSmallShapes) {
    const DenseTensor t = random_tensor(shape, rng);
    for (std::size_t mode = 0; mode < 3; ++mode) {
      Eigen::MatrixXd m(3, static_cast<Eigen::Index>(t.extent(mode)));
      for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = gauss(rng);
      const DenseTensor got = fedmvc::mode_n_product(t, m, mode);
      const DenseTensor want = mode_product_oracle(t, m, mode);
      REQUIRE(got.shape() == want.shape());
      for (std::size_t l = 0; l < got.size(); ++l)
        CHECK(got[l] == doctest::Approx(want[l]).epsilon(1e-12));
    }
  }
  const DenseTensor t = iota_tensor({2, 2, 2});
  CHECK_THROWS_AS(fedmvc::mode_n_product(t, Eigen::MatrixXd::Zero(2, 3), 0),
                  std::invalid_argument);
}

TEST_CASE("scalar product and Frobenius norm match loops") {
  std::mt19937_64 rng(17);
  const DenseTensor a = random_tensor({3, 2, 4}, rng);
  const DenseTensor b = random_tensor({3, 2, 4}, rng);
  double dot = 0.0;
  double sq = 0.0;
  for (std::size_t l = 0; l < a.size(); ++l) {
    dot += a[l] * b[l];
    sq += a[l] * a[l];
  }
  CHECK(fedmvc::scalar_product(a, b) == doctest::Approx(dot).epsilon(1e-12));
  CHECK(fedmvc::frobenius_norm(a) == doctest::Approx(std::sqrt(sq)).epsilon(1e-12));
  CHECK_THROWS_AS(fedmvc::scalar_product(a, random_tensor({2, 2, 2}, rng)),
                  std::invalid_argument);
}

TEST_CASE("full-rank HOSVD reconstructs the tensor") {
  std::mt19937_64 rng(19);
  for (const auto& shape : kSmallShapes) {
    const DenseTensor t = random_tensor(shape, rng);
    const TuckerFactors f = fedmvc::hosvd_init(t, {shape[0], shape[1], shape[2]});
    const DenseTensor back = fedmvc::tucker_reconstruct(f);
    double err = 0.0;
    for (std::size_t l = 0; l < t.size(); ++l) err += (back[l] - t[l]) * (back[l] - t[l]);
    CHECK(std::sqrt(err) / std::max(fedmvc::frobenius_norm(t), 1e-300) <= 1e-10);
  }
}

TEST_CASE("HOSVD recovers a planted rank-(2,2,2) tensor") {
  std::mt19937_64 rng(23);
  TuckerFactors planted;
  planted.core = random_tensor({2, 2, 2}, rng);
  planted.cluster = random_orthonormal(6, 2, rng);
  planted.feature = random_orthonormal(5, 2, rng);
  planted.view = random_orthonormal(4, 2, rng);
  const DenseTensor t = fedmvc::tucker_reconstruct(planted);

  const TuckerFactors f = fedmvc::hosvd_init(t, {2, 2, 2});
  const DenseTensor back = fedmvc::tucker_reconstruct(f);
  double err = 0.0;
  for (std::size_t l = 0; l < t.size(); ++l) err += (back[l] - t[l]) * (back[l] - t[l]);
  CHECK(std::sqrt(err) / fedmvc::frobenius_norm(t) <= 1e-8);

  CHECK(f.parameter_count() == 2 * 2 * 2 + 6 * 2 + 5 * 2 + 4 * 2);
}

TEST_CASE("HOSVD factors are orthonormal with deterministic sign") {
  std::mt19937_64 rng(29);
  const DenseTensor t = random_tensor({4, 3, 3}, rng);
  const TuckerFactors f = fedmvc::hosvd_init(t, {2, 2, 2});
  for (const Eigen::MatrixXd* m : {&f.cluster, &f.feature, &f.view}) {
    const Eigen::MatrixXd gram = m->transpose() * *m;
    CHECK((gram - Eigen::MatrixXd::Identity(gram.rows(), gram.cols())).cwiseAbs().maxCoeff() <=
          1e-10);
    for (Eigen::Index c = 0; c < m->cols(); ++c) {
      Eigen::Index at;
      m->col(c).cwiseAbs().maxCoeff(&at);
      CHECK((*m)(at, c) > 0.0);
    }
  }
}

TEST_CASE("tensor distance on a single slot reduces to the kernel scale") {
  DenseTensor x({1});
  DenseTensor a({1});
  x[0] = 2.0;
  a[0] = 1.0;
  const double want = std::sqrt(1.0 / (2.0 * std::numbers::pi));
  CHECK(fedmvc::tensor_distance(x, a, 1.0) == doctest::Approx(want).epsilon(1e-12));
  CHECK(fedmvc::tensor_distance(x, x, 1.0) == 0.0);
  CHECK_THROWS_AS(fedmvc::tensor_distance(x, a, 0.0), std::invalid_argument);
}

TEST_CASE("tensor distance is symmetric and nonnegative") {
  std::mt19937_64 rng(31);
  for (int rep = 0; rep < 10; ++rep) {
    const DenseTensor x = random_tensor({2, 3, 2}, rng);
    const DenseTensor a = random_tensor({2, 3, 2}, rng);
    fedmvc::Diagnostics diag;
    const double d1 = fedmvc::tensor_distance(x, a, 0.7, &diag);
    const double d2 = fedmvc::tensor_distance(a, x, 0.7, &diag);
    CHECK(d1 >= 0.0);
    CHECK(d1 == doctest::Approx(d2).epsilon(1e-12));
  }
}
