// Copyright 2026 The binauralforge Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "binauralforge/common.hpp"
#include "binauralforge/metrics.hpp"

using namespace bf;

TEST_CASE("psnr hand values and cap") {
  std::vector<double> x{0.0, 0.5, 1.0};
  std::vector<double> y{0.1, 0.4, 0.9};
  // MSE = 0.01, peak 1 -> 20 dB.
  CHECK(psnr(x, y, 1.0) == doctest::Approx(20.0).epsilon(1e-9));
  CHECK(psnr(x, x, 1.0) == kPsnrCapDb);
}

TEST_CASE("ssim is 1 for identical signals and below 1 otherwise") {
  std::vector<double> x, y;
  for (int i = 0; i < 256; ++i) {
    x.push_back(std::sin(0.1 * i));
    y.push_back(std::sin(0.1 * i) + 0.2 * std::cos(0.3 * i));
  }
  CHECK(ssim(x, x, 2.0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(ssim(x, y, 2.0) < 1.0);
  CHECK(ssim(x, y, 2.0) > 0.0);
}

TEST_CASE("gaussian_stats matches hand-computed mean and covariance") {
  std::vector<std::vector<double>> pts{{1.0, 2.0}, {3.0, 0.0}, {5.0, 4.0}};
  auto st = gaussian_stats(pts);
  CHECK(st.mean(0) == doctest::Approx(3.0));
  CHECK(st.mean(1) == doctest::Approx(2.0));
  // Unbiased: cov_xx = ((-2)^2 + 0 + 2^2)/2 = 4.
  CHECK(st.cov(0, 0) == doctest::Approx(4.0));
  CHECK(st.cov(1, 1) == doctest::Approx(4.0));
  CHECK(st.cov(0, 1) == doctest::Approx(2.0));
  CHECK(st.cov(1, 0) == doctest::Approx(2.0));
}

TEST_CASE("frechet distance closed forms") {
  GaussianStats a, b;
  a.mean = Eigen::VectorXd::Zero(3);
  a.cov = Eigen::MatrixXd::Identity(3, 3);
  b.mean = Eigen::VectorXd::Zero(3);
  b.cov = Eigen::MatrixXd::Identity(3, 3);
  CHECK(frechet_distance(a, b) == doctest::Approx(0.0));
  // Equal covariances: FD = ||mu_a - mu_b||^2.
  b.mean << 1.0, 2.0, 2.0;
  CHECK(frechet_distance(a, b) == doctest::Approx(9.0).epsilon(1e-9));
  // Diagonal covariances: FD = sum (sqrt(sa) - sqrt(sb))^2 for equal means.
  b.mean.setZero();
  b.cov = 4.0 * Eigen::MatrixXd::Identity(3, 3);
  CHECK(frechet_distance(a, b) == doctest::Approx(3.0).epsilon(1e-9));
  CHECK(frechet_distance(a, b) ==
        doctest::Approx(frechet_distance(b, a)).epsilon(1e-9));
}

TEST_CASE("kl divergence hand value and floor") {
  std::vector<std::vector<double>> p{{0.5, 0.5}};
  std::vector<std::vector<double>> q{{0.25, 0.75}};
  const double expect =
      0.5 * std::log(0.5 / 0.25) + 0.5 * std::log(0.5 / 0.75);
  CHECK(kl_divergence(p, q) == doctest::Approx(expect).epsilon(1e-12));
  CHECK(kl_divergence(p, p) == doctest::Approx(0.0));
  // A zero in q is floored rather than infinite.
  std::vector<std::vector<double>> qz{{1.0, 0.0}};
  CHECK(std::isfinite(kl_divergence(p, qz)));
}

TEST_CASE("inception score of K distinct one-hots is K") {
  const int K = 5;
  std::vector<std::vector<double>> probs;
  for (int i = 0; i < K; ++i) {
    std::vector<double> r(K, 0.0);
    r[i] = 1.0;
    probs.push_back(r);
  }
  CHECK(inception_score(probs) == doctest::Approx(double(K)).epsilon(1e-6));
  // Uniform predictions give IS = 1.
  std::vector<std::vector<double>> uni(4, std::vector<double>(K, 1.0 / K));
  CHECK(inception_score(uni) == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("accuracy and angular MAE") {
  CHECK(acc({1, 2, 3, 4}, {1, 2, 0, 4}) == doctest::Approx(0.75));
  CHECK(angular_mae({350.0}, {10.0}) == doctest::Approx(20.0));
  CHECK(angular_mae({0.0, 90.0}, {0.0, 270.0}) == doctest::Approx(90.0));
  CHECK_THROWS_AS(angular_mae({360.0}, {0.0}), RuntimeError);
}
