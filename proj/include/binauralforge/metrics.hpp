// Copyright 2026 The BinauralForge Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef BINAURALFORGE_METRICS_HPP
#define BINAURALFORGE_METRICS_HPP

#include <Eigen/Dense>
#include <cmath>
#include <vector>

#include "binauralforge/common.hpp"

namespace bf {

inline constexpr double kPsnrCapDb = 100.0;

inline double psnr(const std::vector<double>& x, const std::vector<double>& y,
                   double max_value) {
  check(x.size() == y.size() && !x.empty(), "psnr: shape mismatch");
  check(max_value > 0, "psnr: max_value must be positive");
  double mse = 0.0;
  for (size_t i = 0; i < x.size(); ++i) {
    const double d = x[i] - y[i];
    mse += d * d;
  }
  mse /= static_cast<double>(x.size());
  if (mse == 0.0) return kPsnrCapDb;
  return std::min(kPsnrCapDb,
                  10.0 * std::log10(max_value * max_value / mse));
}

// Global-statistics SSIM (single window spanning the whole signal).
inline double ssim(const std::vector<double>& x, const std::vector<double>& y,
                   double dynamic_range) {
  check(x.size() == y.size() && !x.empty(), "ssim: shape mismatch");
  check(dynamic_range > 0, "ssim: dynamic range must be positive");
  const double c1 = 0.01 * dynamic_range, c2 = 0.03 * dynamic_range;
  const double C1 = c1 * c1, C2 = c2 * c2;
  const double n = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double vx = 0, vy = 0, cov = 0;
  for (size_t i = 0; i < x.size(); ++i) {
    vx += (x[i] - mx) * (x[i] - mx);
    vy += (y[i] - my) * (y[i] - my);
    cov += (x[i] - mx) * (y[i] - my);
  }
  vx /= n;
  vy /= n;
  cov /= n;
  return ((2 * mx * my + C1) * (2 * cov + C2)) /
         ((mx * mx + my * my + C1) * (vx + vy + C2));
}

struct GaussianStats {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
};

inline GaussianStats gaussian_stats(
    const std::vector<std::vector<double>>& embeddings) {
  check(embeddings.size() >= 2, "gaussian_stats: need at least 2 vectors");
  const int n = static_cast<int>(embeddings.size());
  const int d = static_cast<int>(embeddings[0].size());
  Eigen::MatrixXd X(n, d);
  for (int i = 0; i < n; ++i) {
    check(static_cast<int>(embeddings[i].size()) == d,
          "gaussian_stats: ragged embeddings");
    for (int j = 0; j < d; ++j) X(i, j) = embeddings[i][j];
  }
  GaussianStats s;
  s.mean = X.colwise().mean();
  Eigen::MatrixXd C = X.rowwise() - s.mean.transpose();
  s.cov = (C.transpose() * C) / static_cast<double>(n - 1);
  s.cov = 0.5 * (s.cov + s.cov.transpose().eval());
  return s;
}

// Frechet distance between Gaussians; the matrix square root comes from an
// eigendecomposition of the symmetrized covariance product.
inline double frechet_distance(const GaussianStats& a,
                               const GaussianStats& b) {
  check(a.mean.size() == b.mean.size(), "frechet_distance: dim mismatch");
  const double dmu = (a.mean - b.mean).squaredNorm();
  // sqrt(Sa) * Sb * sqrt(Sa) is symmetric PSD with the same eigenvalues as
  // Sa * Sb; its trace of square roots is what the formula needs.
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ea(a.cov);
  Eigen::VectorXd va = ea.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  Eigen::MatrixXd sa =
      ea.eigenvectors() * va.asDiagonal() * ea.eigenvectors().transpose();
  Eigen::MatrixXd prod = sa * b.cov * sa;
  prod = 0.5 * (prod + prod.transpose().eval());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ep(prod);
  double tr_sqrt = 0.0;
  for (int i = 0; i < ep.eigenvalues().size(); ++i) {
    const double ev = ep.eigenvalues()(i);
    check(ev > -1e-6, "frechet_distance: covariance product not PSD");
    tr_sqrt += std::sqrt(std::max(ev, 0.0));
  }
  return dmu + a.cov.trace() + b.cov.trace() - 2.0 * tr_sqrt;
}

inline constexpr double kKlFloor = 1e-10;

// Mean over matched pairs of KL(real || generated), q floored.
inline double kl_divergence(
    const std::vector<std::vector<double>>& real_probs,
    const std::vector<std::vector<double>>& gen_probs) {
  check(real_probs.size() == gen_probs.size() && !real_probs.empty(),
        "kl_divergence: unpaired lengths");
  double acc = 0.0;
  for (size_t i = 0; i < real_probs.size(); ++i) {
    const auto& p = real_probs[i];
    const auto& q = gen_probs[i];
    check(p.size() == q.size(), "kl_divergence: distribution size mismatch");
    double kl = 0.0;
    for (size_t k = 0; k < p.size(); ++k)
      if (p[k] > 0.0)
        kl += p[k] * std::log(p[k] / std::max(q[k], kKlFloor));
    acc += kl;
  }
  return acc / static_cast<double>(real_probs.size());
}

inline double inception_score(
    const std::vector<std::vector<double>>& gen_probs) {
  check(!gen_probs.empty(), "inception_score: no distributions");
  const size_t K = gen_probs[0].size();
  std::vector<double> marginal(K, 0.0);
  for (const auto& p : gen_probs) {
    check(p.size() == K, "inception_score: ragged distributions");
    for (size_t k = 0; k < K; ++k) marginal[k] += p[k];
  }
  for (auto& m : marginal) m /= static_cast<double>(gen_probs.size());
  double acc = 0.0;
  for (const auto& p : gen_probs) {
    double kl = 0.0;
    for (size_t k = 0; k < K; ++k)
      if (p[k] > 0.0)
        kl += p[k] * std::log(p[k] / std::max(marginal[k], kKlFloor));
    acc += kl;
  }
  return std::exp(acc / static_cast<double>(gen_probs.size()));
}

inline double acc(const std::vector<int>& truth,
                  const std::vector<int>& pred) {
  check(truth.size() == pred.size() && !truth.empty(), "acc: bad lengths");
  int correct = 0;
  for (size_t i = 0; i < truth.size(); ++i)
    if (truth[i] == pred[i]) ++correct;
  return static_cast<double>(correct) / static_cast<double>(truth.size());
}

inline double angular_mae(const std::vector<double>& true_deg,
                          const std::vector<double>& pred_deg) {
  check(true_deg.size() == pred_deg.size() && !true_deg.empty(),
        "angular_mae: bad lengths");
  double acc_err = 0.0;
  for (size_t i = 0; i < true_deg.size(); ++i) {
    check(true_deg[i] >= 0 && true_deg[i] < 360 && pred_deg[i] >= 0 &&
              pred_deg[i] < 360,
          "angular_mae: angles must lie in [0, 360)");
    const double d = std::abs(pred_deg[i] - true_deg[i]);
    acc_err += std::min(d, 360.0 - d);
  }
  return acc_err / static_cast<double>(true_deg.size());
}

}  // namespace bf

#endif  // BINAURALFORGE_METRICS_HPP
