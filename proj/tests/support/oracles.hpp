#pragma once

// Independent reference computations used by unit and acceptance tests. None
// of these call into the library's numerical code.

#include <cmath>
#include <random>
#include <utility>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <Eigen/LU>

namespace oracle {

inline double gauss_density(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI); }

/// Standard normal CDF by composite Gauss-Legendre integration of the density
/// over [0, |z|] (16 nodes per unit-width panel).
inline double normal_cdf_by_integration(double z) {
  static const double x[8] = {0.0950125098376374, 0.2816035507792589, 0.4580167776572274,
                              0.6178762444026438, 0.7554044083550030, 0.8656312023878318,
                              0.9445750230732326, 0.9894009349916499};
  static const double w[8] = {0.1894506104550685, 0.1826034150449236, 0.1691565193950025,
                              0.1495959888165767, 0.1246289712555339, 0.0951585116824928,
                              0.0622535239386479, 0.0271524594117541};
  const double a = std::abs(z);
  const int panels = std::max(1, static_cast<int>(std::ceil(a / 0.25)));
  const double h = a / panels;
  double s = 0.0;
  for (int p = 0; p < panels; ++p) {
    const double mid = (p + 0.5) * h, half = 0.5 * h;
    for (int k = 0; k < 8; ++k)
      s += w[k] * half * (gauss_density(mid - half * x[k]) + gauss_density(mid + half * x[k]));
  }
  return z >= 0 ? 0.5 + s : 0.5 - s;
}

struct Moments {
  Eigen::VectorXd mean;
  Eigen::VectorXd sd;
};

/// rows: (winner, loser) index pairs; likelihood Phi((f_w - f_l) / (sqrt(2) noise)).
using Rows = std::vector<std::pair<int, int>>;

/// Self-normalized importance sampling with the GP prior as proposal.
inline Moments posterior_by_importance(const Eigen::MatrixXd& k, const Rows& rows, double noise,
                                       int draws, unsigned seed) {
  const Eigen::Index n = k.rows();
  Eigen::LLT<Eigen::MatrixXd> llt(k);
  const Eigen::MatrixXd l = llt.matrixL();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  const double s = std::sqrt(2.0) * noise;
  Eigen::VectorXd sw = Eigen::VectorXd::Zero(n), sw2 = Eigen::VectorXd::Zero(n), z(n);
  double wsum = 0.0;
  for (int t = 0; t < draws; ++t) {
    for (Eigen::Index i = 0; i < n; ++i) z[i] = nd(rng);
    const Eigen::VectorXd f = l * z;
    double wt = 1.0;
    for (const auto& [a, b] : rows) wt *= 0.5 * std::erfc(-(f[a] - f[b]) / s / std::sqrt(2.0));
    wsum += wt;
    sw += wt * f;
    sw2 += wt * f.cwiseAbs2();
  }
  Moments m;
  m.mean = sw / wsum;
  m.sd = (sw2 / wsum - m.mean.cwiseAbs2()).cwiseMax(0.0).cwiseSqrt();
  return m;
}

/// Exact-in-the-limit posterior: the likelihood only sees g = A f, so integrate
/// the 3-D (or lower) posterior of g on a tensor grid in whitened coordinates
/// and lift the moments back to f through the Gaussian conditional f | g.
inline Moments posterior_by_quadrature(const Eigen::MatrixXd& k, const Rows& rows, double noise,
                                       int per_axis = 121, double span = 6.0) {
  const Eigen::Index n = k.rows();
  const auto m = static_cast<Eigen::Index>(rows.size());
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(m, n);
  for (Eigen::Index i = 0; i < m; ++i) {
    a(i, rows[static_cast<std::size_t>(i)].first) += 1.0;
    a(i, rows[static_cast<std::size_t>(i)].second) -= 1.0;
  }
  const Eigen::MatrixXd c = a * k * a.transpose();
  const Eigen::MatrixXd lc = Eigen::LLT<Eigen::MatrixXd>(c).matrixL();
  const double s = std::sqrt(2.0) * noise;
  const double h = 2.0 * span / (per_axis - 1);

  Eigen::VectorXd eg = Eigen::VectorXd::Zero(m);
  Eigen::MatrixXd egg = Eigen::MatrixXd::Zero(m, m);
  double z = 0.0;
  std::vector<int> idx(static_cast<std::size_t>(m), 0);
  Eigen::VectorXd u(m);
  while (true) {
    double wt = 1.0;
    for (Eigen::Index i = 0; i < m; ++i) {
      u[i] = -span + h * idx[static_cast<std::size_t>(i)];
      wt *= gauss_density(u[i]);
    }
    const Eigen::VectorXd g = lc * u;
    for (Eigen::Index i = 0; i < m; ++i) wt *= 0.5 * std::erfc(-g[i] / s / std::sqrt(2.0));
    z += wt;
    eg += wt * g;
    egg += wt * g * g.transpose();
    std::size_t d = 0;
    while (d < idx.size() && ++idx[d] == per_axis) idx[d++] = 0;
    if (d == idx.size()) break;
  }
  eg /= z;
  const Eigen::MatrixXd cov_g = egg / z - eg * eg.transpose();

  const Eigen::MatrixXd lift = k * a.transpose() * c.inverse();  // E[f | g] = lift g
  Moments out;
  out.mean = lift * eg;
  const Eigen::MatrixXd cov_f = k - lift * a * k + lift * cov_g * lift.transpose();
  out.sd = cov_f.diagonal().cwiseMax(0.0).cwiseSqrt();
  return out;
}

}  // namespace oracle
