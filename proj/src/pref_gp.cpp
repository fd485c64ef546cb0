#include "pcpbo/pref_gp.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <fmt/core.h>

namespace pcpbo {

double kernel(const WeightVector& a, const WeightVector& b, const GpHyperparams& hp) {
  if (a.size() != b.size()) throw std::invalid_argument("kernel: dimension mismatch");
  double r2 = 0.0;
  for (std::size_t d = 0; d < a.size(); ++d) {
    const double u = (a[d] - b[d]) / hp.length_scale(d);
    r2 += u * u;
  }
  return hp.signal_variance * std::exp(-0.5 * r2);
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

double normal_pdf(double z) { return std::exp(-0.5 * z * z) / std::sqrt(2.0 * kPi); }

double pref_likelihood(double f0, double f1, double sigma) {
  if (!(sigma > 0.0)) throw std::invalid_argument("pref_likelihood: sigma must be positive");
  return normal_cdf((f1 - f0) / (std::sqrt(2.0) * sigma));
}

std::string to_string(Provenance p) { return p == Provenance::direct ? "direct" : "synthesized"; }

Provenance provenance_from_string(const std::string& s) {
  if (s == "direct") return Provenance::direct;
  if (s == "synthesized") return Provenance::synthesized;
  throw std::invalid_argument("unknown provenance '" + s + "'");
}

void ComparisonDataset::add(const Comparison& c) {
  if (c.y != 0 && c.y != 1) throw std::invalid_argument("comparison answer must be 0 or 1");
  records_.push_back(c);
}

void ComparisonDataset::check(std::size_t grid_size) const {
  for (const auto& c : records_)
    if (c.i0 >= grid_size || c.i1 >= grid_size)
      throw std::out_of_range(fmt::format("comparison ({}, {}) outside grid of {}", c.i0, c.i1, grid_size));
}

void ComparisonDataset::write(std::ostream& os) const {
  for (const auto& c : records_)
    os << c.i0 << ' ' << c.i1 << ' ' << c.y << ' ' << to_string(c.provenance) << ' ' << c.timestamp
       << '\n';
}

ComparisonDataset ComparisonDataset::read(std::istream& is) {
  ComparisonDataset d;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    Comparison c;
    std::string prov;
    if (!(ls >> c.i0 >> c.i1 >> c.y >> prov >> c.timestamp))
      throw std::invalid_argument("malformed dataset line: " + line);
    c.provenance = provenance_from_string(prov);
    d.add(c);
  }
  return d;
}

// --- covariance models -------------------------------------------------------

namespace {

Eigen::VectorXd standard_normal(Rng& rng, Eigen::Index n) {
  std::normal_distribution<double> nd(0.0, 1.0);
  Eigen::VectorXd z(n);
  for (Eigen::Index i = 0; i < n; ++i) z[i] = nd(rng);
  return z;
}

}  // namespace

DenseCovariance::DenseCovariance(Eigen::MatrixXd cov) : cov_(std::move(cov)) {
  if (cov_.rows() != cov_.cols()) throw NumericalError("covariance must be square");
  if (!cov_.allFinite()) throw NumericalError("covariance has non-finite entries");
  if ((cov_ - cov_.transpose()).cwiseAbs().maxCoeff() > 1e-10)
    throw NumericalError("covariance is not symmetric");
  if (cov_.rows() == 0) return;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov_);
  if (es.info() != Eigen::Success) throw NumericalError("covariance eigendecomposition failed");
  if (es.eigenvalues().minCoeff() < -1e-8) throw NumericalError("covariance is not PSD");
  root_ = es.eigenvectors() * es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
}

Eigen::VectorXd DenseCovariance::draw(Rng& rng) const {
  const Eigen::VectorXd z = standard_normal(rng, cov_.rows());
  if (cov_.rows() == 0) return z;
  return root_ * z;
}

namespace {

/// SE prior on a full tensor grid: K = sf2 * (K_1 x ... x K_n) + jitter I.
class KroneckerPrior final : public CovarianceModel {
public:
  KroneckerPrior(const WeightGrid& grid, const GpHyperparams& hp)
      : dims_(grid.dims()), p_(grid.points_per_dim()), n_(grid.size()), hp_(hp) {
    hp.validate();
    for (int d = 0; d < dims_; ++d) {
      Eigen::MatrixXd k(p_, p_);
      for (int i = 0; i < p_; ++i)
        for (int j = 0; j < p_; ++j) {
          const double u = (grid_value(i, p_) - grid_value(j, p_)) / hp.length_scale(static_cast<std::size_t>(d));
          k(i, j) = std::exp(-0.5 * u * u);
        }
      factors_.push_back(k);
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(k);
      if (es.info() != Eigen::Success) throw NumericalError("prior eigendecomposition failed");
      vecs_.push_back(es.eigenvectors());
      vals_.push_back(es.eigenvalues().cwiseMax(0.0));
    }
    root_.resize(static_cast<Eigen::Index>(n_));
    for (std::size_t i = 0; i < n_; ++i) {
      double lam = hp.signal_variance;
      std::size_t rem = i;
      for (int d = dims_ - 1; d >= 0; --d) {
        lam *= vals_[static_cast<std::size_t>(d)][static_cast<Eigen::Index>(rem % static_cast<std::size_t>(p_))];
        rem /= static_cast<std::size_t>(p_);
      }
      root_[static_cast<Eigen::Index>(i)] = std::sqrt(lam + hp.jitter);
    }
  }

  std::size_t size() const override { return n_; }

  Eigen::VectorXd diagonal() const override {
    return Eigen::VectorXd::Constant(static_cast<Eigen::Index>(n_), hp_.signal_variance + hp_.jitter);
  }

  Eigen::VectorXd column(std::size_t j) const {
    Eigen::VectorXd c(static_cast<Eigen::Index>(n_));
    const auto mj = multi(j);
    for (std::size_t i = 0; i < n_; ++i) {
      std::size_t rem = i;
      double v = hp_.signal_variance;
      for (int d = dims_ - 1; d >= 0; --d) {
        const auto id = static_cast<Eigen::Index>(rem % static_cast<std::size_t>(p_));
        v *= factors_[static_cast<std::size_t>(d)](id, mj[static_cast<std::size_t>(d)]);
        rem /= static_cast<std::size_t>(p_);
      }
      c[static_cast<Eigen::Index>(i)] = v + (i == j ? hp_.jitter : 0.0);
    }
    return c;
  }

  Eigen::MatrixXd dense() const override {
    Eigen::MatrixXd k(static_cast<Eigen::Index>(n_), static_cast<Eigen::Index>(n_));
    for (std::size_t j = 0; j < n_; ++j) k.col(static_cast<Eigen::Index>(j)) = column(j);
    return k;
  }

  Eigen::VectorXd draw(Rng& rng) const override {
    Eigen::VectorXd x = root_.cwiseProduct(standard_normal(rng, static_cast<Eigen::Index>(n_)));
    // apply Q_1 x ... x Q_n one mode at a time (row-major: last dim fastest)
    std::size_t stride = n_;
    Eigen::VectorXd fiber(p_), out;
    for (int d = 0; d < dims_; ++d) {
      stride /= static_cast<std::size_t>(p_);
      const std::size_t block = stride * static_cast<std::size_t>(p_);
      const Eigen::MatrixXd& q = vecs_[static_cast<std::size_t>(d)];
      for (std::size_t o = 0; o < n_; o += block)
        for (std::size_t in = 0; in < stride; ++in) {
          for (int k = 0; k < p_; ++k)
            fiber[k] = x[static_cast<Eigen::Index>(o + in + static_cast<std::size_t>(k) * stride)];
          out = q * fiber;
          for (int k = 0; k < p_; ++k)
            x[static_cast<Eigen::Index>(o + in + static_cast<std::size_t>(k) * stride)] = out[k];
        }
    }
    return x;
  }

private:
  std::vector<Eigen::Index> multi(std::size_t i) const {
    std::vector<Eigen::Index> m(static_cast<std::size_t>(dims_));
    for (int d = dims_ - 1; d >= 0; --d) {
      m[static_cast<std::size_t>(d)] = static_cast<Eigen::Index>(i % static_cast<std::size_t>(p_));
      i /= static_cast<std::size_t>(p_);
    }
    return m;
  }

  int dims_;
  int p_;
  std::size_t n_;
  GpHyperparams hp_;
  std::vector<Eigen::MatrixXd> factors_, vecs_;
  std::vector<Eigen::VectorXd> vals_;
  Eigen::VectorXd root_;
};

/// Posterior covariance K - V^T V, with V = L^-1 S^1/2 A K, sampled by
/// conditioning prior draws on the site approximations.
class SiteConditioned final : public CovarianceModel {
public:
  SiteConditioned(std::shared_ptr<const KroneckerPrior> prior, Eigen::MatrixXd v, Eigen::MatrixXd l,
                  Eigen::VectorXd sq, Eigen::VectorXd r0, std::vector<std::pair<std::size_t, std::size_t>> rows,
                  Eigen::VectorXd mean)
      : prior_(std::move(prior)), v_(std::move(v)), l_(std::move(l)), sq_(std::move(sq)),
        r0_(std::move(r0)), rows_(std::move(rows)), mean_(std::move(mean)) {}

  std::size_t size() const override { return prior_->size(); }

  Eigen::VectorXd diagonal() const override {
    return prior_->diagonal() - v_.colwise().squaredNorm().transpose();
  }

  Eigen::MatrixXd dense() const override { return prior_->dense() - v_.transpose() * v_; }

  Eigen::VectorXd draw(Rng& rng) const override {
    const Eigen::VectorXd f0 = prior_->draw(rng);
    const auto m = static_cast<Eigen::Index>(rows_.size());
    const Eigen::VectorXd z = standard_normal(rng, m);
    Eigen::VectorXd rhs(m);
    for (Eigen::Index i = 0; i < m; ++i) {
      const auto [w, lo] = rows_[static_cast<std::size_t>(i)];
      rhs[i] = r0_[i] - sq_[i] * (f0[static_cast<Eigen::Index>(w)] - f0[static_cast<Eigen::Index>(lo)]) - z[i];
    }
    const Eigen::VectorXd y = l_.triangularView<Eigen::Lower>().solve(rhs);
    return f0 + v_.transpose() * y - mean_;
  }

private:
  std::shared_ptr<const KroneckerPrior> prior_;
  Eigen::MatrixXd v_, l_;
  Eigen::VectorXd sq_, r0_;
  std::vector<std::pair<std::size_t, std::size_t>> rows_;
  Eigen::VectorXd mean_;
};

// N(z)/Phi(z), stable for very negative z
double mills_ratio(double z) {
  if (z < -10.0) {
    const double iz2 = 1.0 / (z * z);
    return -z / (1.0 - iz2 + 3.0 * iz2 * iz2);
  }
  return normal_pdf(z) / normal_cdf(z);
}

}  // namespace

GaussianApprox::GaussianApprox(Eigen::VectorXd mean, Eigen::MatrixXd cov)
    : GaussianApprox(std::move(mean), std::make_shared<DenseCovariance>(std::move(cov))) {}

GaussianApprox::GaussianApprox(Eigen::VectorXd mean, std::shared_ptr<const CovarianceModel> cov)
    : mean_(std::move(mean)), cov_(std::move(cov)) {
  if (!cov_ || cov_->size() != static_cast<std::size_t>(mean_.size()))
    throw std::invalid_argument("GaussianApprox: mean/covariance size mismatch");
  var_ = cov_->diagonal().cwiseMax(0.0);
  if (!mean_.allFinite() || !var_.allFinite()) throw NumericalError("GaussianApprox: non-finite moments");
}

Eigen::MatrixXd prior_covariance(const WeightGrid& grid, const GpHyperparams& hp) {
  return KroneckerPrior(grid, hp).dense();
}

GaussianApprox fit_posterior(const ComparisonDataset& data, const GpHyperparams& hp,
                             const WeightGrid& grid) {
  data.check(grid.size());
  if (static_cast<int>(hp.length_scales.size()) != 1 &&
      static_cast<int>(hp.length_scales.size()) != grid.dims())
    throw ConfigError("gp: one length scale, or one per weight dimension");
  auto prior = std::make_shared<const KroneckerPrior>(grid, hp);
  const auto n = static_cast<Eigen::Index>(grid.size());

  std::vector<std::pair<std::size_t, std::size_t>> rows;
  for (const auto& c : data.records())
    if (c.i0 != c.i1) rows.emplace_back(c.winner(), c.loser());
  const auto m = static_cast<Eigen::Index>(rows.size());
  if (m == 0) return GaussianApprox(Eigen::VectorXd::Zero(n), prior);

  // K A^T and C = A K A^T
  Eigen::MatrixXd ka(n, m);
  {
    std::vector<Eigen::VectorXd> cols(grid.size());
    auto col = [&](std::size_t j) -> const Eigen::VectorXd& {
      if (cols[j].size() == 0) cols[j] = prior->column(j);
      return cols[j];
    };
    for (Eigen::Index i = 0; i < m; ++i) {
      const auto [w, l] = rows[static_cast<std::size_t>(i)];
      ka.col(i) = col(w) - col(l);
    }
  }
  Eigen::MatrixXd c(m, m);
  for (Eigen::Index i = 0; i < m; ++i) {
    const auto [w, l] = rows[static_cast<std::size_t>(i)];
    c.row(i) = ka.row(static_cast<Eigen::Index>(w)) - ka.row(static_cast<Eigen::Index>(l));
  }
  c = 0.5 * (c + c.transpose()).eval();

  const double s2 = 2.0 * hp.noise * hp.noise;  // variance of the comparison noise
  Eigen::VectorXd tau = Eigen::VectorXd::Zero(m), nu = Eigen::VectorXd::Zero(m);
  Eigen::MatrixXd sigma = c;
  Eigen::VectorXd mu = Eigen::VectorXd::Zero(m);

  Eigen::LLT<Eigen::MatrixXd> llt;
  auto refresh = [&] {
    const Eigen::VectorXd sq = tau.cwiseSqrt();
    Eigen::MatrixXd b = sq.asDiagonal() * c * sq.asDiagonal();
    b.diagonal().array() += 1.0;
    llt.compute(b);
    if (llt.info() != Eigen::Success) throw NumericalError("fit_posterior: B not positive definite");
    const Eigen::MatrixXd v = llt.matrixL().solve(sq.asDiagonal() * c);
    sigma = c - v.transpose() * v;
    mu = sigma * nu;
  };

  constexpr int kMaxSweeps = 200;
  for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
    double change = 0.0;
    for (Eigen::Index i = 0; i < m; ++i) {
      const double tau_c = 1.0 / sigma(i, i) - tau[i];
      const double nu_c = mu[i] / sigma(i, i) - nu[i];
      if (!(tau_c > 0.0)) throw NumericalError("fit_posterior: negative cavity variance");
      const double var_c = 1.0 / tau_c, mean_c = nu_c / tau_c;
      const double denom = std::sqrt(s2 + var_c);
      const double z = mean_c / denom;
      const double r = mills_ratio(z);
      const double mean_h = mean_c + var_c * r / denom;
      const double var_h = var_c - var_c * var_c * r * (z + r) / (denom * denom);
      const double tau_new = std::max(1.0 / var_h - tau_c, 0.0);
      const double nu_new = mean_h / var_h - nu_c;
      const double dtau = tau_new - tau[i];
      change = std::max({change, std::abs(dtau), std::abs(nu_new - nu[i])});
      tau[i] = tau_new;
      nu[i] = nu_new;
      const Eigen::VectorXd si = sigma.col(i);
      sigma -= (dtau / (1.0 + dtau * si[i])) * si * si.transpose();
      mu = sigma * nu;
    }
    refresh();
    if (change < 1e-10) break;
  }

  const Eigen::VectorXd sq = tau.cwiseSqrt();
  Eigen::MatrixXd l = llt.matrixL();
  Eigen::MatrixXd v = l.triangularView<Eigen::Lower>().solve(sq.asDiagonal() * ka.transpose());
  const Eigen::VectorXd inner =
      llt.solve(sq.cwiseProduct(c * nu));
  const Eigen::VectorXd alpha = nu - sq.cwiseProduct(inner);
  Eigen::VectorXd mean = ka * alpha;
  Eigen::VectorXd r0(m);
  for (Eigen::Index i = 0; i < m; ++i) r0[i] = sq[i] > 0.0 ? nu[i] / sq[i] : 0.0;

  if (!mean.allFinite() || !v.allFinite()) throw NumericalError("fit_posterior: non-finite posterior");
  auto cov = std::make_shared<const SiteConditioned>(prior, std::move(v), std::move(l), sq, r0,
                                                     std::move(rows), mean);
  return GaussianApprox(std::move(mean), std::move(cov));
}

std::pair<Eigen::VectorXd, Eigen::VectorXd> predict(const GaussianApprox& q,
                                                    const std::vector<std::size_t>& indices) {
  Eigen::VectorXd mu(static_cast<Eigen::Index>(indices.size()));
  Eigen::VectorXd var(static_cast<Eigen::Index>(indices.size()));
  for (std::size_t k = 0; k < indices.size(); ++k) {
    if (indices[k] >= q.size()) throw std::out_of_range("predict: grid index out of range");
    mu[static_cast<Eigen::Index>(k)] = q.mean()[static_cast<Eigen::Index>(indices[k])];
    var[static_cast<Eigen::Index>(k)] = q.variances()[static_cast<Eigen::Index>(indices[k])];
  }
  return {mu, var};
}

Eigen::VectorXd sample_utility(const GaussianApprox& q, Rng& rng) {
  return q.mean() + q.covariance_model().draw(rng);
}

std::size_t argmax_lowest(const Eigen::VectorXd& v) {
  if (v.size() == 0) throw std::invalid_argument("argmax of empty vector");
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < v.size(); ++i)
    if (v[i] > v[best]) best = i;
  return static_cast<std::size_t>(best);
}

}  // namespace pcpbo
