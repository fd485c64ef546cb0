#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "pcpbo/scene.hpp"

namespace pcpbo {

using Rng = std::mt19937_64;

/// Factorization failure or non-finite result during inference.
class NumericalError : public Error {
public:
  using Error::Error;
};

/// Squared-exponential kernel.
double kernel(const WeightVector& a, const WeightVector& b, const GpHyperparams& hp);

double normal_cdf(double z);
double normal_pdf(double z);

/// p(w0 < w1 | f0, f1) = Phi((f1 - f0) / (sqrt(2) sigma)).
double pref_likelihood(double f0, double f1, double sigma);

enum class Provenance { direct, synthesized };
std::string to_string(Provenance p);
Provenance provenance_from_string(const std::string& s);

/// One comparison between grid points i0 and i1. y = 1 means i1 was preferred,
/// y = 0 means i0 was preferred (or the two tied).
struct Comparison {
  std::size_t i0 = 0;
  std::size_t i1 = 0;
  int y = 0;
  Provenance provenance = Provenance::direct;
  std::int64_t timestamp = 0;  ///< logical round index

  std::size_t winner() const { return y == 1 ? i1 : i0; }
  std::size_t loser() const { return y == 1 ? i0 : i1; }
  bool operator==(const Comparison&) const = default;
};

class ComparisonDataset {
public:
  void add(const Comparison& c);
  std::size_t size() const { return records_.size(); }
  bool empty() const { return records_.empty(); }
  const std::vector<Comparison>& records() const { return records_; }
  const Comparison& operator[](std::size_t i) const { return records_[i]; }

  /// Throws std::out_of_range when an index is outside a grid of `grid_size` points.
  void check(std::size_t grid_size) const;

  /// One "i0 i1 y provenance timestamp" line per record.
  void write(std::ostream& os) const;
  static ComparisonDataset read(std::istream& is);

  bool operator==(const ComparisonDataset&) const = default;

private:
  std::vector<Comparison> records_;
};

/// Covariance over grid utilities, possibly without an explicit matrix.
class CovarianceModel {
public:
  virtual ~CovarianceModel() = default;
  virtual std::size_t size() const = 0;
  virtual Eigen::VectorXd diagonal() const = 0;
  /// Explicit matrix; only sensible for small grids.
  virtual Eigen::MatrixXd dense() const = 0;
  /// Zero-mean draw with this covariance.
  virtual Eigen::VectorXd draw(Rng& rng) const = 0;
};

/// Dense covariance with a symmetric square-root factor.
class DenseCovariance final : public CovarianceModel {
public:
  /// Throws NumericalError unless cov is symmetric (1e-10) with eigenvalues >= -1e-8.
  explicit DenseCovariance(Eigen::MatrixXd cov);
  std::size_t size() const override { return static_cast<std::size_t>(cov_.rows()); }
  Eigen::VectorXd diagonal() const override { return cov_.diagonal(); }
  Eigen::MatrixXd dense() const override { return cov_; }
  Eigen::VectorXd draw(Rng& rng) const override;

private:
  Eigen::MatrixXd cov_;
  Eigen::MatrixXd root_;
};

/// Gaussian q(f) over every grid point.
class GaussianApprox {
public:
  GaussianApprox(Eigen::VectorXd mean, Eigen::MatrixXd cov);
  GaussianApprox(Eigen::VectorXd mean, std::shared_ptr<const CovarianceModel> cov);

  std::size_t size() const { return static_cast<std::size_t>(mean_.size()); }
  const Eigen::VectorXd& mean() const { return mean_; }
  const Eigen::VectorXd& variances() const { return var_; }
  Eigen::MatrixXd covariance() const { return cov_->dense(); }
  const CovarianceModel& covariance_model() const { return *cov_; }

private:
  Eigen::VectorXd mean_;
  Eigen::VectorXd var_;
  std::shared_ptr<const CovarianceModel> cov_;
};

/// Prior covariance matrix K (with jitter on the diagonal) over the grid.
Eigen::MatrixXd prior_covariance(const WeightGrid& grid, const GpHyperparams& hp);

/// Expectation-propagation fit of q(f) to p(f | Y) under the probit likelihood.
/// Comparisons of a point with itself carry no information and are ignored.
GaussianApprox fit_posterior(const ComparisonDataset& data, const GpHyperparams& hp,
                             const WeightGrid& grid);

/// Marginal means and variances at the requested grid points.
std::pair<Eigen::VectorXd, Eigen::VectorXd> predict(const GaussianApprox& q,
                                                    const std::vector<std::size_t>& indices);

/// One joint draw f ~ q.
Eigen::VectorXd sample_utility(const GaussianApprox& q, Rng& rng);

/// Index of the largest entry; ties go to the lowest index.
std::size_t argmax_lowest(const Eigen::VectorXd& v);

}  // namespace pcpbo
