// Seeded random streams, the samplers used by the Gibbs engine, and the
// normal-distribution special functions they rely on.
#pragma once

#include <cstdint>
#include <limits>
#include <random>

#include <Eigen/Dense>

namespace crtsace {

/// One independent random stream. (seed, stream_id) fully determines the
/// draw sequence. Not shareable across threads; give each chain its own.
class RngHandle {
 public:
  RngHandle(std::uint64_t seed, std::uint64_t stream_id);

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream_id() const { return stream_id_; }

  double uniform();       // (0, 1), endpoints excluded
  double normal();        // N(0, 1)
  double exponential();   // Exp(1)
  double gamma(double shape);  // Gamma(shape, scale 1)
  bool bernoulli(double p);
  int uniform_int(int lo, int hi);  // inclusive

  std::mt19937_64& engine() { return engine_; }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_id_;
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

/// Symmetric positive-definite matrix. Construction checks symmetry (1e-12,
/// relative to the largest entry) and a successful Cholesky factorization.
class SpdMatrix {
 public:
  SpdMatrix() = default;
  explicit SpdMatrix(Eigen::MatrixXd m);

  static SpdMatrix identity(int dim) { return SpdMatrix(Eigen::MatrixXd::Identity(dim, dim)); }

  const Eigen::MatrixXd& matrix() const { return m_; }
  int dim() const { return static_cast<int>(m_.rows()); }
  double operator()(int i, int j) const { return m_(i, j); }

  /// True when `m` would be accepted by the constructor.
  static bool is_spd(const Eigen::MatrixXd& m);

 private:
  Eigen::MatrixXd m_;
};

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Standard normal CDF, absolute error below 1e-12.
double normal_cdf(double x);
/// log of the standard normal CDF, accurate far into the lower tail.
double log_normal_cdf(double x);
double normal_pdf(double x);
/// Inverse standard normal CDF (Acklam's rational approximation refined by
/// one Halley step).
double normal_quantile(double p);

/// P(X1 <= h, X2 <= k) for a standard bivariate normal with correlation rho.
double bivariate_normal_cdf(double h, double k, double rho);

/// Cholesky-based MVN draw. A failed factorization is retried once with
/// jitter 1e-10 * trace / dim on the diagonal; a second failure throws
/// NumericalError.
Eigen::VectorXd sample_mvn(const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov, RngHandle& rng);
Eigen::VectorXd sample_mvn(const Eigen::VectorXd& mean, const SpdMatrix& cov, RngHandle& rng);

/// Draw from N(precision^{-1} * shift, precision^{-1}), the canonical form of a
/// conjugate Gaussian posterior.
Eigen::VectorXd sample_mvn_canonical(const Eigen::VectorXd& shift, const Eigen::MatrixXd& precision,
                                     RngHandle& rng);

/// Inverse-Wishart draw with E[draw] = scale / (df - dim - 1). Requires
/// df > dim - 1.
SpdMatrix sample_inverse_wishart(double df, const SpdMatrix& scale, RngHandle& rng);
Eigen::MatrixXd sample_inverse_wishart(double df, const Eigen::MatrixXd& scale, RngHandle& rng);

/// Inverse-gamma draw with density proportional to x^{-shape-1} exp(-scale/x).
double sample_inverse_gamma(double shape, double scale, RngHandle& rng);

/// Normal(mu, sigma^2) restricted to the open interval (lower, upper).
/// Tails are handled by exponential-proposal rejection, never by inverting
/// the CDF.
double sample_truncated_normal(double mu, double sigma, double lower, double upper, RngHandle& rng);

/// Standard normal restricted to (a, b).
double sample_truncated_std_normal(double a, double b, RngHandle& rng);

}  // namespace crtsace
