#include "crtsace/rand_dist.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>

#include "crtsace/core_model.hpp"

namespace crtsace {

namespace {

constexpr double kSqrt2 = std::numbers::sqrt2;
constexpr double kTwoPi = 2.0 * std::numbers::pi;

std::seed_seq make_seed_seq(std::uint64_t seed, std::uint64_t stream) {
  return std::seed_seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                       static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32),
                       0x9e3779b9u};
}

}  // namespace

RngHandle::RngHandle(std::uint64_t seed, std::uint64_t stream_id) : seed_(seed), stream_id_(stream_id) {
  auto seq = make_seed_seq(seed, stream_id);
  engine_.seed(seq);
}

double RngHandle::uniform() {
  // 53 random bits, shifted by half a step so 0 and 1 are unreachable.
  const std::uint64_t k = engine_() >> 11;
  return (static_cast<double>(k) + 0.5) * 0x1.0p-53;
}

double RngHandle::normal() { return normal_(engine_); }

double RngHandle::exponential() { return -std::log(uniform()); }

double RngHandle::gamma(double shape) {
  std::gamma_distribution<double> g(shape, 1.0);
  return g(engine_);
}

bool RngHandle::bernoulli(double p) { return uniform() < p; }

int RngHandle::uniform_int(int lo, int hi) {
  std::uniform_int_distribution<int> d(lo, hi);
  return d(engine_);
}

bool SpdMatrix::is_spd(const Eigen::MatrixXd& m) {
  if (m.rows() == 0 || m.rows() != m.cols() || !m.allFinite()) return false;
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) return false;
  Eigen::LLT<Eigen::MatrixXd> llt(m);
  return llt.info() == Eigen::Success;
}

SpdMatrix::SpdMatrix(Eigen::MatrixXd m) : m_(std::move(m)) {
  if (!is_spd(m_)) throw NumericalError("matrix is not symmetric positive definite");
  m_ = 0.5 * (m_ + m_.transpose()).eval();
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / kSqrt2); }

double normal_pdf(double x) { return std::exp(-0.5 * x * x) / std::sqrt(kTwoPi); }

double log_normal_cdf(double x) {
  if (x > -30.0) return std::log(normal_cdf(x));
  // Asymptotic expansion of the Mills ratio.
  const double z2 = 1.0 / (x * x);
  double series = 1.0, term = 1.0;
  for (int n = 1; n <= 6; ++n) {
    term *= -(2.0 * n - 1.0) * z2;
    series += term;
  }
  return -0.5 * x * x - std::log(-x) - 0.5 * std::log(kTwoPi) + std::log(series);
}

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) {
    if (p == 0.0) return -kInf;
    if (p == 1.0) return kInf;
    throw ConfigError("normal_quantile: p outside [0, 1]");
  }
  static constexpr std::array<double, 6> a{-3.969683028665376e+01, 2.209460984245205e+02,
                                           -2.759285104469687e+02, 1.383577518672690e+02,
                                           -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr std::array<double, 5> b{-5.447609879822406e+01, 1.615858368580409e+02,
                                           -1.556989798598866e+02, 6.680131188771972e+01,
                                           -1.328068155288572e+01};
  static constexpr std::array<double, 6> c{-7.784894002430293e-03, -3.223964580411365e-01,
                                           -2.400758277161838e+00, -2.549732539343734e+00,
                                           4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr std::array<double, 4> d{7.784695709041462e-03, 3.224671290700398e-01,
                                           2.445134137142996e+00, 3.754408661907416e+00};
  constexpr double plow = 0.02425;
  double x;
  if (p < plow) {
    const double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (p <= 1.0 - plow) {
    const double q = p - 0.5;
    const double r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    const double q = std::sqrt(-2.0 * std::log1p(-p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  // Halley refinement.
  const double e = normal_cdf(x) - p;
  const double u = e * std::sqrt(kTwoPi) * std::exp(0.5 * x * x);
  return x - u / (1.0 + 0.5 * x * u);
}

namespace {

// Upper orthant probability P(X > dh, Y > dk), Genz's BVNU.
double bvnu(double dh, double dk, double r) {
  if (dh == kInf || dk == kInf) return 0.0;
  if (dh == -kInf) return dk == -kInf ? 1.0 : normal_cdf(-dk);
  if (dk == -kInf) return normal_cdf(-dh);
  if (r == 0.0) return normal_cdf(-dh) * normal_cdf(-dk);

  std::array<double, 10> w{}, x{};
  int lg;
  if (std::abs(r) < 0.3) {
    lg = 3;
    w = {0.1713244923791705, 0.3607615730481384, 0.4679139345726904};
    x = {0.9324695142031522, 0.6612093864662647, 0.2386191860831970};
  } else if (std::abs(r) < 0.75) {
    lg = 6;
    w = {.04717533638651177, 0.1069393259953183, 0.1600783285433464,
         0.2031674267230659, 0.2334925365383547, 0.2491470458134029};
    x = {0.9815606342467191, 0.9041172563704750, 0.7699026741943050,
         0.5873179542866171, 0.3678314989981802, 0.1252334085114692};
  } else {
    lg = 10;
    w = {.01761400713915212, .04060142980038694, .06267204833410906, .08327674157670475,
         0.1019301198172404, 0.1181945319615184, 0.1316886384491766, 0.1420961093183821,
         0.1491729864726037, 0.1527533871307259};
    x = {0.9931285991850949, 0.9639719272779138, 0.9122344282513259, 0.8391169718222188,
         0.7463319064601508, 0.6360536807265150, 0.5108670019508271, 0.3737060887154196,
         0.2277858511416451, 0.07652652113349733};
  }
  double h = dh, k = dk, hk = h * k, bvn = 0.0;
  if (std::abs(r) < 0.925) {
    const double hs = (h * h + k * k) / 2.0;
    const double asr = std::asin(r) / 2.0;
    for (int i = 0; i < lg; ++i) {
      for (double xi : {1.0 - x[i], 1.0 + x[i]}) {
        const double sn = std::sin(asr * xi);
        bvn += w[i] * std::exp((sn * hk - hs) / (1.0 - sn * sn));
      }
    }
    return std::clamp(bvn * asr / kTwoPi + normal_cdf(-h) * normal_cdf(-k), 0.0, 1.0);
  }
  if (r < 0.0) {
    k = -k;
    hk = -hk;
  }
  if (std::abs(r) < 1.0) {
    const double as = 1.0 - r * r;
    double a = std::sqrt(as);
    const double bs = (h - k) * (h - k);
    double asr = -(bs / as + hk) / 2.0;
    const double c = (4.0 - hk) / 8.0;
    const double d = (12.0 - hk) / 80.0;
    if (asr > -100.0) bvn = a * std::exp(asr) * (1.0 - c * (bs - as) * (1.0 - d * bs) / 3.0 + c * d * as * as);
    if (hk > -100.0) {
      const double b = std::sqrt(bs);
      const double sp = std::sqrt(kTwoPi) * normal_cdf(-b / a);
      bvn -= std::exp(-hk / 2.0) * sp * b * (1.0 - c * bs * (1.0 - d * bs) / 3.0);
    }
    a /= 2.0;
    double acc = 0.0;
    for (int i = 0; i < lg; ++i) {
      for (double xi : {1.0 - x[i], 1.0 + x[i]}) {
        const double xs = (a * xi) * (a * xi);
        asr = -(bs / xs + hk) / 2.0;
        if (asr > -100.0) {
          const double sp = 1.0 + c * xs * (1.0 + 5.0 * d * xs);
          const double rs = std::sqrt(1.0 - xs);
          const double ep = std::exp(-(hk / 2.0) * xs / ((1.0 + rs) * (1.0 + rs))) / rs;
          acc += w[i] * std::exp(asr) * (sp - ep);
        }
      }
    }
    bvn = (a * acc - bvn) / kTwoPi;
  }
  if (r > 0.0) {
    bvn += normal_cdf(-std::max(h, k));
  } else if (h >= k) {
    bvn = -bvn;
  } else {
    const double l = h < 0.0 ? normal_cdf(k) - normal_cdf(h) : normal_cdf(-h) - normal_cdf(-k);
    bvn = l - bvn;
  }
  return std::clamp(bvn, 0.0, 1.0);
}

}  // namespace

double bivariate_normal_cdf(double h, double k, double rho) {
  if (!(rho >= -1.0 && rho <= 1.0)) throw ConfigError("bivariate_normal_cdf: |rho| > 1");
  return bvnu(-h, -k, rho);
}

Eigen::VectorXd sample_mvn(const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov, RngHandle& rng) {
  const auto dim = mean.size();
  if (cov.rows() != dim || cov.cols() != dim) throw ConfigError("sample_mvn: dimension mismatch");
  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  if (llt.info() != Eigen::Success || !cov.allFinite()) {
    Eigen::MatrixXd jittered = cov;
    jittered.diagonal().array() += 1e-10 * cov.trace() / static_cast<double>(dim);
    llt.compute(jittered);
    if (llt.info() != Eigen::Success || !jittered.allFinite()) {
      throw NumericalError("sample_mvn: covariance is not positive definite");
    }
  }
  Eigen::VectorXd z(dim);
  for (Eigen::Index i = 0; i < dim; ++i) z(i) = rng.normal();
  return mean + llt.matrixL() * z;
}

Eigen::VectorXd sample_mvn(const Eigen::VectorXd& mean, const SpdMatrix& cov, RngHandle& rng) {
  return sample_mvn(mean, cov.matrix(), rng);
}

Eigen::VectorXd sample_mvn_canonical(const Eigen::VectorXd& shift, const Eigen::MatrixXd& precision,
                                     RngHandle& rng) {
  Eigen::LLT<Eigen::MatrixXd> llt(precision);
  if (llt.info() != Eigen::Success || !precision.allFinite()) {
    throw NumericalError("singular posterior precision");
  }
  Eigen::VectorXd mean = llt.solve(shift);
  Eigen::VectorXd z(shift.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = rng.normal();
  return mean + llt.matrixU().solve(z);
}

Eigen::MatrixXd sample_inverse_wishart(double df, const Eigen::MatrixXd& scale, RngHandle& rng) {
  const auto dim = scale.rows();
  if (!(df > static_cast<double>(dim) - 1.0)) {
    throw ConfigError("sample_inverse_wishart: df must exceed dim - 1");
  }
  Eigen::LLT<Eigen::MatrixXd> llt(scale);
  if (llt.info() != Eigen::Success) throw NumericalError("sample_inverse_wishart: scale is not SPD");
  // Bartlett factor A of a Wishart(df, I) draw W0 = A A^T; the result is
  // C W0^{-1} C^T with scale = C C^T.
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(dim, dim);
  for (Eigen::Index i = 0; i < dim; ++i) {
    a(i, i) = std::sqrt(2.0 * rng.gamma(0.5 * (df - static_cast<double>(i))));
    for (Eigen::Index j = 0; j < i; ++j) a(i, j) = rng.normal();
  }
  const Eigen::MatrixXd c = llt.matrixL();
  // M = C A^{-T}  <=>  M A^T = C  <=>  A M^T = C^T.
  const Eigen::MatrixXd mt = a.triangularView<Eigen::Lower>().solve(c.transpose());
  Eigen::MatrixXd out = mt.transpose() * mt;
  out = 0.5 * (out + out.transpose()).eval();
  return out;
}

SpdMatrix sample_inverse_wishart(double df, const SpdMatrix& scale, RngHandle& rng) {
  return SpdMatrix(sample_inverse_wishart(df, scale.matrix(), rng));
}

double sample_inverse_gamma(double shape, double scale, RngHandle& rng) {
  if (!(shape > 0.0) || !(scale > 0.0)) {
    throw ConfigError("sample_inverse_gamma: shape and scale must be positive");
  }
  return scale / rng.gamma(shape);
}

namespace {

// Rejection from an exponential proposal on (a, inf), a >= 0, truncated at b.
double exp_tail(double a, double b, RngHandle& rng) {
  const double lambda = 0.5 * (a + std::sqrt(a * a + 4.0));
  for (;;) {
    const double z = a + rng.exponential() / lambda;
    const double t = z - lambda;
    if (z > a && z < b && rng.exponential() > 0.5 * t * t) return z;
  }
}

// Uniform proposal on (a, b), 0 <= a; acceptance exp((a^2 - z^2) / 2).
double uniform_positive(double a, double b, RngHandle& rng) {
  for (;;) {
    const double z = a + (b - a) * rng.uniform();
    if (z > a && z < b && rng.exponential() > 0.5 * (z * z - a * a)) return z;
  }
}

}  // namespace

double sample_truncated_std_normal(double a, double b, RngHandle& rng) {
  if (!(a < b)) throw ConfigError("sample_truncated_normal: empty interval");
  if (a == -kInf && b == kInf) return rng.normal();
  if (b <= 0.0) return -sample_truncated_std_normal(-b, -a, rng);
  if (a < 0.0) {
    // Interval straddles zero.
    if (b - a > 2.0) {
      for (;;) {
        const double z = rng.normal();
        if (z > a && z < b) return z;
      }
    }
    for (;;) {
      const double z = a + (b - a) * rng.uniform();
      if (z > a && z < b && rng.exponential() > 0.5 * z * z) return z;
    }
  }
  // 0 <= a < b.
  const double lambda = 0.5 * (a + std::sqrt(a * a + 4.0));
  if (b - a < 1.0 / lambda) return uniform_positive(a, b, rng);
  if (a < 0.25) {
    for (;;) {
      const double z = std::abs(rng.normal());
      if (z > a && z < b) return z;
    }
  }
  return exp_tail(a, b, rng);
}

double sample_truncated_normal(double mu, double sigma, double lower, double upper, RngHandle& rng) {
  if (!(sigma > 0.0)) throw ConfigError("sample_truncated_normal: sigma must be positive");
  if (!(lower < upper)) throw ConfigError("sample_truncated_normal: empty interval");
  const double a = lower == -kInf ? -kInf : (lower - mu) / sigma;
  const double b = upper == kInf ? kInf : (upper - mu) / sigma;
  for (;;) {
    const double x = mu + sigma * sample_truncated_std_normal(a, b, rng);
    // Guard against rounding pushing the draw onto a bound.
    if (x > lower && x < upper) return x;
  }
}

}  // namespace crtsace
