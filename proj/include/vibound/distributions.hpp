#ifndef VIBOUND_DISTRIBUTIONS_HPP
#define VIBOUND_DISTRIBUTIONS_HPP

#include <vibound/random.hpp>

#include <Eigen/Dense>

#include <cstdint>
#include <string>

namespace vibound {

enum class Family1D { Normal, StudentT, Weibull, HalfCauchy, GeneralizedPareto };

std::string to_string(Family1D family);

/**
 * One-dimensional distribution used as an analytic fixture.
 *
 * Parameters: `loc` (ignored by Weibull), `scale` > 0 and `shape`, which is
 * the degrees of freedom for StudentT, the Weibull shape k, or the GPD tail
 * shape. Values are immutable after construction.
 */
class Scalar1D {
 public:
  static Scalar1D normal(double loc, double scale);
  static Scalar1D student_t(double loc, double scale, double df);
  static Scalar1D weibull(double shape, double scale = 1.0);
  static Scalar1D half_cauchy(double loc, double scale);
  static Scalar1D generalized_pareto(double loc, double scale, double shape);

  Family1D family() const { return family_; }
  double loc() const { return loc_; }
  double scale() const { return scale_; }
  double shape() const { return shape_; }
  std::string describe() const;

  /// Natural log density; -inf outside the support.
  double log_density(double x) const;
  double quantile(double u) const;
  /// Quantile at 1 - q, accurate for tiny q.
  double upper_quantile(double q) const;
  double median() const { return quantile(0.5); }
  double sample(Rng& rng) const;

  /// Lower end of the support (-inf for real-line families).
  double support_lower() const;
  /// Upper end of the support (+inf except for GPD with negative shape).
  double support_upper() const;
  bool has_finite_moment(double p) const;

  /// Mean and variance; +inf (or NaN for an undefined mean) when absent.
  double mean() const;
  double variance() const;
  /// E|X - mean|^p by quadrature over the quantile function.
  double central_absolute_moment(double p) const;

  /// Distribution of c * X for c > 0.
  Scalar1D scaled(double c) const;

 private:
  Scalar1D(Family1D family, double loc, double scale, double shape);

  Family1D family_;
  double loc_;
  double scale_;
  double shape_;
};

double log_density(const Scalar1D& dist, double x);
double quantile(const Scalar1D& dist, double u);

enum class VariationalKind { MeanFieldT, MeanFieldGaussian, FullRankGaussian, FullRankT };

std::string to_string(VariationalKind kind);
VariationalKind variational_kind_from_string(const std::string& name);

struct Moments {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
};

/// Draws from a variational distribution. Row t of `draws` is
/// loc + S * base_noise.row(t) where S is the scale factor.
struct SampleBatch {
  Eigen::MatrixXd draws;
  /// Standardized noise: N(0, 1) entries, or t_h entries for t kinds.
  Eigen::MatrixXd base_noise;
  /// Chi-square mixing draws behind the t noise (T x d for mean-field t,
  /// T x 1 for full-rank t, empty for Gaussian kinds).
  Eigen::MatrixXd mixing;
  std::uint64_t seed = 0;
};

/**
 * Member of a location-scale variational family.
 *
 * Mean-field kinds keep a positive scale vector; full-rank kinds keep a
 * lower-triangular factor L with positive diagonal. Degrees of freedom are
 * fixed and never optimized.
 */
class VariationalDistribution {
 public:
  static VariationalDistribution mean_field_gaussian(Eigen::VectorXd loc,
                                                     Eigen::VectorXd scale);
  static VariationalDistribution mean_field_t(Eigen::VectorXd loc,
                                              Eigen::VectorXd scale, double df);
  static VariationalDistribution full_rank_gaussian(Eigen::VectorXd loc,
                                                    Eigen::MatrixXd factor);
  static VariationalDistribution full_rank_t(Eigen::VectorXd loc,
                                             Eigen::MatrixXd factor, double df);
  /// Standard member of a family: zero location, unit scale.
  static VariationalDistribution standard(VariationalKind kind, int dim,
                                          double df = 40.0);

  VariationalKind kind() const { return kind_; }
  int dim() const { return static_cast<int>(loc_.size()); }
  double df() const { return df_; }
  bool is_t() const;
  bool is_full_rank() const;

  const Eigen::VectorXd& loc() const { return loc_; }
  /// Mean-field scales (empty for full-rank kinds).
  const Eigen::VectorXd& scale() const { return scale_; }
  /// Lower-triangular scale factor; diagonal for mean-field kinds.
  Eigen::MatrixXd factor() const;

  double log_density(const Eigen::VectorXd& x) const;
  /// log q(loc + S * noise), computed from the standardized noise row.
  double log_density_from_noise(const Eigen::VectorXd& noise) const;
  Eigen::VectorXd log_density_rows(const Eigen::MatrixXd& x) const;
  /// loc + S * noise applied to every row.
  Eigen::MatrixXd transform(const Eigen::MatrixXd& noise) const;
  double log_det_scale() const;

  /// Unconstrained parameter vector: loc, then log scales (mean-field) or
  /// the factor rows with the diagonal on the log scale (full-rank).
  Eigen::VectorXd parameters() const;
  int num_parameters() const;
  VariationalDistribution with_parameters(const Eigen::VectorXd& params) const;

  /// Same family with location and scale multiplied by c > 0.
  VariationalDistribution scaled(double c) const;

 private:
  VariationalDistribution(VariationalKind kind, Eigen::VectorXd loc,
                          Eigen::VectorXd scale, Eigen::MatrixXd factor,
                          double df);

  VariationalKind kind_;
  Eigen::VectorXd loc_;
  Eigen::VectorXd scale_;
  Eigen::MatrixXd factor_;
  double df_;
};

double log_density(const VariationalDistribution& dist, const Eigen::VectorXd& x);

/// Deterministic in (dist, T, seed); row t uses stream t of `seed`.
SampleBatch sample(const VariationalDistribution& dist, int T, std::uint64_t seed);

/// Exact mean and covariance. Throws std::domain_error for t kinds with
/// df <= 2 ("variance undefined").
Moments moments(const VariationalDistribution& dist);

}  // namespace vibound

#endif
