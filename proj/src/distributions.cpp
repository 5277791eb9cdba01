#include <vibound/distributions.hpp>
#include <vibound/numerics.hpp>
#include <vibound/parallel.hpp>

#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace vibound {

namespace {

const double kLogTwoPi = std::log(2.0 * M_PI);

void require_finite(double v, const char* what) {
  if (!std::isfinite(v)) throw std::invalid_argument(std::string(what) + " must be finite");
}

void require_positive(double v, const char* what) {
  require_finite(v, what);
  if (v <= 0.0) throw std::invalid_argument(std::string(what) + " must be positive");
}

double t_log_density_standard(double z, double df) {
  return std::lgamma(0.5 * (df + 1.0)) - std::lgamma(0.5 * df) -
         0.5 * std::log(df * M_PI) - 0.5 * (df + 1.0) * std::log1p(z * z / df);
}

}  // namespace

std::string to_string(Family1D family) {
  switch (family) {
    case Family1D::Normal: return "normal";
    case Family1D::StudentT: return "student_t";
    case Family1D::Weibull: return "weibull";
    case Family1D::HalfCauchy: return "half_cauchy";
    case Family1D::GeneralizedPareto: return "generalized_pareto";
  }
  return "unknown";
}

Scalar1D::Scalar1D(Family1D family, double loc, double scale, double shape)
    : family_(family), loc_(loc), scale_(scale), shape_(shape) {
  require_finite(loc, "location");
  require_positive(scale, "scale");
  require_finite(shape, "shape");
  if ((family == Family1D::StudentT || family == Family1D::Weibull) && shape <= 0.0)
    throw std::invalid_argument("shape must be positive");
}

Scalar1D Scalar1D::normal(double loc, double scale) {
  return Scalar1D(Family1D::Normal, loc, scale, 0.0);
}

Scalar1D Scalar1D::student_t(double loc, double scale, double df) {
  return Scalar1D(Family1D::StudentT, loc, scale, df);
}

Scalar1D Scalar1D::weibull(double shape, double scale) {
  return Scalar1D(Family1D::Weibull, 0.0, scale, shape);
}

Scalar1D Scalar1D::half_cauchy(double loc, double scale) {
  return Scalar1D(Family1D::HalfCauchy, loc, scale, 0.0);
}

Scalar1D Scalar1D::generalized_pareto(double loc, double scale, double shape) {
  return Scalar1D(Family1D::GeneralizedPareto, loc, scale, shape);
}

std::string Scalar1D::describe() const {
  std::ostringstream os;
  os.precision(17);
  switch (family_) {
    case Family1D::Normal: os << "normal(" << loc_ << ", " << scale_ << ")"; break;
    case Family1D::StudentT:
      os << "student_t(" << loc_ << ", " << scale_ << ", df=" << shape_ << ")";
      break;
    case Family1D::Weibull: os << "weibull(k=" << shape_ << ", " << scale_ << ")"; break;
    case Family1D::HalfCauchy: os << "half_cauchy(" << loc_ << ", " << scale_ << ")"; break;
    case Family1D::GeneralizedPareto:
      os << "generalized_pareto(" << loc_ << ", " << scale_ << ", k=" << shape_ << ")";
      break;
  }
  return os.str();
}

double Scalar1D::support_lower() const {
  switch (family_) {
    case Family1D::Weibull: return 0.0;
    case Family1D::HalfCauchy:
    case Family1D::GeneralizedPareto: return loc_;
    default: return -kInf;
  }
}

double Scalar1D::support_upper() const {
  if (family_ == Family1D::GeneralizedPareto && shape_ < 0.0) return loc_ - scale_ / shape_;
  return kInf;
}

double Scalar1D::log_density(double x) const {
  if (std::isnan(x)) return std::numeric_limits<double>::quiet_NaN();
  const double z = (x - loc_) / scale_;
  switch (family_) {
    case Family1D::Normal:
      return -0.5 * z * z - std::log(scale_) - 0.5 * kLogTwoPi;
    case Family1D::StudentT:
      return t_log_density_standard(z, shape_) - std::log(scale_);
    case Family1D::Weibull: {
      if (x < 0.0) return -kInf;
      const double r = x / scale_;
      if (r == 0.0) {
        if (shape_ < 1.0) return kInf;
        if (shape_ > 1.0) return -kInf;
        return -std::log(scale_);
      }
      const double log_r = std::log(r);
      return std::log(shape_ / scale_) + (shape_ - 1.0) * log_r - std::exp(shape_ * log_r);
    }
    case Family1D::HalfCauchy:
      if (x < loc_) return -kInf;
      return std::log(2.0 / M_PI) - std::log(scale_) - std::log1p(z * z);
    case Family1D::GeneralizedPareto: {
      if (z < 0.0) return -kInf;
      if (shape_ == 0.0) return -std::log(scale_) - z;
      const double arg = shape_ * z;
      if (arg <= -1.0) return -kInf;
      return -std::log(scale_) - (1.0 / shape_ + 1.0) * std::log1p(arg);
    }
  }
  return -kInf;
}

double Scalar1D::quantile(double u) const {
  if (!(u > 0.0 && u < 1.0)) throw std::domain_error("quantile level must lie in (0, 1)");
  switch (family_) {
    case Family1D::Normal:
      return boost::math::quantile(boost::math::normal_distribution<>(loc_, scale_), u);
    case Family1D::StudentT:
      return loc_ + scale_ * boost::math::quantile(
                                 boost::math::students_t_distribution<>(shape_), u);
    case Family1D::Weibull:
      return scale_ * std::pow(-std::log1p(-u), 1.0 / shape_);
    case Family1D::HalfCauchy:
      return loc_ + scale_ * std::tan(0.5 * M_PI * u);
    case Family1D::GeneralizedPareto: {
      const double log_surv = std::log1p(-u);
      if (shape_ == 0.0) return loc_ - scale_ * log_surv;
      return loc_ + scale_ * std::expm1(-shape_ * log_surv) / shape_;
    }
  }
  return 0.0;
}

double Scalar1D::upper_quantile(double q) const {
  if (!(q > 0.0 && q < 1.0)) throw std::domain_error("quantile level must lie in (0, 1)");
  switch (family_) {
    case Family1D::Normal:
      return boost::math::quantile(
          boost::math::complement(boost::math::normal_distribution<>(loc_, scale_), q));
    case Family1D::StudentT:
      return loc_ + scale_ * boost::math::quantile(boost::math::complement(
                                 boost::math::students_t_distribution<>(shape_), q));
    case Family1D::Weibull:
      return scale_ * std::pow(-std::log(q), 1.0 / shape_);
    case Family1D::HalfCauchy:
      return loc_ + scale_ / std::tan(0.5 * M_PI * q);
    case Family1D::GeneralizedPareto: {
      const double log_surv = std::log(q);
      if (shape_ == 0.0) return loc_ - scale_ * log_surv;
      return loc_ + scale_ * std::expm1(-shape_ * log_surv) / shape_;
    }
  }
  return 0.0;
}

double Scalar1D::sample(Rng& rng) const {
  switch (family_) {
    case Family1D::Normal: return loc_ + scale_ * rng.normal();
    case Family1D::StudentT: {
      const double z = rng.normal();
      const double v = rng.chi_square(shape_);
      return loc_ + scale_ * z / std::sqrt(v / shape_);
    }
    default: return quantile(rng.uniform());
  }
}

bool Scalar1D::has_finite_moment(double p) const {
  switch (family_) {
    case Family1D::Normal:
    case Family1D::Weibull: return true;
    case Family1D::StudentT: return p < shape_;
    case Family1D::HalfCauchy: return p < 1.0;
    case Family1D::GeneralizedPareto: return shape_ * p < 1.0;
  }
  return false;
}

double Scalar1D::mean() const {
  switch (family_) {
    case Family1D::Normal: return loc_;
    case Family1D::StudentT:
      return shape_ > 1.0 ? loc_ : std::numeric_limits<double>::quiet_NaN();
    case Family1D::Weibull: return scale_ * std::exp(std::lgamma(1.0 + 1.0 / shape_));
    case Family1D::HalfCauchy: return kInf;
    case Family1D::GeneralizedPareto:
      return shape_ < 1.0 ? loc_ + scale_ / (1.0 - shape_) : kInf;
  }
  return 0.0;
}

double Scalar1D::variance() const {
  switch (family_) {
    case Family1D::Normal: return scale_ * scale_;
    case Family1D::StudentT:
      return shape_ > 2.0 ? scale_ * scale_ * shape_ / (shape_ - 2.0) : kInf;
    case Family1D::Weibull: {
      const double g1 = std::exp(std::lgamma(1.0 + 1.0 / shape_));
      const double g2 = std::exp(std::lgamma(1.0 + 2.0 / shape_));
      return scale_ * scale_ * (g2 - g1 * g1);
    }
    case Family1D::HalfCauchy: return kInf;
    case Family1D::GeneralizedPareto:
      if (shape_ >= 0.5) return kInf;
      return scale_ * scale_ / ((1.0 - shape_) * (1.0 - shape_) * (1.0 - 2.0 * shape_));
  }
  return 0.0;
}

double Scalar1D::central_absolute_moment(double p) const {
  if (!has_finite_moment(p)) return kInf;
  const double m = mean();
  const auto r = integrate_unit_interval([&](double u, double uc) {
    const double x = uc > 0.0 ? upper_quantile(uc) : quantile(u);
    return std::pow(std::abs(x - m), p);
  });
  return r.value;
}

Scalar1D Scalar1D::scaled(double c) const {
  require_positive(c, "scale factor");
  return Scalar1D(family_, c * loc_, c * scale_, shape_);
}

double log_density(const Scalar1D& dist, double x) { return dist.log_density(x); }

double quantile(const Scalar1D& dist, double u) { return dist.quantile(u); }

std::string to_string(VariationalKind kind) {
  switch (kind) {
    case VariationalKind::MeanFieldT: return "mean_field_t";
    case VariationalKind::MeanFieldGaussian: return "mean_field_gaussian";
    case VariationalKind::FullRankGaussian: return "full_rank_gaussian";
    case VariationalKind::FullRankT: return "full_rank_t";
  }
  return "unknown";
}

VariationalKind variational_kind_from_string(const std::string& name) {
  if (name == "mean_field_t" || name == "mf-t") return VariationalKind::MeanFieldT;
  if (name == "mean_field_gaussian" || name == "mf-gaussian")
    return VariationalKind::MeanFieldGaussian;
  if (name == "full_rank_gaussian" || name == "fr-gaussian")
    return VariationalKind::FullRankGaussian;
  if (name == "full_rank_t" || name == "fr-t") return VariationalKind::FullRankT;
  throw std::invalid_argument("unknown variational family: " + name);
}

VariationalDistribution::VariationalDistribution(VariationalKind kind, Eigen::VectorXd loc,
                                                 Eigen::VectorXd scale,
                                                 Eigen::MatrixXd factor, double df)
    : kind_(kind),
      loc_(std::move(loc)),
      scale_(std::move(scale)),
      factor_(std::move(factor)),
      df_(df) {
  const Eigen::Index d = loc_.size();
  if (d < 1) throw std::invalid_argument("dimension must be positive");
  if (!loc_.allFinite()) throw std::invalid_argument("location must be finite");
  if (is_t()) require_positive(df_, "degrees of freedom");
  if (is_full_rank()) {
    if (factor_.rows() != d || factor_.cols() != d)
      throw std::invalid_argument("scale factor must be d x d");
    if (!factor_.allFinite()) throw std::invalid_argument("scale factor must be finite");
    factor_ = Eigen::MatrixXd(factor_.triangularView<Eigen::Lower>());
    for (Eigen::Index i = 0; i < d; ++i)
      if (factor_(i, i) <= 0.0)
        throw std::invalid_argument("scale factor diagonal must be positive");
  } else {
    if (scale_.size() != d) throw std::invalid_argument("scale must have length d");
    for (Eigen::Index i = 0; i < d; ++i) require_positive(scale_(i), "scale");
  }
}

VariationalDistribution VariationalDistribution::mean_field_gaussian(Eigen::VectorXd loc,
                                                                     Eigen::VectorXd scale) {
  return VariationalDistribution(VariationalKind::MeanFieldGaussian, std::move(loc),
                                 std::move(scale), {}, 0.0);
}

VariationalDistribution VariationalDistribution::mean_field_t(Eigen::VectorXd loc,
                                                              Eigen::VectorXd scale,
                                                              double df) {
  return VariationalDistribution(VariationalKind::MeanFieldT, std::move(loc), std::move(scale),
                                 {}, df);
}

VariationalDistribution VariationalDistribution::full_rank_gaussian(Eigen::VectorXd loc,
                                                                    Eigen::MatrixXd factor) {
  return VariationalDistribution(VariationalKind::FullRankGaussian, std::move(loc), {},
                                 std::move(factor), 0.0);
}

VariationalDistribution VariationalDistribution::full_rank_t(Eigen::VectorXd loc,
                                                             Eigen::MatrixXd factor,
                                                             double df) {
  return VariationalDistribution(VariationalKind::FullRankT, std::move(loc), {},
                                 std::move(factor), df);
}

VariationalDistribution VariationalDistribution::standard(VariationalKind kind, int dim,
                                                          double df) {
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(dim);
  switch (kind) {
    case VariationalKind::MeanFieldT:
      return mean_field_t(zero, Eigen::VectorXd::Ones(dim), df);
    case VariationalKind::MeanFieldGaussian:
      return mean_field_gaussian(zero, Eigen::VectorXd::Ones(dim));
    case VariationalKind::FullRankGaussian:
      return full_rank_gaussian(zero, Eigen::MatrixXd::Identity(dim, dim));
    case VariationalKind::FullRankT:
      return full_rank_t(zero, Eigen::MatrixXd::Identity(dim, dim), df);
  }
  throw std::invalid_argument("unknown variational family");
}

bool VariationalDistribution::is_t() const {
  return kind_ == VariationalKind::MeanFieldT || kind_ == VariationalKind::FullRankT;
}

bool VariationalDistribution::is_full_rank() const {
  return kind_ == VariationalKind::FullRankGaussian || kind_ == VariationalKind::FullRankT;
}

Eigen::MatrixXd VariationalDistribution::factor() const {
  if (is_full_rank()) return factor_;
  return scale_.asDiagonal();
}

double VariationalDistribution::log_det_scale() const {
  if (is_full_rank()) return factor_.diagonal().array().log().sum();
  return scale_.array().log().sum();
}

double VariationalDistribution::log_density_from_noise(const Eigen::VectorXd& noise) const {
  const double d = static_cast<double>(dim());
  double base = 0.0;
  switch (kind_) {
    case VariationalKind::MeanFieldGaussian:
    case VariationalKind::FullRankGaussian:
      base = -0.5 * noise.squaredNorm() - 0.5 * d * kLogTwoPi;
      break;
    case VariationalKind::MeanFieldT:
      for (Eigen::Index i = 0; i < noise.size(); ++i)
        base += t_log_density_standard(noise(i), df_);
      break;
    case VariationalKind::FullRankT:
      base = std::lgamma(0.5 * (df_ + d)) - std::lgamma(0.5 * df_) -
             0.5 * d * std::log(df_ * M_PI) -
             0.5 * (df_ + d) * std::log1p(noise.squaredNorm() / df_);
      break;
  }
  return base - log_det_scale();
}

double VariationalDistribution::log_density(const Eigen::VectorXd& x) const {
  if (x.size() != loc_.size()) throw std::invalid_argument("dimension mismatch");
  Eigen::VectorXd noise = x - loc_;
  if (is_full_rank()) {
    factor_.triangularView<Eigen::Lower>().solveInPlace(noise);
  } else {
    noise.array() /= scale_.array();
  }
  return log_density_from_noise(noise);
}

Eigen::VectorXd VariationalDistribution::log_density_rows(const Eigen::MatrixXd& x) const {
  Eigen::VectorXd out(x.rows());
  for (Eigen::Index t = 0; t < x.rows(); ++t) out(t) = log_density(x.row(t).transpose());
  return out;
}

Eigen::MatrixXd VariationalDistribution::transform(const Eigen::MatrixXd& noise) const {
  if (noise.cols() != loc_.size()) throw std::invalid_argument("dimension mismatch");
  Eigen::MatrixXd out(noise.rows(), noise.cols());
  for (Eigen::Index t = 0; t < noise.rows(); ++t) {
    for (Eigen::Index i = 0; i < noise.cols(); ++i) {
      double v = 0.0;
      if (is_full_rank()) {
        for (Eigen::Index j = 0; j <= i; ++j) v += factor_(i, j) * noise(t, j);
      } else {
        v = scale_(i) * noise(t, i);
      }
      out(t, i) = loc_(i) + v;
    }
  }
  return out;
}

int VariationalDistribution::num_parameters() const {
  const int d = dim();
  return is_full_rank() ? d + d * (d + 1) / 2 : 2 * d;
}

Eigen::VectorXd VariationalDistribution::parameters() const {
  const int d = dim();
  Eigen::VectorXd p(num_parameters());
  p.head(d) = loc_;
  if (is_full_rank()) {
    int k = d;
    for (int i = 0; i < d; ++i)
      for (int j = 0; j <= i; ++j) p(k++) = i == j ? std::log(factor_(i, i)) : factor_(i, j);
  } else {
    p.tail(d) = scale_.array().log().matrix();
  }
  return p;
}

VariationalDistribution VariationalDistribution::with_parameters(
    const Eigen::VectorXd& params) const {
  const int d = dim();
  if (params.size() != num_parameters())
    throw std::invalid_argument("parameter vector has wrong length");
  if (!params.allFinite()) throw std::invalid_argument("parameters must be finite");
  Eigen::VectorXd loc = params.head(d);
  if (is_full_rank()) {
    Eigen::MatrixXd l = Eigen::MatrixXd::Zero(d, d);
    int k = d;
    for (int i = 0; i < d; ++i)
      for (int j = 0; j <= i; ++j) {
        l(i, j) = i == j ? std::exp(params(k)) : params(k);
        ++k;
      }
    return VariationalDistribution(kind_, std::move(loc), {}, std::move(l), df_);
  }
  Eigen::VectorXd scale = params.tail(d).array().exp().matrix();
  return VariationalDistribution(kind_, std::move(loc), std::move(scale), {}, df_);
}

VariationalDistribution VariationalDistribution::scaled(double c) const {
  require_positive(c, "scale factor");
  return VariationalDistribution(kind_, c * loc_, c * scale_, c * factor_, df_);
}

double log_density(const VariationalDistribution& dist, const Eigen::VectorXd& x) {
  return dist.log_density(x);
}

SampleBatch sample(const VariationalDistribution& dist, int T, std::uint64_t seed) {
  if (T < 1) throw std::invalid_argument("sample count must be at least 1");
  const int d = dist.dim();
  SampleBatch batch;
  batch.seed = seed;
  batch.base_noise.resize(T, d);
  const int mixing_cols =
      dist.kind() == VariationalKind::MeanFieldT ? d : (dist.kind() == VariationalKind::FullRankT ? 1 : 0);
  batch.mixing.resize(mixing_cols > 0 ? T : 0, mixing_cols);
  const double h = dist.df();
  parallel_for(static_cast<std::size_t>(T), [&](std::size_t t) {
    Rng rng(seed, t);
    const auto row = static_cast<Eigen::Index>(t);
    for (int i = 0; i < d; ++i) batch.base_noise(row, i) = rng.normal();
    if (mixing_cols == 0) return;
    for (int c = 0; c < mixing_cols; ++c) batch.mixing(row, c) = rng.chi_square(h);
    for (int i = 0; i < d; ++i) {
      const double v = batch.mixing(row, mixing_cols == 1 ? 0 : i);
      batch.base_noise(row, i) /= std::sqrt(v / h);
    }
  });
  batch.draws = dist.transform(batch.base_noise);
  return batch;
}

Moments moments(const VariationalDistribution& dist) {
  double inflation = 1.0;
  if (dist.is_t()) {
    if (dist.df() <= 2.0) throw std::domain_error("variance undefined");
    inflation = dist.df() / (dist.df() - 2.0);
  }
  Moments m;
  m.mean = dist.loc();
  if (dist.is_full_rank()) {
    const Eigen::MatrixXd l = dist.factor();
    m.cov = inflation * l * l.transpose();
  } else {
    m.cov = (inflation * dist.scale().array().square()).matrix().asDiagonal();
  }
  return m;
}

}  // namespace vibound
