#pragma once

#include <span>

namespace esvo {

/// Location/scale/dof of a univariate Student's t distribution.
struct ResidualModel {
  double mu = 0.0;
  double scale = 10.122;
  double dof = 2.207;

  /// Throws kInvalidArgument unless scale > 0 and dof > 1.
  void validate() const;
};

/// Fit reference values measured on simulated three-plane data.
inline constexpr ResidualModel kSimulationResidualModel{0.0, 10.122, 2.207};

/// Maximum-likelihood Student's t fit (damped Newton on location, log scale
/// and log dof). Needs >= 1000 samples; throws kZeroSpread when all samples
/// are equal. The dof is not constrained: very heavy-tailed data can yield
/// dof <= 1, which `validate()` rejects for use as a mapper model.
ResidualModel fit_residual_model(std::span<const double> samples);

double student_t_log_pdf(double x, const ResidualModel& model);
double student_t_nll(std::span<const double> samples, const ResidualModel& model);

struct GaussianFit {
  double mean;
  double stddev;
};
GaussianFit fit_gaussian(std::span<const double> samples);
double gaussian_nll(std::span<const double> samples, const GaussianFit& fit);

/// Standard deviation s * sqrt(nu / (nu - 2)). Throws kUndefinedVariance for nu <= 2.
double student_t_stddev(double scale, double dof);

/// Parameters of a t-distributed inverse depth hypothesis.
struct StudentT {
  double mu;
  double scale;
  double dof;
};

/// Approximate posterior of two t-distributed hypotheses (robust t-filter).
/// Throws kInvalidArgument for non-positive scales.
StudentT filter_update(const StudentT& prior, const StudentT& measurement);

}  // namespace esvo
