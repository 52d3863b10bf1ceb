#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

#include "esvo/error.hpp"
#include "esvo/student_t.hpp"

namespace esvo {
namespace {

template <class F>
ErrorCode error_code_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected an esvo::Error";
  return ErrorCode::kInvalidArgument;
}

std::vector<double> student_t_samples(double mu, double s, double nu, int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::student_t_distribution<double> t(nu);
  std::vector<double> out(n);
  for (double& v : out) v = mu + s * t(rng);
  return out;
}

TEST(Fit, RecoversSyntheticModel) {
  const std::vector<double> x = student_t_samples(0.0, 10.0, 2.2, 100000, 11);
  const ResidualModel m = fit_residual_model(x);
  EXPECT_GE(m.dof, 1.7);
  EXPECT_LE(m.dof, 2.9);
  EXPECT_NEAR(m.scale, 10.0, 2.0);
  EXPECT_NEAR(m.mu, 0.0, 0.5);
}

TEST(Fit, StudentBeatsGaussianOnHeavyTails) {
  const std::vector<double> x = student_t_samples(0.0, 10.0, 2.2, 20000, 12);
  EXPECT_LT(student_t_nll(x, fit_residual_model(x)), gaussian_nll(x, fit_gaussian(x)));
}

TEST(Fit, ZeroSpreadRejected) {
  const std::vector<double> zeros(5000, 0.0);
  EXPECT_EQ(error_code_of([&] { fit_residual_model(zeros); }), ErrorCode::kZeroSpread);
}

TEST(Fit, TooFewSamplesRejected) {
  const std::vector<double> x = student_t_samples(0.0, 1.0, 3.0, 10, 1);
  EXPECT_THROW(fit_residual_model(x), Error);
}

TEST(LogPdf, MatchesClosedForm) {
  // nu = 1: Cauchy with scale s.
  const ResidualModel cauchy{0.0, 2.0, 1.0};
  EXPECT_NEAR(student_t_log_pdf(3.0, cauchy), -std::log(M_PI * 2.0 * (1.0 + 9.0 / 4.0)), 1e-12);
}

TEST(Stddev, ReferenceValues) {
  EXPECT_NEAR(student_t_stddev(10.122, 2.207), 33.040, 33.040 * 1e-3);
  EXPECT_NEAR(student_t_stddev(17.277, 2.182), 59.763, 59.763 * 1e-3);
  EXPECT_NEAR(student_t_stddev(1.0, 1e9), 1.0, 1e-6);
  EXPECT_EQ(error_code_of([] { student_t_stddev(1.0, 2.0); }), ErrorCode::kUndefinedVariance);
}

TEST(FilterUpdate, EqualHypotheses) {
  const StudentT p = filter_update({0.0, 1.0, 3.0}, {0.0, 1.0, 3.0});
  EXPECT_NEAR(p.mu, 0.0, 1e-12);
  EXPECT_NEAR(p.scale * p.scale, 0.375, 1e-12);
  EXPECT_NEAR(p.dof, 4.0, 1e-12);
}

TEST(FilterUpdate, SymmetricMean) {
  EXPECT_NEAR(filter_update({0.0, 1.0, 3.0}, {1.0, 1.0, 3.0}).mu, 0.5, 1e-12);
}

TEST(FilterUpdate, MinPlusOneDof) {
  EXPECT_NEAR(filter_update({1.0, 1.0, 5.0}, {1.0, 1.0, 7.0}).dof, 6.0, 1e-12);
}

TEST(FilterUpdate, NonPositiveScaleRejected) {
  EXPECT_EQ(error_code_of([] { filter_update({0.0, 0.0, 3.0}, {0.0, 1.0, 3.0}); }), ErrorCode::kInvalidArgument);
}

TEST(ResidualModel, Validate) {
  EXPECT_NO_THROW(kSimulationResidualModel.validate());
  EXPECT_THROW((ResidualModel{0.0, 1.0, 1.0}.validate()), Error);
  EXPECT_THROW((ResidualModel{0.0, -1.0, 3.0}.validate()), Error);
}

}  // namespace
}  // namespace esvo
