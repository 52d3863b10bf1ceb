#include "esvo/student_t.hpp"

#include <Eigen/Cholesky>
#include <boost/math/special_functions/digamma.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "esvo/error.hpp"

namespace esvo {

void ResidualModel::validate() const {
  if (!(scale > 0.0)) throw Error(ErrorCode::kInvalidArgument, "residual model scale must be positive");
  if (!(dof > 1.0)) throw Error(ErrorCode::kInvalidArgument, "residual model dof must exceed 1");
}

double student_t_log_pdf(double x, const ResidualModel& m) {
  const double z = (x - m.mu) / m.scale;
  return std::lgamma(0.5 * (m.dof + 1.0)) - std::lgamma(0.5 * m.dof) -
         0.5 * std::log(m.dof * std::numbers::pi) - std::log(m.scale) -
         0.5 * (m.dof + 1.0) * std::log1p(z * z / m.dof);
}

double student_t_nll(std::span<const double> samples, const ResidualModel& model) {
  const double norm = std::lgamma(0.5 * (model.dof + 1.0)) - std::lgamma(0.5 * model.dof) -
                      0.5 * std::log(model.dof * std::numbers::pi) - std::log(model.scale);
  const double inv = 1.0 / (model.scale * model.scale * model.dof);
  double acc = 0.0;
  for (double x : samples) acc += std::log1p((x - model.mu) * (x - model.mu) * inv);
  return -static_cast<double>(samples.size()) * norm + 0.5 * (model.dof + 1.0) * acc;
}

GaussianFit fit_gaussian(std::span<const double> samples) {
  if (samples.empty()) throw Error(ErrorCode::kInvalidArgument, "no samples");
  double mean = 0.0;
  for (double x : samples) mean += x;
  mean /= static_cast<double>(samples.size());
  double var = 0.0;
  for (double x : samples) var += (x - mean) * (x - mean);
  var /= static_cast<double>(samples.size());
  return {mean, std::sqrt(var)};
}

double gaussian_nll(std::span<const double> samples, const GaussianFit& fit) {
  const double var = fit.stddev * fit.stddev;
  double nll = 0.0;
  for (double x : samples)
    nll += 0.5 * std::log(2.0 * std::numbers::pi * var) + 0.5 * (x - fit.mean) * (x - fit.mean) / var;
  return nll;
}

namespace {

// Parameters are (mu, log scale, log dof), which keeps scale and dof positive
// without constraints.
using FitParams = Eigen::Vector3d;

ResidualModel to_model(const FitParams& p) { return {p[0], std::exp(p[1]), std::exp(p[2])}; }

// Analytic gradient of the negative log-likelihood.
FitParams nll_gradient(std::span<const double> samples, const FitParams& p) {
  const ResidualModel m = to_model(p);
  const double n = static_cast<double>(samples.size());
  double s_z = 0.0, s_z2 = 0.0, s_log = 0.0;
  for (double x : samples) {
    const double z = (x - m.mu) / m.scale;
    const double d = m.dof + z * z;
    s_z += z / d;
    s_z2 += z * z / d;
    s_log += std::log1p(z * z / m.dof);
  }
  using boost::math::digamma;
  FitParams g;
  g[0] = -(m.dof + 1.0) / m.scale * s_z;
  g[1] = n - (m.dof + 1.0) * s_z2;
  const double d_dof = -n * 0.5 * (digamma(0.5 * (m.dof + 1.0)) - digamma(0.5 * m.dof) - 1.0 / m.dof) +
                       0.5 * s_log - 0.5 * (m.dof + 1.0) / m.dof * s_z2;
  g[2] = m.dof * d_dof;
  return g;
}

}  // namespace

ResidualModel fit_residual_model(std::span<const double> samples) {
  constexpr std::size_t kMinSamples = 1000;
  constexpr int kMaxIterations = 100;
  constexpr double kLogDofMin = -3.0;  // dof in [0.05, 500]
  constexpr double kLogDofMax = 6.2;

  if (samples.size() < kMinSamples)
    throw Error(ErrorCode::kInvalidArgument, "residual model fit needs at least 1000 samples");
  const auto [lo, hi] = std::minmax_element(samples.begin(), samples.end());
  if (*lo == *hi) throw Error(ErrorCode::kZeroSpread, "zero spread");

  // Start from a robust location/scale: median and scaled MAD.
  std::vector<double> sorted(samples.begin(), samples.end());
  std::nth_element(sorted.begin(), sorted.begin() + sorted.size() / 2, sorted.end());
  const double median = sorted[sorted.size() / 2];
  for (double& v : sorted) v = std::abs(v - median);
  std::nth_element(sorted.begin(), sorted.begin() + sorted.size() / 2, sorted.end());
  double mad = 1.4826 * sorted[sorted.size() / 2];
  if (!(mad > 0.0)) mad = fit_gaussian(samples).stddev;

  // Damped Newton on the exact likelihood; the Hessian comes from central
  // differences of the analytic gradient.
  FitParams p(median, std::log(mad), std::log(4.0));
  double nll = student_t_nll(samples, to_model(p));
  double damping = 1e-3;
  for (int it = 0; it < kMaxIterations; ++it) {
    const FitParams g = nll_gradient(samples, p);
    Eigen::Matrix3d H;
    for (int k = 0; k < 3; ++k) {
      const double h = 1e-5 * std::max(1.0, std::abs(p[k]));
      FitParams a = p, b = p;
      a[k] += h;
      b[k] -= h;
      H.col(k) = (nll_gradient(samples, a) - nll_gradient(samples, b)) / (2.0 * h);
    }
    H = 0.5 * (H + H.transpose());

    bool improved = false;
    for (int attempt = 0; attempt < 30 && !improved; ++attempt) {
      Eigen::Matrix3d A = H;
      A.diagonal() += damping * (H.diagonal().cwiseAbs() + Eigen::Vector3d::Constant(1e-9));
      const FitParams step = A.ldlt().solve(-g);
      FitParams q = p + step;
      q[2] = std::clamp(q[2], kLogDofMin, kLogDofMax);
      const double q_nll = student_t_nll(samples, to_model(q));
      if (std::isfinite(q_nll) && q_nll <= nll) {
        const double change = nll - q_nll;
        p = q;
        nll = q_nll;
        damping = std::max(damping / 10.0, 1e-9);
        improved = true;
        if (change <= 1e-12 * std::abs(nll) && step.norm() < 1e-9) return to_model(p);
      } else {
        damping *= 10.0;
      }
    }
    if (!improved || g.norm() <= 1e-9 * static_cast<double>(samples.size())) break;
  }
  const ResidualModel m = to_model(p);
  if (!(m.scale > 0.0)) throw Error(ErrorCode::kZeroSpread, "zero spread");
  return m;
}

double student_t_stddev(double scale, double dof) {
  if (!(dof > 2.0)) throw Error(ErrorCode::kUndefinedVariance, "undefined variance");
  return scale * std::sqrt(dof / (dof - 2.0));
}

StudentT filter_update(const StudentT& a, const StudentT& b) {
  if (!(a.scale > 0.0) || !(b.scale > 0.0))
    throw Error(ErrorCode::kInvalidArgument, "t-filter scales must be positive");
  const double sa2 = a.scale * a.scale;
  const double sb2 = b.scale * b.scale;
  const double sum = sa2 + sb2;
  const double nu = std::min(a.dof, b.dof);
  const double dmu = a.mu - b.mu;
  StudentT post;
  post.mu = (sa2 * b.mu + sb2 * a.mu) / sum;
  const double s2 = (nu + dmu * dmu / sum) / (nu + 1.0) * (sa2 * sb2 / sum);
  post.scale = std::sqrt(s2);
  post.dof = nu + 1.0;
  return post;
}

}  // namespace esvo
