#include "ehdet/detection.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include <boost/math/quadrature/gauss_kronrod.hpp>

namespace ehdet {

RocCoefficients roc_coefficients(double p_f, double p_d) {
  if (!(0.0 < p_f && p_f < p_d && p_d < 1.0)) {
    throw std::domain_error("roc_coefficients requires 0 < p_f < p_d < 1");
  }
  RocCoefficients c;
  c.a = p_f * (1.0 - p_d) + p_d * (p_d - p_f);
  c.b = p_d * (1.0 - p_d);
  c.c = p_d * (1.0 - p_f) - p_f * (p_d - p_f);
  c.d = p_f * (1.0 - p_f);
  return c;
}

GaussianPair moment_match(double p_f, double p_d, double power, double gain, double sigma_w2) {
  const double pg = power * gain;
  const double amp = std::sqrt(pg);
  return GaussianPair{
      .m0 = amp * p_f,
      .m1 = amp * p_d,
      .s0 = pg * p_f * (1.0 - p_f) + sigma_w2,
      .s1 = pg * p_d * (1.0 - p_d) + sigma_w2,
  };
}

double j_gaussian(const GaussianPair& g) {
  const double dm2 = (g.m1 - g.m0) * (g.m1 - g.m0);
  return (g.s1 + dm2) / g.s0 + (g.s0 + dm2) / g.s1;
}

double j_sensor(double gain, double power, const RocCoefficients& c, double sigma_w2) {
  const double x = gain * power;
  return (sigma_w2 + c.a * x) / (sigma_w2 + c.b * x) + (sigma_w2 + c.c * x) / (sigma_w2 + c.d * x);
}

double j_sensor_limit(const RocCoefficients& c) { return c.a / c.b + c.c / c.d; }

double q_function(double x) { return 0.5 * std::erfc(x / std::numbers::sqrt2); }

LocalRoc lrt_local_probabilities(double signal_amplitude, double sigma_v, double tau) {
  if (!(sigma_v > 0.0)) throw std::domain_error("lrt_local_probabilities requires sigma_v > 0");
  return LocalRoc{.p_f = q_function(tau / sigma_v), .p_d = q_function((tau - signal_amplitude) / sigma_v)};
}

double mixture_j_divergence(double p_f, double p_d, double power, double gain, double sigma_w2) {
  const double amp = std::sqrt(std::max(power * gain, 0.0));
  if (amp == 0.0 || p_f == p_d) return 0.0;
  const double sd = std::sqrt(sigma_w2);
  const double log_norm = -0.5 * std::log(2.0 * std::numbers::pi * sigma_w2);

  // log of q N(y; amp, s) + (1 - q) N(y; 0, s)
  auto log_mix = [&](double y, double q) {
    const double la = std::log(q) + log_norm - 0.5 * (y - amp) * (y - amp) / sigma_w2;
    const double lb = std::log1p(-q) + log_norm - 0.5 * y * y / sigma_w2;
    const double hi = std::max(la, lb);
    return hi + std::log(std::exp(la - hi) + std::exp(lb - hi));
  };
  auto integrand = [&](double y) {
    const double phi_a = std::exp(log_norm - 0.5 * (y - amp) * (y - amp) / sigma_w2);
    const double phi_0 = std::exp(log_norm - 0.5 * y * y / sigma_w2);
    const double diff = (p_d - p_f) * (phi_a - phi_0);
    return diff * (log_mix(y, p_d) - log_mix(y, p_f));
  };

  const double lo = -14.0 * sd;
  const double hi = amp + 14.0 * sd;
  return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(integrand, lo, hi, 15, 1e-13);
}

}  // namespace ehdet
