#pragma once

// Local decision statistics and the moment-matched J-divergence objective.

namespace ehdet {

/// Coefficients of the rational J_n(g, P) surrogate:
///   J_n = (s + a g P)/(s + b g P) + (s + c g P)/(s + d g P),  s = sigma_w^2.
struct RocCoefficients {
  double a = 0.0;
  double b = 0.0;
  double c = 0.0;
  double d = 0.0;
};

/// Requires 0 < p_f < p_d < 1; throws std::domain_error otherwise.
RocCoefficients roc_coefficients(double p_f, double p_d);

/// Single Gaussians with the first two moments of the received-signal
/// mixtures under H0 (m0, s0) and H1 (m1, s1).
struct GaussianPair {
  double m0 = 0.0;
  double m1 = 0.0;
  double s0 = 1.0;
  double s1 = 1.0;
};

GaussianPair moment_match(double p_f, double p_d, double power, double gain, double sigma_w2);

/// J-divergence between N(m1, s1) and N(m0, s0).
double j_gaussian(const GaussianPair& pair);

double j_sensor(double gain, double power, const RocCoefficients& coeffs, double sigma_w2);

/// Limit of j_sensor as gain * power grows without bound: a/b + c/d.
double j_sensor_limit(const RocCoefficients& coeffs);

/// Standard Gaussian tail Q(x) = P(Z > x), via erfc.
double q_function(double x);

struct LocalRoc {
  double p_f = 0.0;
  double p_d = 0.0;
};

/// Operating point of the threshold test u = 1{A 1{H1} + v > tau}, v ~ N(0, sigma_v^2).
LocalRoc lrt_local_probabilities(double signal_amplitude, double sigma_v, double tau);

/// Exact J-divergence between the two-component received-signal mixtures
///   f(y|Hi) = q_i N(y; sqrt(P g), s) + (1 - q_i) N(y; 0, s),  q_0 = p_f, q_1 = p_d,
/// by adaptive Gauss-Kronrod quadrature. Used to gauge the surrogate; the
/// optimizer never calls it.
double mixture_j_divergence(double p_f, double p_d, double power, double gain, double sigma_w2);

}  // namespace ehdet
