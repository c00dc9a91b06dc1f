#include <chiral/media.hpp>

#include <chiral/errors.hpp>

#include <algorithm>
#include <cmath>
#include <sstream>

namespace chiral {

namespace {

bool all_finite(const BiIsotropicMaterial& m) {
  return std::isfinite(m.eps_r) && std::isfinite(m.sigma) && std::isfinite(m.mu_r) &&
         std::isfinite(m.kappa) && std::isfinite(m.chi);
}

void check_frequency(double frequency) {
  if (!(frequency > 0.0) || !std::isfinite(frequency)) {
    throw InvalidMaterialError("frequency must be positive and finite");
  }
}

}  // namespace

double WaveConstants::attenuation() const { return -std::imag(k_plus - alpha_tilde); }

void validate(const BiIsotropicMaterial& m) {
  if (!all_finite(m)) throw InvalidMaterialError("material parameters must be finite");
  std::ostringstream msg;
  if (!(m.eps_r > 0.0)) msg << "eps_r must be > 0 (got " << m.eps_r << "); ";
  if (!(m.mu_r > 0.0)) msg << "mu_r must be > 0 (got " << m.mu_r << "); ";
  if (m.sigma < 0.0) msg << "sigma must be >= 0 (got " << m.sigma << "); ";
  if (!msg.str().empty()) throw InvalidMaterialError(msg.str());
}

cplx complex_permittivity(const BiIsotropicMaterial& m, double frequency) {
  return {kEps0 * m.eps_r, -m.sigma / angular_frequency(frequency)};
}

double permeability(const BiIsotropicMaterial& m) { return kMu0 * m.mu_r; }

Coupling derive_coupling(const BiIsotropicMaterial& m, double frequency) {
  validate(m);
  check_frequency(frequency);
  const double root = std::sqrt(kEps0 * kMu0);
  return {cplx{m.chi, -m.kappa} * root, cplx{m.chi, m.kappa} * root};
}

double rotation_rate(const BiIsotropicMaterial& m, double frequency) {
  return angular_frequency(frequency) * m.kappa * std::sqrt(kEps0 * kMu0);
}

WaveConstants wave_constants(const BiIsotropicMaterial& m, double frequency) {
  const Coupling c = derive_coupling(m, frequency);
  const double omega = angular_frequency(frequency);
  const cplx eps = complex_permittivity(m, frequency);
  const double mu = permeability(m);

  WaveConstants w;
  w.xi = c.xi;
  w.zeta = c.zeta;
  w.alpha_tilde = rotation_rate(m, frequency);
  const double coupling2 = kEps0 * kMu0 * (m.chi * m.chi + m.kappa * m.kappa);
  // sigma >= 0 keeps every radicand in the closed lower half plane, so the
  // principal square root already has Re >= 0 and Im <= 0.
  w.k_tilde0 = omega * std::sqrt(eps * mu - coupling2);

  const cplx radicand = w.alpha_tilde * w.alpha_tilde + w.k_tilde0 * w.k_tilde0;
  if (radicand == cplx{0.0, 0.0}) {
    throw DegenerateMaterialError("alpha~^2 + k0~^2 vanishes: eigenwave branch is ambiguous");
  }
  if (!(std::real(radicand) > 0.0)) {
    throw DegenerateMaterialError("alpha~^2 + k0~^2 has non-positive real part: no propagating eigenwaves");
  }
  const cplx root = std::sqrt(radicand);
  w.k_plus = w.alpha_tilde + root;
  w.k_minus = -w.alpha_tilde + root;
  w.eta = std::sqrt(mu / eps);
  return w;
}

double max_wavenumber(const BiIsotropicMaterial& m, double frequency) {
  const WaveConstants w = wave_constants(m, frequency);
  return std::max(std::abs(std::real(w.k_plus)), std::abs(std::real(w.k_minus)));
}

}  // namespace chiral
