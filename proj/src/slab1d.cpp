#include <chiral/slab1d.hpp>

#include <chiral/errors.hpp>

#include <unsupported/Eigen/MatrixFunctions>

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace chiral::slab {

namespace {

using Matrix4c = Eigen::Matrix<cplx, 4, 4>;
using Vector4c = Eigen::Matrix<cplx, 4, 1>;

double port_impedance(const BiIsotropicMaterial& m, double frequency, const char* side) {
  if (m.is_magnetoelectric()) {
    throw UnsupportedPortError(std::string(side) + " embedding must be achiral (kappa = chi = 0)");
  }
  if (m.sigma != 0.0) {
    throw UnsupportedPortError(std::string(side) + " embedding is lossy: port waves are evanescent");
  }
  return std::real(wave_constants(m, frequency).eta);
}

/// Linear -> fixed-frame circular basis: columns u1 = (x - j y)/sqrt2, u2 = (x + j y)/sqrt2.
JonesMatrix circular_basis() {
  const double s = 1.0 / std::numbers::sqrt2;
  JonesMatrix u;
  u << s, s, cplx{0.0, -s}, cplx{0.0, s};
  return u;
}

struct ScalarResponse {
  cplx t;
  cplx r;
};

/// Recursive Fabry-Perot (Rouard) sum for one fixed-frame circular polarization.
/// `forward_plus` selects whether the forward wave is the k+ eigenwave (u1) or k- (u2).
ScalarResponse circular_response(const LayerStack& s, bool forward_plus) {
  const std::size_t n = s.layers.size();
  std::vector<cplx> eta(n + 2);
  std::vector<cplx> k_forward(n + 2), k_backward(n + 2);
  eta.front() = wave_constants(s.embedding_in, s.frequency).eta;
  eta.back() = wave_constants(s.embedding_out, s.frequency).eta;
  for (std::size_t i = 0; i < n; ++i) {
    const WaveConstants w = wave_constants(s.layers[i].material, s.frequency);
    eta[i + 1] = w.eta;
    k_forward[i + 1] = forward_plus ? w.k_plus : w.k_minus;
    k_backward[i + 1] = forward_plus ? w.k_minus : w.k_plus;
  }

  auto fresnel_r = [&](std::size_t j) { return (eta[j + 1] - eta[j]) / (eta[j + 1] + eta[j]); };
  auto fresnel_t = [&](std::size_t j) { return 2.0 * eta[j + 1] / (eta[j + 1] + eta[j]); };

  // interface j separates medium j and j+1; start from the last one
  cplx big_r = fresnel_r(n);
  cplx big_t = fresnel_t(n);
  for (std::size_t j = n; j-- > 0;) {
    const double d = s.layers[j].thickness;
    const cplx forward_phase = std::exp(-kJ * k_forward[j + 1] * d);
    const cplx round_trip = forward_phase * std::exp(-kJ * k_backward[j + 1] * d);
    const cplx r = fresnel_r(j);
    const cplx denom = 1.0 + r * big_r * round_trip;
    big_t = fresnel_t(j) * big_t * forward_phase / denom;
    big_r = (r + big_r * round_trip) / denom;
  }
  return {big_t, big_r};
}

Matrix4c layer_generator(const BiIsotropicMaterial& m, double frequency) {
  const double omega = angular_frequency(frequency);
  const Coupling c = derive_coupling(m, frequency);
  const cplx eps = complex_permittivity(m, frequency);
  const double mu = permeability(m);
  const cplx jw = kJ * omega;
  Matrix4c g = Matrix4c::Zero();
  // d/dz of (Ex, Ey, Hx, Hy) from curl E = -jw(zeta E + mu H), curl H = jw(eps E + xi H)
  g(0, 1) = -jw * c.zeta;
  g(0, 3) = -jw * mu;
  g(1, 0) = jw * c.zeta;
  g(1, 2) = jw * mu;
  g(2, 1) = jw * eps;
  g(2, 3) = jw * c.xi;
  g(3, 0) = -jw * eps;
  g(3, 2) = -jw * c.xi;
  return g;
}

Vector4c forward_state(cplx ex, cplx ey, double eta) { return {ex, ey, -ey / eta, ex / eta}; }
Vector4c backward_state(cplx ex, cplx ey, double eta) { return {ex, ey, ey / eta, -ex / eta}; }

}  // namespace

void validate(const LayerStack& s) {
  if (!(s.frequency > 0.0) || !std::isfinite(s.frequency)) {
    throw InvalidMaterialError("stack frequency must be positive");
  }
  chiral::validate(s.embedding_in);
  chiral::validate(s.embedding_out);
  for (const Layer& layer : s.layers) {
    chiral::validate(layer.material);
    if (!(layer.thickness > 0.0) || !std::isfinite(layer.thickness)) {
      throw InvalidMaterialError("layer thickness must be positive");
    }
  }
  port_impedance(s.embedding_in, s.frequency, "input");
  port_impedance(s.embedding_out, s.frequency, "output");
}

StackResponse stack_jones(const LayerStack& stack) {
  for (const Layer& layer : stack.layers) {
    if (layer.material.chi != 0.0) return stack_jones_transfer(stack);
  }
  return stack_jones_circular(stack);
}

StackResponse stack_jones_circular(const LayerStack& stack) {
  validate(stack);
  for (const Layer& layer : stack.layers) {
    if (layer.material.chi != 0.0) {
      throw std::invalid_argument("circular-basis route requires chi = 0 in every layer");
    }
  }
  const ScalarResponse plus = circular_response(stack, true);
  const ScalarResponse minus = circular_response(stack, false);
  const JonesMatrix u = circular_basis();
  const JonesMatrix u_inv = u.inverse();
  StackResponse out;
  out.transmission = u * Eigen::Vector2cd(plus.t, minus.t).asDiagonal() * u_inv;
  out.reflection = u * Eigen::Vector2cd(plus.r, minus.r).asDiagonal() * u_inv;
  return out;
}

StackResponse stack_jones_transfer(const LayerStack& stack) {
  validate(stack);
  const double eta_in = port_impedance(stack.embedding_in, stack.frequency, "input");
  const double eta_out = port_impedance(stack.embedding_out, stack.frequency, "output");

  Matrix4c phi = Matrix4c::Identity();
  for (const Layer& layer : stack.layers) {
    const Matrix4c g = layer_generator(layer.material, stack.frequency) * layer.thickness;
    phi = Matrix4c(g.exp()) * phi;
  }

  // unknowns (rx, ry, tx, ty): phi (inc + refl) = trans
  Matrix4c system;
  system.col(0) = phi * backward_state(1.0, 0.0, eta_in);
  system.col(1) = phi * backward_state(0.0, 1.0, eta_in);
  system.col(2) = -forward_state(1.0, 0.0, eta_out);
  system.col(3) = -forward_state(0.0, 1.0, eta_out);
  const Eigen::PartialPivLU<Matrix4c> lu(system);

  StackResponse out;
  for (int pol = 0; pol < 2; ++pol) {
    const Vector4c incident = pol == 0 ? forward_state(1.0, 0.0, eta_in) : forward_state(0.0, 1.0, eta_in);
    const Vector4c x = lu.solve(-phi * incident);
    out.reflection.col(pol) << x(0), x(1);
    out.transmission.col(pol) << x(2), x(3);
  }
  return out;
}

double rotation_hint(const LayerStack& stack) {
  double total = 0.0;
  for (const Layer& layer : stack.layers) total += rotation_rate(layer.material, stack.frequency) * layer.thickness;
  return total;
}

Polarimetry polarimetry(const JonesMatrix& t, std::optional<double> unwrap_hint) {
  const cplx ex = t(0, 0);
  const cplx ey = -t(1, 0);  // mirror y so the reported sense is dextro-positive
  if (std::abs(ex) + std::abs(ey) < 1e-12) {
    throw UndefinedRotationError("transmitted field is extinguished; rotation is undefined");
  }
  Polarimetry p;
  p.co_power = std::norm(ex);
  p.cross_power = std::norm(ey);
  const double s0 = p.co_power + p.cross_power;
  const double s1 = p.co_power - p.cross_power;
  const double s2 = 2.0 * std::real(ex * std::conj(ey));
  const double s3 = 2.0 * std::imag(std::conj(ex) * ey);
  p.rotation = 0.5 * std::atan2(s2, s1);
  if (p.rotation <= -std::numbers::pi / 2) p.rotation += std::numbers::pi;
  p.ellipticity = 0.5 * std::asin(std::clamp(s3 / s0, -1.0, 1.0));
  if (unwrap_hint) {
    p.turns = static_cast<int>(std::lround((*unwrap_hint - p.rotation) / std::numbers::pi));
    p.rotation += p.turns * std::numbers::pi;
  }
  return p;
}

}  // namespace chiral::slab
