#pragma once

#include <chiral/constants.hpp>

namespace chiral {

/// Scalar bi-isotropic medium: D = eps E + xi H, B = zeta E + mu H.
struct BiIsotropicMaterial {
  double eps_r = 1.0;
  double sigma = 0.0;  // S/m
  double mu_r = 1.0;
  double kappa = 0.0;  // chirality
  double chi = 0.0;    // Tellegen

  static BiIsotropicMaterial vacuum() { return {}; }

  bool is_chiral() const { return kappa != 0.0; }
  bool is_magnetoelectric() const { return kappa != 0.0 || chi != 0.0; }

  friend bool operator==(const BiIsotropicMaterial&, const BiIsotropicMaterial&) = default;
};

struct Coupling {
  cplx xi;    // s/m
  cplx zeta;  // s/m
};

struct WaveConstants {
  double alpha_tilde = 0.0;  // rad/m
  cplx k_tilde0;             // rad/m
  cplx k_plus;               // wavenumber of the Beltrami wave with curl E = +k E
  cplx k_minus;              // wavenumber of the Beltrami wave with curl E = -k E
  cplx eta;                  // |E|/|H| of both eigenwaves, sqrt(mu/eps)
  cplx xi;
  cplx zeta;

  /// Common attenuation constant (Np/m) of the two circular eigenwaves.
  double attenuation() const;
};

/// Throws InvalidMaterialError on non-finite or non-physical parameters.
void validate(const BiIsotropicMaterial& m);

/// eps0 eps_r - j sigma / omega, e^{+j omega t} convention.
cplx complex_permittivity(const BiIsotropicMaterial& m, double frequency);
double permeability(const BiIsotropicMaterial& m);

Coupling derive_coupling(const BiIsotropicMaterial& m, double frequency);

/// Chiral rotation rate omega kappa sqrt(eps0 mu0).
double rotation_rate(const BiIsotropicMaterial& m, double frequency);

/// Dispersion constants of the modified Helmholtz equation
///   lap E + 2 alpha curl E + k0~^2 E = 0.
/// The square-root branch is chosen with Im <= 0 so forward waves decay.
/// Throws DegenerateMaterialError when alpha^2 + k0~^2 vanishes or has a
/// non-positive real part.
WaveConstants wave_constants(const BiIsotropicMaterial& m, double frequency);

/// Largest real eigen-wavenumber of the medium; sets the shortest wavelength on a grid.
double max_wavenumber(const BiIsotropicMaterial& m, double frequency);

}  // namespace chiral
