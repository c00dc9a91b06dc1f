#pragma once

#include <chiral/media.hpp>

#include <Eigen/Dense>

#include <optional>
#include <vector>

namespace chiral::slab {

/// Jones matrices use the column = incident, row = outgoing convention in the
/// fixed (x, y) basis with propagation along +z: t_yx = T(1, 0).
template <typename Scalar>
using Jones = Eigen::Matrix<std::complex<Scalar>, 2, 2>;
using JonesMatrix = Jones<double>;

struct Layer {
  BiIsotropicMaterial material;
  double thickness = 0.0;  // m
};

struct LayerStack {
  BiIsotropicMaterial embedding_in = BiIsotropicMaterial::vacuum();
  std::vector<Layer> layers;
  BiIsotropicMaterial embedding_out = BiIsotropicMaterial::vacuum();
  double frequency = 2.45e9;
};

struct StackResponse {
  JonesMatrix transmission;
  JonesMatrix reflection;
};

/// Normal-incidence response of the stack. Tellegen-free stacks are solved
/// per circular eigenwave with a recursive Fabry-Perot sum; stacks with any
/// chi != 0 layer fall back to the 4x4 field-matching transfer matrix.
StackResponse stack_jones(const LayerStack& stack);

/// Circular-basis route; throws std::invalid_argument if a layer has chi != 0.
StackResponse stack_jones_circular(const LayerStack& stack);

/// 4x4 transfer matrix on (Ex, Ey, Hx, Hy); valid for any bi-isotropic layer.
StackResponse stack_jones_transfer(const LayerStack& stack);

/// Throws on invalid layers/thicknesses and on ports that are chiral or lossy.
void validate(const LayerStack& stack);

/// Accumulated chiral rotation sum(alpha~ d); used to unwrap polarimetry().
double rotation_hint(const LayerStack& stack);

struct Polarimetry {
  double rotation = 0.0;     // rad
  double ellipticity = 0.0;  // rad
  double co_power = 0.0;
  double cross_power = 0.0;
  int turns = 0;  // multiples of pi added while unwrapping
};

/// Polarization state of the wave transmitted for an x-polarized input.
///
/// Angles follow the polarimetric sign convention: a positive rotation turns
/// the polarization plane from +x toward -y, i.e. clockwise for an observer
/// facing the source (dextrorotatory). With this convention a positive kappa
/// yields a positive rotation alpha~ d. Ellipticity is positive for the
/// circular sense of the curl E = +k E eigenwave.
///
/// Without a hint the rotation lies in (-pi/2, pi/2]; with a hint it is
/// shifted by the multiple of pi that brings it closest to the hint.
Polarimetry polarimetry(const JonesMatrix& t, std::optional<double> unwrap_hint = std::nullopt);

/// Jones matrix of a lossless rotator by `angle` in the convention above.
template <typename Scalar = double>
Jones<Scalar> rotator(Scalar angle) {
  using std::cos;
  using std::sin;
  Jones<Scalar> r;
  r << cos(angle), sin(angle), -sin(angle), cos(angle);
  return r;
}

}  // namespace chiral::slab
