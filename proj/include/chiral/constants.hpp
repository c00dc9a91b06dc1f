#pragma once

#include <complex>
#include <numbers>

namespace chiral {

using cplx = std::complex<double>;

inline constexpr double kSpeedOfLight = 299792458.0;
inline constexpr double kMu0 = 4.0e-7 * std::numbers::pi;
inline constexpr double kEps0 = 1.0 / (kMu0 * kSpeedOfLight * kSpeedOfLight);
inline constexpr cplx kJ{0.0, 1.0};

inline constexpr double angular_frequency(double frequency) { return 2.0 * std::numbers::pi * frequency; }
inline constexpr double free_space_wavenumber(double frequency) { return angular_frequency(frequency) / kSpeedOfLight; }
inline constexpr double free_space_wavelength(double frequency) { return kSpeedOfLight / frequency; }

}  // namespace chiral
