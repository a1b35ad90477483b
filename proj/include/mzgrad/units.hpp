#pragma once

// Physical constants (SI) and the unit conventions used throughout:
// lengths in um where noted, potentials in nK (energy / k_B), energies of
// eigenmodes in Hz (energy / h), phases in rad, rates in rad/s.

namespace mzgrad::units {

inline constexpr double hbar = 1.054571817e-34;  // J s
inline constexpr double h_planck = 6.62607015e-34;  // J s
inline constexpr double k_boltzmann = 1.380649e-23;  // J/K
inline constexpr double amu = 1.66054e-27;  // kg

inline constexpr double mass_k39 = 39.0 * amu;  // kg

inline constexpr double pi = 3.14159265358979323846;
inline constexpr double two_pi = 2.0 * pi;

// 1 nK expressed in Hz: k_B * 1e-9 / h
inline constexpr double nk_to_hz = k_boltzmann * 1e-9 / h_planck;

inline constexpr double nm_to_um = 1e-3;
inline constexpr double um_to_m = 1e-6;

}  // namespace mzgrad::units
