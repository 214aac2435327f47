// Copyright 2026 The matnav Developers
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//   http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or
// implied. See the License for the specific language governing
// permissions and limitations under the License.

#pragma once

/// @file
/// Polycrystalline moduli, sound velocities and Debye temperature from a
/// single-crystal stiffness tensor.

#include <matnav/core.hpp>

#include <Eigen/Dense>

#include <string>

namespace matnav {

namespace constants {
inline constexpr double planck = 6.62607015e-34;    ///< J s (exact, SI 2019)
inline constexpr double boltzmann = 1.380649e-23;   ///< J/K (exact, SI 2019)
} // namespace constants

using Matrix6d = Eigen::Matrix<double, 6, 6>;

/// 6x6 stiffness matrix in Voigt notation, GPa.
class ElasticTensor {
public:
    /// Throws Error(AsymmetricTensor) when |C - C^T| exceeds 1e-6 GPa
    /// anywhere, Error(InvalidArgument) on non-finite entries.
    explicit ElasticTensor(const Matrix6d& c);

    /// (C + C^T) / 2.
    static ElasticTensor symmetrized(const Matrix6d& c);

    /// Cubic-symmetry tensor; isotropic when c44 = (c11 - c12) / 2.
    static ElasticTensor cubic(double c11, double c12, double c44);

    const Matrix6d& matrix() const noexcept { return c_; }
    double operator()(int i, int j) const { return c_(i, j); }

    ElasticTensor scaled(double k) const { return ElasticTensor(c_ * k); }

private:
    Matrix6d c_;
};

struct ModuliSet {
    double bulk = 0;  ///< Hill, GPa
    double shear = 0; ///< Hill, GPa
    double bulk_voigt = 0, bulk_reuss = 0;
    double shear_voigt = 0, shear_reuss = 0;
    std::string scheme = "voigt-reuss-hill";
};

/// Throws Error(SingularTensor) when cond(C) >= 1e12 and
/// Error(NonPositiveModulus) when any bound or average is not positive.
ModuliSet vrh_moduli(const ElasticTensor& t);

struct VelocitySet {
    double v_l = 0; ///< longitudinal, m/s
    double v_t = 0; ///< transverse, m/s
    double v_s = 0; ///< average, m/s
};

/// Moduli in GPa, density in g/cm^3. Throws Error(NonPositiveDensity).
VelocitySet sound_velocities(const ModuliSet& m, double density_g_cm3);

/// (h / k_B) (3n / (4 pi V))^(1/3) v_s with V in A^3 and v_s in m/s.
/// Throws Error(InvalidArgument) unless n >= 1, V > 0, v_s > 0.
double debye_temperature(double n, double volume_a3, double v_s);

struct DebyeEstimate {
    double density = 0; ///< g/cm^3
    ModuliSet moduli;
    VelocitySet velocities;
    double theta_d = 0; ///< K
};

/// density -> VRH moduli -> velocities -> Debye temperature. The atom
/// count and volume come from the same cell, `s`.
DebyeEstimate debye_estimate(const Structure& s, const ElasticTensor& t);

inline double debye_from_tensor(const Structure& s, const ElasticTensor& t) {
    return debye_estimate(s, t).theta_d;
}

} // namespace matnav
