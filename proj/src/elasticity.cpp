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

#include <matnav/elasticity.hpp>
#include <matnav/error.hpp>

#include <cmath>
#include <numbers>

namespace matnav {

ElasticTensor::ElasticTensor(const Matrix6d& c) : c_(c) {
    if (!c_.allFinite())
        throw Error(ErrorKind::InvalidArgument, "elastic tensor has non-finite entries");
    const double asym = (c_ - c_.transpose()).cwiseAbs().maxCoeff();
    if (asym > 1e-6)
        throw Error(ErrorKind::AsymmetricTensor,
                    "elastic tensor asymmetric by " + std::to_string(asym) + " GPa");
}

ElasticTensor ElasticTensor::symmetrized(const Matrix6d& c) {
    return ElasticTensor(Matrix6d((c + c.transpose()) / 2.0));
}

ElasticTensor ElasticTensor::cubic(double c11, double c12, double c44) {
    Matrix6d c = Matrix6d::Zero();
    for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j)
            c(i, j) = i == j ? c11 : c12;
        c(i + 3, i + 3) = c44;
    }
    return ElasticTensor(c);
}

ModuliSet vrh_moduli(const ElasticTensor& t) {
    const Matrix6d& c = t.matrix();
    Eigen::JacobiSVD<Matrix6d> svd(c);
    const auto& sv = svd.singularValues();
    const double smax = sv(0), smin = sv(5);
    if (!(smin > 0) || smax / smin >= 1e12)
        throw Error(ErrorKind::SingularTensor, "elastic tensor is singular or ill-conditioned");
    const Matrix6d s = c.inverse();

    ModuliSet m;
    m.bulk_voigt = (c(0, 0) + c(1, 1) + c(2, 2) + 2.0 * (c(0, 1) + c(0, 2) + c(1, 2))) / 9.0;
    m.shear_voigt = (c(0, 0) + c(1, 1) + c(2, 2) - (c(0, 1) + c(0, 2) + c(1, 2)) +
                     3.0 * (c(3, 3) + c(4, 4) + c(5, 5))) /
                    15.0;
    m.bulk_reuss = 1.0 / (s(0, 0) + s(1, 1) + s(2, 2) + 2.0 * (s(0, 1) + s(0, 2) + s(1, 2)));
    m.shear_reuss = 15.0 / (4.0 * (s(0, 0) + s(1, 1) + s(2, 2)) -
                            4.0 * (s(0, 1) + s(0, 2) + s(1, 2)) +
                            3.0 * (s(3, 3) + s(4, 4) + s(5, 5)));
    m.bulk = (m.bulk_voigt + m.bulk_reuss) / 2.0;
    m.shear = (m.shear_voigt + m.shear_reuss) / 2.0;
    for (double x : {m.bulk_voigt, m.shear_voigt, m.bulk_reuss, m.shear_reuss})
        if (!(x > 0) || !std::isfinite(x))
            throw Error(ErrorKind::NonPositiveModulus,
                        "non-positive modulus bound " + std::to_string(x) + " GPa");
    return m;
}

VelocitySet sound_velocities(const ModuliSet& m, double density_g_cm3) {
    if (!(density_g_cm3 > 0) || !std::isfinite(density_g_cm3))
        throw Error(ErrorKind::NonPositiveDensity,
                    "density must be positive, got " + std::to_string(density_g_cm3));
    if (!(m.bulk > 0) || m.shear < 0)
        throw Error(ErrorKind::NonPositiveModulus, "moduli must be positive");
    const double rho = density_g_cm3 * 1000.0; // kg/m^3
    VelocitySet v;
    v.v_l = std::sqrt((m.bulk + 4.0 * m.shear / 3.0) * 1e9 / rho);
    v.v_t = std::sqrt(m.shear * 1e9 / rho);
    v.v_s = std::pow((2.0 / std::pow(v.v_t, 3) + 1.0 / std::pow(v.v_l, 3)) / 3.0, -1.0 / 3.0);
    return v;
}

double debye_temperature(double n, double volume_a3, double v_s) {
    if (!(n >= 1) || !(volume_a3 > 0) || !(v_s > 0) || !std::isfinite(volume_a3) ||
        !std::isfinite(v_s))
        throw Error(ErrorKind::InvalidArgument, "Debye temperature needs n >= 1, V > 0, v_s > 0");
    const double volume_m3 = volume_a3 * 1e-30;
    return constants::planck / constants::boltzmann *
           std::cbrt(3.0 * n / (4.0 * std::numbers::pi * volume_m3)) * v_s;
}

DebyeEstimate debye_estimate(const Structure& s, const ElasticTensor& t) {
    DebyeEstimate e;
    e.density = density(s);
    e.moduli = vrh_moduli(t);
    e.velocities = sound_velocities(e.moduli, e.density);
    e.theta_d = debye_temperature(static_cast<double>(s.size()), s.volume(), e.velocities.v_s);
    return e;
}

} // namespace matnav
