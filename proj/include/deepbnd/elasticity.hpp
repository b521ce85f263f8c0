#pragma once

#include <Eigen/Dense>
#include <cmath>

namespace deepbnd {

// Voigt convention for 2D: strain (e11, e22, 2*e12), stress (s11, s22, s12).
// With these pairings strain*C*strain equals the tensor energy density.
using Voigt = Eigen::Vector3d;

inline Eigen::Matrix2d strain_tensor(const Voigt& v) {
    Eigen::Matrix2d e;
    e << v[0], 0.5 * v[2], 0.5 * v[2], v[1];
    return e;
}

inline Voigt voigt_strain(const Eigen::Matrix2d& e) {
    return {e(0, 0), e(1, 1), e(0, 1) + e(1, 0)};
}

// lambda*I(x)I + 2G*Isym in Voigt form
inline Eigen::Matrix3d isotropic_stiffness(double lambda, double shear) {
    Eigen::Matrix3d c;
    c << lambda + 2 * shear, lambda, 0,
         lambda, lambda + 2 * shear, 0,
         0, 0, shear;
    return c;
}

// plane-stress equivalent stress
inline double von_mises(const Voigt& stress) {
    double s11 = stress[0], s22 = stress[1], s12 = stress[2];
    return std::sqrt(s11 * s11 - s11 * s22 + s22 * s22 + 3 * s12 * s12);
}

} // namespace deepbnd
