#pragma once

#include <Eigen/Dense>
#include <filesystem>
#include <string>
#include <vector>

#include "deepbnd/elasticity.hpp"

namespace deepbnd::micro {

// Two-phase cell: isotropic matrix with circular inclusions on a regular
// n_side x n_side lattice. Inclusion stiffness is the matrix stiffness
// scaled by the contrast gamma.
struct LatticeConfig {
    int n_side = 4;
    double length = 1.0;       // cell side
    double r_min = 0.1 / 4;
    double r_max = 0.4 / 4;
    double gamma = 10.0;
    double lambda = 0.576923;  // matrix Lame coefficients
    double shear = 0.384615;

    int n_balls() const { return n_side * n_side; }
    double cell_spacing() const { return length / n_side; }
    void validate() const;     // throws std::invalid_argument
};

struct Microstructure {
    LatticeConfig config;
    std::vector<double> radii;  // row-major from the bottom-left lattice cell

    // lattice centre in the zero-centroid local frame
    Eigen::Vector2d centre(int index) const;
    double volume_fraction() const;
    void validate() const;
};

// chi_gamma(y) * C1 in Voigt form; points outside every ball see the matrix
Eigen::Matrix3d stiffness_at(const Microstructure& m, const Eigen::Vector2d& y);
bool inside_inclusion(const Microstructure& m, const Eigen::Vector2d& y);

struct SampleSet {
    Eigen::MatrixXd theta;  // N_s x N_b, entries in [-1, 1]
    std::uint64_t seed = 0;
    std::string method = "lhs";
};

// Latin hypercube with uniform marginals: per dimension exactly one sample
// in each of the n_samples equal strata of [-1, 1].
SampleSet lhs_sample(int n_samples, int n_dims, std::uint64_t seed);

// r_j = exp(a + theta_j*b), a = log(r_max*r_min)/2, b = log(r_max/r_min)/2,
// so theta=-1 and theta=1 hit r_min and r_max exactly.
std::vector<double> radii_from_theta(const Eigen::VectorXd& theta_row, double r_min, double r_max);
Eigen::VectorXd theta_from_radii(const std::vector<double>& radii, double r_min, double r_max);

Microstructure make_microstructure(const LatticeConfig& cfg, const Eigen::VectorXd& theta_row);

// Reorders lattice radii so that the returned pattern, rotated anticlockwise
// by quarter_turns*pi/2, reproduces the input pattern. quarter_turns = 1 is
// the inverse quarter-turn permutation used by the load-symmetry argument,
// e.g. (1,2,3,4) -> (2,4,1,3) on a 2x2 lattice.
std::vector<double> permute_params(const std::vector<double>& radii, int quarter_turns);
Eigen::VectorXd permute_params(const Eigen::VectorXd& radii, int quarter_turns);

// central block of an HF lattice as a standalone cell (same local frame)
Microstructure central_window(const Microstructure& m, int n_side_window);

void save_microstructure(const std::filesystem::path& p, const Microstructure& m);
Microstructure load_microstructure(const std::filesystem::path& p);

void save_samples(const std::filesystem::path& bin, const std::filesystem::path& sidecar, const SampleSet& s);
SampleSet load_samples(const std::filesystem::path& bin, const std::filesystem::path& sidecar);

} // namespace deepbnd::micro
