#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <filesystem>
#include <string>

#include "deepbnd/fem.hpp"

namespace deepbnd::rb {

// POD reduced basis of boundary traces in the [L2(Gamma)]^2 inner product.
// Columns are mass-orthonormal; eigenvalues keep the full snapshot spectrum
// (descending) so truncation tails can be evaluated at any cut.
struct ReducedBasis {
    Eigen::MatrixXd basis;        // n_gamma x n_rb
    Eigen::VectorXd eigenvalues;  // N_s entries
    int load_index = 0;
    std::string mesh_hash;

    int n_rb() const { return static_cast<int>(basis.cols()); }
    int n_gamma() const { return static_cast<int>(basis.rows()); }
};

struct PodTruncation {
    double tol = -1;  // active when in (0,1)
    int size = -1;    // active when >= 0
    static PodTruncation tolerance(double t) { return {t, -1}; }
    static PodTruncation count(int n) { return {-1, n}; }
};

// Snapshot-correlation POD: C_ij = (w_i, w_j)_M / N_s, eigendecomposition,
// basis vectors xi_i = sum_j v^i_j w_j / sqrt(lambda_i N_s). Modes below
// 1e-12 * lambda_1 are discarded; the sign of each vector is fixed so its
// first nonzero entry is positive.
ReducedBasis pod(const Eigen::MatrixXd& snapshots, const Eigen::SparseMatrix<double>& mass,
                 PodTruncation cut);

// tail sum of eigenvalues past the first n modes
double pod_error(const ReducedBasis& basis, int n);

double mass_norm_sq(const Eigen::SparseMatrix<double>& mass, const Eigen::VectorXd& w);

Eigen::VectorXd project(const Eigen::VectorXd& w, const ReducedBasis& basis,
                        const Eigen::SparseMatrix<double>& mass);

Eigen::VectorXd reconstruct(const Eigen::VectorXd& beta, const ReducedBasis& basis);

// mean squared projection error of a snapshot set onto the basis span
double projection_mse(const Eigen::MatrixXd& snapshots, const ReducedBasis& basis,
                      const Eigen::SparseMatrix<double>& mass);

// basis for the vertical load: discrete quarter-turn applied columnwise
ReducedBasis rotate_basis(const ReducedBasis& basis, const fem::BoundaryDiscretisation& bd);

// <w (x) n> over the window boundary divided by the window area
Eigen::Matrix2d boundary_moment(const fem::Mesh& mesh, const fem::BoundaryDiscretisation& bd,
                                const Eigen::VectorXd& w);

// Admissibility correction: xi' = xi - <xi (x) n> y on the boundary, plus the
// per-vector Voigt strain corrections sym<xi (x) n> feeding the modified
// right-hand side of the starred formulation.
struct CorrectedBasis {
    Eigen::MatrixXd basis;        // n_gamma x n_rb
    Eigen::Matrix<double, 3, Eigen::Dynamic> strain_correction;  // Voigt, one column per vector
};

CorrectedBasis admissibility_correct(const ReducedBasis& basis, const fem::Mesh& mesh,
                                     const fem::BoundaryDiscretisation& bd);

void save_basis(const std::filesystem::path& dir, const ReducedBasis& basis);
ReducedBasis load_basis(const std::filesystem::path& dir);

} // namespace deepbnd::rb
