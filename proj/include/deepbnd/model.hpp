#pragma once

#include <Eigen/Dense>
#include <array>
#include <filesystem>

#include "deepbnd/corrector.hpp"
#include "deepbnd/micro.hpp"
#include "deepbnd/mlp.hpp"
#include "deepbnd/rb.hpp"

namespace deepbnd::model {

// Combined boundary-condition predictor: axial and shear MLP submodels with
// their reduced bases. The vertical response reuses the axial submodel
// through the parameter permutation and the quarter-turn rotated basis.
struct DeepBndModel {
    micro::LatticeConfig hf_lattice;
    int window_n_side = 2;
    int hf_divisions = 40;
    int order = 1;

    mlp::MlpModel net_axial, net_shear;
    mlp::ScalingSpec scaling_axial, scaling_shear;
    rb::ReducedBasis basis_axial, basis_shear, basis_vertical;

    int n_rb() const { return basis_axial.n_rb(); }
    int n_gamma() const { return basis_axial.n_gamma(); }
    int window_divisions() const { return hf_divisions * window_n_side / hf_lattice.n_side; }
    void validate() const;  // dimension chains + shared boundary discretisation
};

// precomputes the vertical basis from the axial one
DeepBndModel assemble_model(const micro::LatticeConfig& lattice, int window_n_side, int hf_divisions, int order,
                            mlp::MlpModel net_axial, mlp::ScalingSpec scaling_axial, rb::ReducedBasis basis_axial,
                            mlp::MlpModel net_shear, mlp::ScalingSpec scaling_shear, rb::ReducedBasis basis_shear,
                            const fem::BoundaryDiscretisation& window_bd);

// w = sum_I p_eps_I sum_j [N^(I)(theta)]_j xi_j^(I); inputs are the radii,
// converted internally to the theta parameters the networks were trained on
Eigen::VectorXd predict_bc(const DeepBndModel& dbm, const std::vector<double>& radii, const Voigt& p_eps);
Eigen::VectorXd predict_bc_theta(const DeepBndModel& dbm, const Eigen::VectorXd& theta, const Voigt& p_eps);

// Dirichlet datum (and its admissibility-corrected variant) for the reduced
// corrector; both yield the same homogenised stress.
struct LearnedSpace {
    Eigen::VectorXd trace;            // datum for the plain learned space
    Eigen::VectorXd corrected_trace;  // datum for the starred space
    Voigt strain_correction;          // added to eps when using the starred space
};

LearnedSpace make_learned_space(const DeepBndModel& dbm, const fem::Mesh& window_mesh,
                                const fem::BoundaryDiscretisation& window_bd,
                                const std::vector<double>& radii, const Voigt& p_eps);

// tangent of the reduced cell driven by predicted unit-strain boundary data;
// hf_radii is the full parameter vector of the parent HF cell
Eigen::Matrix3d deepbnd_tangent(const DeepBndModel& dbm, const corrector::ReducedWindow& window,
                                const std::vector<double>& hf_radii);

struct ErrorSplit {
    double e_t_sq = 0, e_dnn_sq = 0, e_pod_sq = 0;
};

// Empirical total/DNN/POD error decomposition over a dataset of goal traces.
// The POD part is the mean projection error of the dataset itself, which on
// the RB training set equals the eigenvalue tail sum. Throws if the
// orthogonal split identity fails beyond round-off.
ErrorSplit error_decomposition(const DeepBndModel& dbm, int load, const Eigen::MatrixXd& traces,
                               const Eigen::MatrixXd& thetas, const Eigen::SparseMatrix<double>& mass);

void save_bundle(const std::filesystem::path& dir, const DeepBndModel& dbm,
                 const mlp::TrainConfig& cfg_axial, const mlp::TrainConfig& cfg_shear);
DeepBndModel load_bundle(const std::filesystem::path& dir);

// hash of every regular file in an artifact directory, name-sorted
std::string artifact_hash(const std::filesystem::path& dir);

} // namespace deepbnd::model
