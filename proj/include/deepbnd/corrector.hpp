#pragma once

#include <Eigen/Dense>
#include <optional>

#include "deepbnd/fem.hpp"
#include "deepbnd/micro.hpp"

namespace deepbnd::corrector {

using fem::BcModel;

struct CellMaterial final : fem::MaterialField {
    const micro::Microstructure* m;
    explicit CellMaterial(const micro::Microstructure& micro_) : m(&micro_) {}
    Eigen::Matrix3d voigt_at(const Eigen::Vector2d& y) const override { return micro::stiffness_at(*m, y); }
};

// Fluctuation solve of the corrector problem in the chosen admissible space.
// prescribed_trace additionally needs the Dirichlet datum in the canonical
// boundary ordering.
Eigen::VectorXd solve_corrector(const fem::Mesh& mesh, const micro::Microstructure& m, const Voigt& eps,
                                BcModel bc, const Eigen::VectorXd* trace_values = nullptr,
                                const fem::BoundaryDiscretisation* bd = nullptr);

// sigma = <C (eps + grad^s u)> by the same quadrature used in assembly
Voigt homogenise_stress(const fem::Mesh& mesh, const micro::Microstructure& m, const Voigt& eps,
                        const Eigen::VectorXd& fluct);

// columns are homogenised stresses under the three unit Voigt strains
Eigen::Matrix3d homogenised_tangent(const fem::Mesh& mesh, const micro::Microstructure& m, BcModel bc);

// Centred sub-square of the HF cell covering the central inclusion block.
// The window mesh is the exact restriction of the HF mesh, so traces and
// restricted fields transfer by node identification with no interpolation.
struct ReducedWindow {
    fem::Mesh mesh;
    micro::Microstructure micro;
    fem::BoundaryDiscretisation boundary;
    std::vector<int> hf_node;  // window node -> HF node
};

ReducedWindow make_window(const fem::Mesh& hf_mesh, const micro::Microstructure& hf_micro, int n_side_window);

// HF field restricted to the window by node identification
Eigen::VectorXd restrict_field(const ReducedWindow& w, const Eigen::VectorXd& hf_field);

struct GoalTrace {
    Eigen::VectorXd w;           // canonical boundary ordering on the window
    Eigen::Vector2d mean_shift;  // subtracted window volume average of the HF fluctuation
    int load = 0;                // 1, 2, 3 selecting E11, E22, E12
};

// Solves the HF periodic corrector under the selected unit strain and
// returns the zero-averaged boundary datum for the reduced problem.
GoalTrace extract_goal_trace(const fem::Mesh& hf_mesh, const micro::Microstructure& hf_micro,
                             int load_index, const ReducedWindow& window);

// same, reusing an already computed HF fluctuation field
GoalTrace goal_trace_from_field(const fem::Mesh& hf_mesh, const Eigen::VectorXd& hf_fluct,
                                int load_index, const ReducedWindow& window);

// reduced corrector with the trace as Dirichlet datum, result zero-averaged
Eigen::VectorXd solve_reduced(const ReducedWindow& window, const Voigt& eps, const Eigen::VectorXd& w);

// tangent of the reduced cell under prescribed unit-strain traces
Eigen::Matrix3d homogenised_tangent(const ReducedWindow& window, const std::array<Eigen::VectorXd, 3>& unit_traces);

inline Voigt unit_strain(int load_index) {
    Voigt e = Voigt::Zero();
    e[load_index - 1] = 1.0;
    return e;
}

} // namespace deepbnd::corrector
