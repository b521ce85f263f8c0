#include "deepbnd/corrector.hpp"

#include <cmath>
#include <stdexcept>

namespace deepbnd::corrector {

Eigen::VectorXd solve_corrector(const fem::Mesh& mesh, const micro::Microstructure& m, const Voigt& eps,
                                BcModel bc, const Eigen::VectorXd* trace_values,
                                const fem::BoundaryDiscretisation* bd) {
    CellMaterial mat(m);
    auto sys = fem::assemble_corrector(mesh, mat, eps);
    sys = fem::constrain(std::move(sys), mesh, bc, trace_values, bd);
    return fem::solve(sys, mesh);
}

Voigt homogenise_stress(const fem::Mesh& mesh, const micro::Microstructure& m, const Voigt& eps,
                        const Eigen::VectorXd& fluct) {
    if (fluct.size() != mesh.n_dofs()) throw std::invalid_argument("fluctuation size mismatch");
    CellMaterial mat(m);

    static constexpr double bary[3][3] = {{0.5, 0.5, 0.0}, {0.0, 0.5, 0.5}, {0.5, 0.0, 0.5}};
    Voigt sum = Voigt::Zero();
    double vol = 0;
    const int k = mesh.nodes_per_cell();
    for (int cell = 0; cell < mesh.n_cells(); ++cell) {
        const auto& nd = mesh.cells[static_cast<std::size_t>(cell)];
        const auto& p0 = mesh.nodes[static_cast<std::size_t>(nd[0])];
        const auto& p1 = mesh.nodes[static_cast<std::size_t>(nd[1])];
        const auto& p2 = mesh.nodes[static_cast<std::size_t>(nd[2])];
        double twice = (p1.x() - p0.x()) * (p2.y() - p0.y()) - (p2.x() - p0.x()) * (p1.y() - p0.y());
        double area = 0.5 * twice;
        vol += area;
        Eigen::Vector2d gl[3] = {Eigen::Vector2d(p1.y() - p2.y(), p2.x() - p1.x()) / twice,
                                 Eigen::Vector2d(p2.y() - p0.y(), p0.x() - p2.x()) / twice,
                                 Eigen::Vector2d(p0.y() - p1.y(), p1.x() - p0.x()) / twice};
        for (int qp = 0; qp < 3; ++qp) {
            const double* L = bary[qp];
            Eigen::Vector2d gn[6];
            if (mesh.order == 1) {
                for (int a = 0; a < 3; ++a) gn[a] = gl[a];
            } else {
                for (int a = 0; a < 3; ++a) gn[a] = (4 * L[a] - 1) * gl[a];
                static constexpr int ea[3] = {1, 2, 0}, eb[3] = {2, 0, 1};
                for (int a = 0; a < 3; ++a) gn[3 + a] = 4 * (L[eb[a]] * gl[ea[a]] + L[ea[a]] * gl[eb[a]]);
            }
            Voigt strain = eps;
            for (int a = 0; a < k; ++a) {
                double ux = fluct[2 * nd[static_cast<std::size_t>(a)]];
                double uy = fluct[2 * nd[static_cast<std::size_t>(a)] + 1];
                strain[0] += gn[a].x() * ux;
                strain[1] += gn[a].y() * uy;
                strain[2] += gn[a].y() * ux + gn[a].x() * uy;
            }
            Eigen::Vector2d y = L[0] * p0 + L[1] * p1 + L[2] * p2;
            sum += (area / 3.0) * (mat.voigt_at(y) * strain);
        }
    }
    return sum / vol;
}

Eigen::Matrix3d homogenised_tangent(const fem::Mesh& mesh, const micro::Microstructure& m, BcModel bc) {
    Eigen::Matrix3d c;
    for (int load = 1; load <= 3; ++load) {
        Voigt e = unit_strain(load);
        Eigen::VectorXd u = solve_corrector(mesh, m, e, bc);
        c.col(load - 1) = homogenise_stress(mesh, m, e, u);
    }
    return c;
}

ReducedWindow make_window(const fem::Mesh& hf_mesh, const micro::Microstructure& hf_micro, int n_side_window) {
    const int n = hf_micro.config.n_side;
    if (hf_mesh.nx != hf_mesh.ny || !hf_mesh.square())
        throw std::invalid_argument("HF cell mesh must be square");
    if ((hf_mesh.nx * n_side_window) % n != 0 || (hf_mesh.nx * (n - n_side_window)) % (2 * n) != 0)
        throw std::invalid_argument("reduced window not mesh-aligned");

    ReducedWindow w;
    w.micro = micro::central_window(hf_micro, n_side_window);
    int divisions = hf_mesh.nx * n_side_window / n;
    w.mesh = fem::build_mesh(divisions, hf_mesh.order, fem::Rect::centred_square(w.micro.config.length));
    w.boundary = fem::boundary_mass(w.mesh);

    auto lookup = fem::node_lookup(hf_mesh);
    w.hf_node.resize(static_cast<std::size_t>(w.mesh.n_nodes()));
    for (int nd = 0; nd < w.mesh.n_nodes(); ++nd) {
        auto it = lookup.find(fem::node_key(hf_mesh, w.mesh.nodes[static_cast<std::size_t>(nd)]));
        if (it == lookup.end()) throw std::runtime_error("window node not present in the HF mesh");
        w.hf_node[static_cast<std::size_t>(nd)] = it->second;
    }
    return w;
}

Eigen::VectorXd restrict_field(const ReducedWindow& w, const Eigen::VectorXd& hf_field) {
    Eigen::VectorXd out(w.mesh.n_dofs());
    for (int nd = 0; nd < w.mesh.n_nodes(); ++nd) {
        int h = w.hf_node[static_cast<std::size_t>(nd)];
        out[2 * nd] = hf_field[2 * h];
        out[2 * nd + 1] = hf_field[2 * h + 1];
    }
    return out;
}

GoalTrace goal_trace_from_field(const fem::Mesh&, const Eigen::VectorXd& hf_fluct,
                                int load_index, const ReducedWindow& window) {
    Eigen::VectorXd restricted = restrict_field(window, hf_fluct);
    GoalTrace g;
    g.load = load_index;
    g.mean_shift = fem::volume_average(window.mesh, restricted);
    g.w = fem::trace(restricted, window.boundary);
    for (int p = 0; p < static_cast<int>(window.boundary.nodes.size()); ++p) {
        g.w[2 * p] -= g.mean_shift.x();
        g.w[2 * p + 1] -= g.mean_shift.y();
    }
    return g;
}

GoalTrace extract_goal_trace(const fem::Mesh& hf_mesh, const micro::Microstructure& hf_micro,
                             int load_index, const ReducedWindow& window) {
    if (load_index < 1 || load_index > 3) throw std::invalid_argument("load index must be 1, 2 or 3");
    Eigen::VectorXd u = solve_corrector(hf_mesh, hf_micro, unit_strain(load_index), BcModel::periodic);
    return goal_trace_from_field(hf_mesh, u, load_index, window);
}

Eigen::VectorXd solve_reduced(const ReducedWindow& window, const Voigt& eps, const Eigen::VectorXd& w) {
    return solve_corrector(window.mesh, window.micro, eps, BcModel::prescribed_trace, &w, &window.boundary);
}

Eigen::Matrix3d homogenised_tangent(const ReducedWindow& window, const std::array<Eigen::VectorXd, 3>& unit_traces) {
    Eigen::Matrix3d c;
    for (int load = 1; load <= 3; ++load) {
        Voigt e = unit_strain(load);
        Eigen::VectorXd u = solve_reduced(window, e, unit_traces[static_cast<std::size_t>(load - 1)]);
        c.col(load - 1) = homogenise_stress(window.mesh, window.micro, e, u);
    }
    return c;
}

} // namespace deepbnd::corrector
