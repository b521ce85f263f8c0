#include "deepbnd/macro.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <stdexcept>

#include "deepbnd/io.hpp"
#include "deepbnd/parallel.hpp"
#include "deepbnd/rng.hpp"

namespace deepbnd::macro {

namespace {

// Cook membrane: (0,0)-(48,44)-(48,60)-(0,44)
constexpr double k_cook_width = 48.0;
constexpr double k_cook_left_height = 44.0;
constexpr double k_cook_right_rise = 44.0;  // bottom-right corner height
constexpr double k_cook_right_top = 60.0;

} // namespace

MacroMesh build_macro_mesh(const MacroProblem& prob) {
    MacroMesh mm;
    mm.prob = prob;
    int ny = prob.divisions_vertical;
    if (prob.geometry == Geometry::cook) {
        int nx = std::max(1, static_cast<int>(std::lround(ny * k_cook_width / ((k_cook_right_top - k_cook_right_rise) + k_cook_left_height) * 2)));
        mm.mesh = fem::build_mesh_rect(nx, ny, prob.order, {0, 0, 1, 1});
        for (auto& p : mm.mesh.nodes) {
            double xi = p.x(), eta = p.y();
            double yb = k_cook_right_rise * xi;
            double yt = k_cook_left_height + (k_cook_right_top - k_cook_left_height) * xi;
            p = {k_cook_width * xi, yb + eta * (yt - yb)};
        }
        mm.mesh.remapped = true;
        mm.tip = {k_cook_width, 0.5 * (k_cook_right_rise + k_cook_right_top)};
        mm.probes = {{6.0, 40.0}, {6.0, 6.0}, {42.0, 54.0}};  // B, C, D
    } else {
        int nx = 4 * ny;
        mm.mesh = fem::build_mesh_rect(nx, ny, prob.order, {0, 0, 4, 1});
        mm.tip = {4.0, 0.5};
        mm.probes = {{4.0, 0.5}, {2.0, 0.5}};  // A, B
    }
    return mm;
}

MacroSolution solve_macro(const MacroMesh& mm, const std::vector<Eigen::Matrix3d>& tangents) {
    if (static_cast<int>(tangents.size()) != mm.mesh.n_cells())
        throw std::invalid_argument("expected one tangent per macro element");
    for (const auto& c : tangents) {
        Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(0.5 * (c + c.transpose()));
        if (eig.eigenvalues().minCoeff() <= 0)
            throw std::invalid_argument("indefinite homogenised tangent rejected");
    }

    auto sys = fem::assemble_macro(mm.mesh, tangents, {{fem::Side::right, mm.prob.traction}});
    sys = fem::constrain_sides(std::move(sys), mm.mesh, {fem::Side::left});
    MacroSolution sol;
    sol.u = fem::solve(sys, mm.mesh);

    sol.stress = fem::element_stress(mm.mesh, tangents, sol.u);
    sol.von_mises.reserve(sol.stress.size());
    for (const auto& s : sol.stress) sol.von_mises.push_back(von_mises(s));
    return sol;
}

Provider provider_from_name(const std::string& name) {
    if (name == "taylor") return Provider::taylor;
    if (name == "linear") return Provider::linear;
    if (name == "periodic") return Provider::periodic;
    if (name == "minimal") return Provider::minimal;
    if (name == "hf") return Provider::hf;
    if (name == "deepbnd") return Provider::deepbnd;
    throw std::invalid_argument("unknown bc model: " + name);
}

std::string provider_name(Provider p) {
    switch (p) {
        case Provider::taylor: return "taylor";
        case Provider::linear: return "linear";
        case Provider::periodic: return "periodic";
        case Provider::minimal: return "minimal";
        case Provider::hf: return "hf";
        case Provider::deepbnd: return "deepbnd";
    }
    return "?";
}

namespace {

fem::BcModel classical_bc(Provider p) {
    switch (p) {
        case Provider::taylor: return fem::BcModel::taylor;
        case Provider::linear: return fem::BcModel::linear;
        case Provider::periodic: return fem::BcModel::periodic;
        case Provider::minimal: return fem::BcModel::minimal;
        default: throw std::invalid_argument("not a classical model");
    }
}

Eigen::Matrix3d provider_tangent(Provider provider, const model::DeepBndModel* dbm,
                                 const fem::Mesh& hf_mesh, const micro::Microstructure& hf_micro,
                                 int window_n_side) {
    if (provider == Provider::hf)
        return corrector::homogenised_tangent(hf_mesh, hf_micro, fem::BcModel::periodic);
    auto window = corrector::make_window(hf_mesh, hf_micro, window_n_side);
    if (provider == Provider::deepbnd) {
        if (!dbm) throw std::invalid_argument("deepbnd provider needs a model bundle");
        return model::deepbnd_tangent(*dbm, window, hf_micro.radii);
    }
    return corrector::homogenised_tangent(window.mesh, window.micro, classical_bc(provider));
}

Fe2Report finish_report(const MacroMesh& mm, Provider provider, MacroSolution sol) {
    Fe2Report rep;
    rep.provider = provider;
    rep.sol = std::move(sol);
    rep.tip_vertical = fem::interpolate(mm.mesh, rep.sol.u, mm.tip).y();
    for (const auto& p : mm.probes) {
        int cell = fem::element_containing(mm.mesh, p);
        rep.probe_vm.push_back(rep.sol.von_mises[static_cast<std::size_t>(cell)]);
        rep.probe_u.push_back(fem::interpolate(mm.mesh, rep.sol.u, p));
    }
    return rep;
}

} // namespace

Fe2Report fe2_random(const MacroMesh& mm, const micro::LatticeConfig& lattice, int window_n_side,
                     int hf_divisions, Provider provider, const model::DeepBndModel* dbm,
                     const Eigen::MatrixXd& theta_pool, std::uint64_t realisation_seed, int workers) {
    const int n_cells = mm.mesh.n_cells();
    if (theta_pool.rows() < n_cells)
        throw std::invalid_argument("microstructure pool smaller than the element count");
    if (theta_pool.cols() != lattice.n_balls())
        throw std::invalid_argument("pool dimension does not match the lattice");

    // sorted among the elements without repetition
    std::vector<int> pick(static_cast<std::size_t>(theta_pool.rows()));
    for (std::size_t i = 0; i < pick.size(); ++i) pick[i] = static_cast<int>(i);
    Rng rng(realisation_seed, 0xfe2);
    rng.shuffle(pick);

    fem::Mesh hf_mesh = fem::build_mesh(hf_divisions, 1, fem::Rect::centred_square(lattice.length));
    std::vector<Eigen::Matrix3d> tangents(static_cast<std::size_t>(n_cells));

    parallel_for(n_cells, workers, [&](int e) {
        auto m = micro::make_microstructure(lattice, theta_pool.row(pick[static_cast<std::size_t>(e)]).transpose());
        tangents[static_cast<std::size_t>(e)] = provider_tangent(provider, dbm, hf_mesh, m, window_n_side);
    });

    return finish_report(mm, provider, solve_macro(mm, tangents));
}

Eigen::Matrix3d DnsMaterial::voigt_at(const Eigen::Vector2d& y) const {
    double h = prob->length_y / prob->ny_blocks;
    int bx = std::min(std::max(int(std::floor(y.x() / h)), 0), int(theta->cols()) - 1);
    int by = std::min(std::max(int(std::floor(y.y() / h)), 0), int(theta->rows()) - 1);
    Eigen::Vector2d centre((bx + 0.5) * h, (by + 0.5) * h);
    double a = 0.5 * std::log((0.4 * h) * (0.1 * h));
    double b = 0.5 * std::log(0.4 / 0.1);
    double r = std::exp(a + (*theta)(by, bx) * b);
    double chi = (y - centre).norm() < r ? prob->gamma : 1.0;
    return chi * isotropic_stiffness(prob->lambda, prob->shear);
}

DnsResult dns(const DnsProblem& prob) {
    DnsResult res;
    res.prob = prob;
    int nx_blocks = static_cast<int>(std::lround(prob.length_x / prob.length_y)) * prob.ny_blocks;
    res.theta.resize(prob.ny_blocks, nx_blocks);
    Rng rng(prob.seed, 0xd25);
    for (int by = 0; by < prob.ny_blocks; ++by)
        for (int bx = 0; bx < nx_blocks; ++bx) res.theta(by, bx) = rng.uniform(-1.0, 1.0);

    int nx = nx_blocks * prob.resolution_per_block;
    int ny = prob.ny_blocks * prob.resolution_per_block;
    std::size_t dof_estimate = 2u * ((nx + 1u) * (ny + 1u) + nx * ny) * (prob.order == 2 ? 4u : 1u);
    if (dof_estimate > 4'000'000u)
        throw std::invalid_argument("DNS mesh would exceed the memory guard");

    res.mesh = fem::build_mesh_rect(nx, ny, prob.order, {0, 0, prob.length_x, prob.length_y});
    DnsMaterial mat;
    mat.prob = &res.prob;
    mat.theta = &res.theta;

    auto sys = fem::assemble_corrector(res.mesh, mat, Voigt::Zero());
    fem::add_traction(sys, res.mesh, fem::Side::right, prob.traction);
    sys = fem::constrain_sides(std::move(sys), res.mesh, {fem::Side::left});
    res.u = fem::solve(sys, res.mesh);
    res.stress = fem::element_stress(res.mesh, mat, res.u);
    return res;
}

Fe2Report fe2_sliding(const MacroMesh& mm, const DnsResult& reference, int hf_window_blocks,
                      int window_n_side, int hf_divisions, Provider provider,
                      const model::DeepBndModel* dbm, int workers) {
    const auto& theta = reference.theta;
    const double h = reference.block_size();
    const int nxb = static_cast<int>(theta.cols());
    const int nyb = static_cast<int>(theta.rows());
    if (nxb < hf_window_blocks || nyb < hf_window_blocks)
        throw std::invalid_argument("DNS grid smaller than the HF window");

    micro::LatticeConfig lattice;
    lattice.n_side = hf_window_blocks;
    lattice.length = hf_window_blocks * h;
    lattice.r_min = 0.1 * h;
    lattice.r_max = 0.4 * h;
    lattice.gamma = reference.prob.gamma;
    lattice.lambda = reference.prob.lambda;
    lattice.shear = reference.prob.shear;

    fem::Mesh hf_mesh = fem::build_mesh(hf_divisions, 1, fem::Rect::centred_square(lattice.length));
    const int n_cells = mm.mesh.n_cells();
    std::vector<Eigen::Matrix3d> tangents(static_cast<std::size_t>(n_cells));

    parallel_for(n_cells, workers, [&](int e) {
        const auto& nd = mm.mesh.cells[static_cast<std::size_t>(e)];
        Eigen::Vector2d c = (mm.mesh.nodes[static_cast<std::size_t>(nd[0])] +
                             mm.mesh.nodes[static_cast<std::size_t>(nd[1])] +
                             mm.mesh.nodes[static_cast<std::size_t>(nd[2])]) / 3.0;
        // window with the closest centre
        int bx = std::min(std::max(int(std::lround(c.x() / h - hf_window_blocks / 2.0)), 0), nxb - hf_window_blocks);
        int by = std::min(std::max(int(std::lround(c.y() / h - hf_window_blocks / 2.0)), 0), nyb - hf_window_blocks);
        Eigen::VectorXd theta_win(hf_window_blocks * hf_window_blocks);
        for (int r = 0; r < hf_window_blocks; ++r)
            for (int q = 0; q < hf_window_blocks; ++q)
                theta_win[r * hf_window_blocks + q] = theta(by + r, bx + q);
        auto m = micro::make_microstructure(lattice, theta_win);
        tangents[static_cast<std::size_t>(e)] = provider_tangent(provider, dbm, hf_mesh, m, window_n_side);
    });

    return finish_report(mm, provider, solve_macro(mm, tangents));
}

namespace {

double l2_norm_sq(const fem::Mesh& mesh, const Eigen::VectorXd& nodal) {
    // exact for P1 fields; P2 fields are sampled through the same rule
    static constexpr double bary[3][3] = {{0.5, 0.5, 0.0}, {0.0, 0.5, 0.5}, {0.5, 0.0, 0.5}};
    double acc = 0;
    for (int cell = 0; cell < mesh.n_cells(); ++cell) {
        const auto& nd = mesh.cells[static_cast<std::size_t>(cell)];
        const auto& p0 = mesh.nodes[static_cast<std::size_t>(nd[0])];
        const auto& p1 = mesh.nodes[static_cast<std::size_t>(nd[1])];
        const auto& p2 = mesh.nodes[static_cast<std::size_t>(nd[2])];
        double area = 0.5 * std::abs((p1.x() - p0.x()) * (p2.y() - p0.y()) - (p2.x() - p0.x()) * (p1.y() - p0.y()));
        for (const auto& L : bary) {
            Eigen::Vector2d u = Eigen::Vector2d::Zero();
            for (int a = 0; a < 3; ++a)
                u += L[a] * Eigen::Vector2d(nodal[2 * nd[static_cast<std::size_t>(a)]],
                                            nodal[2 * nd[static_cast<std::size_t>(a)] + 1]);
            acc += area / 3.0 * u.squaredNorm();
        }
    }
    return acc;
}

} // namespace

std::vector<ErrorMetrics> error_report(const std::filesystem::path& csv, const FieldSolution& reference,
                                       const std::vector<FieldSolution>& candidates,
                                       const std::vector<Eigen::Vector2d>& probe_points) {
    const fem::Mesh& rmesh = *reference.mesh;
    double ref_norm = std::sqrt(l2_norm_sq(rmesh, *reference.u));

    std::vector<ErrorMetrics> out;
    std::optional<io::CsvWriter> writer;
    if (!csv.empty()) writer.emplace(csv);

    for (const auto& cand : candidates) {
        ErrorMetrics m;
        m.name = cand.name;

        Eigen::VectorXd diff(rmesh.n_dofs());
        for (int n = 0; n < rmesh.n_nodes(); ++n) {
            Eigen::Vector2d uc = fem::interpolate(*cand.mesh, *cand.u, rmesh.nodes[static_cast<std::size_t>(n)]);
            diff[2 * n] = uc.x() - (*reference.u)[2 * n];
            diff[2 * n + 1] = uc.y() - (*reference.u)[2 * n + 1];
        }
        m.l2_rel = std::sqrt(l2_norm_sq(rmesh, diff)) / ref_norm;
        if (writer) writer->row(cand.name, "l2_rel", m.l2_rel);

        for (std::size_t p = 0; p < probe_points.size(); ++p) {
            const auto& pt = probe_points[p];
            Eigen::Vector2d ur = fem::interpolate(rmesh, *reference.u, pt);
            Eigen::Vector2d uc = fem::interpolate(*cand.mesh, *cand.u, pt);
            double rel = (uc - ur).norm() / std::max(ur.norm(), 1e-300);
            m.probe_disp_rel.push_back(rel);
            if (writer) writer->row(cand.name, "disp_rel_probe" + std::to_string(p), rel);

            double vr = von_mises((*reference.stress)[static_cast<std::size_t>(fem::element_containing(rmesh, pt))]);
            double vc = von_mises((*cand.stress)[static_cast<std::size_t>(fem::element_containing(*cand.mesh, pt))]);
            double vm_rel = std::abs(vc - vr) / std::max(std::abs(vr), 1e-300);
            m.probe_vm_rel.push_back(vm_rel);
            if (writer) writer->row(cand.name, "vm_rel_probe" + std::to_string(p), vm_rel);
        }
        out.push_back(std::move(m));
    }
    return out;
}

} // namespace deepbnd::macro
