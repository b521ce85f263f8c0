#include <doctest.h>

#include <cmath>
#include <numbers>
#include <set>

#include "deepbnd/fem.hpp"
#include "deepbnd/micro.hpp"
#include "deepbnd/rng.hpp"

using namespace deepbnd;

namespace {

const fem::Rect unit{0, 0, 1, 1};

// independent elimination oracle for small dense systems
Eigen::VectorXd gauss_solve(Eigen::MatrixXd a, Eigen::VectorXd b) {
    const int n = static_cast<int>(a.rows());
    for (int col = 0; col < n; ++col) {
        int piv = col;
        for (int r = col + 1; r < n; ++r)
            if (std::abs(a(r, col)) > std::abs(a(piv, col))) piv = r;
        a.row(col).swap(a.row(piv));
        std::swap(b[col], b[piv]);
        for (int r = col + 1; r < n; ++r) {
            double f = a(r, col) / a(col, col);
            a.row(r) -= f * a.row(col);
            b[r] -= f * b[col];
        }
    }
    Eigen::VectorXd x(n);
    for (int r = n - 1; r >= 0; --r)
        x[r] = (b[r] - a.row(r).tail(n - 1 - r).dot(x.tail(n - 1 - r))) / a(r, r);
    return x;
}

micro::Microstructure homogeneous_cell(double gamma = 1.0) {
    micro::LatticeConfig cfg;
    cfg.n_side = 2;
    cfg.length = 1.0;
    cfg.r_min = 0.1 / 2;
    cfg.r_max = 0.4 / 2;
    cfg.gamma = gamma;
    return micro::Microstructure{cfg, std::vector<double>(4, 0.15)};
}

struct MicroField final : fem::MaterialField {
    micro::Microstructure m;
    Eigen::Matrix3d voigt_at(const Eigen::Vector2d& y) const override { return micro::stiffness_at(m, y); }
};

} // namespace

TEST_CASE("smallest crossed mesh") {
    auto m = fem::build_mesh(1, 1, unit);
    CHECK(m.n_nodes() == 5);
    CHECK(m.n_cells() == 4);
}

TEST_CASE("node count follows the crossed construction") {
    for (int n : {2, 3, 7, 12}) {
        auto m = fem::build_mesh(n, 1, unit);
        // direct enumeration: grid corners plus one centre per cell
        std::set<long long> keys;
        for (int j = 0; j <= n; ++j)
            for (int i = 0; i <= n; ++i)
                keys.insert(fem::node_key(m, {double(i) / n, double(j) / n}));
        for (int j = 0; j < n; ++j)
            for (int i = 0; i < n; ++i)
                keys.insert(fem::node_key(m, {(i + 0.5) / n, (j + 0.5) / n}));
        CHECK(m.n_nodes() == static_cast<int>(keys.size()));
        CHECK(m.n_nodes() == (n + 1) * (n + 1) + n * n);
    }
}

TEST_CASE("boundary dof counts reach the reference 160") {
    auto bd20 = fem::boundary_mass(fem::build_mesh(20, 1, unit));
    CHECK(bd20.nodes.size() == 80);
    CHECK(bd20.n_slots() == 160);

    auto bd10q = fem::boundary_mass(fem::build_mesh(10, 2, unit));
    CHECK(bd10q.nodes.size() == 80);
    CHECK(bd10q.n_slots() == 160);

    auto bd20q = fem::boundary_mass(fem::build_mesh(20, 2, unit));
    CHECK(bd20q.nodes.size() == 160);
}

TEST_CASE("triangles are positively oriented") {
    for (int order : {1, 2}) {
        auto m = fem::build_mesh(4, order, {-0.5, -0.5, 0.5, 0.5});
        for (const auto& c : m.cells) {
            const auto& p0 = m.nodes[static_cast<std::size_t>(c[0])];
            const auto& p1 = m.nodes[static_cast<std::size_t>(c[1])];
            const auto& p2 = m.nodes[static_cast<std::size_t>(c[2])];
            double twice = (p1.x() - p0.x()) * (p2.y() - p0.y()) - (p2.x() - p0.x()) * (p1.y() - p0.y());
            CHECK(twice > 0);
        }
    }
}

TEST_CASE("node set has the 4-fold rotational symmetry") {
    for (int order : {1, 2}) {
        auto m = fem::build_mesh(6, order, {-0.5, -0.5, 0.5, 0.5});
        auto lookup = fem::node_lookup(m);
        for (const auto& p : m.nodes) {
            Eigen::Vector2d q(-p.y(), p.x());
            CHECK(lookup.count(fem::node_key(m, q)) == 1);
        }
    }
}

TEST_CASE("opposite sides match node for node") {
    for (int order : {1, 2}) {
        auto m = fem::build_mesh(5, order, unit);
        auto bottom = fem::boundary_nodes_of_side(m, fem::Side::bottom);
        auto top = fem::boundary_nodes_of_side(m, fem::Side::top);
        REQUIRE(bottom.size() == top.size());
        for (std::size_t k = 0; k < bottom.size(); ++k) {
            // top side runs right-to-left in the anticlockwise walk
            const auto& pb = m.nodes[static_cast<std::size_t>(bottom[k])];
            const auto& pt = m.nodes[static_cast<std::size_t>(top[top.size() - 1 - k])];
            CHECK(pb.x() == doctest::Approx(pt.x()).epsilon(1e-15));
            CHECK(pt.y() == doctest::Approx(1.0).epsilon(1e-15));
        }
    }
}

TEST_CASE("canonical boundary walk starts at the bottom-left corner, anticlockwise") {
    auto m = fem::build_mesh(4, 1, unit);
    auto bd = fem::boundary_mass(m);
    REQUIRE(bd.nodes.size() == 16);
    CHECK(m.nodes[static_cast<std::size_t>(bd.nodes[0])] == Eigen::Vector2d(0, 0));
    CHECK(m.nodes[static_cast<std::size_t>(bd.nodes[4])] == Eigen::Vector2d(1, 0));   // bottom-right
    CHECK(m.nodes[static_cast<std::size_t>(bd.nodes[8])] == Eigen::Vector2d(1, 1));   // top-right
    CHECK(m.nodes[static_cast<std::size_t>(bd.nodes[12])] == Eigen::Vector2d(0, 1));  // top-left
    CHECK(bd.nodes_per_side == 4);
}

TEST_CASE("boundary mass integrates traces exactly") {
    for (int order : {1, 2}) {
        auto m = fem::build_mesh(order == 1 ? 8 : 4, order, unit);
        auto bd = fem::boundary_mass(m);

        Eigen::VectorXd ones_x = Eigen::VectorXd::Zero(bd.n_slots());
        for (std::size_t p = 0; p < bd.nodes.size(); ++p) ones_x[2 * static_cast<int>(p)] = 1.0;
        CHECK(ones_x.dot(bd.mass * ones_x) == doctest::Approx(4.0).epsilon(1e-13));  // perimeter

        Eigen::VectorXd ones = Eigen::VectorXd::Ones(bd.n_slots());
        CHECK(ones.dot(bd.mass * ones) == doctest::Approx(8.0).epsilon(1e-13));

        // linear trace u = (s, 0) along each edge of the loop: int s^2 = 1/3 per unit side
        Eigen::VectorXd w = Eigen::VectorXd::Zero(bd.n_slots());
        for (std::size_t p = 0; p < bd.nodes.size(); ++p)
            w[2 * static_cast<int>(p)] = m.nodes[static_cast<std::size_t>(bd.nodes[p])].x();
        // oracle: int over boundary of x^2 ds = 2*(1/3) + 1 (right side) + 0 (left)
        CHECK(w.dot(bd.mass * w) == doctest::Approx(2.0 / 3 + 1.0).epsilon(1e-13));
    }
}

TEST_CASE("quadratic boundary mass is exact for curved traces") {
    auto m = fem::build_mesh(3, 2, unit);
    auto bd = fem::boundary_mass(m);
    Eigen::VectorXd w = Eigen::VectorXd::Zero(bd.n_slots());
    for (std::size_t p = 0; p < bd.nodes.size(); ++p) {
        const auto& y = m.nodes[static_cast<std::size_t>(bd.nodes[p])];
        w[2 * static_cast<int>(p)] = y.x() * y.x();  // quadratic along bottom/top
    }
    // oracle: int x^4 over bottom+top = 2/5, right side contributes 1, left 0
    CHECK(w.dot(bd.mass * w) == doctest::Approx(2.0 / 5 + 1.0).epsilon(1e-12));
}

TEST_CASE("open curves are rejected") {
    auto m = fem::build_mesh(3, 1, unit);
    CHECK_THROWS_AS(fem::boundary_mass(m, {fem::Side::bottom, fem::Side::right}), std::invalid_argument);
}

TEST_CASE("trace extraction is linear and respects the ordering") {
    auto m = fem::build_mesh(4, 1, unit);
    auto bd = fem::boundary_mass(m);

    Eigen::VectorXd constant(m.n_dofs());
    for (int n = 0; n < m.n_nodes(); ++n) {
        constant[2 * n] = 3.5;
        constant[2 * n + 1] = -1.25;
    }
    Eigen::VectorXd w = fem::trace(constant, bd);
    for (std::size_t p = 0; p < bd.nodes.size(); ++p) {
        CHECK(w[2 * static_cast<int>(p)] == 3.5);
        CHECK(w[2 * static_cast<int>(p) + 1] == -1.25);
    }

    // affine field eps*y with eps = E11: x-component = y1, y-component = 0
    Eigen::VectorXd affine(m.n_dofs());
    for (int n = 0; n < m.n_nodes(); ++n) {
        affine[2 * n] = m.nodes[static_cast<std::size_t>(n)].x();
        affine[2 * n + 1] = 0.0;
    }
    Eigen::VectorXd wa = fem::trace(affine, bd);
    for (std::size_t p = 0; p < bd.nodes.size(); ++p) {
        CHECK(wa[2 * static_cast<int>(p)] ==
              doctest::Approx(m.nodes[static_cast<std::size_t>(bd.nodes[p])].x()));
        CHECK(wa[2 * static_cast<int>(p) + 1] == 0.0);
    }

    Rng rng(5);
    Eigen::VectorXd u(m.n_dofs()), v(m.n_dofs());
    for (int i = 0; i < m.n_dofs(); ++i) {
        u[i] = rng.normal();
        v[i] = rng.normal();
    }
    Eigen::VectorXd lhs = fem::trace(2.0 * u - 0.5 * v, bd);
    Eigen::VectorXd rhs = 2.0 * fem::trace(u, bd) - 0.5 * fem::trace(v, bd);
    CHECK((lhs - rhs).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("quarter-turn trace rotation") {
    auto m = fem::build_mesh(4, 1, {-0.5, -0.5, 0.5, 0.5});
    auto bd = fem::boundary_mass(m);
    const int per_side = bd.nodes_per_side;

    // a unit x-vector at a bottom node moves to the right side as a y-vector
    Eigen::VectorXd w = Eigen::VectorXd::Zero(bd.n_slots());
    w[2 * 1] = 1.0;
    Eigen::VectorXd q = fem::rotate_trace_quarter(bd, w, 1);
    CHECK(q[2 * (1 + per_side)] == doctest::Approx(0.0));
    CHECK(q[2 * (1 + per_side) + 1] == doctest::Approx(1.0));

    Rng rng(9);
    Eigen::VectorXd r(bd.n_slots());
    for (int i = 0; i < r.size(); ++i) r[i] = rng.normal();
    Eigen::VectorXd four = fem::rotate_trace_quarter(bd, r, 4);
    CHECK((four - r).cwiseAbs().maxCoeff() == 0.0);
    Eigen::VectorXd once = fem::rotate_trace_quarter(bd, r, 1);
    CHECK(once.dot(bd.mass * once) == doctest::Approx(r.dot(bd.mass * r)).epsilon(1e-13));

    // geometric consistency: the rotated trace of a field equals the trace of
    // the rotated field
    Eigen::VectorXd field(m.n_dofs());
    for (int n = 0; n < m.n_nodes(); ++n) {
        const auto& y = m.nodes[static_cast<std::size_t>(n)];
        field[2 * n] = std::sin(3 * y.x()) + y.y();
        field[2 * n + 1] = y.x() * y.y();
    }
    Eigen::VectorXd rot_field(m.n_dofs());
    auto lookup = fem::node_lookup(m);
    Eigen::Matrix2d rot;
    rot << 0, -1, 1, 0;
    for (int n = 0; n < m.n_nodes(); ++n) {
        const auto& y = m.nodes[static_cast<std::size_t>(n)];
        int src = lookup.at(fem::node_key(m, {y.y(), -y.x()}));  // preimage of n
        Eigen::Vector2d val = rot * Eigen::Vector2d(field[2 * src], field[2 * src + 1]);
        rot_field[2 * n] = val.x();
        rot_field[2 * n + 1] = val.y();
    }
    Eigen::VectorXd lhs = fem::trace(rot_field, bd);
    Eigen::VectorXd rhs = fem::rotate_trace_quarter(bd, fem::trace(field, bd), 1);
    CHECK((lhs - rhs).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("assembled stiffness is symmetric, rhs linear in the strain") {
    MicroField mat;
    mat.m = homogeneous_cell(10.0);
    auto mesh = fem::build_mesh(8, 1, fem::Rect::centred_square(1.0));

    auto s1 = fem::assemble_corrector(mesh, mat, {1.0, -0.3, 0.2});
    Eigen::SparseMatrix<double> diff = Eigen::SparseMatrix<double>(s1.stiffness.transpose()) - s1.stiffness;
    double asym = 0, scale = 0;
    for (int k = 0; k < diff.outerSize(); ++k)
        for (Eigen::SparseMatrix<double>::InnerIterator it(diff, k); it; ++it)
            asym = std::max(asym, std::abs(it.value()));
    for (int k = 0; k < s1.stiffness.outerSize(); ++k)
        for (Eigen::SparseMatrix<double>::InnerIterator it(s1.stiffness, k); it; ++it)
            scale = std::max(scale, std::abs(it.value()));
    CHECK(asym <= 1e-14 * scale);

    auto s0 = fem::assemble_corrector(mesh, mat, Voigt::Zero());
    CHECK(s0.rhs.cwiseAbs().maxCoeff() == 0.0);

    auto sa = fem::assemble_corrector(mesh, mat, {0.7, 0.1, 0.0});
    auto sb = fem::assemble_corrector(mesh, mat, {0.3, -0.4, 0.2});
    auto sab = fem::assemble_corrector(mesh, mat, {1.0, -0.3, 0.2});
    CHECK((sab.rhs - sa.rhs - sb.rhs).cwiseAbs().maxCoeff() < 1e-13);
}

TEST_CASE("degenerate triangles abort assembly") {
    MicroField mat;
    mat.m = homogeneous_cell();
    auto mesh = fem::build_mesh(2, 1, fem::Rect::centred_square(1.0));
    mesh.nodes[0] = mesh.nodes[1];  // collapse one corner
    CHECK_THROWS_AS(fem::assemble_corrector(mesh, mat, Voigt::Zero()), std::runtime_error);
}

TEST_CASE("taylor model returns the zero field") {
    MicroField mat;
    mat.m = homogeneous_cell(10.0);
    auto mesh = fem::build_mesh(4, 1, fem::Rect::centred_square(1.0));
    auto sys = fem::constrain(fem::assemble_corrector(mesh, mat, {1, 0, 0}), mesh, fem::BcModel::taylor);
    CHECK(fem::solve(sys, mesh).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("uniform strain equilibrates a homogeneous cell under every model") {
    MicroField mat;
    mat.m = homogeneous_cell(1.0);
    auto mesh = fem::build_mesh(6, 1, fem::Rect::centred_square(1.0));
    for (auto model : {fem::BcModel::linear, fem::BcModel::periodic, fem::BcModel::minimal}) {
        auto sys = fem::constrain(fem::assemble_corrector(mesh, mat, {1, 0, 0}), mesh, model);
        Eigen::VectorXd u = fem::solve(sys, mesh);
        CHECK(u.cwiseAbs().maxCoeff() < 1e-11);
    }
}

TEST_CASE("periodic pairing holds exactly") {
    MicroField mat;
    mat.m = homogeneous_cell(10.0);
    mat.m.radii = {0.05, 0.12, 0.2, 0.07};
    auto mesh = fem::build_mesh(8, 1, fem::Rect::centred_square(1.0));
    auto sys = fem::constrain(fem::assemble_corrector(mesh, mat, {0.3, 1.0, -0.5}), mesh, fem::BcModel::periodic);
    Eigen::VectorXd u = fem::solve(sys, mesh);
    REQUIRE(u.cwiseAbs().maxCoeff() > 1e-6);  // genuinely heterogeneous

    auto lookup = fem::node_lookup(mesh);
    for (int j = 0; j <= mesh.ny; ++j) {
        int left = lookup.at(fem::node_key(mesh, {-0.5, -0.5 + double(j) / mesh.ny}));
        int right = lookup.at(fem::node_key(mesh, {0.5, -0.5 + double(j) / mesh.ny}));
        CHECK(u[2 * left] == u[2 * right]);
        CHECK(u[2 * left + 1] == u[2 * right + 1]);
    }

    // zero average is part of the periodic space
    CHECK(fem::volume_average(mesh, u).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("minimal model carries five kinematic multipliers") {
    MicroField mat;
    mat.m = homogeneous_cell(10.0);
    auto mesh = fem::build_mesh(4, 1, fem::Rect::centred_square(1.0));
    auto sys = fem::constrain(fem::assemble_corrector(mesh, mat, {1, 0, 0}), mesh, fem::BcModel::minimal);
    CHECK(sys.kinematic_multiplier_count() == 5);

    Eigen::VectorXd u = fem::solve(sys, mesh);
    CHECK(fem::volume_average(mesh, u).cwiseAbs().maxCoeff() < 1e-10);
    // boundary symmetric moment vanishes
    auto bn = fem::shape_boundary_normal_integrals(mesh);
    Eigen::Matrix2d moment = Eigen::Matrix2d::Zero();
    for (int n = 0; n < mesh.n_nodes(); ++n) {
        Eigen::Vector2d val(u[2 * n], u[2 * n + 1]);
        moment += val * bn[static_cast<std::size_t>(n)].transpose();
    }
    Eigen::Matrix2d sym = 0.5 * (moment + moment.transpose());
    CHECK(sym.cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("prescribed trace is honoured and the result zero-averaged") {
    MicroField mat;
    mat.m = homogeneous_cell(10.0);
    auto mesh = fem::build_mesh(4, 1, fem::Rect::centred_square(1.0));
    auto bd = fem::boundary_mass(mesh);

    Rng rng(3);
    Eigen::VectorXd g(bd.n_slots());
    for (int i = 0; i < g.size(); ++i) g[i] = 0.01 * rng.normal();

    auto sys = fem::constrain(fem::assemble_corrector(mesh, mat, {1, 0, 0}), mesh,
                              fem::BcModel::prescribed_trace, &g, &bd);
    Eigen::VectorXd u = fem::solve(sys, mesh);
    CHECK(fem::volume_average(mesh, u).cwiseAbs().maxCoeff() < 1e-12);

    // boundary values differ from the datum by exactly the subtracted average
    Eigen::VectorXd w = fem::trace(u, bd);
    Eigen::VectorXd shift = g - w;
    for (std::size_t p = 1; p < bd.nodes.size(); ++p) {
        CHECK(shift[2 * static_cast<int>(p)] == doctest::Approx(shift[0]).epsilon(1e-10));
        CHECK(shift[2 * static_cast<int>(p) + 1] == doctest::Approx(shift[1]).epsilon(1e-10));
    }

    Eigen::VectorXd bad(bd.n_slots() - 2);
    bad.setZero();
    CHECK_THROWS_AS(fem::constrain(fem::assemble_corrector(mesh, mat, {1, 0, 0}), mesh,
                                   fem::BcModel::prescribed_trace, &bad, &bd),
                    std::invalid_argument);
}

TEST_CASE("sparse solver agrees with an elimination oracle") {
    Rng rng(17);
    Eigen::MatrixXd a0(6, 6);
    for (int i = 0; i < 6; ++i)
        for (int j = 0; j < 6; ++j) a0(i, j) = rng.normal();
    Eigen::MatrixXd spd = a0 * a0.transpose() + 6.0 * Eigen::MatrixXd::Identity(6, 6);
    Eigen::VectorXd b(6);
    for (int i = 0; i < 6; ++i) b[i] = rng.normal();

    Eigen::SparseMatrix<double> a = spd.sparseView();
    Eigen::VectorXd x = fem::sparse_solve(a, b);
    Eigen::VectorXd ref = gauss_solve(spd, b);
    CHECK((x - ref).norm() / ref.norm() < 1e-12);
}

TEST_CASE("singular systems report a nullspace estimate") {
    Eigen::SparseMatrix<double> a(3, 3);
    a.insert(0, 0) = 1.0;
    a.insert(1, 1) = 1.0;  // row/col 2 empty
    a.makeCompressed();
    Eigen::VectorXd b = Eigen::VectorXd::Ones(3);
    CHECK_THROWS_WITH_AS(fem::sparse_solve(a, b), doctest::Contains("nullspace dimension estimate = 1"),
                         std::runtime_error);
}

TEST_CASE("galerkin residual vanishes on the constrained space") {
    MicroField mat;
    mat.m = homogeneous_cell(10.0);
    mat.m.radii = {0.18, 0.05, 0.11, 0.2};
    auto mesh = fem::build_mesh(8, 1, fem::Rect::centred_square(1.0));
    auto sys = fem::constrain(fem::assemble_corrector(mesh, mat, {1, 0, 0}), mesh, fem::BcModel::linear);
    Eigen::VectorXd u = fem::solve(sys, mesh);
    Eigen::VectorXd resid = sys.rhs - sys.stiffness * u;

    std::set<int> boundary;
    for (auto [dof, val] : sys.fixed_dofs) boundary.insert(dof);
    Rng rng(23);
    double scale = sys.rhs.norm();
    for (int trial = 0; trial < 10; ++trial) {
        Eigen::VectorXd v = Eigen::VectorXd::Zero(mesh.n_dofs());
        for (int i = 0; i < mesh.n_dofs(); ++i)
            if (!boundary.count(i)) v[i] = rng.normal();
        CHECK(std::abs(v.dot(resid)) <= 1e-10 * scale * v.norm());
    }
}

TEST_CASE("affine Dirichlet data reproduces the affine field exactly") {
    for (int order : {1, 2}) {
        MicroField mat;
        mat.m = homogeneous_cell(1.0);
        auto mesh = fem::build_mesh(4, order, fem::Rect::centred_square(1.0));
        auto bd = fem::boundary_mass(mesh);
        Eigen::Matrix2d a;
        a << 0.3, -0.1, 0.7, 0.2;
        Eigen::VectorXd g(bd.n_slots());
        for (std::size_t p = 0; p < bd.nodes.size(); ++p) {
            Eigen::Vector2d val = a * mesh.nodes[static_cast<std::size_t>(bd.nodes[p])];
            g[2 * static_cast<int>(p)] = val.x();
            g[2 * static_cast<int>(p) + 1] = val.y();
        }
        auto sys = fem::constrain(fem::assemble_corrector(mesh, mat, Voigt::Zero()), mesh,
                                  fem::BcModel::prescribed_trace, &g, &bd);
        Eigen::VectorXd u = fem::solve(sys, mesh);
        for (int n = 0; n < mesh.n_nodes(); ++n) {
            Eigen::Vector2d expect = a * mesh.nodes[static_cast<std::size_t>(n)];  // zero average already
            CHECK(u[2 * n] == doctest::Approx(expect.x()).epsilon(1e-10));
            CHECK(u[2 * n + 1] == doctest::Approx(expect.y()).epsilon(1e-10));
        }
    }
}

TEST_CASE("traction loads integrate to the applied force") {
    auto mesh = fem::build_mesh(5, 1, unit);
    std::vector<Eigen::Matrix3d> tangents(static_cast<std::size_t>(mesh.n_cells()),
                                          isotropic_stiffness(1.0, 0.5));
    auto sys = fem::assemble_macro(mesh, tangents, {{fem::Side::right, {2.5, -1.0}}});
    double fx = 0, fy = 0;
    for (int n = 0; n < mesh.n_nodes(); ++n) {
        fx += sys.rhs[2 * n];
        fy += sys.rhs[2 * n + 1];
    }
    CHECK(fx == doctest::Approx(2.5).epsilon(1e-13));
    CHECK(fy == doctest::Approx(-1.0).epsilon(1e-13));
}

TEST_CASE("interpolation reproduces affine fields anywhere") {
    for (int order : {1, 2}) {
        auto mesh = fem::build_mesh(3, order, unit);
        Eigen::VectorXd field(mesh.n_dofs());
        for (int n = 0; n < mesh.n_nodes(); ++n) {
            const auto& y = mesh.nodes[static_cast<std::size_t>(n)];
            field[2 * n] = 2.0 * y.x() - y.y() + 0.3;
            field[2 * n + 1] = 0.5 * y.x() + 3.0 * y.y();
        }
        for (auto p : {Eigen::Vector2d{0.17, 0.83}, Eigen::Vector2d{0.5, 0.01}, Eigen::Vector2d{0.99, 0.99}}) {
            Eigen::Vector2d v = fem::interpolate(mesh, field, p);
            CHECK(v.x() == doctest::Approx(2 * p.x() - p.y() + 0.3).epsilon(1e-12));
            CHECK(v.y() == doctest::Approx(0.5 * p.x() + 3 * p.y()).epsilon(1e-12));
        }
    }
}

TEST_CASE("volume average is exact for affine fields") {
    auto mesh = fem::build_mesh(4, 1, unit);
    Eigen::VectorXd field(mesh.n_dofs());
    for (int n = 0; n < mesh.n_nodes(); ++n) {
        const auto& y = mesh.nodes[static_cast<std::size_t>(n)];
        field[2 * n] = 1.0 + 2.0 * y.x();
        field[2 * n + 1] = -3.0 * y.y();
    }
    Eigen::Vector2d avg = fem::volume_average(mesh, field);
    CHECK(avg.x() == doctest::Approx(2.0).epsilon(1e-13));   // 1 + 2*0.5
    CHECK(avg.y() == doctest::Approx(-1.5).epsilon(1e-13));  // -3*0.5
}
