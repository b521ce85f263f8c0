#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "deepbnd/model.hpp"
#include "deepbnd/pipeline.hpp"
#include "deepbnd/rng.hpp"

using namespace deepbnd;

namespace {

struct Fixture {
    pipeline::PipelineConfig cfg;
    fem::Mesh hf_mesh;
    corrector::ReducedWindow window;
    Eigen::MatrixXd traces_axial, traces_shear;  // n_gamma x N_s
    Eigen::MatrixXd thetas;                      // N_b x N_s
    model::DeepBndModel dbm;

    static Fixture make(int n_snapshots = 6, int n_rb = 3) {
        Fixture f;
        f.cfg.lattice.n_side = 4;
        f.cfg.lattice.r_min = 0.1 / 4;
        f.cfg.lattice.r_max = 0.4 / 4;
        f.cfg.hf_divisions = 8;
        f.cfg.window_n_side = 2;
        f.cfg.n_rb = n_rb;
        f.hf_mesh = pipeline::build_hf_mesh(f.cfg);
        f.window = pipeline::build_window(f.cfg);

        auto samples = micro::lhs_sample(n_snapshots, 16, 5);
        f.thetas = samples.theta.transpose();
        f.traces_axial.resize(f.window.boundary.n_slots(), n_snapshots);
        f.traces_shear.resize(f.window.boundary.n_slots(), n_snapshots);
        for (int i = 0; i < n_snapshots; ++i) {
            auto m = micro::make_microstructure(f.cfg.lattice, f.thetas.col(i));
            f.traces_axial.col(i) = corrector::extract_goal_trace(f.hf_mesh, m, 1, f.window).w;
            f.traces_shear.col(i) = corrector::extract_goal_trace(f.hf_mesh, m, 3, f.window).w;
        }

        auto basis_axial = rb::pod(f.traces_axial, f.window.boundary.mass, rb::PodTruncation::count(n_rb));
        auto basis_shear = rb::pod(f.traces_shear, f.window.boundary.mass, rb::PodTruncation::count(n_rb));
        basis_axial.load_index = 1;
        basis_shear.load_index = 3;
        basis_axial.mesh_hash = basis_shear.mesh_hash = f.window.mesh.hash();

        auto net_axial = mlp::make_mlp({16, 8, basis_axial.n_rb()}, 21);
        auto net_shear = mlp::make_mlp({16, 8, basis_shear.n_rb()}, 22);
        mlp::ScalingSpec sa = mlp::ScalingSpec::fit(Eigen::MatrixXd::Random(basis_axial.n_rb(), 4));
        mlp::ScalingSpec ss = mlp::ScalingSpec::fit(Eigen::MatrixXd::Random(basis_shear.n_rb(), 4));
        f.dbm = model::assemble_model(f.cfg.lattice, 2, f.cfg.hf_divisions, 1, net_axial, sa, basis_axial,
                                      net_shear, ss, basis_shear, f.window.boundary);
        return f;
    }
};

} // namespace

TEST_CASE("zero strain parameters predict a zero trace") {
    auto f = Fixture::make();
    auto m = micro::make_microstructure(f.cfg.lattice, f.thetas.col(0));
    Eigen::VectorXd w = model::predict_bc(f.dbm, m.radii, Voigt::Zero());
    CHECK(w.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("axial prediction lies in the axial basis span") {
    auto f = Fixture::make();
    auto m = micro::make_microstructure(f.cfg.lattice, f.thetas.col(1));
    Eigen::VectorXd w = model::predict_bc(f.dbm, m.radii, {1, 0, 0});
    Eigen::VectorXd beta = rb::project(w, f.dbm.basis_axial, f.window.boundary.mass);
    Eigen::VectorXd recon = rb::reconstruct(beta, f.dbm.basis_axial);
    CHECK((w - recon).cwiseAbs().maxCoeff() < 1e-12 * w.cwiseAbs().maxCoeff());
}

TEST_CASE("vertical path equals rotating the axial path") {
    auto f = Fixture::make();
    auto m = micro::make_microstructure(f.cfg.lattice, f.thetas.col(2));
    Eigen::VectorXd lhs = model::predict_bc(f.dbm, m.radii, {0, 1, 0});
    auto permuted = micro::permute_params(m.radii, 1);
    Eigen::VectorXd axial = model::predict_bc(f.dbm, permuted, {1, 0, 0});
    Eigen::VectorXd rhs = fem::rotate_trace_quarter(f.window.boundary, axial, 1);
    CHECK((lhs - rhs).cwiseAbs().maxCoeff() < 1e-13 * rhs.cwiseAbs().maxCoeff());
}

TEST_CASE("prediction is linear in the strain parameters") {
    auto f = Fixture::make();
    auto m = micro::make_microstructure(f.cfg.lattice, f.thetas.col(3));
    Voigt p{0.3, -1.2, 0.8};
    Eigen::VectorXd combined = model::predict_bc(f.dbm, m.radii, p);
    Eigen::VectorXd sum = p[0] * model::predict_bc(f.dbm, m.radii, {1, 0, 0}) +
                          p[1] * model::predict_bc(f.dbm, m.radii, {0, 1, 0}) +
                          p[2] * model::predict_bc(f.dbm, m.radii, {0, 0, 1});
    CHECK((combined - sum).cwiseAbs().maxCoeff() < 1e-13 * sum.cwiseAbs().maxCoeff());
}

TEST_CASE("learned space with a zero prediction collapses to the linear model") {
    auto f = Fixture::make();
    model::DeepBndModel zero = f.dbm;
    for (auto& w : zero.net_axial.weights) w.setZero();
    for (auto& b : zero.net_axial.biases) b.setZero();
    for (auto& w : zero.net_shear.weights) w.setZero();
    for (auto& b : zero.net_shear.biases) b.setZero();
    auto m = micro::make_microstructure(f.cfg.lattice, f.thetas.col(0));
    auto ls = model::make_learned_space(zero, f.window.mesh, f.window.boundary, m.radii, {1, 0, 0});
    CHECK(ls.trace.cwiseAbs().maxCoeff() == 0.0);
    CHECK(ls.corrected_trace.cwiseAbs().maxCoeff() == 0.0);
    CHECK(ls.strain_correction.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("plain and starred learned spaces give the same stress") {
    auto f = Fixture::make();
    auto m = micro::make_microstructure(f.cfg.lattice, f.thetas.col(4));
    auto window = corrector::make_window(f.hf_mesh, m, 2);

    Voigt eps{1.0, 0.2, -0.4};
    auto ls = model::make_learned_space(f.dbm, window.mesh, window.boundary, m.radii, eps);
    Voigt s_plain = corrector::homogenise_stress(window.mesh, window.micro, eps,
                                                 corrector::solve_reduced(window, eps, ls.trace));
    Voigt eps_star = eps + ls.strain_correction;
    Voigt s_star = corrector::homogenise_stress(window.mesh, window.micro, eps_star,
                                                corrector::solve_reduced(window, eps_star, ls.corrected_trace));
    CHECK((s_plain - s_star).norm() < 1e-10 * s_plain.norm());

    // the corrected datum has no boundary moment
    Eigen::Matrix2d a = rb::boundary_moment(window.mesh, window.boundary, ls.corrected_trace);
    CHECK(a.cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("exact-trace injection reproduces the window-restricted stress") {
    auto f = Fixture::make();
    auto m = micro::make_microstructure(f.cfg.lattice, f.thetas.col(5));
    auto window = corrector::make_window(f.hf_mesh, m, 2);
    std::array<Eigen::VectorXd, 3> exact;
    Eigen::Matrix3d c_ref;
    for (int load = 1; load <= 3; ++load) {
        Eigen::VectorXd u = corrector::solve_corrector(f.hf_mesh, m, corrector::unit_strain(load),
                                                       fem::BcModel::periodic);
        exact[static_cast<std::size_t>(load - 1)] = corrector::goal_trace_from_field(f.hf_mesh, u, load, window).w;
        c_ref.col(load - 1) = corrector::homogenise_stress(window.mesh, window.micro, corrector::unit_strain(load),
                                                           corrector::restrict_field(window, u));
    }
    Eigen::Matrix3d c = corrector::homogenised_tangent(window, exact);
    CHECK((c - c_ref).norm() < 1e-8 * c_ref.norm());
}

TEST_CASE("error decomposition: zero predictor and split identity") {
    auto f = Fixture::make();
    model::DeepBndModel zero = f.dbm;
    for (auto& w : zero.net_axial.weights) w.setZero();
    for (auto& b : zero.net_axial.biases) b.setZero();

    auto split = model::error_decomposition(zero, 1, f.traces_axial, f.thetas, f.window.boundary.mass);
    double beta_mean = 0;
    for (Eigen::Index i = 0; i < f.traces_axial.cols(); ++i)
        beta_mean += rb::project(f.traces_axial.col(i), f.dbm.basis_axial, f.window.boundary.mass).squaredNorm();
    beta_mean /= double(f.traces_axial.cols());
    CHECK(split.e_dnn_sq == doctest::Approx(beta_mean).epsilon(1e-10));
    CHECK(split.e_t_sq == doctest::Approx(split.e_dnn_sq + split.e_pod_sq).epsilon(1e-9));

    // random predictor: the orthogonal split holds too (asserted internally)
    auto random_split = model::error_decomposition(f.dbm, 3, f.traces_shear, f.thetas, f.window.boundary.mass);
    CHECK(random_split.e_t_sq == doctest::Approx(random_split.e_dnn_sq + random_split.e_pod_sq).epsilon(1e-9));
}

TEST_CASE("error decomposition: perfect predictor on a single snapshot") {
    auto f = Fixture::make();
    Eigen::MatrixXd one_trace = f.traces_axial.col(0);
    Eigen::MatrixXd one_theta = f.thetas.col(0);

    model::DeepBndModel perfect = f.dbm;
    for (auto& w : perfect.net_axial.weights) w.setZero();
    for (auto& b : perfect.net_axial.biases) b.setZero();
    perfect.net_axial.biases.back() =
        rb::project(one_trace.col(0), f.dbm.basis_axial, f.window.boundary.mass);

    auto split = model::error_decomposition(perfect, 1, one_trace, one_theta, f.window.boundary.mass);
    CHECK(split.e_dnn_sq < 1e-24);
    CHECK(split.e_t_sq == doctest::Approx(split.e_pod_sq).epsilon(1e-10));
}

TEST_CASE("vertical error decomposition uses the rotated basis and permuted inputs") {
    auto f = Fixture::make();
    // build the vertical dataset directly and check the split holds there
    Eigen::MatrixXd traces_vert(f.window.boundary.n_slots(), f.thetas.cols());
    for (Eigen::Index i = 0; i < f.thetas.cols(); ++i) {
        auto m = micro::make_microstructure(f.cfg.lattice, f.thetas.col(i));
        traces_vert.col(i) = corrector::extract_goal_trace(f.hf_mesh, m, 2, f.window).w;
    }
    auto split = model::error_decomposition(f.dbm, 2, traces_vert, f.thetas, f.window.boundary.mass);
    CHECK(split.e_t_sq == doctest::Approx(split.e_dnn_sq + split.e_pod_sq).epsilon(1e-9));

    // equivariance: vertical POD error equals the axial POD error of the
    // permuted dataset
    double axial_pod = 0;
    for (Eigen::Index i = 0; i < f.thetas.cols(); ++i) {
        auto mp = micro::make_microstructure(f.cfg.lattice, micro::permute_params(Eigen::VectorXd(f.thetas.col(i)), 1));
        Eigen::VectorXd w1 = corrector::extract_goal_trace(f.hf_mesh, mp, 1, f.window).w;
        Eigen::VectorXd beta = rb::project(w1, f.dbm.basis_axial, f.window.boundary.mass);
        axial_pod += rb::mass_norm_sq(f.window.boundary.mass, w1 - rb::reconstruct(beta, f.dbm.basis_axial));
    }
    axial_pod /= double(f.thetas.cols());
    CHECK(split.e_pod_sq == doctest::Approx(axial_pod).epsilon(1e-7));
}

TEST_CASE("bundles round trip and reject tampering") {
    namespace fs = std::filesystem;
    auto f = Fixture::make();
    fs::path dir = fs::temp_directory_path() / "deepbnd_bundle_io";
    fs::remove_all(dir);
    mlp::TrainConfig tc;
    model::save_bundle(dir, f.dbm, tc, tc);

    auto loaded = model::load_bundle(dir);
    CHECK(loaded.n_rb() == f.dbm.n_rb());
    CHECK((loaded.basis_axial.basis - f.dbm.basis_axial.basis).cwiseAbs().maxCoeff() == 0.0);
    CHECK((loaded.basis_vertical.basis - f.dbm.basis_vertical.basis).cwiseAbs().maxCoeff() == 0.0);
    auto m = micro::make_microstructure(f.cfg.lattice, f.thetas.col(1));
    Eigen::VectorXd w1 = model::predict_bc(f.dbm, m.radii, {0.5, 0.25, -1.0});
    Eigen::VectorXd w2 = model::predict_bc(loaded, m.radii, {0.5, 0.25, -1.0});
    CHECK((w1 - w2).cwiseAbs().maxCoeff() == 0.0);

    // flip one byte in the basis payload
    {
        std::fstream fs_io(dir / "basis_axial" / "basis.bin",
                           std::ios::binary | std::ios::in | std::ios::out);
        fs_io.seekp(16);
        char c;
        fs_io.seekg(16);
        fs_io.get(c);
        c = static_cast<char>(c ^ 0x1);
        fs_io.seekp(16);
        fs_io.put(c);
    }
    CHECK_THROWS_WITH_AS(model::load_bundle(dir), doctest::Contains("hash mismatch"), std::runtime_error);
    fs::remove_all(dir);
}

TEST_CASE("model validation catches dimension mismatches") {
    auto f = Fixture::make();
    model::DeepBndModel broken = f.dbm;
    broken.net_axial = mlp::make_mlp({16, 4, broken.n_rb() + 1}, 9);
    CHECK_THROWS_AS(broken.validate(), std::runtime_error);

    model::DeepBndModel wrong_input = f.dbm;
    wrong_input.net_shear = mlp::make_mlp({15, 4, wrong_input.n_rb()}, 9);
    CHECK_THROWS_AS(wrong_input.validate(), std::runtime_error);
}
