#include "deepbnd/model.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "deepbnd/hash.hpp"
#include "deepbnd/io.hpp"

namespace deepbnd::model {

void DeepBndModel::validate() const {
    if (basis_axial.n_gamma() != basis_shear.n_gamma() || basis_axial.n_gamma() != basis_vertical.n_gamma())
        throw std::runtime_error("bases do not share one boundary discretisation");
    if (basis_axial.n_rb() != basis_shear.n_rb())
        throw std::runtime_error("axial and shear bases use different sizes");
    if (!basis_axial.mesh_hash.empty() && basis_axial.mesh_hash != basis_shear.mesh_hash)
        throw std::runtime_error("basis mesh hashes disagree");
    if (basis_axial.n_rb() > 0) {
        if (net_axial.output_dim() != basis_axial.n_rb() || net_shear.output_dim() != basis_shear.n_rb())
            throw std::runtime_error("submodel output dimension does not match basis size");
        if (net_axial.input_dim() != hf_lattice.n_balls() || net_shear.input_dim() != hf_lattice.n_balls())
            throw std::runtime_error("submodel input dimension does not match lattice size");
    }
}

DeepBndModel assemble_model(const micro::LatticeConfig& lattice, int window_n_side, int hf_divisions, int order,
                            mlp::MlpModel net_axial, mlp::ScalingSpec scaling_axial, rb::ReducedBasis basis_axial,
                            mlp::MlpModel net_shear, mlp::ScalingSpec scaling_shear, rb::ReducedBasis basis_shear,
                            const fem::BoundaryDiscretisation& window_bd) {
    DeepBndModel dbm;
    dbm.hf_lattice = lattice;
    dbm.window_n_side = window_n_side;
    dbm.hf_divisions = hf_divisions;
    dbm.order = order;
    dbm.net_axial = std::move(net_axial);
    dbm.scaling_axial = std::move(scaling_axial);
    dbm.basis_axial = std::move(basis_axial);
    dbm.net_shear = std::move(net_shear);
    dbm.scaling_shear = std::move(scaling_shear);
    dbm.basis_shear = std::move(basis_shear);
    dbm.basis_vertical = rb::rotate_basis(dbm.basis_axial, window_bd);
    dbm.validate();
    return dbm;
}

Eigen::VectorXd predict_bc_theta(const DeepBndModel& dbm, const Eigen::VectorXd& theta, const Voigt& p_eps) {
    if (theta.size() != dbm.hf_lattice.n_balls())
        throw std::invalid_argument("parameter vector length does not match the lattice");
    Eigen::VectorXd w = Eigen::VectorXd::Zero(dbm.n_gamma());
    if (dbm.n_rb() == 0) return w;
    if (p_eps[0] != 0)
        w += p_eps[0] * (dbm.basis_axial.basis * dbm.net_axial.forward(theta));
    if (p_eps[1] != 0)
        w += p_eps[1] * (dbm.basis_vertical.basis * dbm.net_axial.forward(micro::permute_params(theta, 1)));
    if (p_eps[2] != 0)
        w += p_eps[2] * (dbm.basis_shear.basis * dbm.net_shear.forward(theta));
    return w;
}

Eigen::VectorXd predict_bc(const DeepBndModel& dbm, const std::vector<double>& radii, const Voigt& p_eps) {
    return predict_bc_theta(dbm, micro::theta_from_radii(radii, dbm.hf_lattice.r_min, dbm.hf_lattice.r_max), p_eps);
}

LearnedSpace make_learned_space(const DeepBndModel& dbm, const fem::Mesh& window_mesh,
                                const fem::BoundaryDiscretisation& window_bd,
                                const std::vector<double>& radii, const Voigt& p_eps) {
    LearnedSpace ls;
    ls.trace = predict_bc(dbm, radii, p_eps);
    Eigen::Matrix2d a = rb::boundary_moment(window_mesh, window_bd, ls.trace);
    ls.strain_correction = Voigt(a(0, 0), a(1, 1), a(0, 1) + a(1, 0));
    ls.corrected_trace = ls.trace;
    for (int p = 0; p < static_cast<int>(window_bd.nodes.size()); ++p) {
        Eigen::Vector2d y = window_mesh.nodes[static_cast<std::size_t>(window_bd.nodes[static_cast<std::size_t>(p)])];
        Eigen::Vector2d shift = a * y;
        ls.corrected_trace[2 * p] -= shift.x();
        ls.corrected_trace[2 * p + 1] -= shift.y();
    }
    return ls;
}

Eigen::Matrix3d deepbnd_tangent(const DeepBndModel& dbm, const corrector::ReducedWindow& window,
                                const std::vector<double>& hf_radii) {
    std::array<Eigen::VectorXd, 3> unit_traces;
    for (int load = 1; load <= 3; ++load)
        unit_traces[static_cast<std::size_t>(load - 1)] =
            predict_bc(dbm, hf_radii, corrector::unit_strain(load));
    return corrector::homogenised_tangent(window, unit_traces);
}

ErrorSplit error_decomposition(const DeepBndModel& dbm, int load, const Eigen::MatrixXd& traces,
                               const Eigen::MatrixXd& thetas, const Eigen::SparseMatrix<double>& mass) {
    if (load < 1 || load > 3) throw std::invalid_argument("load must be 1, 2 or 3");
    if (traces.cols() != thetas.cols() || traces.cols() < 1)
        throw std::invalid_argument("dataset must carry matching traces and parameters");

    const rb::ReducedBasis* basis = load == 1 ? &dbm.basis_axial : load == 2 ? &dbm.basis_vertical : &dbm.basis_shear;
    const mlp::MlpModel* net = load == 3 ? &dbm.net_shear : &dbm.net_axial;

    const Eigen::Index ns = traces.cols();
    ErrorSplit out;
    for (Eigen::Index i = 0; i < ns; ++i) {
        Eigen::VectorXd w = traces.col(i);
        Eigen::VectorXd theta = thetas.col(i);
        if (load == 2) theta = micro::permute_params(theta, 1);
        Eigen::VectorXd beta = rb::project(w, *basis, mass);
        Eigen::VectorXd beta_hat = dbm.n_rb() > 0 ? net->forward(theta) : Eigen::VectorXd(0);
        Eigen::VectorXd w_hat = basis->basis * beta_hat;
        out.e_t_sq += rb::mass_norm_sq(mass, w_hat - w);
        out.e_dnn_sq += (beta_hat - beta).squaredNorm();
        out.e_pod_sq += rb::mass_norm_sq(mass, w - basis->basis * beta);
    }
    out.e_t_sq /= double(ns);
    out.e_dnn_sq /= double(ns);
    out.e_pod_sq /= double(ns);

    double gap = std::abs(out.e_t_sq - (out.e_dnn_sq + out.e_pod_sq));
    if (gap > 1e-9 * std::max(out.e_t_sq, 1e-300))
        throw std::runtime_error("error split identity violated: gap " + std::to_string(gap));
    return out;
}

namespace {

io::json lattice_json(const micro::LatticeConfig& c) {
    return io::json{{"n_side", c.n_side}, {"L_H", c.length},   {"r_min", c.r_min},
                    {"r_max", c.r_max},   {"gamma", c.gamma},  {"lame", {c.lambda, c.shear}}};
}

micro::LatticeConfig lattice_from_json(const io::json& j) {
    micro::LatticeConfig c;
    c.n_side = j.at("n_side").get<int>();
    c.length = j.at("L_H").get<double>();
    c.r_min = j.at("r_min").get<double>();
    c.r_max = j.at("r_max").get<double>();
    c.gamma = j.at("gamma").get<double>();
    c.lambda = j.at("lame").at(0).get<double>();
    c.shear = j.at("lame").at(1).get<double>();
    return c;
}

} // namespace

std::string artifact_hash(const std::filesystem::path& dir) {
    std::vector<std::filesystem::path> files;
    for (const auto& e : std::filesystem::directory_iterator(dir))
        if (e.is_regular_file()) files.push_back(e.path());
    std::sort(files.begin(), files.end());
    Sha256 h;
    for (const auto& f : files) {
        h.update(f.filename().string());
        h.update(sha256_file_hex(f.string()));
    }
    return h.hex_digest();
}

void save_bundle(const std::filesystem::path& dir, const DeepBndModel& dbm,
                 const mlp::TrainConfig& cfg_axial, const mlp::TrainConfig& cfg_shear) {
    std::filesystem::create_directories(dir);
    rb::save_basis(dir / "basis_axial", dbm.basis_axial);
    rb::save_basis(dir / "basis_shear", dbm.basis_shear);
    io::json artifacts;
    if (dbm.n_rb() > 0) {
        mlp::save_model(dir / "model_axial", dbm.net_axial, dbm.scaling_axial, cfg_axial,
                        artifact_hash(dir / "basis_axial"));
        mlp::save_model(dir / "model_shear", dbm.net_shear, dbm.scaling_shear, cfg_shear,
                        artifact_hash(dir / "basis_shear"));
        artifacts["model_axial"] = artifact_hash(dir / "model_axial");
        artifacts["model_shear"] = artifact_hash(dir / "model_shear");
    }
    artifacts["basis_axial"] = artifact_hash(dir / "basis_axial");
    artifacts["basis_shear"] = artifact_hash(dir / "basis_shear");
    io::write_json(dir / "bundle.json", io::json{{"lattice", lattice_json(dbm.hf_lattice)},
                                                 {"window_n_side", dbm.window_n_side},
                                                 {"hf_divisions", dbm.hf_divisions},
                                                 {"order", dbm.order},
                                                 {"artifacts", artifacts}});
}

DeepBndModel load_bundle(const std::filesystem::path& dir) {
    auto j = io::read_json(dir / "bundle.json");
    DeepBndModel dbm;
    dbm.hf_lattice = lattice_from_json(j.at("lattice"));
    dbm.window_n_side = j.at("window_n_side").get<int>();
    dbm.hf_divisions = j.at("hf_divisions").get<int>();
    dbm.order = j.at("order").get<int>();

    const auto& art = j.at("artifacts");
    auto check = [&](const char* name) {
        std::string expect = art.at(name).get<std::string>();
        std::string got = artifact_hash(dir / name);
        if (expect != got)
            throw std::runtime_error(std::string("artifact hash mismatch for ") + name);
    };
    check("basis_axial");
    check("basis_shear");
    dbm.basis_axial = rb::load_basis(dir / "basis_axial");
    dbm.basis_shear = rb::load_basis(dir / "basis_shear");

    if (dbm.basis_axial.n_rb() > 0) {
        check("model_axial");
        check("model_shear");
        auto ma = mlp::load_model(dir / "model_axial");
        auto ms = mlp::load_model(dir / "model_shear");
        if (ma.basis_hash != art.at("basis_axial").get<std::string>() ||
            ms.basis_hash != art.at("basis_shear").get<std::string>())
            throw std::runtime_error("model/basis hash mismatch in bundle");
        dbm.net_axial = std::move(ma.model);
        dbm.scaling_axial = std::move(ma.scaling);
        dbm.net_shear = std::move(ms.model);
        dbm.scaling_shear = std::move(ms.scaling);
    }

    double window_len = dbm.hf_lattice.length * dbm.window_n_side / dbm.hf_lattice.n_side;
    auto window_mesh = fem::build_mesh(dbm.window_divisions(), dbm.order, fem::Rect::centred_square(window_len));
    auto bd = fem::boundary_mass(window_mesh);
    dbm.basis_vertical = rb::rotate_basis(dbm.basis_axial, bd);
    dbm.validate();
    return dbm;
}

} // namespace deepbnd::model
