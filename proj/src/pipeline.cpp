#include "deepbnd/pipeline.hpp"

#include <cmath>
#include <iostream>
#include <set>
#include <stdexcept>

#include "deepbnd/hash.hpp"
#include "deepbnd/macro.hpp"
#include "deepbnd/parallel.hpp"

namespace deepbnd::pipeline {

namespace fs = std::filesystem;

io::json PipelineConfig::to_json() const {
    return io::json{
        {"lattice", {{"n_side", lattice.n_side}, {"L_H", lattice.length}, {"r_min", lattice.r_min},
                     {"r_max", lattice.r_max}, {"gamma", lattice.gamma}, {"lame", {lattice.lambda, lattice.shear}}}},
        {"mesh", {{"divisions", hf_divisions}, {"order", order}}},
        {"window", {{"n_side", window_n_side}}},
        {"datasets", {{"train", {{"n", train.n}, {"seed", train.seed}}},
                      {"validation", {{"n", validation.n}, {"seed", validation.seed}}},
                      {"test", {{"n", test.n}, {"seed", test.seed}}}}},
        {"rb", {{"n_rb", n_rb}, {"sweep", rb_sweep}}},
        {"train", {{"hidden", training.hidden}, {"epochs", training.epochs}, {"batch_size", training.batch_size},
                   {"lr_start", training.lr_start}, {"lr_end", training.lr_end},
                   {"lr_end_epoch", training.lr_end_epoch}, {"retention", training.retention},
                   {"l2", training.l2}, {"seed", training.seed},
                   {"early_stop", training.early_stop_on_validation}}},
        {"experiments", experiments}};
}

PipelineConfig PipelineConfig::from_json(const io::json& j) {
    PipelineConfig c;
    const auto& lat = j.at("lattice");
    c.lattice.n_side = lat.at("n_side").get<int>();
    c.lattice.length = lat.at("L_H").get<double>();
    c.lattice.r_min = lat.at("r_min").get<double>();
    c.lattice.r_max = lat.at("r_max").get<double>();
    c.lattice.gamma = lat.at("gamma").get<double>();
    c.lattice.lambda = lat.at("lame").at(0).get<double>();
    c.lattice.shear = lat.at("lame").at(1).get<double>();
    c.hf_divisions = j.at("mesh").at("divisions").get<int>();
    c.order = j.at("mesh").at("order").get<int>();
    c.window_n_side = j.at("window").at("n_side").get<int>();
    auto ds = [&](const char* k) {
        return DatasetSpec{j.at("datasets").at(k).at("n").get<int>(),
                           j.at("datasets").at(k).at("seed").get<std::uint64_t>()};
    };
    c.train = ds("train");
    c.validation = ds("validation");
    c.test = ds("test");
    c.n_rb = j.at("rb").at("n_rb").get<int>();
    c.rb_sweep = j.at("rb").at("sweep").get<std::vector<int>>();
    const auto& tr = j.at("train");
    c.training.hidden = tr.at("hidden").get<std::vector<int>>();
    c.training.epochs = tr.at("epochs").get<int>();
    c.training.batch_size = tr.at("batch_size").get<int>();
    c.training.lr_start = tr.at("lr_start").get<double>();
    c.training.lr_end = tr.at("lr_end").get<double>();
    c.training.lr_end_epoch = tr.at("lr_end_epoch").get<int>();
    c.training.retention = tr.at("retention").get<double>();
    c.training.l2 = tr.at("l2").get<double>();
    c.training.seed = tr.at("seed").get<std::uint64_t>();
    c.training.early_stop_on_validation = tr.at("early_stop").get<bool>();
    if (j.contains("experiments")) c.experiments = j.at("experiments").get<std::vector<std::string>>();
    return c;
}

std::string PipelineConfig::content_hash() const { return sha256_hex(to_json().dump()); }

void PipelineConfig::validate() const {
    lattice.validate();
    training.validate();
    if (train.n < 1 || validation.n < 1 || test.n < 1) throw std::invalid_argument("dataset sizes must be positive");
    if (validation.seed == train.seed || test.seed == train.seed)
        throw std::invalid_argument("validation/test seeds must differ from the training seed");
    if (n_rb < 0) throw std::invalid_argument("n_rb must be nonnegative");
    int n = lattice.n_side, w = window_n_side;
    if ((hf_divisions * w) % n != 0 || (hf_divisions * (n - w)) % (2 * n) != 0)
        throw std::invalid_argument("mesh divisions do not align with the reduced window");
}

fem::Mesh build_hf_mesh(const PipelineConfig& cfg) {
    return fem::build_mesh(cfg.hf_divisions, cfg.order, fem::Rect::centred_square(cfg.lattice.length));
}

corrector::ReducedWindow build_window(const PipelineConfig& cfg) {
    auto hf_mesh = build_hf_mesh(cfg);
    // window geometry is microstructure independent; any admissible one works
    Eigen::VectorXd theta0 = Eigen::VectorXd::Zero(cfg.lattice.n_balls());
    auto m = micro::make_microstructure(cfg.lattice, theta0);
    return corrector::make_window(hf_mesh, m, cfg.window_n_side);
}

SnapshotSet generate_snapshots(const PipelineConfig& cfg, int load, const std::string& use,
                               const DatasetSpec& spec, int workers) {
    if (load != 1 && load != 3) throw std::invalid_argument("snapshot loads are 1 (axial) or 3 (shear)");
    auto hf_mesh = build_hf_mesh(cfg);
    auto window = build_window(cfg);
    auto samples = micro::lhs_sample(spec.n, cfg.lattice.n_balls(), spec.seed);

    SnapshotSet out;
    out.load = load;
    out.use = use;
    out.seed = spec.seed;
    out.mesh_hash = window.mesh.hash();
    out.thetas = samples.theta.transpose();
    out.traces.resize(window.boundary.n_slots(), spec.n);

    parallel_for(spec.n, workers, [&](int i) {
        auto m = micro::make_microstructure(cfg.lattice, out.thetas.col(i));
        Eigen::VectorXd u = corrector::solve_corrector(hf_mesh, m, corrector::unit_strain(load),
                                                       fem::BcModel::periodic);
        out.traces.col(i) = corrector::goal_trace_from_field(hf_mesh, u, load, window).w;
    });
    return out;
}

std::string dataset_dirname(int load, const std::string& use) {
    return (load == 1 ? std::string("axial") : std::string("shear")) + "-" + use;
}

void save_snapshots(const fs::path& dir, const SnapshotSet& s, const std::string& config_hash) {
    fs::create_directories(dir);
    io::write_json(dir / "manifest.json",
                   io::json{{"load", s.load == 1 ? "axial" : "shear"},
                            {"load_index", s.load},
                            {"use", s.use},
                            {"N_s", s.traces.cols()},
                            {"seed", s.seed},
                            {"n_gamma", s.traces.rows()},
                            {"n_b", s.thetas.rows()},
                            {"mesh_hash", s.mesh_hash},
                            {"params", "theta"},
                            {"config_hash", config_hash}});
    // traces.bin: N_s x n_gamma row-major; params.bin: N_s x N_b row-major
    io::write_matrix_rowmajor(dir / "traces.bin", s.traces.transpose());
    io::write_matrix_rowmajor(dir / "params.bin", s.thetas.transpose());
}

SnapshotSet load_snapshots(const fs::path& dir) {
    auto j = io::read_json(dir / "manifest.json");
    SnapshotSet s;
    s.load = j.at("load_index").get<int>();
    s.use = j.at("use").get<std::string>();
    s.seed = j.at("seed").get<std::uint64_t>();
    s.mesh_hash = j.at("mesh_hash").get<std::string>();
    Eigen::Index ns = j.at("N_s").get<Eigen::Index>();
    s.traces = io::read_matrix_rowmajor(dir / "traces.bin", ns, j.at("n_gamma").get<Eigen::Index>()).transpose();
    s.thetas = io::read_matrix_rowmajor(dir / "params.bin", ns, j.at("n_b").get<Eigen::Index>()).transpose();
    return s;
}

namespace {

bool artifact_is_current(const fs::path& dir, const std::string& config_hash) {
    if (!fs::exists(dir / "manifest.json")) return false;
    try {
        auto j = io::read_json(dir / "manifest.json");
        return j.value("config_hash", "") == config_hash;
    } catch (const std::exception&) {
        throw std::runtime_error("corrupted manifest: " + (dir / "manifest.json").string());
    }
}

SnapshotSet snapshots_stage(const PipelineConfig& cfg, const fs::path& ws, int load,
                            const std::string& use, const DatasetSpec& spec, const std::string& hash,
                            int workers) {
    fs::path dir = ws / "datasets" / dataset_dirname(load, use);
    if (artifact_is_current(dir, hash)) return load_snapshots(dir);
    auto s = generate_snapshots(cfg, load, use, spec, workers);
    save_snapshots(dir, s, hash);
    return s;
}

Eigen::MatrixXd project_targets(const Eigen::MatrixXd& traces, const rb::ReducedBasis& basis,
                                const Eigen::SparseMatrix<double>& mass) {
    Eigen::MatrixXd beta(basis.n_rb(), traces.cols());
    for (Eigen::Index i = 0; i < traces.cols(); ++i) beta.col(i) = rb::project(traces.col(i), basis, mass);
    return beta;
}

} // namespace

OfflineResult run_offline(const PipelineConfig& cfg, const fs::path& workspace, int workers) {
    cfg.validate();
    fs::create_directories(workspace);
    const std::string hash = cfg.content_hash();

    fs::path cfg_path = workspace / "config.json";
    if (fs::exists(cfg_path)) {
        auto existing = io::read_json(cfg_path);
        if (existing.value("config_hash", "") != hash)
            throw std::runtime_error("workspace was produced by a different config; refusing to mix artifacts");
    } else {
        auto j = cfg.to_json();
        j["config_hash"] = hash;
        io::write_json(cfg_path, j);
    }

    auto window = build_window(cfg);
    const auto& mass = window.boundary.mass;

    OfflineResult res;
    res.workspace = workspace;
    res.config_hash = hash;

    struct PerLoad {
        SnapshotSet train, val;
        rb::ReducedBasis basis;
        mlp::MlpModel net;
        mlp::ScalingSpec scaling;
    };
    PerLoad axial, shear;

    for (auto* pl : {&axial, &shear}) {
        int load = pl == &axial ? 1 : 3;
        pl->train = snapshots_stage(cfg, workspace, load, "train-rb", cfg.train, hash, workers);
        pl->val = snapshots_stage(cfg, workspace, load, "validation", cfg.validation, hash, workers);
        snapshots_stage(cfg, workspace, load, "test", cfg.test, hash, workers);

        fs::path rb_dir = workspace / "rb" / (load == 1 ? "axial" : "shear");
        if (artifact_is_current(rb_dir, hash)) {
            pl->basis = rb::load_basis(rb_dir);
        } else {
            pl->basis = rb::pod(pl->train.traces, mass, rb::PodTruncation::count(cfg.n_rb));
            pl->basis.load_index = load;
            pl->basis.mesh_hash = window.mesh.hash();
            rb::save_basis(rb_dir, pl->basis);
            auto j = io::read_json(rb_dir / "manifest.json");
            j["config_hash"] = hash;
            io::write_json(rb_dir / "manifest.json", j);
        }

        if (pl->basis.n_rb() == 0) {
            std::cerr << "run_offline: empty basis for load " << load << ", skipping training\n";
            continue;
        }

        fs::path model_dir = workspace / "models" / (load == 1 ? "axial" : "shear");
        if (artifact_is_current(model_dir, hash)) {
            auto lm = mlp::load_model(model_dir);
            pl->net = std::move(lm.model);
            pl->scaling = std::move(lm.scaling);
        } else {
            Eigen::MatrixXd beta_train = project_targets(pl->train.traces, pl->basis, mass);
            Eigen::MatrixXd beta_val = project_targets(pl->val.traces, pl->basis, mass);
            mlp::TrainConfig tc = cfg.training;
            tc.seed = cfg.training.seed + static_cast<std::uint64_t>(load);
            auto result = mlp::train(pl->train.thetas, beta_train, pl->val.thetas, beta_val, tc);
            pl->net = std::move(result.model);
            pl->scaling = std::move(result.scaling);
            mlp::save_model(model_dir, pl->net, pl->scaling, tc, model::artifact_hash(rb_dir));
            auto j = io::read_json(model_dir / "manifest.json");
            j["config_hash"] = hash;
            io::write_json(model_dir / "manifest.json", j);
            std::vector<double> tl = result.history.train_loss, vl = result.history.val_loss;
            io::write_json(model_dir / "history.json",
                           io::json{{"train_loss", tl}, {"val_loss", vl}, {"best_epoch", result.history.best_epoch}});
        }
    }

    res.bundle_dir = workspace / "bundle";
    auto dbm = model::assemble_model(cfg.lattice, cfg.window_n_side, cfg.hf_divisions, cfg.order,
                                     axial.net, axial.scaling, axial.basis,
                                     shear.net, shear.scaling, shear.basis, window.boundary);
    model::save_bundle(res.bundle_dir, dbm, cfg.training, cfg.training);
    return res;
}

namespace {

void single_cell_report(const PipelineConfig& cfg, const model::DeepBndModel& dbm,
                        const fs::path& out_dir, int workers) {
    auto hf_mesh = build_hf_mesh(cfg);
    auto samples = micro::lhs_sample(cfg.test.n, cfg.lattice.n_balls(), cfg.test.seed);
    const int n_cases = std::min(8, cfg.test.n);

    struct Row {
        double err_deepbnd, err_periodic, err_taylor, err_minimal, err_exact;
    };
    std::vector<Row> rows(static_cast<std::size_t>(n_cases));

    parallel_for(n_cases, workers, [&](int i) {
        auto m = micro::make_microstructure(cfg.lattice, samples.theta.row(i).transpose());
        auto window = corrector::make_window(hf_mesh, m, cfg.window_n_side);

        Eigen::Matrix3d c_hf = corrector::homogenised_tangent(hf_mesh, m, fem::BcModel::periodic);
        Eigen::Matrix3d c_per = corrector::homogenised_tangent(window.mesh, window.micro, fem::BcModel::periodic);
        Eigen::Matrix3d c_tay = corrector::homogenised_tangent(window.mesh, window.micro, fem::BcModel::taylor);
        Eigen::Matrix3d c_min = corrector::homogenised_tangent(window.mesh, window.micro, fem::BcModel::minimal);
        Eigen::Matrix3d c_dbn = model::deepbnd_tangent(dbm, window, m.radii);

        // oracle path: exact goal traces injected instead of the network
        std::array<Eigen::VectorXd, 3> exact;
        Eigen::Matrix3d c_hf_window = Eigen::Matrix3d::Zero();
        for (int load = 1; load <= 3; ++load) {
            Eigen::VectorXd u = corrector::solve_corrector(hf_mesh, m, corrector::unit_strain(load), fem::BcModel::periodic);
            exact[static_cast<std::size_t>(load - 1)] = corrector::goal_trace_from_field(hf_mesh, u, load, window).w;
            c_hf_window.col(load - 1) = corrector::homogenise_stress(window.mesh, window.micro, corrector::unit_strain(load),
                                                                     corrector::restrict_field(window, u));
        }
        Eigen::Matrix3d c_exact = corrector::homogenised_tangent(window, exact);

        double scale = c_hf.norm();
        rows[static_cast<std::size_t>(i)] = {(c_dbn - c_hf).norm() / scale, (c_per - c_hf).norm() / scale,
                                             (c_tay - c_hf).norm() / scale, (c_min - c_hf).norm() / scale,
                                             (c_exact - c_hf_window).norm() / scale};
    });

    io::CsvWriter csv(out_dir / "single_cell.csv");
    for (int i = 0; i < n_cases; ++i) {
        std::string name = "cell" + std::to_string(i);
        csv.row(name, "tangent_err_deepbnd", rows[static_cast<std::size_t>(i)].err_deepbnd);
        csv.row(name, "tangent_err_periodic", rows[static_cast<std::size_t>(i)].err_periodic);
        csv.row(name, "tangent_err_taylor", rows[static_cast<std::size_t>(i)].err_taylor);
        csv.row(name, "tangent_err_minimal", rows[static_cast<std::size_t>(i)].err_minimal);
        csv.row(name, "exact_trace_stress_err", rows[static_cast<std::size_t>(i)].err_exact);
    }
}

void sweep_report(const PipelineConfig& cfg, const model::DeepBndModel& dbm, const fs::path& workspace,
                  const fs::path& out_dir) {
    auto window = build_window(cfg);
    const auto& mass = window.boundary.mass;
    io::CsvWriter csv(out_dir / "rb_sweep.csv");
    for (int load : {1, 3}) {
        auto test = load_snapshots(workspace / "datasets" / dataset_dirname(load, "test"));
        const rb::ReducedBasis& basis = load == 1 ? dbm.basis_axial : dbm.basis_shear;
        const mlp::MlpModel& net = load == 1 ? dbm.net_axial : dbm.net_shear;
        for (int n : cfg.rb_sweep) {
            if (n > basis.n_rb()) continue;
            double e_pod = 0, e_dnn = 0, e_t = 0;
            for (Eigen::Index i = 0; i < test.traces.cols(); ++i) {
                Eigen::VectorXd w = test.traces.col(i);
                Eigen::VectorXd beta_full = rb::project(w, basis, mass);
                Eigen::VectorXd beta_hat_full = net.forward(test.thetas.col(i));
                Eigen::VectorXd beta = beta_full.head(n), beta_hat = beta_hat_full.head(n);
                Eigen::VectorXd w_n = basis.basis.leftCols(n) * beta;
                Eigen::VectorXd w_hat = basis.basis.leftCols(n) * beta_hat;
                e_pod += rb::mass_norm_sq(mass, w - w_n);
                e_dnn += (beta_hat - beta).squaredNorm();
                e_t += rb::mass_norm_sq(mass, w_hat - w);
            }
            double ns = double(test.traces.cols());
            std::string name = (load == 1 ? std::string("axial") : std::string("shear")) + "_nrb" + std::to_string(n);
            csv.row(name, "E_POD_sq", e_pod / ns);
            csv.row(name, "E_DNN_sq", e_dnn / ns);
            csv.row(name, "E_T_sq", e_t / ns);
        }
    }
}

void bounds_report(const PipelineConfig& cfg, const fs::path& out_dir) {
    auto window = build_window(cfg);
    auto samples = micro::lhs_sample(1, cfg.lattice.n_balls(), cfg.test.seed + 99);
    auto m = micro::make_microstructure(cfg.lattice, samples.theta.row(0).transpose());
    auto cell = micro::central_window(m, cfg.window_n_side);
    io::CsvWriter csv(out_dir / "tangent_bounds.csv");
    Eigen::Matrix3d prev;
    const fem::BcModel models[4] = {fem::BcModel::taylor, fem::BcModel::linear, fem::BcModel::periodic,
                                    fem::BcModel::minimal};
    const char* names[4] = {"taylor", "linear", "periodic", "minimal"};
    for (int k = 0; k < 4; ++k) {
        Eigen::Matrix3d c = corrector::homogenised_tangent(window.mesh, cell, models[k]);
        csv.row(names[k], "energy_e11", c(0, 0));
        csv.row(names[k], "energy_shear", c(2, 2));
        if (k > 0) csv.row(names[k], "energy_drop_from_previous", prev(0, 0) - c(0, 0));
        prev = c;
    }
}

} // namespace

void run_online(const PipelineConfig& cfg, const fs::path& workspace, const fs::path& out_dir, int workers) {
    fs::create_directories(out_dir);
    auto dbm = model::load_bundle(workspace / "bundle");

    std::set<std::string> wanted(cfg.experiments.begin(), cfg.experiments.end());
    if (wanted.count("single-cell")) single_cell_report(cfg, dbm, out_dir, workers);
    if (wanted.count("sweep")) sweep_report(cfg, dbm, workspace, out_dir);
    if (wanted.count("bounds")) bounds_report(cfg, out_dir);

    if (wanted.count("fe2-cook")) {
        macro::MacroProblem prob;
        prob.geometry = macro::Geometry::cook;
        prob.divisions_vertical = 3;
        auto mm = macro::build_macro_mesh(prob);
        auto pool = micro::lhs_sample(std::max(cfg.test.n, 2 * mm.mesh.n_cells()), cfg.lattice.n_balls(),
                                      cfg.test.seed + 7);
        io::CsvWriter csv(out_dir / "fe2_cook.csv");
        for (int r = 0; r < 5; ++r) {
            auto hf = macro::fe2_random(mm, cfg.lattice, cfg.window_n_side, cfg.hf_divisions,
                                        macro::Provider::hf, nullptr, pool.theta, 100 + r, workers);
            auto per = macro::fe2_random(mm, cfg.lattice, cfg.window_n_side, cfg.hf_divisions,
                                         macro::Provider::periodic, nullptr, pool.theta, 100 + r, workers);
            auto dbn = macro::fe2_random(mm, cfg.lattice, cfg.window_n_side, cfg.hf_divisions,
                                         macro::Provider::deepbnd, &dbm, pool.theta, 100 + r, workers);
            std::string name = "realisation" + std::to_string(r);
            csv.row(name, "tipA_hf", hf.tip_vertical);
            csv.row(name, "tipA_err_deepbnd", std::abs(dbn.tip_vertical - hf.tip_vertical));
            csv.row(name, "tipA_err_periodic", std::abs(per.tip_vertical - hf.tip_vertical));
        }
    }

    if (wanted.count("dns-bar")) {
        macro::DnsProblem dp;
        dp.ny_blocks = 4;
        dp.gamma = cfg.lattice.gamma;
        dp.lambda = cfg.lattice.lambda;
        dp.shear = cfg.lattice.shear;
        auto ref = macro::dns(dp);
        macro::MacroProblem prob;
        prob.geometry = macro::Geometry::bar;
        prob.divisions_vertical = 8;
        prob.traction = dp.traction;
        auto mm = macro::build_macro_mesh(prob);
        auto hf = macro::fe2_sliding(mm, ref, 4, cfg.window_n_side, cfg.hf_divisions, macro::Provider::hf, nullptr, workers);
        auto per = macro::fe2_sliding(mm, ref, 4, cfg.window_n_side, cfg.hf_divisions, macro::Provider::periodic, nullptr, workers);
        auto dbn = macro::fe2_sliding(mm, ref, 4, cfg.window_n_side, cfg.hf_divisions, macro::Provider::deepbnd, &dbm, workers);
        macro::FieldSolution refsol{"dns", &ref.mesh, &ref.u, &ref.stress};
        std::vector<macro::FieldSolution> cands{{"hf", &mm.mesh, &hf.sol.u, &hf.sol.stress},
                                                {"periodic", &mm.mesh, &per.sol.u, &per.sol.stress},
                                                {"deepbnd", &mm.mesh, &dbn.sol.u, &dbn.sol.stress}};
        macro::error_report(out_dir / "dns_bar.csv", refsol, cands, mm.probes);
    }
}

std::vector<std::string> validate_artifacts(const fs::path& workspace) {
    std::vector<std::string> issues;
    auto fail = [&](const std::string& s) { issues.push_back(s); };

    PipelineConfig cfg;
    std::string hash;
    try {
        auto j = io::read_json(workspace / "config.json");
        cfg = PipelineConfig::from_json(j);
        hash = j.value("config_hash", "");
        if (hash != cfg.content_hash()) fail("config.json hash does not match its contents");
    } catch (const std::exception& e) {
        fail(std::string("config.json unreadable: ") + e.what());
        return issues;
    }

    corrector::ReducedWindow window;
    try {
        window = build_window(cfg);
    } catch (const std::exception& e) {
        fail(std::string("cannot rebuild window geometry: ") + e.what());
        return issues;
    }

    for (int load : {1, 3})
        for (const char* use : {"train-rb", "validation", "test"}) {
            fs::path dir = workspace / "datasets" / dataset_dirname(load, use);
            try {
                auto j = io::read_json(dir / "manifest.json");
                if (j.value("config_hash", "") != hash) fail(dir.string() + ": config hash mismatch");
                if (j.at("mesh_hash").get<std::string>() != window.mesh.hash())
                    fail(dir.string() + ": mesh hash incompatible with config geometry");
                auto s = load_snapshots(dir);  // verifies binary sizes exactly
                if (s.traces.rows() != window.boundary.n_slots())
                    fail(dir.string() + ": trace length does not match boundary dofs");
                if (!s.traces.allFinite()) fail(dir.string() + ": non-finite trace entries");
            } catch (const std::exception& e) {
                fail(dir.string() + ": " + e.what());
            }
        }

    for (int load : {1, 3}) {
        fs::path rb_dir = workspace / "rb" / (load == 1 ? "axial" : "shear");
        try {
            auto basis = rb::load_basis(rb_dir);
            if (basis.mesh_hash != window.mesh.hash()) fail(rb_dir.string() + ": mesh hash mismatch");
            Eigen::MatrixXd gram = basis.basis.transpose() * (window.boundary.mass * basis.basis);
            double dev = (gram - Eigen::MatrixXd::Identity(basis.n_rb(), basis.n_rb())).cwiseAbs().maxCoeff();
            if (basis.n_rb() > 0 && dev > 1e-8) fail(rb_dir.string() + ": basis not mass-orthonormal");
            for (Eigen::Index i = 1; i < basis.eigenvalues.size(); ++i)
                if (basis.eigenvalues[i] > basis.eigenvalues[i - 1] + 1e-12)
                    fail(rb_dir.string() + ": eigenvalues not sorted");

            fs::path model_dir = workspace / "models" / (load == 1 ? "axial" : "shear");
            if (basis.n_rb() > 0) {
                auto lm = mlp::load_model(model_dir);
                if (lm.model.output_dim() != basis.n_rb())
                    fail(model_dir.string() + ": output dim does not match basis size");
                if (lm.model.input_dim() != cfg.lattice.n_balls())
                    fail(model_dir.string() + ": input dim does not match lattice");
                if (lm.basis_hash != model::artifact_hash(rb_dir))
                    fail(model_dir.string() + ": stale basis hash");
            }
        } catch (const std::exception& e) {
            fail(rb_dir.string() + ": " + e.what());
        }
    }

    try {
        auto dbm = model::load_bundle(workspace / "bundle");
        dbm.validate();
    } catch (const std::exception& e) {
        fail(std::string("bundle: ") + e.what());
    }
    return issues;
}

} // namespace deepbnd::pipeline
