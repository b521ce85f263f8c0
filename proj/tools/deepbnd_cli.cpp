// Batch driver for the offline/online pipeline. Every subcommand exits 0
// only on full success; artifacts are reproducible for a fixed config.

#include <CLI11.hpp>
#include <filesystem>
#include <iostream>
#include <sstream>

#include "deepbnd/io.hpp"
#include "deepbnd/macro.hpp"
#include "deepbnd/micro.hpp"
#include "deepbnd/model.hpp"
#include "deepbnd/parallel.hpp"
#include "deepbnd/pipeline.hpp"

namespace fs = std::filesystem;
using namespace deepbnd;

namespace {

pipeline::PipelineConfig load_config(const std::string& path) {
    return pipeline::PipelineConfig::from_json(io::read_json(path));
}

int dataset_stage(const pipeline::PipelineConfig& cfg, const fs::path& ws, int workers,
                  const std::string& only_use) {
    const std::string hash = cfg.content_hash();
    fs::create_directories(ws);
    if (!fs::exists(ws / "config.json")) {
        auto j = cfg.to_json();
        j["config_hash"] = hash;
        io::write_json(ws / "config.json", j);
    }
    for (int load : {1, 3})
        for (const auto& [use, spec] : {std::pair{std::string("train-rb"), cfg.train},
                                        std::pair{std::string("validation"), cfg.validation},
                                        std::pair{std::string("test"), cfg.test}}) {
            if (!only_use.empty() && use != only_use) continue;
            fs::path dir = ws / "datasets" / pipeline::dataset_dirname(load, use);
            if (fs::exists(dir / "manifest.json")) {
                std::cout << "keep " << dir << "\n";
                continue;
            }
            std::cout << "snapshots " << dir << " (N_s=" << spec.n << ")\n";
            auto s = pipeline::generate_snapshots(cfg, load, use, spec, workers);
            pipeline::save_snapshots(dir, s, hash);
        }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"DeepBND boundary-condition pipeline"};
    app.require_subcommand(1);

    std::string config_path, workspace = "workspace", out_dir = "reports";
    int workers = default_workers();
    app.add_option("--workers", workers, "worker pool size")->capture_default_str();

    // sample
    auto* sample = app.add_subcommand("sample", "draw a Latin hypercube sample set");
    int s_n = 16, s_dims = 16;
    std::uint64_t s_seed = 1;
    std::string s_out = "samples";
    sample->add_option("--n", s_n, "number of samples");
    sample->add_option("--dims", s_dims, "dimensions");
    sample->add_option("--seed", s_seed, "seed");
    sample->add_option("--out", s_out, "output prefix (.bin/.json)");

    // snapshots
    auto* snaps = app.add_subcommand("snapshots", "generate HF goal-trace datasets");
    std::string snaps_use;
    snaps->add_option("--config", config_path, "pipeline config json")->required();
    snaps->add_option("--workspace", workspace, "workspace directory");
    snaps->add_option("--use", snaps_use, "restrict to train-rb|validation|test");

    // pod
    auto* pod = app.add_subcommand("pod", "build reduced bases from the training datasets");
    pod->add_option("--config", config_path)->required();
    pod->add_option("--workspace", workspace);

    // train
    auto* train = app.add_subcommand("train", "train submodels and write the bundle");
    train->add_option("--config", config_path)->required();
    train->add_option("--workspace", workspace);

    // predict
    auto* predict = app.add_subcommand("predict", "predict a boundary trace for one microstructure");
    std::string p_micro, p_bundle, p_eps = "1,0,0", p_out = "trace.bin";
    predict->add_option("--micro", p_micro, "microstructure json")->required();
    predict->add_option("--bundle", p_bundle, "bundle directory")->required();
    predict->add_option("--eps", p_eps, "Voigt strain, comma separated");
    predict->add_option("--out", p_out, "output trace binary");

    // fe2
    auto* fe2 = app.add_subcommand("fe2", "coupled two-scale run");
    std::string f_macro = "cook", f_bc = "periodic", f_bundle;
    int f_div = 3, f_realisations = 1;
    std::uint64_t f_seed = 100;
    fe2->add_option("--config", config_path)->required();
    fe2->add_option("--macro", f_macro, "cook|bar");
    fe2->add_option("--bc", f_bc, "taylor|linear|periodic|minimal|hf|deepbnd");
    fe2->add_option("--model", f_bundle, "bundle directory (deepbnd)");
    fe2->add_option("--divisions", f_div, "macro mesh vertical divisions");
    fe2->add_option("--realisations", f_realisations);
    fe2->add_option("--seed", f_seed);
    fe2->add_option("--out", out_dir);

    // dns
    auto* dnscmd = app.add_subcommand("dns", "direct simulation of the clamped bar");
    int d_ny = 4;
    std::uint64_t d_seed = 7;
    dnscmd->add_option("--ny", d_ny, "blocks across the bar height");
    dnscmd->add_option("--seed", d_seed);
    dnscmd->add_option("--out", out_dir);

    // report
    auto* report = app.add_subcommand("report", "online-phase experiment reports");
    report->add_option("--config", config_path)->required();
    report->add_option("--workspace", workspace);
    report->add_option("--out", out_dir);

    // validate
    auto* validate = app.add_subcommand("validate", "check workspace artifacts");
    validate->add_option("--workspace", workspace);

    CLI11_PARSE(app, argc, argv);

    try {
        if (*sample) {
            auto s = micro::lhs_sample(s_n, s_dims, s_seed);
            micro::save_samples(s_out + ".bin", s_out + ".json", s);
            std::cout << "wrote " << s_out << ".bin (" << s_n << "x" << s_dims << ")\n";
        } else if (*snaps) {
            auto cfg = load_config(config_path);
            return dataset_stage(cfg, workspace, workers, snaps_use);
        } else if (*pod || *train) {
            // both stages run through run_offline; finished stages are reused
            auto cfg = load_config(config_path);
            auto res = pipeline::run_offline(cfg, workspace, workers);
            std::cout << "bundle at " << res.bundle_dir << "\n";
        } else if (*predict) {
            auto m = micro::load_microstructure(p_micro);
            auto dbm = model::load_bundle(p_bundle);
            Voigt eps;
            std::stringstream ss(p_eps);
            std::string tok;
            for (int i = 0; i < 3; ++i) {
                if (!std::getline(ss, tok, ',')) throw std::invalid_argument("--eps needs three values");
                eps[i] = std::stod(tok);
            }
            Eigen::VectorXd w = model::predict_bc(dbm, m.radii, eps);
            io::write_f64(p_out, w.data(), static_cast<std::size_t>(w.size()));
            io::write_json(p_out + ".json", io::json{{"n_dofs", w.size()},
                                                     {"ordering", "ccw-bl-interleaved"},
                                                     {"mesh_hash", dbm.basis_axial.mesh_hash}});
            std::cout << "wrote " << p_out << " (" << w.size() << " dofs)\n";
        } else if (*fe2) {
            auto cfg = load_config(config_path);
            auto provider = macro::provider_from_name(f_bc);
            std::optional<model::DeepBndModel> dbm;
            if (provider == macro::Provider::deepbnd) {
                if (f_bundle.empty()) throw std::invalid_argument("--model required for bc=deepbnd");
                dbm = model::load_bundle(f_bundle);
            }
            macro::MacroProblem prob;
            prob.geometry = f_macro == "bar" ? macro::Geometry::bar : macro::Geometry::cook;
            prob.divisions_vertical = f_div;
            if (prob.geometry == macro::Geometry::bar) prob.traction = {0.0, -0.2};
            auto mm = macro::build_macro_mesh(prob);
            fs::create_directories(out_dir);
            io::CsvWriter csv(fs::path(out_dir) / ("fe2_" + f_macro + "_" + f_bc + ".csv"));
            for (int r = 0; r < f_realisations; ++r) {
                auto pool = micro::lhs_sample(2 * mm.mesh.n_cells(), cfg.lattice.n_balls(), f_seed + 1000 + r);
                auto rep = macro::fe2_random(mm, cfg.lattice, cfg.window_n_side, cfg.hf_divisions, provider,
                                             dbm ? &*dbm : nullptr, pool.theta, f_seed + r, workers);
                std::string name = "realisation" + std::to_string(r);
                csv.row(name, "tipA_vertical", rep.tip_vertical);
                for (std::size_t p = 0; p < rep.probe_vm.size(); ++p)
                    csv.row(name, "von_mises_probe" + std::to_string(p), rep.probe_vm[p]);
            }
            std::cout << "fe2 " << f_macro << " done\n";
        } else if (*dnscmd) {
            macro::DnsProblem dp;
            dp.ny_blocks = d_ny;
            dp.seed = d_seed;
            auto res = macro::dns(dp);
            fs::create_directories(out_dir);
            io::write_f64(fs::path(out_dir) / "dns_u.bin", res.u.data(), static_cast<std::size_t>(res.u.size()));
            io::write_json(fs::path(out_dir) / "dns_u.json",
                           io::json{{"n_dofs", res.u.size()}, {"mesh_hash", res.mesh.hash()},
                                    {"ny_blocks", d_ny}, {"seed", d_seed}});
            std::cout << "dns bar solved: " << res.u.size() << " dofs\n";
        } else if (*report) {
            auto cfg = load_config(config_path);
            pipeline::run_online(cfg, workspace, out_dir, workers);
            std::cout << "reports in " << out_dir << "\n";
        } else if (*validate) {
            auto issues = pipeline::validate_artifacts(workspace);
            for (const auto& s : issues) std::cerr << "FAIL " << s << "\n";
            if (issues.empty()) {
                std::cout << "all checks passed\n";
                return 0;
            }
            return 1;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
