#pragma once

#include <Eigen/Dense>
#include <filesystem>
#include <string>
#include <vector>

#include "deepbnd/corrector.hpp"
#include "deepbnd/io.hpp"
#include "deepbnd/micro.hpp"
#include "deepbnd/mlp.hpp"
#include "deepbnd/model.hpp"
#include "deepbnd/rb.hpp"

namespace deepbnd::pipeline {

struct DatasetSpec {
    int n = 0;
    std::uint64_t seed = 0;
};

struct PipelineConfig {
    micro::LatticeConfig lattice;
    int hf_divisions = 40;
    int order = 1;
    int window_n_side = 2;
    DatasetSpec train{256, 1};
    DatasetSpec validation{64, 2};
    DatasetSpec test{32, 3};
    int n_rb = 8;
    std::vector<int> rb_sweep{1, 2, 4, 8};
    mlp::TrainConfig training;
    std::vector<std::string> experiments{"single-cell", "sweep"};

    static PipelineConfig from_json(const io::json& j);
    io::json to_json() const;
    std::string content_hash() const;
    void validate() const;
};

// loads follow the unit strains: 1 axial (E11), 3 shear (E12)
struct SnapshotSet {
    Eigen::MatrixXd traces;  // n_gamma x N_s
    Eigen::MatrixXd thetas;  // N_b x N_s
    int load = 1;
    std::string use;  // train-rb | validation | test
    std::uint64_t seed = 0;
    std::string mesh_hash;
};

SnapshotSet generate_snapshots(const PipelineConfig& cfg, int load, const std::string& use,
                               const DatasetSpec& spec, int workers);

void save_snapshots(const std::filesystem::path& dir, const SnapshotSet& s, const std::string& config_hash);
SnapshotSet load_snapshots(const std::filesystem::path& dir);

std::string dataset_dirname(int load, const std::string& use);

struct OfflineResult {
    std::filesystem::path workspace;
    std::filesystem::path bundle_dir;
    std::string config_hash;
};

// Dataset generation, POD per load, target projection, submodel training,
// bundle manifest. Stages already present with a matching config hash are
// reused, so interrupted runs resume.
OfflineResult run_offline(const PipelineConfig& cfg, const std::filesystem::path& workspace, int workers);

// Experiment reports from a finished offline workspace: single-cell
// comparisons, the N_rb sweep of (E_POD, E_DNN, E_T), and optionally the
// FE2 and DNS studies selected in the config.
void run_online(const PipelineConfig& cfg, const std::filesystem::path& workspace,
                const std::filesystem::path& out_dir, int workers);

// returns human-readable failure descriptions; empty means the workspace is sound
std::vector<std::string> validate_artifacts(const std::filesystem::path& workspace);

// shared helpers for tooling and tests
corrector::ReducedWindow build_window(const PipelineConfig& cfg);
fem::Mesh build_hf_mesh(const PipelineConfig& cfg);

} // namespace deepbnd::pipeline
