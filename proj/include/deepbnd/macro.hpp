#pragma once

#include <Eigen/Dense>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "deepbnd/fem.hpp"
#include "deepbnd/micro.hpp"
#include "deepbnd/model.hpp"

namespace deepbnd::macro {

enum class Geometry { cook, bar };

// Left side clamped, right side loaded by a uniform traction. The Cook
// trapezoid uses the standard 48/44/60 proportions; probe coordinates follow
// the benchmark convention and are reported alongside the results.
struct MacroProblem {
    Geometry geometry = Geometry::cook;
    int divisions_vertical = 5;
    int order = 1;
    Eigen::Vector2d traction{0.0, 0.05};
};

struct MacroMesh {
    MacroProblem prob;
    fem::Mesh mesh;
    Eigen::Vector2d tip;                  // displacement report point A
    std::vector<Eigen::Vector2d> probes;  // stress/displacement probes
};

MacroMesh build_macro_mesh(const MacroProblem& prob);

struct MacroSolution {
    Eigen::VectorXd u;
    std::vector<Voigt> stress;      // element centroid values
    std::vector<double> von_mises;  // plane-stress form
};

MacroSolution solve_macro(const MacroMesh& mm, const std::vector<Eigen::Matrix3d>& tangents);

enum class Provider { taylor, linear, periodic, minimal, hf, deepbnd };

Provider provider_from_name(const std::string& name);
std::string provider_name(Provider p);

struct Fe2Report {
    Provider provider;
    MacroSolution sol;
    double tip_vertical = 0;
    std::vector<double> probe_vm;
    std::vector<Eigen::Vector2d> probe_u;
};

// Scale-separated FE2: each element draws one microstructure from the pool
// without repetition ("sorting" fixed by the realisation seed). hf solves on
// the full cell; the other providers act on the central window.
Fe2Report fe2_random(const MacroMesh& mm, const micro::LatticeConfig& lattice, int window_n_side,
                     int hf_divisions, Provider provider, const model::DeepBndModel* dbm,
                     const Eigen::MatrixXd& theta_pool, std::uint64_t realisation_seed, int workers);

// One global realisation of the bar microstructure: ny x 4*ny blocks, one
// random inclusion per block, direct heterogeneous solve on a fine mesh.
struct DnsProblem {
    int ny_blocks = 4;
    std::uint64_t seed = 7;
    int resolution_per_block = 15;  // elements across one block
    int order = 1;
    double gamma = 10.0;
    double lambda = 0.576923;
    double shear = 0.384615;
    Eigen::Vector2d traction{0.0, -0.2};
    double length_x = 4.0, length_y = 1.0;
};

struct DnsResult {
    DnsProblem prob;
    fem::Mesh mesh;
    Eigen::VectorXd u;
    std::vector<Voigt> stress;
    Eigen::MatrixXd theta;  // ny x nx block parameters in [-1, 1]
    double block_size() const { return prob.length_y / prob.ny_blocks; }
};

DnsResult dns(const DnsProblem& prob);

// material field of a DNS realisation (one inclusion per block)
struct DnsMaterial final : fem::MaterialField {
    const DnsProblem* prob;
    const Eigen::MatrixXd* theta;
    Eigen::Matrix3d voigt_at(const Eigen::Vector2d& y) const override;
};

// DNS-consistent FE2 on the bar: every integration point uses the sliding
// HF window with the closest centre.
Fe2Report fe2_sliding(const MacroMesh& mm, const DnsResult& reference, int hf_window_blocks,
                      int window_n_side, int hf_divisions, Provider provider,
                      const model::DeepBndModel* dbm, int workers);

struct FieldSolution {
    std::string name;
    const fem::Mesh* mesh = nullptr;
    const Eigen::VectorXd* u = nullptr;
    const std::vector<Voigt>* stress = nullptr;
};

struct ErrorMetrics {
    std::string name;
    double l2_rel = 0;
    std::vector<double> probe_disp_rel;
    std::vector<double> probe_vm_rel;
};

// Candidates are interpolated onto the reference mesh; errors in the L2(Omega)
// norm plus Euclidean probe errors. csv may be empty to skip the file.
std::vector<ErrorMetrics> error_report(const std::filesystem::path& csv, const FieldSolution& reference,
                                       const std::vector<FieldSolution>& candidates,
                                       const std::vector<Eigen::Vector2d>& probe_points);

} // namespace deepbnd::macro
