#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <array>
#include <string>
#include <unordered_map>
#include <vector>

#include "deepbnd/elasticity.hpp"

namespace deepbnd::fem {

struct Rect {
    double x0 = 0, y0 = 0, x1 = 1, y1 = 1;
    double width() const { return x1 - x0; }
    double height() const { return y1 - y0; }
    double area() const { return width() * height(); }
    static Rect centred_square(double side) { return {-0.5 * side, -0.5 * side, 0.5 * side, 0.5 * side}; }
};

// Structured crossed-triangle mesh: each grid cell is split into four
// triangles through its centre node, so the node set has the full 4-fold
// rotational symmetry of the cell and opposite sides match node for node.
struct Mesh {
    int order = 1;  // 1 affine, 2 quadratic
    int nx = 0, ny = 0;
    Rect box;
    bool remapped = false;  // coordinates were distorted (macro geometries)
    std::vector<Eigen::Vector2d> nodes;
    std::vector<std::array<int, 6>> cells;  // [v0 v1 v2 m12 m20 m01]; mids = -1 for P1

    int nodes_per_cell() const { return order == 1 ? 3 : 6; }
    int n_nodes() const { return static_cast<int>(nodes.size()); }
    int n_dofs() const { return 2 * n_nodes(); }
    int n_cells() const { return static_cast<int>(cells.size()); }
    double hx() const { return box.width() / nx; }
    double hy() const { return box.height() / ny; }
    bool square() const { return nx == ny && std::abs(box.width() - box.height()) < 1e-12 * box.width(); }
    std::string hash() const;

    int grid_node(int i, int j) const { return j * (nx + 1) + i; }
    int centre_node(int i, int j) const { return (nx + 1) * (ny + 1) + j * nx + i; }
};

Mesh build_mesh(int divisions_per_side, int order, Rect box);
Mesh build_mesh_rect(int nx, int ny, int order, Rect box);

// exact node lookup keyed on the h/4 coordinate lattice (P2 mid nodes included)
std::unordered_map<long long, int> node_lookup(const Mesh& mesh);
long long node_key(const Mesh& mesh, const Eigen::Vector2d& p);

enum class Side { bottom = 0, right = 1, top = 2, left = 3 };

struct BoundaryEdge {
    int a = -1, mid = -1, b = -1;  // positions in the canonical loop; mid = -1 for P1
    Eigen::Vector2d normal;
    double length = 0;
};

// Closed boundary curve in the canonical ordering: anticlockwise walk
// starting at the bottom-left corner, two interleaved (x,y) slots per node.
struct BoundaryDiscretisation {
    std::vector<int> nodes;        // mesh node ids along the loop
    std::vector<int> position_of;  // mesh node id -> loop position (-1 off-curve)
    std::vector<BoundaryEdge> edges;
    Eigen::SparseMatrix<double> mass;  // n_gamma x n_gamma, n_gamma = 2*nodes.size()
    int nodes_per_side = 0;            // square meshes; enables quarter-turn remaps
    int n_slots() const { return 2 * static_cast<int>(nodes.size()); }
    int slot(int loop_pos, int comp) const { return 2 * loop_pos + comp; }
};

// The mass matrix realises the [L2(Gamma)]^2 inner product exactly for the
// element order in use. `sides` must form the full closed boundary.
BoundaryDiscretisation boundary_mass(const Mesh& mesh,
                                     const std::vector<Side>& sides = {Side::bottom, Side::right, Side::top, Side::left});

Eigen::VectorXd trace(const Eigen::VectorXd& field, const BoundaryDiscretisation& bd);

// discrete quarter-turn operator: slot remap plus componentwise rotation
Eigen::VectorXd rotate_trace_quarter(const BoundaryDiscretisation& bd, const Eigen::VectorXd& w, int quarter_turns);

struct MaterialField {
    virtual Eigen::Matrix3d voigt_at(const Eigen::Vector2d& y) const = 0;
    virtual ~MaterialField() = default;
};

struct UniformMaterial final : MaterialField {
    Eigen::Matrix3d c;
    explicit UniformMaterial(Eigen::Matrix3d m) : c(std::move(m)) {}
    Eigen::Matrix3d voigt_at(const Eigen::Vector2d&) const override { return c; }
};

enum class BcModel { taylor, linear, periodic, minimal, prescribed_trace };

struct ConstraintRow {
    Eigen::SparseVector<double> coeffs;
    double target = 0;
    bool gauge = false;  // rigid-rotation pin, not a kinematical constraint
};

struct LinearSystem {
    Eigen::SparseMatrix<double> stiffness;
    Eigen::VectorXd rhs;

    bool constrained = false;
    BcModel model = BcModel::taylor;
    std::vector<std::pair<int, double>> fixed_dofs;   // Dirichlet
    std::vector<std::pair<int, int>> pairs;           // slave -> master
    std::vector<ConstraintRow> multipliers;
    bool shift_to_zero_average = false;

    int kinematic_multiplier_count() const;
};

// stiffness = (C grad^s u, grad^s v), rhs = -(C eps, grad^s v); the material
// is sampled at each quadrature point (three mid-edge points per triangle)
LinearSystem assemble_corrector(const Mesh& mesh, const MaterialField& material, const Voigt& eps);

// macro variant: one constant tangent per element plus edge tractions
LinearSystem assemble_macro(const Mesh& mesh, const std::vector<Eigen::Matrix3d>& tangent_per_cell,
                            const std::vector<std::pair<Side, Eigen::Vector2d>>& tractions);

// consistent Neumann load on a whole side
void add_traction(LinearSystem& sys, const Mesh& mesh, Side side, const Eigen::Vector2d& t);

// centroid stress per element, material sampled at the centroid
std::vector<Voigt> element_stress(const Mesh& mesh, const MaterialField& material, const Eigen::VectorXd& u);
std::vector<Voigt> element_stress(const Mesh& mesh, const std::vector<Eigen::Matrix3d>& tangent_per_cell,
                                  const Eigen::VectorXd& u);

LinearSystem constrain(LinearSystem sys, const Mesh& mesh, BcModel model,
                       const Eigen::VectorXd* trace_values = nullptr,
                       const BoundaryDiscretisation* bd = nullptr);

// Dirichlet constraint on whole tagged sides (macro problems)
LinearSystem constrain_sides(LinearSystem sys, const Mesh& mesh, const std::vector<Side>& dirichlet_sides,
                             const Eigen::Vector2d& value = Eigen::Vector2d::Zero());

// arbitrary per-dof Dirichlet values
LinearSystem constrain_dofs(LinearSystem sys, const std::vector<std::pair<int, double>>& fixed);

struct SolveReport {
    double residual = 0;           // relative residual of the constrained system
    int nullspace_estimate = -1;   // filled only on singular failure
};

Eigen::VectorXd solve(const LinearSystem& sys, const Mesh& mesh, SolveReport* report = nullptr);

// plain sparse direct solve with residual verification
Eigen::VectorXd sparse_solve(const Eigen::SparseMatrix<double>& a, const Eigen::VectorXd& b);

// quadrature helpers shared with homogenisation
Eigen::VectorXd shape_volume_integrals(const Mesh& mesh);                 // per node
std::vector<Eigen::Vector2d> shape_boundary_normal_integrals(const Mesh& mesh);  // per node, (int N n1, int N n2)
Eigen::Vector2d volume_average(const Mesh& mesh, const Eigen::VectorXd& field);

std::vector<int> boundary_nodes_of_side(const Mesh& mesh, Side s);

int element_containing(const Mesh& mesh, const Eigen::Vector2d& p);
Eigen::Vector2d interpolate(const Mesh& mesh, const Eigen::VectorXd& field, const Eigen::Vector2d& p);

} // namespace deepbnd::fem
