#include "deepbnd/fem.hpp"

#include <Eigen/SparseLU>
#include <Eigen/SparseCholesky>
#include <cmath>
#include <map>
#include <sstream>
#include <stdexcept>

#include "deepbnd/hash.hpp"

namespace deepbnd::fem {

namespace {

constexpr double k_solver_tol = 1e-10;

struct Quad {
    // mid-edge rule, exact up to degree 2
    static constexpr int n = 3;
    static constexpr double bary[3][3] = {{0.5, 0.5, 0.0}, {0.0, 0.5, 0.5}, {0.5, 0.0, 0.5}};
};

struct ElementGeometry {
    std::array<Eigen::Vector2d, 3> vertex;
    std::array<Eigen::Vector2d, 3> grad_bary;  // constant over the affine triangle
    double area = 0;
};

ElementGeometry element_geometry(const Mesh& mesh, int cell) {
    const auto& c = mesh.cells[static_cast<std::size_t>(cell)];
    ElementGeometry g;
    for (int k = 0; k < 3; ++k) g.vertex[static_cast<std::size_t>(k)] = mesh.nodes[static_cast<std::size_t>(c[static_cast<std::size_t>(k)])];
    const auto& p0 = g.vertex[0];
    const auto& p1 = g.vertex[1];
    const auto& p2 = g.vertex[2];
    double twice = (p1.x() - p0.x()) * (p2.y() - p0.y()) - (p2.x() - p0.x()) * (p1.y() - p0.y());
    if (!(twice > 1e-14 * (mesh.box.area() / std::max(1, mesh.n_cells()))))
        throw std::runtime_error("degenerate or inverted triangle in cell " + std::to_string(cell));
    g.area = 0.5 * twice;
    g.grad_bary[0] = Eigen::Vector2d(p1.y() - p2.y(), p2.x() - p1.x()) / twice;
    g.grad_bary[1] = Eigen::Vector2d(p2.y() - p0.y(), p0.x() - p2.x()) / twice;
    g.grad_bary[2] = Eigen::Vector2d(p0.y() - p1.y(), p1.x() - p0.x()) / twice;
    return g;
}

// shape values and gradients at a barycentric point, order-dependent
void shapes_at(const Mesh& mesh, const ElementGeometry& g, const double L[3],
               double* n_out, Eigen::Vector2d* gn_out) {
    if (mesh.order == 1) {
        for (int k = 0; k < 3; ++k) {
            n_out[k] = L[k];
            gn_out[k] = g.grad_bary[static_cast<std::size_t>(k)];
        }
        return;
    }
    for (int k = 0; k < 3; ++k) {
        n_out[k] = L[k] * (2 * L[k] - 1);
        gn_out[k] = (4 * L[k] - 1) * g.grad_bary[static_cast<std::size_t>(k)];
    }
    static constexpr int ea[3] = {1, 2, 0};  // mid nodes pair (1,2), (2,0), (0,1)
    static constexpr int eb[3] = {2, 0, 1};
    for (int k = 0; k < 3; ++k) {
        n_out[3 + k] = 4 * L[ea[k]] * L[eb[k]];
        gn_out[3 + k] = 4 * (L[eb[k]] * g.grad_bary[static_cast<std::size_t>(ea[k])] +
                             L[ea[k]] * g.grad_bary[static_cast<std::size_t>(eb[k])]);
    }
}

Eigen::Vector2d physical_point(const ElementGeometry& g, const double L[3]) {
    return L[0] * g.vertex[0] + L[1] * g.vertex[1] + L[2] * g.vertex[2];
}

std::vector<std::array<int, 3>> side_edges(const Mesh& mesh, Side s) {
    // returns (a, mid, b) mesh node ids walking each side anticlockwise
    std::vector<std::array<int, 3>> out;
    auto mid_of = [&](int cell_i, int cell_j, int tri) {
        int t = 4 * (cell_j * mesh.nx + cell_i) + tri;
        return mesh.order == 2 ? mesh.cells[static_cast<std::size_t>(t)][5] : -1;
    };
    switch (s) {
        case Side::bottom:
            for (int i = 0; i < mesh.nx; ++i)
                out.push_back({mesh.grid_node(i, 0), mid_of(i, 0, 0), mesh.grid_node(i + 1, 0)});
            break;
        case Side::right:
            for (int j = 0; j < mesh.ny; ++j)
                out.push_back({mesh.grid_node(mesh.nx, j), mid_of(mesh.nx - 1, j, 1), mesh.grid_node(mesh.nx, j + 1)});
            break;
        case Side::top:
            for (int i = mesh.nx - 1; i >= 0; --i)
                out.push_back({mesh.grid_node(i + 1, mesh.ny), mid_of(i, mesh.ny - 1, 2), mesh.grid_node(i, mesh.ny)});
            break;
        case Side::left:
            for (int j = mesh.ny - 1; j >= 0; --j)
                out.push_back({mesh.grid_node(0, j + 1), mid_of(0, j, 3), mesh.grid_node(0, j)});
            break;
    }
    return out;
}

std::vector<int> boundary_loop(const Mesh& mesh) {
    std::vector<int> loop;
    for (Side s : {Side::bottom, Side::right, Side::top, Side::left})
        for (const auto& e : side_edges(mesh, s)) {
            loop.push_back(e[0]);
            if (e[1] >= 0) loop.push_back(e[1]);
        }
    return loop;
}

} // namespace

std::string Mesh::hash() const {
    std::ostringstream os;
    os.precision(17);
    os << "mesh;order=" << order << ";nx=" << nx << ";ny=" << ny << ";box=" << box.x0 << "," << box.y0
       << "," << box.x1 << "," << box.y1 << ";remapped=" << remapped;
    return sha256_hex(os.str()).substr(0, 16);
}

Mesh build_mesh_rect(int nx, int ny, int order, Rect box) {
    if (nx < 1 || ny < 1) throw std::invalid_argument("mesh needs at least one division per direction");
    if (order != 1 && order != 2) throw std::invalid_argument("element order must be 1 or 2");
    if (!(box.width() > 0 && box.height() > 0)) throw std::invalid_argument("empty mesh box");

    Mesh m;
    m.order = order;
    m.nx = nx;
    m.ny = ny;
    m.box = box;
    m.nodes.reserve(static_cast<std::size_t>((nx + 1) * (ny + 1) + nx * ny));
    for (int j = 0; j <= ny; ++j)
        for (int i = 0; i <= nx; ++i)
            m.nodes.emplace_back(box.x0 + i * m.hx(), box.y0 + j * m.hy());
    for (int j = 0; j < ny; ++j)
        for (int i = 0; i < nx; ++i)
            m.nodes.emplace_back(box.x0 + (i + 0.5) * m.hx(), box.y0 + (j + 0.5) * m.hy());

    m.cells.reserve(static_cast<std::size_t>(4 * nx * ny));
    for (int j = 0; j < ny; ++j)
        for (int i = 0; i < nx; ++i) {
            int a = m.grid_node(i, j), b = m.grid_node(i + 1, j);
            int c = m.grid_node(i + 1, j + 1), d = m.grid_node(i, j + 1);
            int mm = m.centre_node(i, j);
            m.cells.push_back({a, b, mm, -1, -1, -1});
            m.cells.push_back({b, c, mm, -1, -1, -1});
            m.cells.push_back({c, d, mm, -1, -1, -1});
            m.cells.push_back({d, a, mm, -1, -1, -1});
        }

    if (order == 2) {
        std::map<std::pair<int, int>, int> mid;
        auto mid_node = [&](int a, int b) {
            auto key = std::minmax(a, b);
            auto it = mid.find(key);
            if (it != mid.end()) return it->second;
            int id = m.n_nodes();
            m.nodes.emplace_back(0.5 * (m.nodes[static_cast<std::size_t>(a)] + m.nodes[static_cast<std::size_t>(b)]));
            mid.emplace(key, id);
            return id;
        };
        for (auto& c : m.cells) {
            c[3] = mid_node(c[1], c[2]);
            c[4] = mid_node(c[2], c[0]);
            c[5] = mid_node(c[0], c[1]);
        }
    }
    return m;
}

Mesh build_mesh(int divisions_per_side, int order, Rect box) {
    return build_mesh_rect(divisions_per_side, divisions_per_side, order, box);
}

long long node_key(const Mesh& mesh, const Eigen::Vector2d& p) {
    // all structured nodes live on the h/4 lattice
    double fx = 4.0 * (p.x() - mesh.box.x0) / mesh.hx();
    double fy = 4.0 * (p.y() - mesh.box.y0) / mesh.hy();
    long long ix = std::llround(fx), iy = std::llround(fy);
    if (std::abs(fx - double(ix)) > 1e-6 || std::abs(fy - double(iy)) > 1e-6) return -1;
    return ix * (1ll << 32) + iy;
}

std::unordered_map<long long, int> node_lookup(const Mesh& mesh) {
    std::unordered_map<long long, int> map;
    map.reserve(mesh.nodes.size());
    for (int n = 0; n < mesh.n_nodes(); ++n) {
        long long key = node_key(mesh, mesh.nodes[static_cast<std::size_t>(n)]);
        if (key < 0) throw std::runtime_error("node off the structured lattice");
        map.emplace(key, n);
    }
    return map;
}

std::vector<int> boundary_nodes_of_side(const Mesh& mesh, Side s) {
    std::vector<int> out;
    for (const auto& e : side_edges(mesh, s)) {
        out.push_back(e[0]);
        if (e[1] >= 0) out.push_back(e[1]);
    }
    out.push_back(side_edges(mesh, s).back()[2]);
    return out;
}

BoundaryDiscretisation boundary_mass(const Mesh& mesh, const std::vector<Side>& sides) {
    {
        std::array<bool, 4> present{};
        for (Side s : sides) present[static_cast<std::size_t>(s)] = true;
        if (!(present[0] && present[1] && present[2] && present[3]))
            throw std::invalid_argument("boundary_mass requires a closed curve (all four sides)");
    }

    BoundaryDiscretisation bd;
    bd.nodes = boundary_loop(mesh);
    bd.position_of.assign(static_cast<std::size_t>(mesh.n_nodes()), -1);
    for (int p = 0; p < static_cast<int>(bd.nodes.size()); ++p)
        bd.position_of[static_cast<std::size_t>(bd.nodes[static_cast<std::size_t>(p)])] = p;
    bd.nodes_per_side = mesh.square() ? mesh.order * mesh.nx : 0;

    const int loop_n = static_cast<int>(bd.nodes.size());
    const int per_edge = mesh.order;  // loop positions consumed per element edge
    int pos = 0;
    for (Side s : {Side::bottom, Side::right, Side::top, Side::left}) {
        for (const auto& e : side_edges(mesh, s)) {
            (void)e;
            BoundaryEdge edge;
            edge.a = pos;
            edge.mid = mesh.order == 2 ? pos + 1 : -1;
            edge.b = (pos + per_edge) % loop_n;
            const auto& pa = mesh.nodes[static_cast<std::size_t>(bd.nodes[static_cast<std::size_t>(edge.a)])];
            const auto& pb = mesh.nodes[static_cast<std::size_t>(bd.nodes[static_cast<std::size_t>(edge.b)])];
            Eigen::Vector2d tang = pb - pa;
            edge.length = tang.norm();
            edge.normal = Eigen::Vector2d(tang.y(), -tang.x()) / edge.length;
            bd.edges.push_back(edge);
            pos += per_edge;
        }
    }

    std::vector<Eigen::Triplet<double>> trips;
    for (const auto& e : bd.edges) {
        double h = e.length;
        if (mesh.order == 1) {
            const int p[2] = {e.a, e.b};
            const double m[2][2] = {{h / 3, h / 6}, {h / 6, h / 3}};
            for (int r = 0; r < 2; ++r)
                for (int c = 0; c < 2; ++c)
                    for (int comp = 0; comp < 2; ++comp)
                        trips.emplace_back(bd.slot(p[r], comp), bd.slot(p[c], comp), m[r][c]);
        } else {
            const int p[3] = {e.a, e.mid, e.b};
            const double m[3][3] = {{4 * h / 30, 2 * h / 30, -h / 30},
                                    {2 * h / 30, 16 * h / 30, 2 * h / 30},
                                    {-h / 30, 2 * h / 30, 4 * h / 30}};
            for (int r = 0; r < 3; ++r)
                for (int c = 0; c < 3; ++c)
                    for (int comp = 0; comp < 2; ++comp)
                        trips.emplace_back(bd.slot(p[r], comp), bd.slot(p[c], comp), m[r][c]);
        }
    }
    bd.mass.resize(bd.n_slots(), bd.n_slots());
    bd.mass.setFromTriplets(trips.begin(), trips.end());
    return bd;
}

Eigen::VectorXd trace(const Eigen::VectorXd& field, const BoundaryDiscretisation& bd) {
    Eigen::VectorXd w(bd.n_slots());
    for (int p = 0; p < static_cast<int>(bd.nodes.size()); ++p) {
        int n = bd.nodes[static_cast<std::size_t>(p)];
        if (2 * n + 1 >= field.size()) throw std::invalid_argument("field does not cover boundary nodes");
        w[bd.slot(p, 0)] = field[2 * n];
        w[bd.slot(p, 1)] = field[2 * n + 1];
    }
    return w;
}

Eigen::VectorXd rotate_trace_quarter(const BoundaryDiscretisation& bd, const Eigen::VectorXd& w, int quarter_turns) {
    if (bd.nodes_per_side <= 0)
        throw std::invalid_argument("quarter-turn remap needs a square symmetric boundary");
    if (w.size() != bd.n_slots()) throw std::invalid_argument("trace length mismatch");
    int q = ((quarter_turns % 4) + 4) % 4;
    const int m = bd.nodes_per_side, total = 4 * m;
    Eigen::Matrix2d rot = Eigen::Matrix2d::Identity();
    Eigen::Matrix2d quarter;
    quarter << 0, -1, 1, 0;
    for (int k = 0; k < q; ++k) rot = quarter * rot;
    Eigen::VectorXd out(w.size());
    for (int p = 0; p < total; ++p) {
        int dst = (p + q * m) % total;
        Eigen::Vector2d v = rot * Eigen::Vector2d(w[2 * p], w[2 * p + 1]);
        out[2 * dst] = v.x();
        out[2 * dst + 1] = v.y();
    }
    return out;
}

int LinearSystem::kinematic_multiplier_count() const {
    int n = 0;
    for (const auto& r : multipliers)
        if (!r.gauge) ++n;
    return n;
}

LinearSystem assemble_corrector(const Mesh& mesh, const MaterialField& material, const Voigt& eps) {
    const int k = mesh.nodes_per_cell();
    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(static_cast<std::size_t>(mesh.n_cells() * 4 * k * k));
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(mesh.n_dofs());

    double nvals[6];
    Eigen::Vector2d gn[6];
    Eigen::MatrixXd b(3, 2 * k), ke(2 * k, 2 * k);
    Eigen::VectorXd fe(2 * k);

    for (int cell = 0; cell < mesh.n_cells(); ++cell) {
        auto g = element_geometry(mesh, cell);
        const auto& nd = mesh.cells[static_cast<std::size_t>(cell)];
        ke.setZero();
        fe.setZero();
        for (int qp = 0; qp < Quad::n; ++qp) {
            const double* L = Quad::bary[qp];
            shapes_at(mesh, g, L, nvals, gn);
            double w = g.area / 3.0;
            for (int a = 0; a < k; ++a) {
                b(0, 2 * a) = gn[a].x(); b(0, 2 * a + 1) = 0;
                b(1, 2 * a) = 0;         b(1, 2 * a + 1) = gn[a].y();
                b(2, 2 * a) = gn[a].y(); b(2, 2 * a + 1) = gn[a].x();
            }
            Eigen::Matrix3d c = material.voigt_at(physical_point(g, L));
            ke.noalias() += w * b.transpose() * c * b;
            fe.noalias() -= w * b.transpose() * (c * eps);
        }
        for (int a = 0; a < k; ++a)
            for (int comp = 0; comp < 2; ++comp) {
                int gi = 2 * nd[static_cast<std::size_t>(a)] + comp;
                rhs[gi] += fe[2 * a + comp];
                for (int a2 = 0; a2 < k; ++a2)
                    for (int comp2 = 0; comp2 < 2; ++comp2)
                        trips.emplace_back(gi, 2 * nd[static_cast<std::size_t>(a2)] + comp2, ke(2 * a + comp, 2 * a2 + comp2));
            }
    }

    LinearSystem sys;
    sys.stiffness.resize(mesh.n_dofs(), mesh.n_dofs());
    sys.stiffness.setFromTriplets(trips.begin(), trips.end());
    sys.rhs = std::move(rhs);
    return sys;
}

LinearSystem assemble_macro(const Mesh& mesh, const std::vector<Eigen::Matrix3d>& tangent_per_cell,
                            const std::vector<std::pair<Side, Eigen::Vector2d>>& tractions) {
    if (static_cast<int>(tangent_per_cell.size()) != mesh.n_cells())
        throw std::invalid_argument("one tangent per cell required");

    const int k = mesh.nodes_per_cell();
    std::vector<Eigen::Triplet<double>> trips;
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(mesh.n_dofs());
    double nvals[6];
    Eigen::Vector2d gn[6];
    Eigen::MatrixXd b(3, 2 * k), ke(2 * k, 2 * k);
    for (int cell = 0; cell < mesh.n_cells(); ++cell) {
        auto g = element_geometry(mesh, cell);
        const auto& nd = mesh.cells[static_cast<std::size_t>(cell)];
        const Eigen::Matrix3d& c = tangent_per_cell[static_cast<std::size_t>(cell)];
        ke.setZero();
        for (int qp = 0; qp < Quad::n; ++qp) {
            shapes_at(mesh, g, Quad::bary[qp], nvals, gn);
            double w = g.area / 3.0;
            for (int a = 0; a < k; ++a) {
                b(0, 2 * a) = gn[a].x(); b(0, 2 * a + 1) = 0;
                b(1, 2 * a) = 0;         b(1, 2 * a + 1) = gn[a].y();
                b(2, 2 * a) = gn[a].y(); b(2, 2 * a + 1) = gn[a].x();
            }
            ke.noalias() += w * b.transpose() * c * b;
        }
        for (int a = 0; a < k; ++a)
            for (int comp = 0; comp < 2; ++comp)
                for (int a2 = 0; a2 < k; ++a2)
                    for (int comp2 = 0; comp2 < 2; ++comp2)
                        trips.emplace_back(2 * nd[static_cast<std::size_t>(a)] + comp,
                                           2 * nd[static_cast<std::size_t>(a2)] + comp2,
                                           ke(2 * a + comp, 2 * a2 + comp2));
    }

    LinearSystem sys;
    sys.stiffness.resize(mesh.n_dofs(), mesh.n_dofs());
    sys.stiffness.setFromTriplets(trips.begin(), trips.end());
    sys.rhs = std::move(rhs);
    for (const auto& [side, t] : tractions) add_traction(sys, mesh, side, t);
    return sys;
}

void add_traction(LinearSystem& sys, const Mesh& mesh, Side side, const Eigen::Vector2d& t) {
    for (const auto& e : side_edges(mesh, side)) {
        double h = (mesh.nodes[static_cast<std::size_t>(e[2])] - mesh.nodes[static_cast<std::size_t>(e[0])]).norm();
        if (mesh.order == 1) {
            for (int comp = 0; comp < 2; ++comp) {
                sys.rhs[2 * e[0] + comp] += 0.5 * h * t[comp];
                sys.rhs[2 * e[2] + comp] += 0.5 * h * t[comp];
            }
        } else {
            for (int comp = 0; comp < 2; ++comp) {
                sys.rhs[2 * e[0] + comp] += h / 6 * t[comp];
                sys.rhs[2 * e[1] + comp] += 4 * h / 6 * t[comp];
                sys.rhs[2 * e[2] + comp] += h / 6 * t[comp];
            }
        }
    }
}

std::vector<Voigt> element_stress(const Mesh& mesh, const MaterialField& material, const Eigen::VectorXd& u) {
    std::vector<Voigt> out(static_cast<std::size_t>(mesh.n_cells()));
    const double centroid[3] = {1.0 / 3, 1.0 / 3, 1.0 / 3};
    double nvals[6];
    Eigen::Vector2d gn[6];
    const int k = mesh.nodes_per_cell();
    for (int cell = 0; cell < mesh.n_cells(); ++cell) {
        auto g = element_geometry(mesh, cell);
        const auto& nd = mesh.cells[static_cast<std::size_t>(cell)];
        shapes_at(mesh, g, centroid, nvals, gn);
        Voigt strain = Voigt::Zero();
        for (int a = 0; a < k; ++a) {
            double ux = u[2 * nd[static_cast<std::size_t>(a)]];
            double uy = u[2 * nd[static_cast<std::size_t>(a)] + 1];
            strain[0] += gn[a].x() * ux;
            strain[1] += gn[a].y() * uy;
            strain[2] += gn[a].y() * ux + gn[a].x() * uy;
        }
        out[static_cast<std::size_t>(cell)] = material.voigt_at(physical_point(g, centroid)) * strain;
    }
    return out;
}

std::vector<Voigt> element_stress(const Mesh& mesh, const std::vector<Eigen::Matrix3d>& tangent_per_cell,
                                  const Eigen::VectorXd& u) {
    if (static_cast<int>(tangent_per_cell.size()) != mesh.n_cells())
        throw std::invalid_argument("one tangent per cell required");
    std::vector<Voigt> out(static_cast<std::size_t>(mesh.n_cells()));
    const double centroid[3] = {1.0 / 3, 1.0 / 3, 1.0 / 3};
    double nvals[6];
    Eigen::Vector2d gn[6];
    const int k = mesh.nodes_per_cell();
    for (int cell = 0; cell < mesh.n_cells(); ++cell) {
        auto g = element_geometry(mesh, cell);
        const auto& nd = mesh.cells[static_cast<std::size_t>(cell)];
        shapes_at(mesh, g, centroid, nvals, gn);
        Voigt strain = Voigt::Zero();
        for (int a = 0; a < k; ++a) {
            double ux = u[2 * nd[static_cast<std::size_t>(a)]];
            double uy = u[2 * nd[static_cast<std::size_t>(a)] + 1];
            strain[0] += gn[a].x() * ux;
            strain[1] += gn[a].y() * uy;
            strain[2] += gn[a].y() * ux + gn[a].x() * uy;
        }
        out[static_cast<std::size_t>(cell)] = tangent_per_cell[static_cast<std::size_t>(cell)] * strain;
    }
    return out;
}

Eigen::VectorXd shape_volume_integrals(const Mesh& mesh) {
    Eigen::VectorXd out = Eigen::VectorXd::Zero(mesh.n_nodes());
    double nvals[6];
    Eigen::Vector2d gn[6];
    const int k = mesh.nodes_per_cell();
    for (int cell = 0; cell < mesh.n_cells(); ++cell) {
        auto g = element_geometry(mesh, cell);
        const auto& nd = mesh.cells[static_cast<std::size_t>(cell)];
        for (int qp = 0; qp < Quad::n; ++qp) {
            shapes_at(mesh, g, Quad::bary[qp], nvals, gn);
            for (int a = 0; a < k; ++a) out[nd[static_cast<std::size_t>(a)]] += g.area / 3.0 * nvals[a];
        }
    }
    return out;
}

std::vector<Eigen::Vector2d> shape_boundary_normal_integrals(const Mesh& mesh) {
    std::vector<Eigen::Vector2d> out(static_cast<std::size_t>(mesh.n_nodes()), Eigen::Vector2d::Zero());
    for (Side s : {Side::bottom, Side::right, Side::top, Side::left})
        for (const auto& e : side_edges(mesh, s)) {
            const auto& pa = mesh.nodes[static_cast<std::size_t>(e[0])];
            const auto& pb = mesh.nodes[static_cast<std::size_t>(e[2])];
            Eigen::Vector2d tang = pb - pa;
            double h = tang.norm();
            Eigen::Vector2d n(tang.y() / h, -tang.x() / h);
            if (mesh.order == 1) {
                out[static_cast<std::size_t>(e[0])] += 0.5 * h * n;
                out[static_cast<std::size_t>(e[2])] += 0.5 * h * n;
            } else {
                out[static_cast<std::size_t>(e[0])] += h / 6 * n;
                out[static_cast<std::size_t>(e[1])] += 4 * h / 6 * n;
                out[static_cast<std::size_t>(e[2])] += h / 6 * n;
            }
        }
    return out;
}

Eigen::Vector2d volume_average(const Mesh& mesh, const Eigen::VectorXd& field) {
    if (field.size() != mesh.n_dofs()) throw std::invalid_argument("field size mismatch");
    Eigen::Vector2d sum = Eigen::Vector2d::Zero();
    double vol = 0;
    double nvals[6];
    Eigen::Vector2d gn[6];
    const int k = mesh.nodes_per_cell();
    for (int cell = 0; cell < mesh.n_cells(); ++cell) {
        auto g = element_geometry(mesh, cell);
        const auto& nd = mesh.cells[static_cast<std::size_t>(cell)];
        vol += g.area;
        for (int qp = 0; qp < Quad::n; ++qp) {
            shapes_at(mesh, g, Quad::bary[qp], nvals, gn);
            Eigen::Vector2d u = Eigen::Vector2d::Zero();
            for (int a = 0; a < k; ++a)
                u += nvals[a] * Eigen::Vector2d(field[2 * nd[static_cast<std::size_t>(a)]], field[2 * nd[static_cast<std::size_t>(a)] + 1]);
            sum += g.area / 3.0 * u;
        }
    }
    return sum / vol;
}

namespace {

void add_zero_average_rows(LinearSystem& sys, const Mesh& mesh) {
    Eigen::VectorXd vi = shape_volume_integrals(mesh);
    for (int comp = 0; comp < 2; ++comp) {
        ConstraintRow row;
        row.coeffs.resize(sys.stiffness.rows());
        for (int n = 0; n < mesh.n_nodes(); ++n) row.coeffs.insert(2 * n + comp) = vi[n];
        sys.multipliers.push_back(std::move(row));
    }
}

std::vector<std::pair<int, int>> periodic_pairs(const Mesh& mesh) {
    auto lookup = node_lookup(mesh);
    auto find = [&](const Eigen::Vector2d& p) {
        auto it = lookup.find(node_key(mesh, p));
        if (it == lookup.end()) throw std::runtime_error("periodic partner node missing");
        return it->second;
    };
    std::vector<int> master(static_cast<std::size_t>(mesh.n_nodes()));
    for (int n = 0; n < mesh.n_nodes(); ++n) master[static_cast<std::size_t>(n)] = n;
    auto root = [&](int n) {
        while (master[static_cast<std::size_t>(n)] != n) n = master[static_cast<std::size_t>(n)];
        return n;
    };
    auto link = [&](int slave, int m) {
        int rs = root(slave), rm = root(m);
        if (rs != rm) master[static_cast<std::size_t>(std::max(rs, rm))] = std::min(rs, rm);
    };
    double w = mesh.box.width(), h = mesh.box.height();
    for (int n = 0; n < mesh.n_nodes(); ++n) {
        const auto& p = mesh.nodes[static_cast<std::size_t>(n)];
        bool on_right = std::abs(p.x() - mesh.box.x1) < 1e-12 * w;
        bool on_top = std::abs(p.y() - mesh.box.y1) < 1e-12 * h;
        if (on_right) link(n, find({mesh.box.x0, p.y()}));
        if (on_top) link(n, find({p.x(), mesh.box.y0}));
    }
    std::vector<std::pair<int, int>> pairs;
    for (int n = 0; n < mesh.n_nodes(); ++n) {
        int r = root(n);
        if (r != n) {
            pairs.emplace_back(2 * n, 2 * r);
            pairs.emplace_back(2 * n + 1, 2 * r + 1);
        }
    }
    return pairs;
}

} // namespace

LinearSystem constrain(LinearSystem sys, const Mesh& mesh, BcModel model,
                       const Eigen::VectorXd* trace_values, const BoundaryDiscretisation* bd) {
    if (sys.constrained) throw std::invalid_argument("system already constrained");
    sys.constrained = true;
    sys.model = model;

    switch (model) {
        case BcModel::taylor:
            break;
        case BcModel::linear: {
            for (int n : boundary_loop(mesh)) {
                sys.fixed_dofs.emplace_back(2 * n, 0.0);
                sys.fixed_dofs.emplace_back(2 * n + 1, 0.0);
            }
            break;
        }
        case BcModel::periodic: {
            sys.pairs = periodic_pairs(mesh);
            add_zero_average_rows(sys, mesh);
            break;
        }
        case BcModel::minimal: {
            add_zero_average_rows(sys, mesh);
            auto bn = shape_boundary_normal_integrals(mesh);
            // <eta (x)s n> = 0: components 11, 22, 12
            ConstraintRow r11, r22, r12, gauge;
            for (auto* r : {&r11, &r22, &r12, &gauge}) r->coeffs.resize(sys.stiffness.rows());
            for (int n = 0; n < mesh.n_nodes(); ++n) {
                const auto& q = bn[static_cast<std::size_t>(n)];
                if (q.squaredNorm() == 0) continue;
                r11.coeffs.coeffRef(2 * n) += q.x();
                r22.coeffs.coeffRef(2 * n + 1) += q.y();
                r12.coeffs.coeffRef(2 * n) += 0.5 * q.y();
                r12.coeffs.coeffRef(2 * n + 1) += 0.5 * q.x();
                // skew moment pin: removes the rigid rotation left free by the
                // symmetric constraints; the homogenised stress is invariant to it
                gauge.coeffs.coeffRef(2 * n) += q.y();
                gauge.coeffs.coeffRef(2 * n + 1) -= q.x();
            }
            gauge.gauge = true;
            sys.multipliers.push_back(std::move(r11));
            sys.multipliers.push_back(std::move(r22));
            sys.multipliers.push_back(std::move(r12));
            sys.multipliers.push_back(std::move(gauge));
            break;
        }
        case BcModel::prescribed_trace: {
            if (!trace_values || !bd)
                throw std::invalid_argument("prescribed_trace needs trace values and a boundary discretisation");
            if (trace_values->size() != bd->n_slots())
                throw std::invalid_argument("trace length does not match boundary dof count");
            for (int p = 0; p < static_cast<int>(bd->nodes.size()); ++p) {
                int n = bd->nodes[static_cast<std::size_t>(p)];
                sys.fixed_dofs.emplace_back(2 * n, (*trace_values)[bd->slot(p, 0)]);
                sys.fixed_dofs.emplace_back(2 * n + 1, (*trace_values)[bd->slot(p, 1)]);
            }
            sys.shift_to_zero_average = true;
            break;
        }
    }
    return sys;
}

LinearSystem constrain_sides(LinearSystem sys, const Mesh& mesh, const std::vector<Side>& dirichlet_sides,
                             const Eigen::Vector2d& value) {
    if (sys.constrained) throw std::invalid_argument("system already constrained");
    sys.constrained = true;
    sys.model = BcModel::prescribed_trace;
    for (Side s : dirichlet_sides)
        for (int n : boundary_nodes_of_side(mesh, s)) {
            sys.fixed_dofs.emplace_back(2 * n, value.x());
            sys.fixed_dofs.emplace_back(2 * n + 1, value.y());
        }
    return sys;
}

LinearSystem constrain_dofs(LinearSystem sys, const std::vector<std::pair<int, double>>& fixed) {
    if (sys.constrained) throw std::invalid_argument("system already constrained");
    sys.constrained = true;
    sys.model = BcModel::prescribed_trace;
    sys.fixed_dofs = fixed;
    return sys;
}

namespace {

[[noreturn]] void report_singular(const Eigen::SparseMatrix<double>& a, SolveReport* report) {
    int dim = -1;
    if (a.rows() <= 2500) {
        Eigen::MatrixXd dense(a);
        Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(dense);
        qr.setThreshold(1e-10);
        dim = static_cast<int>(a.rows() - qr.rank());
    }
    if (report) report->nullspace_estimate = dim;
    throw std::runtime_error("singular constrained system; nullspace dimension estimate = " +
                             (dim >= 0 ? std::to_string(dim) : std::string("unknown")));
}

void check_residual(const Eigen::SparseMatrix<double>& a, const Eigen::VectorXd& x,
                    const Eigen::VectorXd& b, SolveReport* report) {
    double scale = std::max(b.norm(), 1.0);
    double res = (a * x - b).norm() / scale;
    if (report) report->residual = res;
    if (!(res <= k_solver_tol))
        throw std::runtime_error("solver residual " + std::to_string(res) + " above tolerance");
}

} // namespace

Eigen::VectorXd sparse_solve(const Eigen::SparseMatrix<double>& a, const Eigen::VectorXd& b) {
    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
    lu.compute(a);
    if (lu.info() != Eigen::Success) report_singular(a, nullptr);
    Eigen::VectorXd x = lu.solve(b);
    check_residual(a, x, b, nullptr);
    return x;
}

Eigen::VectorXd solve(const LinearSystem& sys, const Mesh& mesh, SolveReport* report) {
    if (!sys.constrained) throw std::invalid_argument("solve requires a constrained system");
    const int n = static_cast<int>(sys.stiffness.rows());

    if (sys.model == BcModel::taylor) return Eigen::VectorXd::Zero(n);

    Eigen::VectorXd u = Eigen::VectorXd::Zero(n);

    if (!sys.fixed_dofs.empty()) {
        // Dirichlet elimination; the reduced block is SPD
        std::vector<double> fixed_value(static_cast<std::size_t>(n), 0.0);
        std::vector<char> is_fixed(static_cast<std::size_t>(n), 0);
        for (auto [dof, val] : sys.fixed_dofs) {
            is_fixed[static_cast<std::size_t>(dof)] = 1;
            fixed_value[static_cast<std::size_t>(dof)] = val;
        }
        std::vector<int> free_index(static_cast<std::size_t>(n), -1);
        int nf = 0;
        for (int i = 0; i < n; ++i)
            if (!is_fixed[static_cast<std::size_t>(i)]) free_index[static_cast<std::size_t>(i)] = nf++;

        std::vector<Eigen::Triplet<double>> trips;
        Eigen::VectorXd bf(nf);
        for (int i = 0; i < n; ++i)
            if (!is_fixed[static_cast<std::size_t>(i)]) bf[free_index[static_cast<std::size_t>(i)]] = sys.rhs[i];
        for (int col = 0; col < n; ++col)
            for (Eigen::SparseMatrix<double>::InnerIterator it(sys.stiffness, col); it; ++it) {
                int i = static_cast<int>(it.row()), j = col;
                if (is_fixed[static_cast<std::size_t>(i)]) continue;
                if (is_fixed[static_cast<std::size_t>(j)])
                    bf[free_index[static_cast<std::size_t>(i)]] -= it.value() * fixed_value[static_cast<std::size_t>(j)];
                else
                    trips.emplace_back(free_index[static_cast<std::size_t>(i)], free_index[static_cast<std::size_t>(j)], it.value());
            }
        Eigen::SparseMatrix<double> kff(nf, nf);
        kff.setFromTriplets(trips.begin(), trips.end());

        Eigen::VectorXd xf;
        Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt;
        ldlt.compute(kff);
        if (ldlt.info() == Eigen::Success) {
            xf = ldlt.solve(bf);
        } else {
            Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
            lu.compute(kff);
            if (lu.info() != Eigen::Success) report_singular(kff, report);
            xf = lu.solve(bf);
        }
        check_residual(kff, xf, bf, report);

        for (int i = 0; i < n; ++i)
            u[i] = is_fixed[static_cast<std::size_t>(i)] ? fixed_value[static_cast<std::size_t>(i)]
                                                         : xf[free_index[static_cast<std::size_t>(i)]];
    } else {
        // multiplier (and optional periodic-pairing) saddle system
        std::vector<int> master(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i) master[static_cast<std::size_t>(i)] = i;
        for (auto [slave, m] : sys.pairs) master[static_cast<std::size_t>(slave)] = m;
        for (int i = 0; i < n; ++i) {  // collapse chains
            int r = i;
            while (master[static_cast<std::size_t>(r)] != r) r = master[static_cast<std::size_t>(r)];
            master[static_cast<std::size_t>(i)] = r;
        }
        std::vector<int> red(static_cast<std::size_t>(n), -1);
        int nr = 0;
        for (int i = 0; i < n; ++i)
            if (master[static_cast<std::size_t>(i)] == i) red[static_cast<std::size_t>(i)] = nr++;
        auto reduced = [&](int i) { return red[static_cast<std::size_t>(master[static_cast<std::size_t>(i)])]; };

        const int m = static_cast<int>(sys.multipliers.size());
        std::vector<Eigen::Triplet<double>> trips;
        Eigen::VectorXd b = Eigen::VectorXd::Zero(nr + m);
        for (int col = 0; col < n; ++col)
            for (Eigen::SparseMatrix<double>::InnerIterator it(sys.stiffness, col); it; ++it)
                trips.emplace_back(reduced(static_cast<int>(it.row())), reduced(col), it.value());
        for (int i = 0; i < n; ++i) b[reduced(i)] += sys.rhs[i];
        for (int r = 0; r < m; ++r) {
            const auto& row = sys.multipliers[static_cast<std::size_t>(r)];
            for (Eigen::SparseVector<double>::InnerIterator it(row.coeffs); it; ++it) {
                trips.emplace_back(nr + r, reduced(static_cast<int>(it.index())), it.value());
                trips.emplace_back(reduced(static_cast<int>(it.index())), nr + r, it.value());
            }
            b[nr + r] = row.target;
        }
        Eigen::SparseMatrix<double> kkt(nr + m, nr + m);
        kkt.setFromTriplets(trips.begin(), trips.end());

        Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
        lu.compute(kkt);
        if (lu.info() != Eigen::Success) report_singular(kkt, report);
        Eigen::VectorXd x = lu.solve(b);
        check_residual(kkt, x, b, report);

        for (int i = 0; i < n; ++i) u[i] = x[reduced(i)];
    }

    if (sys.shift_to_zero_average) {
        Eigen::Vector2d avg = volume_average(mesh, u);
        for (int nd = 0; nd < mesh.n_nodes(); ++nd) {
            u[2 * nd] -= avg.x();
            u[2 * nd + 1] -= avg.y();
        }
    }
    return u;
}

int element_containing(const Mesh& mesh, const Eigen::Vector2d& p) {
    auto bary_inside = [&](int cell, double tol) {
        auto g = element_geometry(mesh, cell);
        double l0 = ((g.vertex[1] - p).x() * (g.vertex[2] - p).y() - (g.vertex[2] - p).x() * (g.vertex[1] - p).y()) / (2 * g.area);
        double l1 = ((g.vertex[2] - p).x() * (g.vertex[0] - p).y() - (g.vertex[0] - p).x() * (g.vertex[2] - p).y()) / (2 * g.area);
        double l2 = 1.0 - l0 - l1;
        return l0 >= -tol && l1 >= -tol && l2 >= -tol;
    };

    if (!mesh.remapped) {
        int ci = std::min(std::max(int(std::floor((p.x() - mesh.box.x0) / mesh.hx())), 0), mesh.nx - 1);
        int cj = std::min(std::max(int(std::floor((p.y() - mesh.box.y0) / mesh.hy())), 0), mesh.ny - 1);
        for (int t = 0; t < 4; ++t) {
            int cell = 4 * (cj * mesh.nx + ci) + t;
            if (bary_inside(cell, 1e-10)) return cell;
        }
    }
    for (int cell = 0; cell < mesh.n_cells(); ++cell)
        if (bary_inside(cell, 1e-10)) return cell;
    throw std::invalid_argument("point outside mesh");
}

Eigen::Vector2d interpolate(const Mesh& mesh, const Eigen::VectorXd& field, const Eigen::Vector2d& p) {
    int cell = element_containing(mesh, p);
    auto g = element_geometry(mesh, cell);
    double l0 = ((g.vertex[1] - p).x() * (g.vertex[2] - p).y() - (g.vertex[2] - p).x() * (g.vertex[1] - p).y()) / (2 * g.area);
    double l1 = ((g.vertex[2] - p).x() * (g.vertex[0] - p).y() - (g.vertex[0] - p).x() * (g.vertex[2] - p).y()) / (2 * g.area);
    double L[3] = {l0, l1, 1.0 - l0 - l1};
    double nvals[6];
    Eigen::Vector2d gn[6];
    shapes_at(mesh, g, L, nvals, gn);
    Eigen::Vector2d out = Eigen::Vector2d::Zero();
    const auto& nd = mesh.cells[static_cast<std::size_t>(cell)];
    for (int a = 0; a < mesh.nodes_per_cell(); ++a)
        out += nvals[a] * Eigen::Vector2d(field[2 * nd[static_cast<std::size_t>(a)]], field[2 * nd[static_cast<std::size_t>(a)] + 1]);
    return out;
}

} // namespace deepbnd::fem
