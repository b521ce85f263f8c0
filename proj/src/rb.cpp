#include "deepbnd/rb.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <iostream>
#include <stdexcept>

#include "deepbnd/io.hpp"

namespace deepbnd::rb {

double mass_norm_sq(const Eigen::SparseMatrix<double>& mass, const Eigen::VectorXd& w) {
    return w.dot(mass * w);
}

ReducedBasis pod(const Eigen::MatrixXd& snapshots, const Eigen::SparseMatrix<double>& mass,
                 PodTruncation cut) {
    const Eigen::Index ns = snapshots.cols();
    if (ns < 1) throw std::invalid_argument("pod needs at least one snapshot");
    if (snapshots.rows() != mass.rows()) throw std::invalid_argument("snapshot/mass dimension mismatch");

    Eigen::MatrixXd mw = mass * snapshots;
    Eigen::MatrixXd corr = (snapshots.transpose() * mw) / double(ns);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(corr);
    if (eig.info() != Eigen::Success) throw std::runtime_error("correlation eigendecomposition failed");

    ReducedBasis rb;
    rb.eigenvalues = eig.eigenvalues().reverse();
    Eigen::MatrixXd vecs(ns, ns);
    for (Eigen::Index i = 0; i < ns; ++i) vecs.col(i) = eig.eigenvectors().col(ns - 1 - i);

    const double lead = rb.eigenvalues[0];
    Eigen::Index rank = 0;
    while (rank < ns && rb.eigenvalues[rank] > 1e-12 * lead && rb.eigenvalues[rank] > 0) ++rank;
    if (rank == 0) {
        std::cerr << "pod: zero snapshot set, returning an empty basis\n";
        rb.basis.resize(snapshots.rows(), 0);
        return rb;
    }

    Eigen::Index n_rb;
    if (cut.size >= 0) {
        n_rb = std::min<Eigen::Index>(cut.size, rank);
    } else {
        if (!(cut.tol > 0 && cut.tol < 1)) throw std::invalid_argument("tol_POD must lie in (0,1)");
        double total = rb.eigenvalues.sum();
        double partial = 0;
        n_rb = rank;
        for (Eigen::Index n = 1; n <= rank; ++n) {
            partial += rb.eigenvalues[n - 1];
            if (1.0 - partial / total < cut.tol) {
                n_rb = n;
                break;
            }
        }
    }

    rb.basis.resize(snapshots.rows(), n_rb);
    for (Eigen::Index i = 0; i < n_rb; ++i) {
        rb.basis.col(i) = snapshots * vecs.col(i) / std::sqrt(rb.eigenvalues[i] * double(ns));
        double scale = rb.basis.col(i).cwiseAbs().maxCoeff();
        for (Eigen::Index k = 0; k < rb.basis.rows(); ++k)
            if (std::abs(rb.basis(k, i)) > 1e-12 * scale) {
                if (rb.basis(k, i) < 0) rb.basis.col(i) = -rb.basis.col(i);
                break;
            }
    }
    return rb;
}

double pod_error(const ReducedBasis& basis, int n) {
    if (n < 0 || n > basis.eigenvalues.size())
        throw std::invalid_argument("pod_error index out of range");
    double tail = 0;
    for (Eigen::Index j = n; j < basis.eigenvalues.size(); ++j) tail += basis.eigenvalues[j];
    return tail;
}

Eigen::VectorXd project(const Eigen::VectorXd& w, const ReducedBasis& basis,
                        const Eigen::SparseMatrix<double>& mass) {
    if (w.size() != basis.n_gamma()) throw std::invalid_argument("trace/basis dimension mismatch");
    return basis.basis.transpose() * (mass * w);
}

Eigen::VectorXd reconstruct(const Eigen::VectorXd& beta, const ReducedBasis& basis) {
    if (beta.size() != basis.n_rb()) throw std::invalid_argument("coefficient/basis dimension mismatch");
    return basis.basis * beta;
}

double projection_mse(const Eigen::MatrixXd& snapshots, const ReducedBasis& basis,
                      const Eigen::SparseMatrix<double>& mass) {
    double acc = 0;
    for (Eigen::Index i = 0; i < snapshots.cols(); ++i) {
        Eigen::VectorXd w = snapshots.col(i);
        Eigen::VectorXd r = w - reconstruct(project(w, basis, mass), basis);
        acc += mass_norm_sq(mass, r);
    }
    return acc / double(snapshots.cols());
}

ReducedBasis rotate_basis(const ReducedBasis& basis, const fem::BoundaryDiscretisation& bd) {
    if (bd.nodes_per_side <= 0) throw std::invalid_argument("rotate_basis needs a symmetric square mesh");
    ReducedBasis out = basis;
    out.load_index = 2;
    for (Eigen::Index i = 0; i < basis.basis.cols(); ++i)
        out.basis.col(i) = fem::rotate_trace_quarter(bd, basis.basis.col(i), 1);
    return out;
}

Eigen::Matrix2d boundary_moment(const fem::Mesh& mesh, const fem::BoundaryDiscretisation& bd,
                                const Eigen::VectorXd& w) {
    if (w.size() != bd.n_slots()) throw std::invalid_argument("trace length mismatch");
    Eigen::Matrix2d acc = Eigen::Matrix2d::Zero();
    auto value_at = [&](int pos) { return Eigen::Vector2d(w[2 * pos], w[2 * pos + 1]); };
    for (const auto& e : bd.edges) {
        Eigen::Vector2d integral;
        if (e.mid < 0)
            integral = 0.5 * e.length * (value_at(e.a) + value_at(e.b));
        else
            integral = e.length / 6.0 * (value_at(e.a) + 4.0 * value_at(e.mid) + value_at(e.b));
        acc += integral * e.normal.transpose();
    }
    return acc / mesh.box.area();
}

CorrectedBasis admissibility_correct(const ReducedBasis& basis, const fem::Mesh& mesh,
                                     const fem::BoundaryDiscretisation& bd) {
    CorrectedBasis out;
    out.basis = basis.basis;
    out.strain_correction.resize(3, basis.n_rb());
    for (int i = 0; i < basis.n_rb(); ++i) {
        Eigen::Matrix2d a = boundary_moment(mesh, bd, basis.basis.col(i));
        for (int p = 0; p < static_cast<int>(bd.nodes.size()); ++p) {
            Eigen::Vector2d y = mesh.nodes[static_cast<std::size_t>(bd.nodes[static_cast<std::size_t>(p)])];
            Eigen::Vector2d shift = a * y;
            out.basis(2 * p, i) -= shift.x();
            out.basis(2 * p + 1, i) -= shift.y();
        }
        out.strain_correction.col(i) = Voigt(a(0, 0), a(1, 1), a(0, 1) + a(1, 0));
    }
    return out;
}

void save_basis(const std::filesystem::path& dir, const ReducedBasis& basis) {
    std::filesystem::create_directories(dir);
    std::vector<double> eigs(basis.eigenvalues.data(), basis.eigenvalues.data() + basis.eigenvalues.size());
    io::write_json(dir / "manifest.json", io::json{{"n_gamma", basis.n_gamma()},
                                                   {"n_rb", basis.n_rb()},
                                                   {"load_index", basis.load_index},
                                                   {"mesh_hash", basis.mesh_hash},
                                                   {"eigenvalues", eigs}});
    io::write_matrix_colmajor(dir / "basis.bin", basis.basis);
}

ReducedBasis load_basis(const std::filesystem::path& dir) {
    auto j = io::read_json(dir / "manifest.json");
    ReducedBasis rb;
    rb.load_index = j.at("load_index").get<int>();
    rb.mesh_hash = j.at("mesh_hash").get<std::string>();
    auto eigs = j.at("eigenvalues").get<std::vector<double>>();
    rb.eigenvalues = Eigen::Map<Eigen::VectorXd>(eigs.data(), static_cast<Eigen::Index>(eigs.size()));
    rb.basis = io::read_matrix_colmajor(dir / "basis.bin", j.at("n_gamma").get<Eigen::Index>(),
                                        j.at("n_rb").get<Eigen::Index>());
    return rb;
}

} // namespace deepbnd::rb
