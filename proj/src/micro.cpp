#include "deepbnd/micro.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "deepbnd/io.hpp"
#include "deepbnd/rng.hpp"

namespace deepbnd::micro {

void LatticeConfig::validate() const {
    if (n_side < 1) throw std::invalid_argument("n_side must be positive");
    if (length <= 0) throw std::invalid_argument("cell length must be positive");
    if (!(0 < r_min && r_min < r_max)) throw std::invalid_argument("need 0 < r_min < r_max");
    if (r_max > 0.5 * cell_spacing() + 1e-15)
        throw std::invalid_argument("r_max exceeds half the lattice spacing; inclusions would overlap");
    if (gamma <= 0) throw std::invalid_argument("contrast gamma must be positive");
    if (lambda <= 0 || shear <= 0) throw std::invalid_argument("Lame coefficients must be positive");
}

Eigen::Vector2d Microstructure::centre(int index) const {
    int row = index / config.n_side;
    int col = index % config.n_side;
    double h = config.cell_spacing();
    // (col+1/2, row+1/2)*h shifted so the cell centroid sits at the origin
    return {(col + 0.5) * h - 0.5 * config.length, (row + 0.5) * h - 0.5 * config.length};
}

double Microstructure::volume_fraction() const {
    double a = 0;
    for (double r : radii) a += std::numbers::pi * r * r;
    return a / (config.length * config.length);
}

void Microstructure::validate() const {
    config.validate();
    if (static_cast<int>(radii.size()) != config.n_balls())
        throw std::invalid_argument("radii count must equal n_side^2");
    for (double r : radii)
        if (!(config.r_min - 1e-15 <= r && r <= config.r_max + 1e-15))
            throw std::invalid_argument("radius outside [r_min, r_max]");
}

namespace {

// lattice cell containing y, clamped to the grid
inline int cell_of(const LatticeConfig& cfg, double coord) {
    double h = cfg.cell_spacing();
    int c = static_cast<int>(std::floor((coord + 0.5 * cfg.length) / h));
    return std::min(std::max(c, 0), cfg.n_side - 1);
}

} // namespace

bool inside_inclusion(const Microstructure& m, const Eigen::Vector2d& y) {
    // r <= spacing/2 so only the ball of the containing cell can be hit
    int col = cell_of(m.config, y[0]);
    int row = cell_of(m.config, y[1]);
    int idx = row * m.config.n_side + col;
    return (y - m.centre(idx)).norm() < m.radii[idx];
}

Eigen::Matrix3d stiffness_at(const Microstructure& m, const Eigen::Vector2d& y) {
    double chi = inside_inclusion(m, y) ? m.config.gamma : 1.0;
    return chi * isotropic_stiffness(m.config.lambda, m.config.shear);
}

SampleSet lhs_sample(int n_samples, int n_dims, std::uint64_t seed) {
    if (n_samples < 1 || n_dims < 1)
        throw std::invalid_argument("lhs_sample needs n_samples >= 1 and n_dims >= 1");
    SampleSet s;
    s.seed = seed;
    s.theta.resize(n_samples, n_dims);
    for (int d = 0; d < n_dims; ++d) {
        Rng rng(seed, static_cast<std::uint64_t>(d) + 1);
        std::vector<int> strata(n_samples);
        for (int i = 0; i < n_samples; ++i) strata[i] = i;
        rng.shuffle(strata);
        for (int i = 0; i < n_samples; ++i) {
            double u = rng.uniform();
            s.theta(i, d) = -1.0 + 2.0 * (strata[i] + u) / n_samples;
        }
    }
    return s;
}

std::vector<double> radii_from_theta(const Eigen::VectorXd& theta_row, double r_min, double r_max) {
    if (!(0 < r_min && r_min < r_max)) throw std::invalid_argument("need 0 < r_min < r_max");
    double a = 0.5 * std::log(r_max * r_min);
    double b = 0.5 * std::log(r_max / r_min);
    std::vector<double> r(theta_row.size());
    for (Eigen::Index j = 0; j < theta_row.size(); ++j) {
        double t = theta_row[j];
        if (!(t >= -1.0 && t <= 1.0)) throw std::invalid_argument("theta entry outside [-1, 1]");
        r[static_cast<std::size_t>(j)] = std::exp(a + t * b);
    }
    return r;
}

Eigen::VectorXd theta_from_radii(const std::vector<double>& radii, double r_min, double r_max) {
    double a = 0.5 * std::log(r_max * r_min);
    double b = 0.5 * std::log(r_max / r_min);
    Eigen::VectorXd t(static_cast<Eigen::Index>(radii.size()));
    for (std::size_t j = 0; j < radii.size(); ++j)
        t[static_cast<Eigen::Index>(j)] = std::clamp((std::log(radii[j]) - a) / b, -1.0, 1.0);
    return t;
}

Microstructure make_microstructure(const LatticeConfig& cfg, const Eigen::VectorXd& theta_row) {
    cfg.validate();
    if (theta_row.size() != cfg.n_balls())
        throw std::invalid_argument("theta row length must equal n_side^2");
    Microstructure m{cfg, radii_from_theta(theta_row, cfg.r_min, cfg.r_max)};
    return m;
}

std::vector<double> permute_params(const std::vector<double>& radii, int quarter_turns) {
    int n = static_cast<int>(std::lround(std::sqrt(double(radii.size()))));
    if (n * n != static_cast<int>(radii.size()))
        throw std::invalid_argument("permute_params needs a square lattice");
    int q = ((quarter_turns % 4) + 4) % 4;
    std::vector<double> out = radii;
    // one inverse quarter turn: out(r,c) = in(c, n-1-r)
    for (int k = 0; k < q; ++k) {
        std::vector<double> next(out.size());
        for (int r = 0; r < n; ++r)
            for (int c = 0; c < n; ++c)
                next[static_cast<std::size_t>(r * n + c)] = out[static_cast<std::size_t>(c * n + (n - 1 - r))];
        out.swap(next);
    }
    return out;
}

Eigen::VectorXd permute_params(const Eigen::VectorXd& radii, int quarter_turns) {
    std::vector<double> v(radii.data(), radii.data() + radii.size());
    auto out = permute_params(v, quarter_turns);
    return Eigen::Map<Eigen::VectorXd>(out.data(), static_cast<Eigen::Index>(out.size()));
}

Microstructure central_window(const Microstructure& m, int n_side_window) {
    int n = m.config.n_side;
    if (n_side_window < 1 || n_side_window > n || (n - n_side_window) % 2 != 0)
        throw std::invalid_argument("window must be a centred sub-lattice (same parity as n_side)");
    int off = (n - n_side_window) / 2;
    Microstructure w;
    w.config = m.config;
    w.config.n_side = n_side_window;
    w.config.length = m.config.length * n_side_window / n;
    w.radii.reserve(static_cast<std::size_t>(n_side_window * n_side_window));
    for (int r = 0; r < n_side_window; ++r)
        for (int c = 0; c < n_side_window; ++c)
            w.radii.push_back(m.radii[static_cast<std::size_t>((r + off) * n + (c + off))]);
    return w;
}

void save_microstructure(const std::filesystem::path& p, const Microstructure& m) {
    io::json j{{"n_side", m.config.n_side},
               {"L_H", m.config.length},
               {"r_min", m.config.r_min},
               {"r_max", m.config.r_max},
               {"gamma", m.config.gamma},
               {"lame", {m.config.lambda, m.config.shear}},
               {"radii", m.radii}};
    io::write_json(p, j);
}

Microstructure load_microstructure(const std::filesystem::path& p) {
    auto j = io::read_json(p);
    Microstructure m;
    m.config.n_side = j.at("n_side").get<int>();
    m.config.length = j.at("L_H").get<double>();
    m.config.r_min = j.at("r_min").get<double>();
    m.config.r_max = j.at("r_max").get<double>();
    m.config.gamma = j.at("gamma").get<double>();
    m.config.lambda = j.at("lame").at(0).get<double>();
    m.config.shear = j.at("lame").at(1).get<double>();
    m.radii = j.at("radii").get<std::vector<double>>();
    m.validate();
    return m;
}

void save_samples(const std::filesystem::path& bin, const std::filesystem::path& sidecar, const SampleSet& s) {
    io::write_matrix_rowmajor(bin, s.theta);
    io::write_json(sidecar, io::json{{"rows", s.theta.rows()},
                                     {"cols", s.theta.cols()},
                                     {"seed", s.seed},
                                     {"method", s.method}});
}

SampleSet load_samples(const std::filesystem::path& bin, const std::filesystem::path& sidecar) {
    auto j = io::read_json(sidecar);
    SampleSet s;
    s.seed = j.at("seed").get<std::uint64_t>();
    s.method = j.at("method").get<std::string>();
    s.theta = io::read_matrix_rowmajor(bin, j.at("rows").get<Eigen::Index>(), j.at("cols").get<Eigen::Index>());
    return s;
}

} // namespace deepbnd::micro
