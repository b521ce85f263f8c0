#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <numbers>
#include <set>

#include "deepbnd/micro.hpp"

using namespace deepbnd;

namespace {

micro::LatticeConfig paper_lattice(int n_side = 6) {
    micro::LatticeConfig c;
    c.n_side = n_side;
    c.length = 1.0;
    c.r_min = 0.1 / n_side;
    c.r_max = 0.4 / n_side;
    return c;
}

bool stratified(const Eigen::MatrixXd& theta) {
    const int n = static_cast<int>(theta.rows());
    for (Eigen::Index d = 0; d < theta.cols(); ++d) {
        std::set<int> seen;
        for (int i = 0; i < n; ++i) {
            double t = theta(i, d);
            if (!(t >= -1.0 && t < 1.0)) return false;
            seen.insert(static_cast<int>(std::floor((t + 1.0) / 2.0 * n)));
        }
        if (static_cast<int>(seen.size()) != n) return false;
    }
    return true;
}

} // namespace

TEST_CASE("lhs single sample spans the whole interval") {
    auto s = micro::lhs_sample(1, 3, 42);
    REQUIRE(s.theta.rows() == 1);
    REQUIRE(s.theta.cols() == 3);
    for (int d = 0; d < 3; ++d) CHECK(std::abs(s.theta(0, d)) <= 1.0);
}

TEST_CASE("lhs places one sample per stratum") {
    auto s = micro::lhs_sample(4, 1, 7);
    bool strata[4] = {false, false, false, false};
    for (int i = 0; i < 4; ++i) {
        double t = s.theta(i, 0);
        REQUIRE(t >= -1.0);
        REQUIRE(t < 1.0);
        strata[static_cast<int>(std::floor((t + 1.0) * 2.0))] = true;
    }
    for (bool b : strata) CHECK(b);

    CHECK(stratified(micro::lhs_sample(16, 16, 1).theta));
    CHECK(stratified(micro::lhs_sample(257, 5, 3).theta));
    CHECK(stratified(micro::lhs_sample(32, 36, 2).theta));
}

TEST_CASE("lhs is deterministic per seed") {
    auto a = micro::lhs_sample(12, 9, 5);
    auto b = micro::lhs_sample(12, 9, 5);
    CHECK((a.theta - b.theta).cwiseAbs().maxCoeff() == 0.0);
    auto c = micro::lhs_sample(12, 9, 6);
    CHECK((a.theta - c.theta).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("lhs rejects bad shapes") {
    CHECK_THROWS_AS(micro::lhs_sample(0, 3, 1), std::invalid_argument);
    CHECK_THROWS_AS(micro::lhs_sample(3, 0, 1), std::invalid_argument);
}

TEST_CASE("radius map endpoints and midpoint") {
    const double r_min = 1.0 / 60, r_max = 1.0 / 15;
    Eigen::VectorXd theta(3);
    theta << 1.0, -1.0, 0.0;
    auto r = micro::radii_from_theta(theta, r_min, r_max);
    CHECK(r[0] == doctest::Approx(r_max).epsilon(1e-14));
    CHECK(r[1] == doctest::Approx(r_min).epsilon(1e-14));
    // oracle: geometric mean, sqrt(1/60 * 1/15) = 1/30
    CHECK(r[2] == doctest::Approx(std::sqrt(r_min * r_max)).epsilon(1e-14));
    CHECK(r[2] == doctest::Approx(1.0 / 30).epsilon(1e-14));
}

TEST_CASE("radius map is monotone with range [r_min, r_max]") {
    const double r_min = 0.02, r_max = 0.11;
    Eigen::VectorXd theta = Eigen::VectorXd::LinSpaced(101, -1.0, 1.0);
    auto r = micro::radii_from_theta(theta, r_min, r_max);
    for (std::size_t j = 1; j < r.size(); ++j) CHECK(r[j] > r[j - 1]);
    for (double v : r) {
        CHECK(v >= r_min - 1e-15);
        CHECK(v <= r_max + 1e-15);
    }
    Eigen::VectorXd back = micro::theta_from_radii(r, r_min, r_max);
    CHECK((back - theta).cwiseAbs().maxCoeff() < 1e-12);

    Eigen::VectorXd bad(1);
    bad << 1.5;
    CHECK_THROWS_AS(micro::radii_from_theta(bad, r_min, r_max), std::invalid_argument);
}

TEST_CASE("stiffness lookup distinguishes matrix and inclusions") {
    auto cfg = paper_lattice(6);
    micro::Microstructure m{cfg, std::vector<double>(36, cfg.r_max)};

    // cell corner lies outside every ball since r_max < half spacing
    Eigen::Matrix3d c = micro::stiffness_at(m, {-0.5, -0.5});
    const double lambda = 0.576923, g = 0.384615;
    CHECK(c(0, 0) == doctest::Approx(lambda + 2 * g).epsilon(1e-12));
    CHECK(c(0, 1) == doctest::Approx(lambda).epsilon(1e-12));
    CHECK(c(2, 2) == doctest::Approx(g).epsilon(1e-12));
    CHECK(c(0, 2) == 0.0);
    CHECK(c(1, 2) == 0.0);

    Eigen::Matrix3d ci = micro::stiffness_at(m, m.centre(0));
    CHECK((ci - 10.0 * c).cwiseAbs().maxCoeff() < 1e-12);

    micro::Microstructure hom = m;
    hom.config.gamma = 1.0;
    Eigen::Matrix3d ref = micro::stiffness_at(hom, {0.013, -0.27});
    for (double x : {-0.49, -0.1, 0.0, 0.21, 0.49})
        for (double y : {-0.48, 0.07, 0.33})
            CHECK((micro::stiffness_at(hom, {x, y}) - ref).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("quarter-turn parameter permutation matches the 2x2 reference") {
    std::vector<double> p{1, 2, 3, 4};
    auto q = micro::permute_params(p, 1);
    CHECK(q == std::vector<double>{2, 4, 1, 3});
    CHECK(micro::permute_params(p, 0) == p);
    CHECK(micro::permute_params(p, 4) == p);
    CHECK(micro::permute_params(p, -3) == q);
}

TEST_CASE("permutation composes to the identity and is a bijection") {
    for (int n : {2, 3, 4}) {
        std::vector<double> p(static_cast<std::size_t>(n * n));
        for (std::size_t i = 0; i < p.size(); ++i) p[i] = double(i);
        auto once = micro::permute_params(p, 1);
        std::set<double> values(once.begin(), once.end());
        CHECK(values.size() == p.size());  // bijection on indices
        auto four = micro::permute_params(p, 4);
        CHECK(four == p);
        auto composed = micro::permute_params(micro::permute_params(once, 1), 2);
        CHECK(composed == p);
    }
    CHECK_THROWS_AS(micro::permute_params(std::vector<double>{1, 2, 3}, 1), std::invalid_argument);
}

TEST_CASE("permutation geometrically rotates the lattice") {
    // the output pattern rotated by +90 deg must reproduce the input pattern
    auto cfg = paper_lattice(4);
    auto s = micro::lhs_sample(1, 16, 11);
    micro::Microstructure m = micro::make_microstructure(cfg, s.theta.row(0).transpose());
    micro::Microstructure mp = m;
    mp.radii = micro::permute_params(m.radii, 1);
    Eigen::Rotation2D<double> rot(std::numbers::pi / 2);
    for (int i = 0; i < 16; ++i) {
        Eigen::Vector2d y = rot * mp.centre(i);
        bool found = false;
        for (int j = 0; j < 16; ++j)
            if ((m.centre(j) - y).norm() < 1e-12) {
                CHECK(m.radii[static_cast<std::size_t>(j)] ==
                      doctest::Approx(mp.radii[static_cast<std::size_t>(i)]).epsilon(1e-15));
                found = true;
            }
        CHECK(found);
    }
}

TEST_CASE("sampled microstructures keep balls disjoint and inside the cell") {
    auto cfg = paper_lattice(5);
    for (std::uint64_t seed : {1ull, 2ull, 9ull}) {
        auto s = micro::lhs_sample(4, cfg.n_balls(), seed);
        for (int row = 0; row < 4; ++row) {
            auto m = micro::make_microstructure(cfg, s.theta.row(row).transpose());
            m.validate();
            for (int i = 0; i < cfg.n_balls(); ++i) {
                const double ri = m.radii[static_cast<std::size_t>(i)];
                CHECK(m.centre(i).cwiseAbs().maxCoeff() + ri < 0.5 * cfg.length);
                for (int j = i + 1; j < cfg.n_balls(); ++j)
                    CHECK((m.centre(i) - m.centre(j)).norm() >
                          ri + m.radii[static_cast<std::size_t>(j)]);
            }
        }
    }
}

TEST_CASE("lattice config invariants are enforced") {
    auto cfg = paper_lattice(4);
    cfg.r_max = 0.6 * cfg.cell_spacing();
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = paper_lattice(4);
    cfg.r_min = cfg.r_max;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = paper_lattice(4);
    cfg.gamma = 0;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}

TEST_CASE("central window extracts the inner block") {
    auto cfg = paper_lattice(4);
    std::vector<double> radii(16);
    for (std::size_t i = 0; i < 16; ++i) radii[i] = cfg.r_min + double(i) * 1e-4;
    micro::Microstructure m{cfg, radii};
    auto w = micro::central_window(m, 2);
    CHECK(w.config.n_side == 2);
    CHECK(w.config.length == doctest::Approx(0.5));
    CHECK(w.radii == std::vector<double>{radii[5], radii[6], radii[9], radii[10]});
    CHECK_THROWS_AS(micro::central_window(m, 3), std::invalid_argument);
}

TEST_CASE("microstructure and sample-set files round trip") {
    namespace fs = std::filesystem;
    fs::path tmp = fs::temp_directory_path() / "deepbnd_micro_io";
    fs::create_directories(tmp);

    auto cfg = paper_lattice(3);
    auto s = micro::lhs_sample(5, 9, 13);
    auto m = micro::make_microstructure(cfg, s.theta.row(2).transpose());
    micro::save_microstructure(tmp / "m.json", m);
    auto m2 = micro::load_microstructure(tmp / "m.json");
    CHECK(m2.config.n_side == 3);
    for (std::size_t i = 0; i < m.radii.size(); ++i) CHECK(m.radii[i] == m2.radii[i]);

    micro::save_samples(tmp / "s.bin", tmp / "s.json", s);
    auto s2 = micro::load_samples(tmp / "s.bin", tmp / "s.json");
    CHECK(s2.seed == 13);
    CHECK((s.theta - s2.theta).cwiseAbs().maxCoeff() == 0.0);
    fs::remove_all(tmp);
}
