#include "deepbnd/mlp.hpp"

#include <cmath>
#include <stdexcept>

#include "deepbnd/io.hpp"
#include "deepbnd/rng.hpp"

namespace deepbnd::mlp {

namespace {

inline Eigen::MatrixXd sigmoid(const Eigen::MatrixXd& z) {
    return z.unaryExpr([](double v) { return 1.0 / (1.0 + std::exp(-v)); });
}

} // namespace

std::vector<int> MlpModel::layer_dims() const {
    std::vector<int> dims{input_dim()};
    for (const auto& w : weights) dims.push_back(static_cast<int>(w.rows()));
    return dims;
}

Eigen::MatrixXd MlpModel::forward_batch(const Eigen::MatrixXd& x) const {
    if (x.rows() != input_dim()) throw std::invalid_argument("input dimension mismatch");
    Eigen::MatrixXd a = x;
    for (std::size_t l = 0; l < weights.size(); ++l) {
        Eigen::MatrixXd z = (weights[l] * a).colwise() + biases[l];
        if (l + 1 < weights.size())
            a = z.cwiseProduct(sigmoid(z));  // swish
        else
            a = std::move(z);
    }
    return a;
}

Eigen::VectorXd MlpModel::forward(const Eigen::VectorXd& x) const {
    return forward_batch(x);
}

MlpModel make_mlp(const std::vector<int>& dims, std::uint64_t seed) {
    if (dims.size() < 2) throw std::invalid_argument("need at least input and output dims");
    MlpModel m;
    Rng rng(seed, 0xb0d1e5);
    for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
        int in = dims[l], out = dims[l + 1];
        if (in < 1 || out < 1) throw std::invalid_argument("layer dims must be positive");
        double bound = std::sqrt(6.0 / (in + out));  // Glorot uniform
        Eigen::MatrixXd w(out, in);
        for (int i = 0; i < out; ++i)
            for (int j = 0; j < in; ++j) w(i, j) = rng.uniform(-bound, bound);
        m.weights.push_back(std::move(w));
        m.biases.push_back(Eigen::VectorXd::Zero(out));
    }
    return m;
}

ScalingSpec ScalingSpec::fit(const Eigen::MatrixXd& targets) {
    ScalingSpec s;
    s.beta_min = targets.rowwise().minCoeff();
    s.beta_max = targets.rowwise().maxCoeff();
    s.omega.resize(targets.rows());
    for (Eigen::Index j = 0; j < targets.rows(); ++j) {
        double d = s.beta_max[j] - s.beta_min[j];
        s.omega[j] = d > 0 ? d * d : 1.0;  // degenerate outputs keep the identity with raw differences
    }
    return s;
}

double loss(const Eigen::VectorXd& beta_hat, const Eigen::VectorXd& beta, const ScalingSpec& scaling) {
    if (beta_hat.size() != beta.size() || beta.size() != scaling.omega.size())
        throw std::invalid_argument("loss dimension mismatch");
    double acc = 0;
    for (Eigen::Index j = 0; j < beta.size(); ++j) {
        double d = scaling.beta_max[j] - scaling.beta_min[j];
        double scaled_diff = d > 0 ? (beta_hat[j] - beta[j]) / d : (beta_hat[j] - beta[j]);
        acc += scaling.omega[j] * scaled_diff * scaled_diff;
    }
    return acc / double(beta.size());
}

double dataset_loss(const MlpModel& model, const Eigen::MatrixXd& x, const Eigen::MatrixXd& y,
                    const ScalingSpec& scaling) {
    Eigen::MatrixXd yhat = model.forward_batch(x);
    double acc = 0;
    for (Eigen::Index i = 0; i < y.cols(); ++i) acc += loss(yhat.col(i), y.col(i), scaling);
    return acc / double(y.cols());
}

void TrainConfig::validate() const {
    if (epochs < 1 || batch_size < 1) throw std::invalid_argument("epochs and batch size must be positive");
    if (!(retention > 0 && retention <= 1)) throw std::invalid_argument("retention must lie in (0, 1]");
    if (!(lr_start >= lr_end && lr_end > 0)) throw std::invalid_argument("need lr_start >= lr_end > 0");
    if (l2 < 0) throw std::invalid_argument("l2 coefficient must be nonnegative");
}

namespace {

struct Gradients {
    std::vector<Eigen::MatrixXd> w;
    std::vector<Eigen::VectorXd> b;
};

double parameter_norm_sq(const MlpModel& m) {
    double acc = 0;
    for (const auto& w : m.weights) acc += w.squaredNorm();
    for (const auto& b : m.biases) acc += b.squaredNorm();
    return acc;
}

// forward/backward over one mini-batch; dropout masks empty in prediction
// mode. Returns the regularised batch loss. The data-loss gradient uses the
// identity omega_j * (scaled diff)^2 = (raw diff)^2, valid for degenerate
// outputs as well by the ScalingSpec convention.
double batch_gradient(const MlpModel& m, const Eigen::MatrixXd& xb, const Eigen::MatrixXd& yb,
                      const ScalingSpec& scaling, double l2, const std::vector<Eigen::MatrixXd>* masks,
                      Gradients& out) {
    const std::size_t layers = m.weights.size();
    const Eigen::Index batch = xb.cols();
    const double n_out = double(m.output_dim());

    std::vector<Eigen::MatrixXd> a(layers + 1), z(layers);
    a[0] = xb;
    for (std::size_t l = 0; l < layers; ++l) {
        z[l] = (m.weights[l] * a[l]).colwise() + m.biases[l];
        if (l + 1 < layers) {
            a[l + 1] = z[l].cwiseProduct(sigmoid(z[l]));
            if (masks) a[l + 1] = a[l + 1].cwiseProduct((*masks)[l]);
        } else {
            a[l + 1] = z[l];
        }
    }

    double data_loss = 0;
    for (Eigen::Index i = 0; i < batch; ++i) data_loss += loss(a[layers].col(i), yb.col(i), scaling);
    data_loss /= double(batch);

    Eigen::MatrixXd delta = (2.0 / n_out / double(batch)) * (a[layers] - yb);
    out.w.resize(layers);
    out.b.resize(layers);
    for (std::size_t l = layers; l-- > 0;) {
        out.w[l] = delta * a[l].transpose() + 2.0 * l2 * m.weights[l];
        out.b[l] = delta.rowwise().sum() + 2.0 * l2 * m.biases[l];
        if (l > 0) {
            Eigen::MatrixXd da = m.weights[l].transpose() * delta;
            if (masks) da = da.cwiseProduct((*masks)[l - 1]);
            Eigen::MatrixXd s = sigmoid(z[l - 1]);
            // swish'(z) = s (1 + z (1 - s))
            delta = da.cwiseProduct(s.cwiseProduct(Eigen::MatrixXd::Ones(s.rows(), s.cols()) +
                                                   z[l - 1].cwiseProduct(Eigen::MatrixXd::Ones(s.rows(), s.cols()) - s)));
        }
    }
    return data_loss + l2 * parameter_norm_sq(m);
}

} // namespace

TrainResult train(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y,
                  const Eigen::MatrixXd& x_val, const Eigen::MatrixXd& y_val,
                  const TrainConfig& cfg) {
    cfg.validate();
    if (x.cols() != y.cols() || x.cols() < 1) throw std::invalid_argument("empty or inconsistent training set");
    if (x_val.cols() != y_val.cols() || x_val.cols() < 1) throw std::invalid_argument("empty or inconsistent validation set");

    std::vector<int> dims{static_cast<int>(x.rows())};
    dims.insert(dims.end(), cfg.hidden.begin(), cfg.hidden.end());
    dims.push_back(static_cast<int>(y.rows()));

    TrainResult res;
    res.scaling = ScalingSpec::fit(y);
    res.model = make_mlp(dims, cfg.seed);

    MlpModel& m = res.model;
    const std::size_t layers = m.weights.size();
    std::vector<Eigen::MatrixXd> mw(layers), vw(layers);
    std::vector<Eigen::VectorXd> mb(layers), vb(layers);
    for (std::size_t l = 0; l < layers; ++l) {
        mw[l] = Eigen::MatrixXd::Zero(m.weights[l].rows(), m.weights[l].cols());
        vw[l] = mw[l];
        mb[l] = Eigen::VectorXd::Zero(m.biases[l].size());
        vb[l] = mb[l];
    }

    Rng shuffle_rng(cfg.seed, 17);
    Rng dropout_rng(cfg.seed, 23);
    const int n_train = static_cast<int>(x.cols());
    std::vector<int> order(static_cast<std::size_t>(n_train));
    for (int i = 0; i < n_train; ++i) order[static_cast<std::size_t>(i)] = i;

    MlpModel best = m;
    double best_val = std::numeric_limits<double>::infinity();
    long step = 0;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        double frac = cfg.lr_end_epoch > 0 ? std::min(1.0, double(epoch) / double(cfg.lr_end_epoch)) : 1.0;
        double lr = cfg.lr_start + frac * (cfg.lr_end - cfg.lr_start);

        shuffle_rng.shuffle(order);
        double epoch_loss = 0;
        int n_batches = 0;
        for (int start = 0; start < n_train; start += cfg.batch_size) {
            int bs = std::min(cfg.batch_size, n_train - start);
            Eigen::MatrixXd xb(x.rows(), bs), yb(y.rows(), bs);
            for (int i = 0; i < bs; ++i) {
                xb.col(i) = x.col(order[static_cast<std::size_t>(start + i)]);
                yb.col(i) = y.col(order[static_cast<std::size_t>(start + i)]);
            }

            std::vector<Eigen::MatrixXd> masks;
            const bool dropping = cfg.retention < 1.0;
            if (dropping) {
                masks.resize(layers - 1);
                for (std::size_t l = 0; l + 1 < layers; ++l) {
                    masks[l].resize(m.weights[l].rows(), bs);
                    for (Eigen::Index c = 0; c < bs; ++c)
                        for (Eigen::Index r = 0; r < masks[l].rows(); ++r)
                            masks[l](r, c) = dropout_rng.uniform() < cfg.retention ? 1.0 / cfg.retention : 0.0;
                }
            }

            Gradients g;
            double batch_loss = batch_gradient(m, xb, yb, res.scaling, cfg.l2,
                                               dropping ? &masks : nullptr, g);
            if (!std::isfinite(batch_loss))
                throw std::runtime_error("training diverged at epoch " + std::to_string(epoch) +
                                         "; last finite epoch " + std::to_string(epoch - 1));
            epoch_loss += batch_loss;
            ++n_batches;

            ++step;
            double c1 = 1.0 - std::pow(cfg.adam_beta1, double(step));
            double c2 = 1.0 - std::pow(cfg.adam_beta2, double(step));
            for (std::size_t l = 0; l < layers; ++l) {
                mw[l] = cfg.adam_beta1 * mw[l] + (1 - cfg.adam_beta1) * g.w[l];
                vw[l] = cfg.adam_beta2 * vw[l] + (1 - cfg.adam_beta2) * g.w[l].cwiseProduct(g.w[l]);
                mb[l] = cfg.adam_beta1 * mb[l] + (1 - cfg.adam_beta1) * g.b[l];
                vb[l] = cfg.adam_beta2 * vb[l] + (1 - cfg.adam_beta2) * g.b[l].cwiseProduct(g.b[l]);
                m.weights[l] -= lr * (mw[l] / c1).cwiseQuotient(((vw[l] / c2).cwiseSqrt().array() + cfg.adam_eps).matrix());
                m.biases[l] -= lr * (mb[l] / c1).cwiseQuotient(((vb[l] / c2).cwiseSqrt().array() + cfg.adam_eps).matrix());
            }
        }

        res.history.train_loss.push_back(epoch_loss / n_batches);
        double val = dataset_loss(m, x_val, y_val, res.scaling);
        res.history.val_loss.push_back(val);
        if (val < best_val) {
            best_val = val;
            best = m;
            res.history.best_epoch = epoch;
        }
    }

    if (cfg.early_stop_on_validation) res.model = std::move(best);
    return res;
}

double grad_check(const MlpModel& model, const Eigen::VectorXd& x, const Eigen::VectorXd& beta,
                  const ScalingSpec& scaling, double l2) {
    Gradients analytic;
    MlpModel m = model;
    batch_gradient(m, x, beta, scaling, l2, nullptr, analytic);

    auto objective = [&](const MlpModel& mm) {
        return loss(mm.forward(x), beta, scaling) + l2 * parameter_norm_sq(mm);
    };

    const double h = 1e-5;
    double worst = 0;
    auto probe = [&](double& param, double analytic_grad) {
        double saved = param;
        param = saved + h;
        double fp = objective(m);
        param = saved - h;
        double fm = objective(m);
        param = saved;
        double numeric = (fp - fm) / (2 * h);
        double denom = std::max({std::abs(numeric), std::abs(analytic_grad), 1e-8});
        worst = std::max(worst, std::abs(numeric - analytic_grad) / denom);
    };
    for (std::size_t l = 0; l < m.weights.size(); ++l) {
        for (Eigen::Index i = 0; i < m.weights[l].rows(); ++i)
            for (Eigen::Index j = 0; j < m.weights[l].cols(); ++j)
                probe(m.weights[l](i, j), analytic.w[l](i, j));
        for (Eigen::Index i = 0; i < m.biases[l].size(); ++i)
            probe(m.biases[l][i], analytic.b[l][i]);
    }
    return worst;
}

void save_model(const std::filesystem::path& dir, const MlpModel& model, const ScalingSpec& scaling,
                const TrainConfig& cfg, const std::string& basis_hash) {
    std::filesystem::create_directories(dir);
    auto vec = [](const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); };
    io::json j{{"layer_dims", model.layer_dims()},
               {"activation", "swish"},
               {"scaling", {{"beta_min", vec(scaling.beta_min)},
                            {"beta_max", vec(scaling.beta_max)},
                            {"omega", vec(scaling.omega)}}},
               {"train_config", {{"epochs", cfg.epochs},
                                 {"batch_size", cfg.batch_size},
                                 {"lr_start", cfg.lr_start},
                                 {"lr_end", cfg.lr_end},
                                 {"lr_end_epoch", cfg.lr_end_epoch},
                                 {"retention", cfg.retention},
                                 {"l2", cfg.l2},
                                 {"seed", cfg.seed},
                                 {"early_stop", cfg.early_stop_on_validation},
                                 {"adam", {cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps}}}},
               {"basis_hash", basis_hash},
               {"layout", "per layer: weight row-major, then bias"}};
    io::write_json(dir / "manifest.json", j);

    std::vector<double> blob;
    for (std::size_t l = 0; l < model.weights.size(); ++l) {
        const auto& w = model.weights[l];
        for (Eigen::Index i = 0; i < w.rows(); ++i)
            for (Eigen::Index jj = 0; jj < w.cols(); ++jj) blob.push_back(w(i, jj));
        for (Eigen::Index i = 0; i < model.biases[l].size(); ++i) blob.push_back(model.biases[l][i]);
    }
    io::write_f64(dir / "weights.bin", blob.data(), blob.size());
}

LoadedModel load_model(const std::filesystem::path& dir) {
    auto j = io::read_json(dir / "manifest.json");
    auto dims = j.at("layer_dims").get<std::vector<int>>();
    LoadedModel lm;
    lm.basis_hash = j.at("basis_hash").get<std::string>();
    auto getv = [&](const char* k) {
        auto v = j.at("scaling").at(k).get<std::vector<double>>();
        return Eigen::Map<Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size())).eval();
    };
    lm.scaling.beta_min = getv("beta_min");
    lm.scaling.beta_max = getv("beta_max");
    lm.scaling.omega = getv("omega");

    std::size_t expect = 0;
    for (std::size_t l = 0; l + 1 < dims.size(); ++l)
        expect += static_cast<std::size_t>(dims[l + 1]) * static_cast<std::size_t>(dims[l]) + static_cast<std::size_t>(dims[l + 1]);
    auto blob = io::read_f64_exact(dir / "weights.bin", expect);

    std::size_t at = 0;
    for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
        Eigen::MatrixXd w(dims[l + 1], dims[l]);
        for (Eigen::Index i = 0; i < w.rows(); ++i)
            for (Eigen::Index jj = 0; jj < w.cols(); ++jj) w(i, jj) = blob[at++];
        Eigen::VectorXd b(dims[l + 1]);
        for (Eigen::Index i = 0; i < b.size(); ++i) b[i] = blob[at++];
        lm.model.weights.push_back(std::move(w));
        lm.model.biases.push_back(std::move(b));
    }
    return lm;
}

} // namespace deepbnd::mlp
