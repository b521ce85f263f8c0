#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace deepbnd::mlp {

// Fully connected net, Swish on hidden layers, linear output.
struct MlpModel {
    std::vector<Eigen::MatrixXd> weights;  // W[l]: out x in
    std::vector<Eigen::VectorXd> biases;

    int input_dim() const { return static_cast<int>(weights.front().cols()); }
    int output_dim() const { return static_cast<int>(weights.back().rows()); }
    std::vector<int> layer_dims() const;

    Eigen::VectorXd forward(const Eigen::VectorXd& x) const;
    Eigen::MatrixXd forward_batch(const Eigen::MatrixXd& x) const;  // column per sample
};

MlpModel make_mlp(const std::vector<int>& dims, std::uint64_t seed);

inline double swish(double z) { return z / (1.0 + std::exp(-z)); }

// Per-output min-max scaling fitted on training targets. The weights
// omega_j = (max_j - min_j)^2 cancel the scaling inside the loss, so
// n_out * loss equals the plain squared coefficient error.
struct ScalingSpec {
    Eigen::VectorXd beta_min, beta_max, omega;
    static ScalingSpec fit(const Eigen::MatrixXd& targets);  // n_out x N_s
};

double loss(const Eigen::VectorXd& beta_hat, const Eigen::VectorXd& beta, const ScalingSpec& scaling);

// prediction-mode mean loss over a dataset (no dropout, no penalty)
double dataset_loss(const MlpModel& model, const Eigen::MatrixXd& x, const Eigen::MatrixXd& y,
                    const ScalingSpec& scaling);

struct TrainConfig {
    std::vector<int> hidden = {64, 64};
    int epochs = 2000;
    int batch_size = 32;
    double lr_start = 5e-4;
    double lr_end = 5e-5;
    int lr_end_epoch = 2000;     // epoch at which the linear decay bottoms out
    double retention = 0.995;    // dropout keep probability on hidden layers
    double l2 = 1e-8;
    std::uint64_t seed = 1;
    bool early_stop_on_validation = true;  // return the best-validation snapshot
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-7;

    void validate() const;
};

struct TrainHistory {
    std::vector<double> train_loss;  // regularised, averaged over batches
    std::vector<double> val_loss;    // prediction mode
    int best_epoch = -1;
};

struct TrainResult {
    MlpModel model;
    ScalingSpec scaling;
    TrainHistory history;
};

// ADAM with mini-batches, inverted dropout, l2 penalty on all weights and
// biases, linearly decaying learning rate. Deterministic for a fixed seed.
// Throws on divergence, reporting the last finite epoch.
TrainResult train(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y,
                  const Eigen::MatrixXd& x_val, const Eigen::MatrixXd& y_val,
                  const TrainConfig& cfg);

// max relative error of backprop against central finite differences over all
// parameters of the model (dropout disabled, h = 1e-5)
double grad_check(const MlpModel& model, const Eigen::VectorXd& x, const Eigen::VectorXd& beta,
                  const ScalingSpec& scaling, double l2);

void save_model(const std::filesystem::path& dir, const MlpModel& model, const ScalingSpec& scaling,
                const TrainConfig& cfg, const std::string& basis_hash);

struct LoadedModel {
    MlpModel model;
    ScalingSpec scaling;
    std::string basis_hash;
};
LoadedModel load_model(const std::filesystem::path& dir);

} // namespace deepbnd::mlp
