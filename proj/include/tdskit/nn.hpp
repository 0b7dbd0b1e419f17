#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <stdexcept>
#include <utility>
#include <vector>

#include "tdskit/rng.hpp"

namespace tds {

enum class OutputHead { Identity, Softmax };
enum class LossKind { MeanSquaredError, CrossEntropy };

/// Dense feed-forward network with rectified-linear hidden layers. Samples
/// travel as columns so batches map onto matrix products.
struct Mlp {
    std::vector<int> widths;         // input, hidden..., output
    std::vector<Eigen::MatrixXd> W;  // W[l]: widths[l+1] x widths[l]
    std::vector<Eigen::VectorXd> b;
    OutputHead head = OutputHead::Identity;

    int n_inputs() const { return widths.front(); }
    int n_outputs() const { return widths.back(); }
    std::size_t n_layers() const { return W.size(); }
    long n_parameters() const;
};

/// Regressor topology: hidden widths (64, 64, 32, 16, 8), each multiplied by
/// the output count; identity head.
Mlp make_regressor(int n_inputs, int n_outputs);

/// Classifier topology: fixed hidden widths (256, 128, 64, 32); softmax head.
Mlp make_classifier(int n_inputs, int n_classes);

/// Bare network with the given widths (used by tests and tooling).
Mlp make_mlp(std::vector<int> widths, OutputHead head);

/// He-uniform weights, zero biases.
void init_weights(Mlp& mlp, rng::Stream& stream);

Eigen::VectorXd forward(const Mlp& mlp, const Eigen::VectorXd& x);

/// Batched forward pass; X holds one sample per column.
Eigen::MatrixXd forward_batch(const Mlp& mlp, const Eigen::MatrixXd& X);

/// Mean squared residual over every output of every sample.
double loss_mse(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& target);

/// Mean negative log-likelihood of the true class; probabilities are clipped
/// at 1e-12 before the log.
double loss_cross_entropy(const Eigen::MatrixXd& probs, const std::vector<int>& labels);

struct Gradients {
    std::vector<Eigen::MatrixXd> dW;
    std::vector<Eigen::VectorXd> db;
    double loss = 0.0;
};

/// Exact batch-loss gradients by reverse accumulation. Y holds targets as
/// columns: raw values for MeanSquaredError, one-hot columns for CrossEntropy.
Gradients backward(const Mlp& mlp, const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y,
                   LossKind loss);

struct AdamaxState {
    double lr = 1e-3;
    double weight_decay = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-7;
    long step_count = 0;
    std::vector<Eigen::MatrixXd> mW, uW;  // first moment / infinity norm
    std::vector<Eigen::VectorXd> mb, ub;
};

AdamaxState make_adamax_state(const Mlp& mlp, double lr = 1e-3, double weight_decay = 1e-3);

/// m <- b1 m + (1-b1) g;  u <- max(b2 u, |g|);
/// p <- p - lr/(1-b1^t) * m / (u + eps);  then p <- p * (1 - lr * wd).
void adamax_step(Mlp& mlp, const Gradients& g, AdamaxState& state);

struct TrainConfig {
    int batch_size = 32;
    int epochs = 1;
    std::uint64_t seed = 0;
    LossKind loss = LossKind::MeanSquaredError;
    double lr = 1e-3;
    double weight_decay = 1e-3;
};

struct TrainHistory {
    std::vector<double> train_loss;  // per-epoch mean of batch losses
    std::vector<double> val_loss;    // per-epoch loss on the validation set
};

struct TrainingError : std::runtime_error {
    TrainingError(const std::string& msg, int epoch_, int batch_)
        : std::runtime_error(msg), epoch(epoch_), batch(batch_) {}
    int epoch;
    int batch;
};

/// Deterministic shuffled split of [0, n): the first (1 - fraction) indices
/// go to training, the rest to validation.
std::pair<std::vector<int>, std::vector<int>> split_indices(int n, double validation_fraction,
                                                            std::uint64_t seed);

/// Mini-batch loop with per-epoch shuffling, no early stopping. Inputs hold
/// one sample per column; the split happens before this call. Aborts with
/// TrainingError on a non-finite loss.
TrainHistory train(Mlp& mlp, const Eigen::MatrixXd& X_train, const Eigen::MatrixXd& Y_train,
                   const Eigen::MatrixXd& X_val, const Eigen::MatrixXd& Y_val,
                   const TrainConfig& cfg);

}  // namespace tds
