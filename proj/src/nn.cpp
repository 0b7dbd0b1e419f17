#include "tdskit/nn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace tds {
namespace {

constexpr double kProbClip = 1e-12;

Eigen::MatrixXd softmax_columns(Eigen::MatrixXd z) {
    for (Eigen::Index c = 0; c < z.cols(); ++c) {
        z.col(c).array() -= z.col(c).maxCoeff();
        z.col(c) = z.col(c).array().exp();
        z.col(c) /= z.col(c).sum();
    }
    return z;
}

void check_widths(const std::vector<int>& widths) {
    if (widths.size() < 2) throw std::invalid_argument("Mlp: need at least input and output widths");
    for (int w : widths) {
        if (w < 1) throw std::invalid_argument("Mlp: layer widths must be positive");
    }
}

}  // namespace

long Mlp::n_parameters() const {
    long n = 0;
    for (std::size_t l = 0; l < W.size(); ++l) n += W[l].size() + b[l].size();
    return n;
}

Mlp make_mlp(std::vector<int> widths, OutputHead head) {
    check_widths(widths);
    Mlp mlp;
    mlp.widths = std::move(widths);
    mlp.head = head;
    for (std::size_t l = 0; l + 1 < mlp.widths.size(); ++l) {
        mlp.W.emplace_back(Eigen::MatrixXd::Zero(mlp.widths[l + 1], mlp.widths[l]));
        mlp.b.emplace_back(Eigen::VectorXd::Zero(mlp.widths[l + 1]));
    }
    return mlp;
}

Mlp make_regressor(int n_inputs, int n_outputs) {
    if (n_outputs < 1) throw std::invalid_argument("make_regressor: n_outputs must be positive");
    std::vector<int> widths{n_inputs};
    for (int base : {64, 64, 32, 16, 8}) widths.push_back(base * n_outputs);
    widths.push_back(n_outputs);
    return make_mlp(std::move(widths), OutputHead::Identity);
}

Mlp make_classifier(int n_inputs, int n_classes) {
    if (n_classes < 1) throw std::invalid_argument("make_classifier: n_classes must be positive");
    std::vector<int> widths{n_inputs, 256, 128, 64, 32, n_classes};
    return make_mlp(std::move(widths), OutputHead::Softmax);
}

void init_weights(Mlp& mlp, rng::Stream& stream) {
    for (std::size_t l = 0; l < mlp.W.size(); ++l) {
        const double limit = std::sqrt(6.0 / mlp.W[l].cols());
        for (Eigen::Index i = 0; i < mlp.W[l].rows(); ++i) {
            for (Eigen::Index j = 0; j < mlp.W[l].cols(); ++j) {
                mlp.W[l](i, j) = stream.uniform(-limit, limit);
            }
        }
        mlp.b[l].setZero();
    }
}

Eigen::MatrixXd forward_batch(const Mlp& mlp, const Eigen::MatrixXd& X) {
    if (X.rows() != mlp.n_inputs()) throw std::invalid_argument("forward: input size mismatch");
    Eigen::MatrixXd a = X;
    for (std::size_t l = 0; l < mlp.W.size(); ++l) {
        Eigen::MatrixXd z = (mlp.W[l] * a).colwise() + mlp.b[l];
        if (l + 1 < mlp.W.size()) {
            a = z.cwiseMax(0.0);
        } else {
            a = mlp.head == OutputHead::Softmax ? softmax_columns(std::move(z)) : std::move(z);
        }
    }
    return a;
}

Eigen::VectorXd forward(const Mlp& mlp, const Eigen::VectorXd& x) {
    return forward_batch(mlp, x);
}

double loss_mse(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& target) {
    if (pred.rows() != target.rows() || pred.cols() != target.cols()) {
        throw std::invalid_argument("loss_mse: shape mismatch");
    }
    return (pred - target).array().square().mean();
}

double loss_cross_entropy(const Eigen::MatrixXd& probs, const std::vector<int>& labels) {
    if (static_cast<Eigen::Index>(labels.size()) != probs.cols()) {
        throw std::invalid_argument("loss_cross_entropy: label count mismatch");
    }
    double total = 0.0;
    for (Eigen::Index c = 0; c < probs.cols(); ++c) {
        const int k = labels[static_cast<std::size_t>(c)];
        if (k < 0 || k >= probs.rows()) throw std::invalid_argument("loss_cross_entropy: bad label");
        total -= std::log(std::max(probs(k, c), kProbClip));
    }
    return total / static_cast<double>(probs.cols());
}

Gradients backward(const Mlp& mlp, const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y,
                   LossKind loss) {
    const Eigen::Index batch = X.cols();
    if (Y.cols() != batch) throw std::invalid_argument("backward: batch size mismatch");
    if (Y.rows() != mlp.n_outputs()) throw std::invalid_argument("backward: target size mismatch");

    const std::size_t L = mlp.W.size();
    std::vector<Eigen::MatrixXd> acts(L + 1);  // acts[l] feeds layer l
    acts[0] = X;
    for (std::size_t l = 0; l < L; ++l) {
        Eigen::MatrixXd z = (mlp.W[l] * acts[l]).colwise() + mlp.b[l];
        if (l + 1 < L) {
            acts[l + 1] = z.cwiseMax(0.0);
        } else {
            acts[L] = mlp.head == OutputHead::Softmax ? softmax_columns(std::move(z))
                                                      : std::move(z);
        }
    }

    Gradients g;
    g.dW.resize(L);
    g.db.resize(L);

    Eigen::MatrixXd delta;  // dLoss/dz at the current layer
    if (loss == LossKind::CrossEntropy) {
        if (mlp.head != OutputHead::Softmax) {
            throw std::invalid_argument("backward: cross-entropy needs a softmax head");
        }
        std::vector<int> labels(static_cast<std::size_t>(batch));
        for (Eigen::Index c = 0; c < batch; ++c) {
            Eigen::Index k;
            Y.col(c).maxCoeff(&k);
            labels[static_cast<std::size_t>(c)] = static_cast<int>(k);
        }
        g.loss = loss_cross_entropy(acts[L], labels);
        // softmax + NLL collapses to (p - y) / batch
        delta = (acts[L] - Y) / static_cast<double>(batch);
    } else {
        if (mlp.head != OutputHead::Identity) {
            throw std::invalid_argument("backward: mean squared error needs an identity head");
        }
        g.loss = loss_mse(acts[L], Y);
        delta = 2.0 * (acts[L] - Y) / static_cast<double>(acts[L].size());
    }

    for (std::size_t l = L; l-- > 0;) {
        g.dW[l] = delta * acts[l].transpose();
        g.db[l] = delta.rowwise().sum();
        if (l > 0) {
            delta = (mlp.W[l].transpose() * delta).cwiseProduct(
                (acts[l].array() > 0.0).cast<double>().matrix());
        }
    }
    return g;
}

AdamaxState make_adamax_state(const Mlp& mlp, double lr, double weight_decay) {
    AdamaxState s;
    s.lr = lr;
    s.weight_decay = weight_decay;
    for (std::size_t l = 0; l < mlp.W.size(); ++l) {
        s.mW.emplace_back(Eigen::MatrixXd::Zero(mlp.W[l].rows(), mlp.W[l].cols()));
        s.uW.emplace_back(Eigen::MatrixXd::Zero(mlp.W[l].rows(), mlp.W[l].cols()));
        s.mb.emplace_back(Eigen::VectorXd::Zero(mlp.b[l].size()));
        s.ub.emplace_back(Eigen::VectorXd::Zero(mlp.b[l].size()));
    }
    return s;
}

void adamax_step(Mlp& mlp, const Gradients& g, AdamaxState& s) {
    ++s.step_count;
    const double bias_fix = 1.0 - std::pow(s.beta1, static_cast<double>(s.step_count));
    const double rate = s.lr / bias_fix;
    const double decay = 1.0 - s.lr * s.weight_decay;
    for (std::size_t l = 0; l < mlp.W.size(); ++l) {
        s.mW[l] = s.beta1 * s.mW[l] + (1.0 - s.beta1) * g.dW[l];
        s.uW[l] = (s.beta2 * s.uW[l]).cwiseMax(g.dW[l].cwiseAbs());
        mlp.W[l].array() -= rate * s.mW[l].array() / (s.uW[l].array() + s.epsilon);
        mlp.W[l] *= decay;

        s.mb[l] = s.beta1 * s.mb[l] + (1.0 - s.beta1) * g.db[l];
        s.ub[l] = (s.beta2 * s.ub[l]).cwiseMax(g.db[l].cwiseAbs());
        mlp.b[l].array() -= rate * s.mb[l].array() / (s.ub[l].array() + s.epsilon);
        mlp.b[l] *= decay;
    }
}

std::pair<std::vector<int>, std::vector<int>> split_indices(int n, double validation_fraction,
                                                            std::uint64_t seed) {
    if (n < 2) throw std::invalid_argument("split_indices: need at least 2 samples");
    if (!(validation_fraction > 0.0 && validation_fraction < 1.0)) {
        throw std::invalid_argument("split_indices: validation fraction must be in (0,1)");
    }
    std::vector<int> idx(static_cast<std::size_t>(n));
    std::iota(idx.begin(), idx.end(), 0);
    rng::Stream stream(seed, 0x73706c6974ULL, 0);  // "split"
    rng::shuffle(idx, stream);
    const int n_val = std::max(1, static_cast<int>(std::lround(validation_fraction * n)));
    const int n_train = n - n_val;
    std::vector<int> train(idx.begin(), idx.begin() + n_train);
    std::vector<int> val(idx.begin() + n_train, idx.end());
    return {std::move(train), std::move(val)};
}

TrainHistory train(Mlp& mlp, const Eigen::MatrixXd& X_train, const Eigen::MatrixXd& Y_train,
                   const Eigen::MatrixXd& X_val, const Eigen::MatrixXd& Y_val,
                   const TrainConfig& cfg) {
    if (cfg.batch_size < 1) throw std::invalid_argument("train: batch_size must be >= 1");
    const int n = static_cast<int>(X_train.cols());
    if (n == 0) throw std::invalid_argument("train: empty training set");

    AdamaxState opt = make_adamax_state(mlp, cfg.lr, cfg.weight_decay);
    rng::Stream shuffle_stream(cfg.seed, 0x65706f6368ULL, 0);  // "epoch"
    std::vector<int> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);

    auto val_labels = [&]() {
        std::vector<int> labels(static_cast<std::size_t>(X_val.cols()));
        for (Eigen::Index c = 0; c < X_val.cols(); ++c) {
            Eigen::Index k;
            Y_val.col(c).maxCoeff(&k);
            labels[static_cast<std::size_t>(c)] = static_cast<int>(k);
        }
        return labels;
    };

    TrainHistory history;
    history.train_loss.reserve(static_cast<std::size_t>(cfg.epochs));
    history.val_loss.reserve(static_cast<std::size_t>(cfg.epochs));

    Eigen::MatrixXd xb(X_train.rows(), cfg.batch_size);
    Eigen::MatrixXd yb(Y_train.rows(), cfg.batch_size);
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        rng::shuffle(order, shuffle_stream);
        double epoch_loss = 0.0;
        long seen = 0;
        int batch_index = 0;
        for (int start = 0; start < n; start += cfg.batch_size, ++batch_index) {
            const int count = std::min(cfg.batch_size, n - start);
            xb.resize(Eigen::NoChange, count);
            yb.resize(Eigen::NoChange, count);
            for (int i = 0; i < count; ++i) {
                xb.col(i) = X_train.col(order[static_cast<std::size_t>(start + i)]);
                yb.col(i) = Y_train.col(order[static_cast<std::size_t>(start + i)]);
            }
            Gradients g = backward(mlp, xb, yb, cfg.loss);
            if (!std::isfinite(g.loss)) {
                throw TrainingError("train: non-finite loss at epoch " + std::to_string(epoch) +
                                        ", batch " + std::to_string(batch_index),
                                    epoch, batch_index);
            }
            adamax_step(mlp, g, opt);
            epoch_loss += g.loss * count;
            seen += count;
        }
        history.train_loss.push_back(epoch_loss / static_cast<double>(seen));

        if (X_val.cols() > 0) {
            const Eigen::MatrixXd pv = forward_batch(mlp, X_val);
            history.val_loss.push_back(cfg.loss == LossKind::CrossEntropy
                                           ? loss_cross_entropy(pv, val_labels())
                                           : loss_mse(pv, Y_val));
        } else {
            history.val_loss.push_back(std::numeric_limits<double>::quiet_NaN());
        }
    }
    return history;
}

}  // namespace tds
