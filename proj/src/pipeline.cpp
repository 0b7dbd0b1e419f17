#include "tdskit/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <numeric>
#include <sstream>

#include "tdskit/jsonio.hpp"
#include "tdskit/threading.hpp"

namespace tds {
namespace {

constexpr const char* kBundleFormat = "tds-bundle-1";

Eigen::MatrixXd log_features(const Dataset& ds, double floor) {
    const Eigen::Index n = static_cast<Eigen::Index>(ds.points.size());
    const Eigen::Index m = n ? ds.points.front().spectrum.fluxes.size() : 0;
    Eigen::MatrixXd rows(n, m);
    for (Eigen::Index i = 0; i < n; ++i) {
        rows.row(i) = log_floor(ds.points[static_cast<std::size_t>(i)].spectrum.fluxes, floor)
                          .transpose();
    }
    return rows;
}

/// Timestamps are wall-clock by default; honouring SOURCE_DATE_EPOCH keeps
/// artifacts byte-reproducible when reruns must match exactly.
std::int64_t creation_timestamp() {
    if (const char* env = std::getenv("SOURCE_DATE_EPOCH")) {
        return std::atoll(env);
    }
    return static_cast<std::int64_t>(std::time(nullptr));
}

void check_suite(const std::vector<Dataset>& suite) {
    if (suite.empty()) throw std::invalid_argument("train_bundle: empty suite");
    const ojson proto{{"material", material_to_json(suite.front().material)},
                      {"test", test_to_json(suite.front().test)},
                      {"numerical", numerical_to_json(suite.front().numerical)},
                      {"variant", to_string(suite.front().variant)}};
    for (std::size_t k = 0; k < suite.size(); ++k) {
        if (suite[k].trap_count != static_cast<int>(k) + 1) {
            throw std::invalid_argument("train_bundle: suite must hold trap counts 1..K in order");
        }
        if (suite[k].points.size() < 5) {
            throw std::invalid_argument("train_bundle: dataset " + std::to_string(k + 1) +
                                        " has too few points");
        }
        const ojson other{{"material", material_to_json(suite[k].material)},
                          {"test", test_to_json(suite[k].test)},
                          {"numerical", numerical_to_json(suite[k].numerical)},
                          {"variant", to_string(suite[k].variant)}};
        if (other != proto) {
            throw std::invalid_argument(
                "train_bundle: dataset " + std::to_string(k + 1) +
                " was generated under a different protocol than dataset 1");
        }
    }
}

}  // namespace

ModelBundle train_bundle(const std::vector<Dataset>& suite, const TrainOptions& opts) {
    check_suite(suite);
    const int K = static_cast<int>(suite.size());
    const double floor = 1e-10;

    ModelBundle bundle;
    bundle.max_traps = K;
    bundle.temperature_grid = suite.front().points.front().spectrum.temperatures;

    // Per-dataset log features and deterministic train/validation splits.
    std::vector<Eigen::MatrixXd> feats(suite.size());
    std::vector<std::vector<int>> train_idx(suite.size()), val_idx(suite.size());
    Eigen::Index total_train = 0, total_val = 0;
    for (int k = 0; k < K; ++k) {
        feats[k] = log_features(suite[k], floor);
        auto [tr, va] = split_indices(static_cast<int>(suite[k].points.size()),
                                      opts.validation_fraction,
                                      rng::substream_key(opts.seed, 0x73756974ULL, k));
        train_idx[k] = std::move(tr);
        val_idx[k] = std::move(va);
        total_train += static_cast<Eigen::Index>(train_idx[k].size());
        total_val += static_cast<Eigen::Index>(val_idx[k].size());
    }

    // Input transform fitted on the combined training split only.
    const Eigen::Index n_feat = feats.front().cols();
    Eigen::MatrixXd combined_train(total_train, n_feat);
    Eigen::Index row = 0;
    for (int k = 0; k < K; ++k) {
        for (int i : train_idx[k]) combined_train.row(row++) = feats[k].row(i);
    }
    bundle.input_transform = fit_standardizer(combined_train, floor);

    // Classifier data: standardized features, noise on the training rows only.
    Eigen::MatrixXd cls_train_x =
        add_noise(apply_transform(bundle.input_transform, combined_train),
                  NoiseConfig{opts.noise.sigma, rng::substream_key(opts.noise.seed,
                                                                   0x636c73ULL, 0)});
    Eigen::MatrixXd cls_train_y = Eigen::MatrixXd::Zero(K, total_train);
    Eigen::MatrixXd cls_val_x(total_val, n_feat);
    Eigen::MatrixXd cls_val_y = Eigen::MatrixXd::Zero(K, total_val);
    row = 0;
    Eigen::Index vrow = 0;
    for (int k = 0; k < K; ++k) {
        for (std::size_t i = 0; i < train_idx[k].size(); ++i) cls_train_y(k, row++) = 1.0;
        for (int i : val_idx[k]) {
            cls_val_x.row(vrow) = feats[k].row(i);
            cls_val_y(k, vrow) = 1.0;
            ++vrow;
        }
    }
    cls_val_x = apply_transform(bundle.input_transform, cls_val_x);

    struct Job {
        std::function<void()> run;
    };
    std::vector<Job> jobs;

    jobs.push_back({[&, K] {
        Mlp net = make_classifier(static_cast<int>(n_feat), K);
        rng::Stream init(opts.seed, 0x696e6974ULL, 0);
        init_weights(net, init);
        TrainConfig cfg;
        cfg.batch_size = opts.batch_size;
        cfg.epochs = opts.classifier_epochs_per_output * K;
        cfg.seed = rng::substream_key(opts.seed, 0x747261696eULL, 0);
        cfg.loss = LossKind::CrossEntropy;
        cfg.lr = opts.lr;
        cfg.weight_decay = opts.weight_decay;
        const TrainHistory hist = train(net, cls_train_x.transpose(), cls_train_y,
                                        cls_val_x.transpose(), cls_val_y, cfg);
        bundle.classifier = std::move(net);
        bundle.metadata.classifier_val_loss = hist.val_loss.back();
    }});

    // One regressor per count, trained on its own dataset with scaled targets.
    std::vector<Mlp> reg_nets(static_cast<std::size_t>(K));
    std::vector<OutputScalers> reg_scalers(static_cast<std::size_t>(K));
    std::vector<double> reg_val_losses(static_cast<std::size_t>(K));
    for (int k = 1; k <= K; ++k) {
        jobs.push_back({[&, k] {
            const Dataset& ds = suite[static_cast<std::size_t>(k - 1)];
            const Eigen::MatrixXd& rows = feats[static_cast<std::size_t>(k - 1)];
            const auto& tr = train_idx[static_cast<std::size_t>(k - 1)];
            const auto& va = val_idx[static_cast<std::size_t>(k - 1)];

            std::vector<double> energies, densities;
            for (int i : tr) {
                for (const TrapSpec& trap : ds.points[static_cast<std::size_t>(i)].traps) {
                    energies.push_back(std::abs(trap.delta_H));
                    densities.push_back(trap.N_T);
                }
            }
            const OutputScalers scalers = fit_output_scalers(energies, densities);

            Eigen::MatrixXd xt_rows(static_cast<Eigen::Index>(tr.size()), rows.cols());
            Eigen::MatrixXd yt(2 * k, static_cast<Eigen::Index>(tr.size()));
            for (std::size_t i = 0; i < tr.size(); ++i) {
                xt_rows.row(static_cast<Eigen::Index>(i)) = rows.row(tr[i]);
                yt.col(static_cast<Eigen::Index>(i)) =
                    scale_targets(ds.points[static_cast<std::size_t>(tr[i])].traps, scalers);
            }
            Eigen::MatrixXd xv_rows(static_cast<Eigen::Index>(va.size()), rows.cols());
            Eigen::MatrixXd yv(2 * k, static_cast<Eigen::Index>(va.size()));
            for (std::size_t i = 0; i < va.size(); ++i) {
                xv_rows.row(static_cast<Eigen::Index>(i)) = rows.row(va[i]);
                yv.col(static_cast<Eigen::Index>(i)) =
                    scale_targets(ds.points[static_cast<std::size_t>(va[i])].traps, scalers);
            }
            const Eigen::MatrixXd xt_std =
                add_noise(apply_transform(bundle.input_transform, xt_rows),
                          NoiseConfig{opts.noise.sigma,
                                      rng::substream_key(opts.noise.seed, 0x726567ULL,
                                                         static_cast<std::uint64_t>(k))})
                    .transpose();
            const Eigen::MatrixXd xv_std =
                apply_transform(bundle.input_transform, xv_rows).transpose();

            Mlp net = make_regressor(static_cast<int>(rows.cols()), 2 * k);
            rng::Stream init(opts.seed, 0x696e6974ULL, static_cast<std::uint64_t>(k));
            init_weights(net, init);
            TrainConfig cfg;
            cfg.batch_size = opts.batch_size;
            cfg.epochs = opts.regressor_epochs_per_output * 2 * k;
            cfg.seed = rng::substream_key(opts.seed, 0x747261696eULL,
                                          static_cast<std::uint64_t>(k));
            cfg.loss = LossKind::MeanSquaredError;
            cfg.lr = opts.lr;
            cfg.weight_decay = opts.weight_decay;
            const TrainHistory hist = train(net, xt_std, yt, xv_std, yv, cfg);
            reg_nets[static_cast<std::size_t>(k - 1)] = std::move(net);
            reg_scalers[static_cast<std::size_t>(k - 1)] = scalers;
            reg_val_losses[static_cast<std::size_t>(k - 1)] = hist.val_loss.back();
        }});
    }

    parallel_for(static_cast<long>(jobs.size()), opts.threads,
                 [&](long i) { jobs[static_cast<std::size_t>(i)].run(); });

    for (int k = 1; k <= K; ++k) {
        bundle.regressors[k] = std::move(reg_nets[static_cast<std::size_t>(k - 1)]);
        bundle.output_scalers[k] = reg_scalers[static_cast<std::size_t>(k - 1)];
        bundle.metadata.regressor_val_loss[k] = reg_val_losses[static_cast<std::size_t>(k - 1)];
    }

    BundleMetadata& meta = bundle.metadata;
    meta.generation = suite.front().generation;
    meta.material = suite.front().material;
    meta.test = suite.front().test;
    meta.numerical = suite.front().numerical;
    meta.variant = suite.front().variant;
    meta.noise = opts.noise;
    meta.train_seed = opts.seed;
    for (const Dataset& ds : suite) {
        meta.dataset_seeds.push_back(ds.generation.seed);
        meta.points_per_count[ds.trap_count] = static_cast<long>(ds.points.size());
    }
    const ojson hash_src{{"generation", generation_to_json(meta.generation)},
                         {"material", material_to_json(meta.material)},
                         {"test", test_to_json(meta.test)},
                         {"numerical", numerical_to_json(meta.numerical)},
                         {"variant", to_string(meta.variant)},
                         {"noise_sigma", meta.noise.sigma},
                         {"noise_seed", meta.noise.seed},
                         {"train_seed", meta.train_seed}};
    meta.config_hash = fnv1a_hex(hash_src.dump());
    meta.created_unix_s = creation_timestamp();
    return bundle;
}

TrapPrediction infer(const Spectrum& spectrum, const ModelBundle& bundle) {
    const Eigen::VectorXd& grid = bundle.temperature_grid;
    if (spectrum.temperatures.size() != grid.size() ||
        (spectrum.temperatures - grid).cwiseAbs().maxCoeff() >
            1e-6 * std::max(1.0, grid.cwiseAbs().maxCoeff())) {
        std::ostringstream oss;
        oss << "infer: spectrum temperatures [" << spectrum.temperatures.minCoeff() << ", "
            << spectrum.temperatures.maxCoeff() << "] K over " << spectrum.temperatures.size()
            << " points do not match the bundle grid [" << grid.minCoeff() << ", "
            << grid.maxCoeff() << "] K over " << grid.size()
            << " points; resample onto the bundle grid first";
        throw std::invalid_argument(oss.str());
    }

    TrapPrediction out;
    const Eigen::VectorXd x = featurize(bundle.input_transform, spectrum.fluxes);
    out.probabilities = forward(bundle.classifier, x);

    // argmax with ties broken toward the smaller count
    int best = 0;
    for (int k = 1; k < out.probabilities.size(); ++k) {
        if (out.probabilities(k) > out.probabilities(best)) best = k;
    }
    out.n_traps = best + 1;
    out.low_confidence = out.probabilities(best) < 0.5;

    const Mlp& reg = bundle.regressors.at(out.n_traps);
    const OutputScalers& scalers = bundle.output_scalers.at(out.n_traps);
    const UnscaledTargets targets = unscale_targets(forward(reg, x), scalers);
    out.extrapolated = targets.extrapolated;

    std::vector<int> order(targets.abs_energies.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        return targets.abs_energies[static_cast<std::size_t>(a)] <
               targets.abs_energies[static_cast<std::size_t>(b)];
    });
    for (int i : order) {
        out.delta_H.push_back(-targets.abs_energies[static_cast<std::size_t>(i)]);
        out.N_T.push_back(targets.densities[static_cast<std::size_t>(i)]);
    }
    return out;
}

ResampleResult resample_spectrum(std::vector<std::pair<double, double>> raw,
                                 const Eigen::VectorXd& grid, double floor) {
    if (raw.size() < 2) {
        throw std::invalid_argument("resample_spectrum: need at least two raw points");
    }
    std::sort(raw.begin(), raw.end());
    // merge duplicate temperatures by averaging their fluxes
    std::vector<std::pair<double, double>> pts;
    pts.reserve(raw.size());
    for (std::size_t i = 0; i < raw.size();) {
        double sum = 0.0;
        std::size_t j = i;
        while (j < raw.size() && raw[j].first == raw[i].first) sum += raw[j++].second;
        pts.emplace_back(raw[i].first, sum / static_cast<double>(j - i));
        i = j;
    }
    if (pts.size() < 2) {
        throw std::invalid_argument("resample_spectrum: fewer than two distinct temperatures");
    }

    ResampleResult out;
    out.spectrum.temperatures = grid;
    out.spectrum.fluxes.resize(grid.size());
    out.spectrum.trap_contributions.resize(grid.size(), 0);
    std::size_t seg = 0;
    for (Eigen::Index i = 0; i < grid.size(); ++i) {
        const double T = grid(i);
        if (T < pts.front().first || T > pts.back().first) {
            out.spectrum.fluxes(i) = floor;
            out.coverage_warning = true;
            continue;
        }
        while (seg + 2 < pts.size() && pts[seg + 1].first < T) ++seg;
        const auto& [t0, j0] = pts[seg];
        const auto& [t1, j1] = pts[seg + 1];
        const double w = (T - t0) / (t1 - t0);
        out.spectrum.fluxes(i) = j0 + w * (j1 - j0);
    }
    return out;
}

namespace {

ojson mlp_to_json(const Mlp& mlp) {
    ojson j{{"widths", mlp.widths},
            {"head", mlp.head == OutputHead::Softmax ? "softmax" : "identity"},
            {"layers", ojson::array()}};
    for (std::size_t l = 0; l < mlp.W.size(); ++l) {
        ojson layer{{"rows", mlp.W[l].rows()}, {"cols", mlp.W[l].cols()}};
        ojson w = ojson::array();
        for (Eigen::Index r = 0; r < mlp.W[l].rows(); ++r) {
            for (Eigen::Index c = 0; c < mlp.W[l].cols(); ++c) w.push_back(mlp.W[l](r, c));
        }
        layer["weights"] = std::move(w);
        ojson b = ojson::array();
        for (Eigen::Index r = 0; r < mlp.b[l].size(); ++r) b.push_back(mlp.b[l](r));
        layer["bias"] = std::move(b);
        j["layers"].push_back(std::move(layer));
    }
    return j;
}

Mlp mlp_from_json(const ojson& j) {
    Mlp mlp = make_mlp(j.at("widths").get<std::vector<int>>(),
                       j.at("head").get<std::string>() == "softmax" ? OutputHead::Softmax
                                                                    : OutputHead::Identity);
    const auto& layers = j.at("layers");
    if (layers.size() != mlp.W.size()) throw IoError("bundle: layer count mismatch");
    for (std::size_t l = 0; l < mlp.W.size(); ++l) {
        const auto& layer = layers[l];
        const auto rows = layer.at("rows").get<Eigen::Index>();
        const auto cols = layer.at("cols").get<Eigen::Index>();
        if (rows != mlp.W[l].rows() || cols != mlp.W[l].cols()) {
            throw IoError("bundle: layer " + std::to_string(l) + " shape mismatch");
        }
        const auto& w = layer.at("weights");
        if (static_cast<Eigen::Index>(w.size()) != rows * cols) {
            throw IoError("bundle: layer " + std::to_string(l) + " weight count mismatch");
        }
        std::size_t idx = 0;
        for (Eigen::Index r = 0; r < rows; ++r) {
            for (Eigen::Index c = 0; c < cols; ++c) mlp.W[l](r, c) = w[idx++].get<double>();
        }
        const auto& b = layer.at("bias");
        if (static_cast<Eigen::Index>(b.size()) != mlp.b[l].size()) {
            throw IoError("bundle: layer " + std::to_string(l) + " bias count mismatch");
        }
        for (Eigen::Index r = 0; r < mlp.b[l].size(); ++r) mlp.b[l](r) = b[r].get<double>();
    }
    return mlp;
}

ojson metadata_to_json(const BundleMetadata& m) {
    ojson j{{"generation", generation_to_json(m.generation)},
            {"material", material_to_json(m.material)},
            {"test", test_to_json(m.test)},
            {"numerical", numerical_to_json(m.numerical)},
            {"variant", to_string(m.variant)},
            {"noise_sigma", m.noise.sigma},
            {"noise_seed", m.noise.seed},
            {"train_seed", m.train_seed},
            {"dataset_seeds", m.dataset_seeds},
            {"classifier_val_loss", m.classifier_val_loss},
            {"config_hash", m.config_hash},
            {"created_unix_s", m.created_unix_s}};
    ojson ppc = ojson::object();
    for (const auto& [k, n] : m.points_per_count) ppc[std::to_string(k)] = n;
    j["points_per_count"] = std::move(ppc);
    ojson rvl = ojson::object();
    for (const auto& [k, v] : m.regressor_val_loss) rvl[std::to_string(k)] = v;
    j["regressor_val_loss"] = std::move(rvl);
    return j;
}

BundleMetadata metadata_from_json(const ojson& j) {
    BundleMetadata m;
    m.generation = generation_from_json(j.at("generation"));
    m.material = material_from_json(j.at("material"));
    m.test = test_from_json(j.at("test"));
    m.numerical = numerical_from_json(j.at("numerical"));
    m.variant = variant_from_string(j.at("variant").get<std::string>());
    m.noise.sigma = j.at("noise_sigma").get<double>();
    m.noise.seed = j.at("noise_seed").get<std::uint64_t>();
    m.train_seed = j.at("train_seed").get<std::uint64_t>();
    m.dataset_seeds = j.at("dataset_seeds").get<std::vector<std::uint64_t>>();
    m.classifier_val_loss = j.at("classifier_val_loss").get<double>();
    m.config_hash = j.at("config_hash").get<std::string>();
    m.created_unix_s = j.at("created_unix_s").get<std::int64_t>();
    for (const auto& [k, n] : j.at("points_per_count").items()) {
        m.points_per_count[std::stoi(k)] = n.get<long>();
    }
    for (const auto& [k, v] : j.at("regressor_val_loss").items()) {
        m.regressor_val_loss[std::stoi(k)] = v.get<double>();
    }
    return m;
}

}  // namespace

void save_bundle(const ModelBundle& bundle, const std::string& path) {
    ojson j;
    j["format_version"] = kBundleFormat;
    j["metadata"] = metadata_to_json(bundle.metadata);
    j["max_traps"] = bundle.max_traps;
    ojson grid = ojson::array();
    for (Eigen::Index i = 0; i < bundle.temperature_grid.size(); ++i) {
        grid.push_back(bundle.temperature_grid(i));
    }
    j["temperature_grid_K"] = std::move(grid);
    j["input_transform"] = transform_to_json(bundle.input_transform);
    j["classifier"] = mlp_to_json(bundle.classifier);
    ojson regs = ojson::object();
    for (const auto& [k, net] : bundle.regressors) regs[std::to_string(k)] = mlp_to_json(net);
    j["regressors"] = std::move(regs);
    ojson scalers = ojson::object();
    for (const auto& [k, s] : bundle.output_scalers) scalers[std::to_string(k)] = scalers_to_json(s);
    j["output_scalers"] = std::move(scalers);

    std::ofstream out(path);
    if (!out) throw IoError("cannot open for writing: " + path);
    out << j.dump() << "\n";
    if (!out) throw IoError("write failed: " + path);
}

ModelBundle load_bundle(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open for reading: " + path);
    ojson j;
    try {
        j = ojson::parse(in);
    } catch (const nlohmann::json::parse_error& err) {
        throw IoError(path + ": " + err.what());
    }
    try {
        const std::string version = j.at("format_version").get<std::string>();
        if (version != kBundleFormat) {
            throw IoError(path + ": format version mismatch: file has '" + version +
                          "', reader expects '" + kBundleFormat + "'");
        }
        ModelBundle bundle;
        bundle.metadata = metadata_from_json(j.at("metadata"));
        bundle.max_traps = j.at("max_traps").get<int>();
        const auto& grid = j.at("temperature_grid_K");
        bundle.temperature_grid.resize(static_cast<Eigen::Index>(grid.size()));
        for (std::size_t i = 0; i < grid.size(); ++i) {
            bundle.temperature_grid(static_cast<Eigen::Index>(i)) = grid[i].get<double>();
        }
        bundle.input_transform = transform_from_json(j.at("input_transform"));
        bundle.classifier = mlp_from_json(j.at("classifier"));
        for (const auto& [k, net] : j.at("regressors").items()) {
            bundle.regressors[std::stoi(k)] = mlp_from_json(net);
        }
        for (const auto& [k, s] : j.at("output_scalers").items()) {
            bundle.output_scalers[std::stoi(k)] = scalers_from_json(s);
        }
        if (bundle.classifier.n_outputs() != bundle.max_traps) {
            throw IoError(path + ": classifier width does not match max_traps");
        }
        for (const auto& [k, net] : bundle.regressors) {
            if (net.n_outputs() != 2 * k) {
                throw IoError(path + ": regressor " + std::to_string(k) + " has wrong arity");
            }
            if (!bundle.output_scalers.count(k)) {
                throw IoError(path + ": regressor " + std::to_string(k) + " lacks output scalers");
            }
        }
        return bundle;
    } catch (const nlohmann::json::exception& err) {
        throw IoError(path + ": malformed bundle: " + err.what());
    }
}

}  // namespace tds
