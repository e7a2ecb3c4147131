#include "melodia/trainer.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <exception>
#include <fstream>
#include <optional>
#include <thread>
#include <utility>

#include <nlohmann/json.hpp>

#include "melodia/error.hpp"
#include "melodia/tensor_io.hpp"

namespace melodia {

namespace {

using FlatMap = Eigen::Map<Eigen::ArrayXd>;

FlatMap flat(const TensorView& v) {
    if (v.mat != nullptr) return FlatMap(v.mat->data(), v.mat->size());
    return FlatMap(v.vec->data(), v.vec->size());
}

// acc += scale * g, tensor by tensor.
void accumulate(ModelParams& acc, const ModelParams& g, double scale) {
    auto av = named_tensors(acc);
    auto gv = named_tensors(g);
    require(av.size() == gv.size(), Errc::shape_mismatch, "gradient layout mismatch");
    for (std::size_t i = 0; i < av.size(); ++i) flat(av[i]) += scale * flat(gv[i]);
}

void scale_params(ModelParams& p, double scale) {
    for (auto& v : named_tensors(p)) flat(v) *= scale;
}

double global_norm(const ModelParams& p) {
    double sq = 0.0;
    for (const auto& v : named_tensors(p)) sq += flat(v).matrix().squaredNorm();
    return std::sqrt(sq);
}

std::string trim(const std::string& s) {
    auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

int to_int(const std::string& key, const std::string& value) {
    try {
        std::size_t used = 0;
        int v = std::stoi(value, &used);
        require(used == value.size(), Errc::bad_config, "trailing characters");
        return v;
    } catch (const Error&) {
        throw;
    } catch (const std::exception&) {
        fail(Errc::bad_config, "config key '" + key + "': not an integer: '" + value + "'");
    }
}

double to_double(const std::string& key, const std::string& value) {
    try {
        std::size_t used = 0;
        double v = std::stod(value, &used);
        require(used == value.size(), Errc::bad_config, "trailing characters");
        return v;
    } catch (const Error&) {
        throw;
    } catch (const std::exception&) {
        fail(Errc::bad_config, "config key '" + key + "': not a number: '" + value + "'");
    }
}

std::uint64_t to_u64(const std::string& key, const std::string& value) {
    try {
        std::size_t used = 0;
        std::uint64_t v = std::stoull(value, &used);
        require(used == value.size(), Errc::bad_config, "trailing characters");
        return v;
    } catch (const Error&) {
        throw;
    } catch (const std::exception&) {
        fail(Errc::bad_config, "config key '" + key + "': not an unsigned integer: '" + value + "'");
    }
}

std::string format_double(double v) {
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    require(ec == std::errc(), Errc::io_error, "number formatting failed");
    return std::string(buf, ptr);
}

// Dropout mask stream for the n-th window visit of a run. Tying masks to the
// visit index (not the worker) keeps the math identical for any thread count.
constexpr std::uint64_t kMaskStreamBase = 0x5EED0000ull;

struct WindowGrad {
    ModelParams grads;
    double loss_sum = 0.0;
    std::exception_ptr error;
};

} // namespace

void TrainConfig::validate() const {
    require(epochs >= 0, Errc::bad_config, "epochs must be >= 0");
    require(batch_rows >= 1, Errc::bad_config, "batch_rows must be >= 1");
    require(batch_chunk >= 1, Errc::bad_config, "batch_chunk must be >= 1");
    require(window >= 1, Errc::bad_config, "window must be >= 1");
    require(hidden >= 1, Errc::bad_config, "hidden must be >= 1");
    require(attn_dim >= 1, Errc::bad_config, "attn_dim must be >= 1");
    require(lr > 0.0 && std::isfinite(lr), Errc::bad_config, "lr must be positive");
    require(rmsprop_rho >= 0.0 && rmsprop_rho < 1.0, Errc::bad_config,
            "rmsprop_rho must be in [0, 1)");
    require(rmsprop_eps > 0.0, Errc::bad_config, "rmsprop_eps must be positive");
    require(dropout >= 0.0 && dropout < 1.0, Errc::bad_config, "dropout must be in [0, 1)");
    require(holdout >= 0.0 && holdout < 1.0, Errc::bad_config, "holdout must be in [0, 1)");
    require(checkpoint_every >= 0, Errc::bad_config, "checkpoint_every must be >= 0");
    require(threads >= 1, Errc::bad_config, "threads must be >= 1");
    require(max_grad_norm >= 0.0, Errc::bad_config, "max_grad_norm must be >= 0");
}

TrainConfig parse_train_config(const std::string& path) {
    std::ifstream in(path);
    require(in.good(), Errc::io_error, "cannot open config '" + path + "'");
    TrainConfig cfg;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        auto eq = line.find('=');
        require(eq != std::string::npos, Errc::bad_config,
                path + ":" + std::to_string(lineno) + ": expected key=value");
        std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        require(!key.empty() && !value.empty(), Errc::bad_config,
                path + ":" + std::to_string(lineno) + ": empty key or value");
        if (key == "variant") cfg.variant = variant_from_name(value);
        else if (key == "epochs") cfg.epochs = to_int(key, value);
        else if (key == "batch_rows") cfg.batch_rows = to_int(key, value);
        else if (key == "batch_chunk") cfg.batch_chunk = to_int(key, value);
        else if (key == "window") cfg.window = to_int(key, value);
        else if (key == "hidden") cfg.hidden = to_int(key, value);
        else if (key == "attn_dim") cfg.attn_dim = to_int(key, value);
        else if (key == "lr") cfg.lr = to_double(key, value);
        else if (key == "rmsprop_rho") cfg.rmsprop_rho = to_double(key, value);
        else if (key == "rmsprop_eps") cfg.rmsprop_eps = to_double(key, value);
        else if (key == "dropout") cfg.dropout = to_double(key, value);
        else if (key == "seed") cfg.seed = to_u64(key, value);
        else if (key == "checkpoint_every") cfg.checkpoint_every = to_int(key, value);
        else if (key == "holdout") cfg.holdout = to_double(key, value);
        else if (key == "threads") cfg.threads = to_int(key, value);
        else if (key == "max_grad_norm") cfg.max_grad_norm = to_double(key, value);
        else fail(Errc::bad_config, path + ":" + std::to_string(lineno) + ": unknown key '" + key + "'");
    }
    cfg.validate();
    return cfg;
}

double cce_loss(const Vec& probs, int target) {
    require(target >= 0 && target < probs.size(), Errc::bad_target,
            "target id " + std::to_string(target) + " outside distribution of size " +
                std::to_string(probs.size()));
    return -std::log(std::max(probs(target), 1e-12));
}

OptimizerState OptimizerState::zeros_like(const ModelParams& p) {
    OptimizerState s;
    for (const auto& v : named_tensors(p)) {
        if (v.mat != nullptr) s.ms.push_back(Mat::Zero(v.mat->rows(), v.mat->cols()));
        else s.ms.push_back(Mat::Zero(v.vec->size(), 1));
    }
    return s;
}

void rmsprop_step(ModelParams& params, const ModelParams& grads, OptimizerState& state,
                  double lr, double rho, double eps) {
    auto pv = named_tensors(params);
    auto gv = named_tensors(grads);
    require(pv.size() == gv.size() && pv.size() == state.ms.size(), Errc::shape_mismatch,
            "optimizer state does not match parameter layout");
    for (std::size_t i = 0; i < pv.size(); ++i) {
        FlatMap theta = flat(pv[i]);
        FlatMap g = flat(gv[i]);
        FlatMap s(state.ms[i].data(), state.ms[i].size());
        require(theta.size() == g.size() && theta.size() == s.size(), Errc::shape_mismatch,
                "tensor '" + pv[i].name + "' changed shape");
        s = rho * s + (1.0 - rho) * g.square();
        theta -= lr * g / (s.sqrt() + eps);
    }
}

Metrics evaluate(const ModelParams& params, const WindowSet& windows, int threads) {
    const int n = windows.count();
    require(n > 0, Errc::empty_set, "no windows to evaluate");
    const double v = static_cast<double>(params.dims.vocab);
    threads = std::clamp(threads, 1, n);

    std::vector<double> cce_part(threads, 0.0);
    std::vector<double> dev_part(threads, 0.0);
    auto run = [&](int t, int lo, int hi) {
        double cce = 0.0;
        double dev2 = 0.0;
        for (int w = lo; w < hi; ++w) {
            const Vec probs = model_probs(windows.input(w), params);
            const int target = windows.target(w);
            cce += cce_loss(probs, target);
            Index pred = 0;
            probs.maxCoeff(&pred);
            const double dev = (static_cast<double>(pred) - target) / v;
            dev2 += dev * dev;
        }
        cce_part[t] = cce;
        dev_part[t] = dev2;
    };

    if (threads == 1) {
        run(0, 0, n);
    } else {
        std::vector<std::thread> pool;
        const int per = (n + threads - 1) / threads;
        for (int t = 0; t < threads; ++t) {
            const int lo = t * per;
            const int hi = std::min(n, lo + per);
            if (lo >= hi) break;
            pool.emplace_back(run, t, lo, hi);
        }
        for (auto& th : pool) th.join();
    }

    Metrics m;
    for (int t = 0; t < threads; ++t) {
        m.cce += cce_part[t];
        m.mse += dev_part[t];
    }
    m.cce /= n;
    m.mse /= n;
    m.rmse = std::sqrt(m.mse);
    return m;
}

void write_curve_csv(const std::string& path, const std::vector<CurvePoint>& curve) {
    std::ofstream out(path, std::ios::binary);
    require(out.good(), Errc::io_error, "cannot open '" + path + "' for writing");
    out << "epoch,split,cce,rmse,mse\n";
    for (const auto& p : curve) {
        out << p.epoch << ',' << p.split << ',' << format_double(p.metrics.cce) << ','
            << format_double(p.metrics.rmse) << ',' << format_double(p.metrics.mse) << '\n';
    }
    require(out.good(), Errc::io_error, "write failed for '" + path + "'");
}

ModelParams build_variant(Variant v, const ModelDims& dims, std::uint64_t seed) {
    return ModelParams::init(v, dims, seed);
}

TrainResult train_model(const TrainConfig& cfg, const std::vector<std::vector<int>>& songs,
                        int vocab_size, const TrainCallbacks& callbacks) {
    cfg.validate();
    require(vocab_size > 0, Errc::empty_corpus, "empty vocabulary");
    require(!songs.empty(), Errc::empty_set, "no songs to train on");

    // Whole-file holdout from the end of the corpus.
    std::size_t n_hold = static_cast<std::size_t>(static_cast<double>(songs.size()) * cfg.holdout);
    if (cfg.holdout > 0.0 && n_hold == 0 && songs.size() > 1) n_hold = 1;
    const std::size_t n_train = songs.size() - n_hold;
    require(n_train > 0, Errc::empty_set, "holdout leaves no training songs");

    std::vector<int> train_ids;
    for (std::size_t i = 0; i < n_train; ++i)
        train_ids.insert(train_ids.end(), songs[i].begin(), songs[i].end());
    std::vector<int> hold_ids;
    for (std::size_t i = n_train; i < songs.size(); ++i)
        hold_ids.insert(hold_ids.end(), songs[i].begin(), songs[i].end());

    const WindowSet train_windows(train_ids, cfg.window);
    std::optional<WindowSet> hold_windows;
    if (!hold_ids.empty()) hold_windows.emplace(hold_ids, cfg.window);

    const BatchPlan plan(train_ids.size(), cfg.batch_rows, cfg.batch_chunk);
    // Last stream position that still has a target token after its window.
    const std::size_t max_start = train_ids.size() - static_cast<std::size_t>(cfg.window) - 1;

    const ModelDims dims{cfg.window, cfg.hidden, cfg.attn_dim, vocab_size};
    TrainResult result;
    result.params = ModelParams::init(cfg.variant, dims, cfg.seed);
    OptimizerState opt = OptimizerState::zeros_like(result.params);

    std::uint64_t visit = 0;
    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        for (int batch = 0; batch < plan.batches(); ++batch) {
            std::vector<std::size_t> starts;
            starts.reserve(static_cast<std::size_t>(plan.rows()) * plan.chunk());
            for (int row = 0; row < plan.rows(); ++row) {
                const auto slice = plan.slice(batch, row);
                for (std::size_t pos = slice.begin; pos < slice.end; ++pos)
                    if (pos <= max_start) starts.push_back(pos);
            }
            if (starts.empty()) continue;
            const std::uint64_t visit_base = visit;
            visit += starts.size();

            const int workers = std::clamp(cfg.threads, 1, static_cast<int>(starts.size()));
            std::vector<WindowGrad> parts;
            parts.reserve(workers);
            for (int t = 0; t < workers; ++t)
                parts.push_back({ModelParams::zeros_like(result.params), 0.0, nullptr});

            auto run = [&](int t, std::size_t lo, std::size_t hi) {
                try {
                    for (std::size_t k = lo; k < hi; ++k) {
                        const std::size_t s = starts[k];
                        std::span<const int> input(train_ids.data() + s,
                                                   static_cast<std::size_t>(cfg.window));
                        const int target = train_ids[s + cfg.window];
                        Rng mask_rng(cfg.seed, kMaskStreamBase + visit_base + k);
                        DropoutSpec drop{cfg.dropout, cfg.dropout > 0.0 ? &mask_rng : nullptr};
                        auto fwd = model_forward(input, result.params, drop);
                        parts[t].loss_sum += cce_loss(fwd.probs, target);
                        accumulate(parts[t].grads,
                                   model_backward(fwd.cache, result.params, target), 1.0);
                    }
                } catch (...) {
                    parts[t].error = std::current_exception();
                }
            };

            if (workers == 1) {
                run(0, 0, starts.size());
            } else {
                std::vector<std::thread> pool;
                const std::size_t per = (starts.size() + workers - 1) / workers;
                for (int t = 0; t < workers; ++t) {
                    const std::size_t lo = static_cast<std::size_t>(t) * per;
                    const std::size_t hi = std::min(starts.size(), lo + per);
                    if (lo >= hi) break;
                    pool.emplace_back(run, t, lo, hi);
                }
                for (auto& th : pool) th.join();
            }

            for (const auto& part : parts)
                if (part.error) std::rethrow_exception(part.error);
            ModelParams grads = std::move(parts[0].grads);
            double loss_sum = parts[0].loss_sum;
            for (int t = 1; t < workers; ++t) {
                accumulate(grads, parts[t].grads, 1.0);
                loss_sum += parts[t].loss_sum;
            }

            const double mean_loss = loss_sum / static_cast<double>(starts.size());
            require(std::isfinite(mean_loss), Errc::divergence,
                    "training diverged at epoch " + std::to_string(epoch) + " batch " +
                        std::to_string(batch) + " (loss not finite)");
            scale_params(grads, 1.0 / static_cast<double>(starts.size()));
            if (cfg.max_grad_norm > 0.0) {
                const double norm = global_norm(grads);
                require(std::isfinite(norm), Errc::divergence,
                        "training diverged at epoch " + std::to_string(epoch) + " batch " +
                            std::to_string(batch) + " (gradient not finite)");
                if (norm > cfg.max_grad_norm) scale_params(grads, cfg.max_grad_norm / norm);
            }
            rmsprop_step(result.params, grads, opt, cfg.lr, cfg.rmsprop_rho, cfg.rmsprop_eps);
        }

        CurvePoint train_point{epoch, "train", evaluate(result.params, train_windows, cfg.threads)};
        require(std::isfinite(train_point.metrics.cce), Errc::divergence,
                "training diverged at epoch " + std::to_string(epoch) + " (eval loss not finite)");
        result.curve.push_back(train_point);
        if (callbacks.on_point) callbacks.on_point(train_point);
        if (hold_windows) {
            CurvePoint hold_point{epoch, "holdout",
                                  evaluate(result.params, *hold_windows, cfg.threads)};
            result.curve.push_back(hold_point);
            if (callbacks.on_point) callbacks.on_point(hold_point);
        }
        if (callbacks.on_checkpoint && cfg.checkpoint_every > 0 &&
            epoch % cfg.checkpoint_every == 0)
            callbacks.on_checkpoint(epoch, result.params);
    }
    return result;
}

void save_checkpoint(const std::string& path, const ModelParams& params,
                     const std::vector<std::string>& vocab_tokens, double dropout_rate) {
    require(static_cast<int>(vocab_tokens.size()) == params.dims.vocab, Errc::bad_checkpoint,
            "vocabulary size does not match the model head");
    TensorFile tf;
    nlohmann::json manifest;
    manifest["format"] = "melodia-checkpoint";
    manifest["version"] = 1;
    manifest["variant"] = variant_name(params.variant);
    manifest["dims"] = {{"window", params.dims.window},
                        {"hidden", params.dims.hidden},
                        {"attn_dim", params.dims.attn_dim},
                        {"vocab", params.dims.vocab}};
    manifest["dropout"] = dropout_rate;
    manifest["vocab"] = vocab_tokens;
    tf.manifest = manifest.dump();
    for (const auto& v : named_tensors(params)) {
        if (v.mat != nullptr) tf.add(v.name, *v.mat);
        else tf.add(v.name, *v.vec);
    }
    tf.save(path);
}

Checkpoint load_checkpoint(const std::string& path) {
    const TensorFile tf = TensorFile::load(path);
    nlohmann::json manifest;
    try {
        manifest = nlohmann::json::parse(tf.manifest);
    } catch (const nlohmann::json::exception& e) {
        fail(Errc::bad_checkpoint, "unreadable checkpoint manifest: " + std::string(e.what()));
    }
    try {
        require(manifest.at("format") == "melodia-checkpoint", Errc::bad_checkpoint,
                "not a model checkpoint");
        require(manifest.at("version") == 1, Errc::bad_checkpoint,
                "unsupported checkpoint version");
        Checkpoint ck;
        const Variant variant = variant_from_name(manifest.at("variant").get<std::string>());
        const auto& d = manifest.at("dims");
        const ModelDims dims{d.at("window").get<int>(), d.at("hidden").get<int>(),
                             d.at("attn_dim").get<int>(), d.at("vocab").get<int>()};
        ck.params = ModelParams::init(variant, dims, 0);
        for (auto& v : named_tensors(ck.params)) {
            if (v.mat != nullptr) {
                const Mat& m = tf.mat(v.name);
                require(m.rows() == v.mat->rows() && m.cols() == v.mat->cols(),
                        Errc::bad_checkpoint, "tensor '" + v.name + "' has the wrong shape");
                *v.mat = m;
            } else {
                const Vec w = tf.vec(v.name);
                require(w.size() == v.vec->size(), Errc::bad_checkpoint,
                        "tensor '" + v.name + "' has the wrong shape");
                *v.vec = w;
            }
        }
        ck.vocab_tokens = manifest.at("vocab").get<std::vector<std::string>>();
        require(static_cast<int>(ck.vocab_tokens.size()) == dims.vocab, Errc::bad_checkpoint,
                "vocabulary length does not match the model head");
        ck.dropout_rate = manifest.at("dropout").get<double>();
        return ck;
    } catch (const nlohmann::json::exception& e) {
        fail(Errc::bad_checkpoint, "checkpoint manifest missing fields: " + std::string(e.what()));
    }
}

} // namespace melodia
