#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "melodia/model.hpp"
#include "melodia/tokens.hpp"

namespace melodia {

struct TrainConfig {
    Variant variant = Variant::bilstm_attn_lstm;
    int epochs = 10;
    int batch_rows = 16;   // R: parallel sub-streams of the id stream
    int batch_chunk = 64;  // C: window starts per row per batch
    int window = 100;
    int hidden = 512;
    int attn_dim = 128;
    double lr = 0.001;
    double rmsprop_rho = 0.9;
    double rmsprop_eps = 1e-8;
    double dropout = 0.3;
    std::uint64_t seed = 1;
    int checkpoint_every = 0;   // epochs between checkpoints; 0 = final only
    double holdout = 0.0;       // fraction of songs held out (whole files, from the end)
    int threads = 1;
    double max_grad_norm = 0.0; // global-norm guard; 0 = off

    void validate() const;  // Errc::bad_config
};

// Flat key=value file, '#' comments. Keys match the field names above.
TrainConfig parse_train_config(const std::string& path);

struct Metrics {
    double cce = 0.0;
    double rmse = 0.0;
    double mse = 0.0;
};

// -ln p[target], clamped at 1e-12 so a saturated wrong prediction stays finite.
double cce_loss(const Vec& probs, int target);

// Running mean-square accumulators, one per parameter tensor in
// named_tensors order.
struct OptimizerState {
    std::vector<Mat> ms;
    static OptimizerState zeros_like(const ModelParams& p);
};

// s <- rho s + (1-rho) g^2;  theta <- theta - lr g / (sqrt(s) + eps).
void rmsprop_step(ModelParams& params, const ModelParams& grads, OptimizerState& state,
                  double lr, double rho, double eps);

// Mean cross-entropy plus the id-space deviation errors: the predicted id is
// the argmax, the deviation (pred - target)/V, mse its mean square and rmse
// the square root of the mse.
Metrics evaluate(const ModelParams& params, const WindowSet& windows, int threads = 1);

struct CurvePoint {
    int epoch = 0;
    std::string split;
    Metrics metrics;
};

void write_curve_csv(const std::string& path, const std::vector<CurvePoint>& curve);

struct TrainResult {
    ModelParams params;
    std::vector<CurvePoint> curve;
};

struct TrainCallbacks {
    std::function<void(const CurvePoint&)> on_point;
    std::function<void(int epoch, const ModelParams&)> on_checkpoint;
};

// Sequential-batch training over the concatenated train songs. Window starts
// are visited in BatchPlan order (batch-major, then row, then offset); one
// RMSProp step per batch on the mean gradient. Deterministic for a fixed
// seed and thread count. Throws Errc::divergence on a non-finite loss.
TrainResult train_model(const TrainConfig& cfg, const std::vector<std::vector<int>>& songs,
                        int vocab_size, const TrainCallbacks& callbacks = {});

// Convenience factory covering the three variants.
ModelParams build_variant(Variant v, const ModelDims& dims, std::uint64_t seed);

// Checkpoint = named-tensor container whose manifest carries the variant,
// dimensions, dropout rate and the vocabulary (one decoded token per entry).
void save_checkpoint(const std::string& path, const ModelParams& params,
                     const std::vector<std::string>& vocab_tokens, double dropout_rate);

struct Checkpoint {
    ModelParams params;
    std::vector<std::string> vocab_tokens;
    double dropout_rate = 0.0;
};

Checkpoint load_checkpoint(const std::string& path);

} // namespace melodia
