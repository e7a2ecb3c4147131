#pragma once

#include <span>
#include <string>
#include <vector>

#include "melodia/attention.hpp"
#include "melodia/lstm.hpp"
#include "melodia/numeric.hpp"

namespace melodia {

// The three model topologies under study. All end in a dense softmax head
// over the vocabulary.
//
//   lstm             : LSTM -> final state -> head
//   lstm_attn        : LSTM -> self-attention -> mean-pooled context -> head
//   bilstm_attn_lstm : Bi-LSTM -> self-attention -> LSTM -> final state -> head
enum class Variant { lstm, lstm_attn, bilstm_attn_lstm };

Variant variant_from_name(const std::string& name);  // Errc::unknown_variant
std::string variant_name(Variant v);

struct ModelDims {
    int window = 100;    // input token count per prediction
    int hidden = 512;    // recurrent layer width
    int attn_dim = 128;  // alignment dimension
    int vocab = 0;
};

struct ModelParams {
    Variant variant = Variant::bilstm_attn_lstm;
    ModelDims dims;
    LstmParams enc_fwd;    // first recurrent layer (all variants)
    LstmParams enc_bwd;    // bilstm_attn_lstm only
    AttentionParams attn;  // attention variants only
    LstmParams dec;        // bilstm_attn_lstm only
    Mat head_W;            // V x head_input_dim
    Vec head_b;            // V

    bool has_attention() const { return variant != Variant::lstm; }
    bool has_encoder_pair() const { return variant == Variant::bilstm_attn_lstm; }
    Index head_input_dim() const { return head_W.cols(); }

    static ModelParams init(Variant v, const ModelDims& dims, std::uint64_t seed);
    static ModelParams zeros_like(const ModelParams& shape);
};

// Named views over every trainable tensor in a stable order; drives the
// optimizer, checkpoints, and gradient flattening. Exactly one of mat/vec is
// non-null per view.
struct TensorView {
    std::string name;
    Mat* mat = nullptr;
    Vec* vec = nullptr;
};

std::vector<TensorView> named_tensors(ModelParams& p);
std::vector<TensorView> named_tensors(const ModelParams& p);  // const-cast views, do not write
long param_count(const ModelParams& p);

Vec flatten_params(const ModelParams& p);
void unflatten_params(ModelParams& p, const Vec& flat);

// Dropout applies to the attention output sequence in train mode; pass a
// null rng (or rate 0) for inference.
struct DropoutSpec {
    double rate = 0.0;
    Rng* rng = nullptr;
    bool active() const { return rng != nullptr && rate > 0.0; }
};

struct ForwardCache {
    bool valid = false;
    Variant variant = Variant::lstm;
    ModelDims dims;
    LstmTrace enc_fwd;
    BilstmTrace enc_pair;
    Mat H;                // encoder state sequence feeding attention
    AttentionTrace attn;
    Mat mask;             // dropout mask over the context sequence
    Mat ctx_dropped;
    LstmTrace dec;
    Vec head_in;
    Vec probs;
};

struct ForwardResult {
    Vec probs;
    ForwardCache cache;
};

ForwardResult model_forward(std::span<const int> window_ids, const ModelParams& p,
                            const DropoutSpec& dropout = {});

// Inference-mode probabilities without keeping the cache alive.
Vec model_probs(std::span<const int> window_ids, const ModelParams& p);

// Analytic gradient of the categorical cross-entropy loss at `target_id`
// with respect to every parameter. The cache must come from model_forward on
// the same parameter shapes (Errc::stale_cache otherwise).
ModelParams model_backward(const ForwardCache& cache, const ModelParams& p, int target_id);

} // namespace melodia
