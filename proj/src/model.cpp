#include "melodia/model.hpp"

#include <cmath>

#include "melodia/tokens.hpp"

namespace melodia {
namespace {

Mat head_init(Index vocab, Index d_in, Rng& rng) {
    Mat w(vocab, d_in);
    const double k = 1.0 / std::sqrt(static_cast<double>(d_in));
    for (Index r = 0; r < vocab; ++r)
        for (Index c = 0; c < d_in; ++c) w(r, c) = rng.uniform(-k, k);
    return w;
}

void add_lstm_views(std::vector<TensorView>& out, const std::string& prefix, LstmParams& p) {
    out.push_back({prefix + ".W_i", &p.W_i, nullptr});
    out.push_back({prefix + ".W_f", &p.W_f, nullptr});
    out.push_back({prefix + ".W_o", &p.W_o, nullptr});
    out.push_back({prefix + ".W_g", &p.W_g, nullptr});
    out.push_back({prefix + ".U_i", &p.U_i, nullptr});
    out.push_back({prefix + ".U_f", &p.U_f, nullptr});
    out.push_back({prefix + ".U_o", &p.U_o, nullptr});
    out.push_back({prefix + ".U_g", &p.U_g, nullptr});
    out.push_back({prefix + ".b_i", nullptr, &p.b_i});
    out.push_back({prefix + ".b_f", nullptr, &p.b_f});
    out.push_back({prefix + ".b_o", nullptr, &p.b_o});
    out.push_back({prefix + ".b_g", nullptr, &p.b_g});
}

void check_dims(const ModelDims& d) {
    require(d.window >= 1, Errc::bad_config, "window length must be at least 1");
    require(d.hidden >= 1, Errc::bad_config, "hidden width must be at least 1");
    require(d.attn_dim >= 1, Errc::bad_config, "alignment dimension must be at least 1");
    require(d.vocab >= 1, Errc::bad_config, "vocabulary size must be at least 1");
}

} // namespace

Variant variant_from_name(const std::string& name) {
    if (name == "lstm") return Variant::lstm;
    if (name == "lstm_attn") return Variant::lstm_attn;
    if (name == "bilstm_attn_lstm") return Variant::bilstm_attn_lstm;
    fail(Errc::unknown_variant,
         "unknown variant '" + name + "' (expected lstm, lstm_attn, or bilstm_attn_lstm)");
}

std::string variant_name(Variant v) {
    switch (v) {
        case Variant::lstm: return "lstm";
        case Variant::lstm_attn: return "lstm_attn";
        case Variant::bilstm_attn_lstm: return "bilstm_attn_lstm";
    }
    fail(Errc::unknown_variant, "invalid variant value");
}

ModelParams ModelParams::init(Variant v, const ModelDims& dims, std::uint64_t seed) {
    check_dims(dims);
    const Index d_h = dims.hidden;
    const Index V = dims.vocab;

    // One derived stream per parameter group keeps the layout of the random
    // draw independent of which groups a variant uses.
    Rng r_enc_fwd(seed, 1), r_enc_bwd(seed, 2), r_attn(seed, 3), r_dec(seed, 4), r_head(seed, 5);

    ModelParams p;
    p.variant = v;
    p.dims = dims;
    p.enc_fwd = LstmParams::init(1, d_h, r_enc_fwd);
    switch (v) {
        case Variant::lstm:
            p.head_W = head_init(V, d_h, r_head);
            break;
        case Variant::lstm_attn:
            p.attn = AttentionParams::init(dims.attn_dim, d_h, d_h, r_attn);
            p.head_W = head_init(V, d_h, r_head);
            break;
        case Variant::bilstm_attn_lstm:
            p.enc_bwd = LstmParams::init(1, d_h, r_enc_bwd);
            p.attn = AttentionParams::init(dims.attn_dim, 2 * d_h, 2 * d_h, r_attn);
            p.dec = LstmParams::init(2 * d_h, d_h, r_dec);
            p.head_W = head_init(V, d_h, r_head);
            break;
    }
    p.head_b = Vec::Zero(V);
    return p;
}

ModelParams ModelParams::zeros_like(const ModelParams& shape) {
    ModelParams p;
    p.variant = shape.variant;
    p.dims = shape.dims;
    p.enc_fwd = LstmParams::zeros(shape.enc_fwd.input_dim(), shape.enc_fwd.hidden_dim());
    if (shape.has_encoder_pair()) {
        p.enc_bwd = LstmParams::zeros(shape.enc_bwd.input_dim(), shape.enc_bwd.hidden_dim());
        p.dec = LstmParams::zeros(shape.dec.input_dim(), shape.dec.hidden_dim());
    }
    if (shape.has_attention()) {
        const Index half = shape.attn.W_a.cols() / 2;
        p.attn = AttentionParams::zeros(shape.attn.align_dim(), half, half);
    }
    p.head_W = Mat::Zero(shape.head_W.rows(), shape.head_W.cols());
    p.head_b = Vec::Zero(shape.head_b.size());
    return p;
}

std::vector<TensorView> named_tensors(ModelParams& p) {
    std::vector<TensorView> out;
    add_lstm_views(out, "enc_fwd", p.enc_fwd);
    if (p.has_encoder_pair()) add_lstm_views(out, "enc_bwd", p.enc_bwd);
    if (p.has_attention()) {
        out.push_back({"attn.W_a", &p.attn.W_a, nullptr});
        out.push_back({"attn.v_a", nullptr, &p.attn.v_a});
    }
    if (p.has_encoder_pair()) add_lstm_views(out, "dec", p.dec);
    out.push_back({"head.W", &p.head_W, nullptr});
    out.push_back({"head.b", nullptr, &p.head_b});
    return out;
}

std::vector<TensorView> named_tensors(const ModelParams& p) {
    return named_tensors(const_cast<ModelParams&>(p));
}

long param_count(const ModelParams& p) {
    long n = 0;
    for (const auto& v : named_tensors(p)) n += v.mat ? v.mat->size() : v.vec->size();
    return n;
}

Vec flatten_params(const ModelParams& p) {
    Vec flat(param_count(p));
    Index at = 0;
    for (const auto& v : named_tensors(p)) {
        if (v.mat) {
            for (Index r = 0; r < v.mat->rows(); ++r)
                for (Index c = 0; c < v.mat->cols(); ++c) flat(at++) = (*v.mat)(r, c);
        } else {
            for (Index i = 0; i < v.vec->size(); ++i) flat(at++) = (*v.vec)(i);
        }
    }
    return flat;
}

void unflatten_params(ModelParams& p, const Vec& flat) {
    require(flat.size() == param_count(p), Errc::shape_mismatch,
            "flat parameter vector has the wrong length");
    Index at = 0;
    for (auto& v : named_tensors(p)) {
        if (v.mat) {
            for (Index r = 0; r < v.mat->rows(); ++r)
                for (Index c = 0; c < v.mat->cols(); ++c) (*v.mat)(r, c) = flat(at++);
        } else {
            for (Index i = 0; i < v.vec->size(); ++i) (*v.vec)(i) = flat(at++);
        }
    }
}

ForwardResult model_forward(std::span<const int> window_ids, const ModelParams& p,
                            const DropoutSpec& dropout) {
    require(static_cast<int>(window_ids.size()) == p.dims.window, Errc::shape_mismatch,
            "window has " + std::to_string(window_ids.size()) + " ids, model expects " +
                std::to_string(p.dims.window));

    ForwardResult r;
    ForwardCache& cache = r.cache;
    cache.variant = p.variant;
    cache.dims = p.dims;

    const Mat X = encode_input(window_ids, p.dims.vocab);

    switch (p.variant) {
        case Variant::lstm: {
            cache.enc_fwd = lstm_forward(X, p.enc_fwd);
            cache.head_in = cache.enc_fwd.h.row(cache.enc_fwd.steps() - 1).transpose();
            break;
        }
        case Variant::lstm_attn: {
            cache.enc_fwd = lstm_forward(X, p.enc_fwd);
            cache.H = cache.enc_fwd.h;
            cache.attn = attention_layer(cache.H, p.attn);
            cache.mask = dropout.active()
                             ? dropout_mask(cache.attn.context.rows(), cache.attn.context.cols(),
                                            dropout.rate, *dropout.rng)
                             : Mat::Ones(cache.attn.context.rows(), cache.attn.context.cols());
            cache.ctx_dropped = cache.attn.context.cwiseProduct(cache.mask);
            cache.head_in = cache.ctx_dropped.colwise().mean().transpose();
            break;
        }
        case Variant::bilstm_attn_lstm: {
            cache.enc_pair = bilstm_forward(X, p.enc_fwd, p.enc_bwd);
            cache.H = cache.enc_pair.H;
            cache.attn = attention_layer(cache.H, p.attn);
            cache.mask = dropout.active()
                             ? dropout_mask(cache.attn.context.rows(), cache.attn.context.cols(),
                                            dropout.rate, *dropout.rng)
                             : Mat::Ones(cache.attn.context.rows(), cache.attn.context.cols());
            cache.ctx_dropped = cache.attn.context.cwiseProduct(cache.mask);
            cache.dec = lstm_forward(cache.ctx_dropped, p.dec);
            cache.head_in = cache.dec.h.row(cache.dec.steps() - 1).transpose();
            break;
        }
    }

    const Vec logits = p.head_W * cache.head_in + p.head_b;
    cache.probs = softmax(logits);
    cache.valid = true;
    r.probs = cache.probs;
    return r;
}

Vec model_probs(std::span<const int> window_ids, const ModelParams& p) {
    return model_forward(window_ids, p).probs;
}

ModelParams model_backward(const ForwardCache& cache, const ModelParams& p, int target_id) {
    require(cache.valid, Errc::stale_cache, "cache was not produced by model_forward");
    require(cache.variant == p.variant && cache.dims.window == p.dims.window &&
                cache.dims.hidden == p.dims.hidden && cache.dims.attn_dim == p.dims.attn_dim &&
                cache.dims.vocab == p.dims.vocab,
            Errc::stale_cache, "cache does not match these parameters");
    require(target_id >= 0 && target_id < p.dims.vocab, Errc::bad_target,
            "target id " + std::to_string(target_id) + " outside vocabulary");

    ModelParams g = ModelParams::zeros_like(p);

    // Softmax + cross-entropy head: dlogits = probs - onehot(target).
    Vec dlogits = cache.probs;
    dlogits(target_id) -= 1.0;
    g.head_W = dlogits * cache.head_in.transpose();
    g.head_b = dlogits;
    const Vec dhead_in = p.head_W.transpose() * dlogits;

    const Index L = p.dims.window;

    switch (p.variant) {
        case Variant::lstm: {
            Mat dH = Mat::Zero(L, p.dims.hidden);
            dH.row(L - 1) = dhead_in.transpose();
            auto back = lstm_backward(cache.enc_fwd, p.enc_fwd, dH);
            g.enc_fwd = std::move(back.grads);
            break;
        }
        case Variant::lstm_attn: {
            // Mean pooling spreads the head gradient evenly over context rows.
            Mat dCtx = (Vec::Ones(L) * dhead_in.transpose()) / static_cast<double>(L);
            dCtx = dCtx.cwiseProduct(cache.mask);
            auto aback = attention_backward(cache.attn, cache.H, p.attn, dCtx);
            g.attn.W_a = std::move(aback.dW_a);
            g.attn.v_a = std::move(aback.dv_a);
            auto back = lstm_backward(cache.enc_fwd, p.enc_fwd, aback.dH);
            g.enc_fwd = std::move(back.grads);
            break;
        }
        case Variant::bilstm_attn_lstm: {
            Mat dDecH = Mat::Zero(L, p.dims.hidden);
            dDecH.row(L - 1) = dhead_in.transpose();
            auto dback = lstm_backward(cache.dec, p.dec, dDecH);
            g.dec = std::move(dback.grads);
            const Mat dCtx = dback.dX.cwiseProduct(cache.mask);
            auto aback = attention_backward(cache.attn, cache.H, p.attn, dCtx);
            g.attn.W_a = std::move(aback.dW_a);
            g.attn.v_a = std::move(aback.dv_a);
            auto bback = bilstm_backward(cache.enc_pair, p.enc_fwd, p.enc_bwd, aback.dH);
            g.enc_fwd = std::move(bback.fwd_grads);
            g.enc_bwd = std::move(bback.bwd_grads);
            break;
        }
    }
    return g;
}

} // namespace melodia
