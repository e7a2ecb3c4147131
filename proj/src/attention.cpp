#include "melodia/attention.hpp"

#include <cmath>

namespace melodia {

AttentionParams AttentionParams::init(Index d_a, Index d_q, Index d_k, Rng& rng) {
    require(d_a > 0, Errc::shape_mismatch, "alignment dimension must be positive");
    AttentionParams p;
    const double kw = 1.0 / std::sqrt(static_cast<double>(d_q + d_k));
    const double kv = 1.0 / std::sqrt(static_cast<double>(d_a));
    p.W_a.resize(d_a, d_q + d_k);
    for (Index r = 0; r < p.W_a.rows(); ++r)
        for (Index c = 0; c < p.W_a.cols(); ++c) p.W_a(r, c) = rng.uniform(-kw, kw);
    p.v_a.resize(d_a);
    for (Index r = 0; r < d_a; ++r) p.v_a(r) = rng.uniform(-kv, kv);
    return p;
}

AttentionParams AttentionParams::zeros(Index d_a, Index d_q, Index d_k) {
    AttentionParams p;
    p.W_a = Mat::Zero(d_a, d_q + d_k);
    p.v_a = Vec::Zero(d_a);
    return p;
}

double attention_score(const Vec& s, const Vec& h, const AttentionParams& p) {
    require(s.size() + h.size() == p.W_a.cols(), Errc::shape_mismatch,
            "attention_score: query+key size must match W_a columns");
    Vec z(s.size() + h.size());
    z << s, h;
    return p.v_a.dot(tanh(Vec(p.W_a * z)));
}

Vec attention_weights(const Vec& scores) { return softmax(scores); }

Vec context_vector(const Vec& alpha, const Mat& H) {
    require(alpha.size() == H.rows(), Errc::shape_mismatch,
            "context_vector: one weight per encoder state required");
    return H.transpose() * alpha;
}

AttentionTrace attention_layer(const Mat& H, const AttentionParams& p) {
    const Index n = H.rows();
    const Index d = H.cols();
    require(n >= 1, Errc::empty_input, "attention_layer: empty state sequence");
    require(p.W_a.cols() == 2 * d, Errc::shape_mismatch,
            "attention_layer: W_a columns must be twice the state width");

    const auto Wq = p.W_a.leftCols(d);
    const auto Wk = p.W_a.rightCols(d);

    AttentionTrace t;
    t.Q = H * Wq.transpose();
    t.K = H * Wk.transpose();
    t.alpha.resize(n, n);
    for (Index i = 0; i < n; ++i) {
        const Mat tanh_u = (t.K.rowwise() + t.Q.row(i)).array().tanh();
        const Vec scores = tanh_u * p.v_a;
        t.alpha.row(i) = softmax(scores).transpose();
    }
    t.context = t.alpha * H;
    return t;
}

AttentionBackResult attention_backward(const AttentionTrace& t, const Mat& H,
                                       const AttentionParams& p, const Mat& dContext) {
    const Index n = H.rows();
    const Index d = H.cols();
    require(dContext.rows() == n && dContext.cols() == d, Errc::shape_mismatch,
            "attention_backward: dContext shape does not match");

    const auto Wq = p.W_a.leftCols(d);
    const auto Wk = p.W_a.rightCols(d);

    AttentionBackResult out;
    out.dv_a = Vec::Zero(p.v_a.size());

    // context = alpha H
    const Mat dAlpha = dContext * H.transpose();       // n x n
    out.dH = t.alpha.transpose() * dContext;           // combination path

    // Softmax rows: ds = a .* (da - (a . da)).
    Mat dScore(n, n);
    for (Index i = 0; i < n; ++i) {
        const double inner = t.alpha.row(i).dot(dAlpha.row(i));
        dScore.row(i) = t.alpha.row(i).array() * (dAlpha.row(i).array() - inner);
    }

    // score(i,j) = v_a' tanh(Q_i + K_j); tanh arguments are recomputed from
    // the cached projections rather than stored n^2 deep.
    Mat dQ = Mat::Zero(n, t.Q.cols());
    Mat dK = Mat::Zero(n, t.K.cols());
    for (Index i = 0; i < n; ++i) {
        const Mat tanh_u = (t.K.rowwise() + t.Q.row(i)).array().tanh();
        out.dv_a += tanh_u.transpose() * dScore.row(i).transpose();
        const Mat dU = (1.0 - tanh_u.array().square()).matrix().cwiseProduct(
            dScore.row(i).transpose() * p.v_a.transpose());
        dQ.row(i) = dU.colwise().sum();
        dK += dU;
    }

    out.dW_a.resize(p.W_a.rows(), p.W_a.cols());
    out.dW_a.leftCols(d) = dQ.transpose() * H;
    out.dW_a.rightCols(d) = dK.transpose() * H;
    out.dH += dQ * Wq + dK * Wk;
    return out;
}

} // namespace melodia
