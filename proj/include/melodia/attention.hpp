#pragma once

#include "melodia/numeric.hpp"
#include "melodia/rng.hpp"

namespace melodia {

// Additive alignment model: score(s, h) = v_a' tanh(W_a [s; h]).
struct AttentionParams {
    Mat W_a;  // d_a x (d_q + d_k)
    Vec v_a;  // d_a

    Index align_dim() const { return v_a.size(); }

    static AttentionParams init(Index d_a, Index d_q, Index d_k, Rng& rng);
    static AttentionParams zeros(Index d_a, Index d_q, Index d_k);
};

double attention_score(const Vec& s, const Vec& h, const AttentionParams& p);

// Softmax over alignment scores.
Vec attention_weights(const Vec& scores);

// Convex combination of the rows of H: sum_j alpha_j H(j, :).
Vec context_vector(const Vec& alpha, const Mat& H);

// Self-attention over an encoder state sequence: position i queries with its
// own state h_i, scores every h_j, and collects a context row. The trace
// keeps the query/key projections (Q = H Wq', K = H Wk' for W_a = [Wq Wk])
// and the weight matrix for the backward pass.
struct AttentionTrace {
    Mat Q, K;      // n x d_a
    Mat alpha;     // n x n, rows sum to 1
    Mat context;   // n x d
};

AttentionTrace attention_layer(const Mat& H, const AttentionParams& p);

struct AttentionBackResult {
    Mat dH;
    Mat dW_a;
    Vec dv_a;
};

AttentionBackResult attention_backward(const AttentionTrace& t, const Mat& H,
                                       const AttentionParams& p, const Mat& dContext);

} // namespace melodia
