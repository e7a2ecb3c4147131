#pragma once

#include "melodia/numeric.hpp"
#include "melodia/rng.hpp"

namespace melodia {

// Gate parameters for one LSTM layer. Gate pre-activations are
// a_* = W_* x + U_* h_prev + b_*, so W_* is d_h x d_in and U_* is d_h x d_h.
struct LstmParams {
    Mat W_i, W_f, W_o, W_g;
    Mat U_i, U_f, U_o, U_g;
    Vec b_i, b_f, b_o, b_g;

    Index input_dim() const { return W_i.cols(); }
    Index hidden_dim() const { return W_i.rows(); }

    // Uniform(-k, k) with k = 1/sqrt(fan_in); forget bias starts at 1.
    static LstmParams init(Index d_in, Index d_h, Rng& rng);
    static LstmParams zeros(Index d_in, Index d_h);
};

struct LstmStep {
    Vec h;
    Vec c;
};

// One cell update:
//   i = sigmoid(W_i x + U_i h + b_i)   f, o likewise
//   g = tanh(W_g x + U_g h + b_g)
//   c = f .* c_prev + i .* g
//   h = o .* tanh(c)
LstmStep lstm_cell(const Vec& x, const Vec& h_prev, const Vec& c_prev, const LstmParams& p);

// Whole-sequence forward pass with everything backprop needs. Row t of each
// member is the value at timestep t; initial h and c are zero.
struct LstmTrace {
    Mat X;                  // T x d_in
    Mat gi, gf, go, gg;     // T x d_h gate activations
    Mat c, h;               // T x d_h states
    Index steps() const { return X.rows(); }
};

LstmTrace lstm_forward(const Mat& X, const LstmParams& p);

struct LstmBackResult {
    LstmParams grads;
    Mat dX;  // T x d_in
};

// Backpropagation through time. dH row t is the loss gradient flowing into
// h_t from outside the recurrence.
LstmBackResult lstm_backward(const LstmTrace& t, const LstmParams& p, const Mat& dH);

// Two LSTMs over the sequence in opposite directions. H row j concatenates
// the forward state at j with the backward state at j (the backward trace is
// stored in its own processing order, which consumes X reversed).
struct BilstmTrace {
    LstmTrace fwd;
    LstmTrace bwd;
    Mat H;  // T x 2 d_h
};

BilstmTrace bilstm_forward(const Mat& X, const LstmParams& fwd, const LstmParams& bwd);

struct BilstmBackResult {
    LstmParams fwd_grads;
    LstmParams bwd_grads;
    Mat dX;
};

BilstmBackResult bilstm_backward(const BilstmTrace& t, const LstmParams& fwd,
                                 const LstmParams& bwd, const Mat& dH);

} // namespace melodia
