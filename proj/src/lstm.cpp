#include "melodia/lstm.hpp"

#include <cmath>

namespace melodia {
namespace {

Mat uniform_mat(Index rows, Index cols, double k, Rng& rng) {
    Mat m(rows, cols);
    for (Index r = 0; r < rows; ++r)
        for (Index c = 0; c < cols; ++c) m(r, c) = rng.uniform(-k, k);
    return m;
}

void check_cell_shapes(const Vec& x, const Vec& h_prev, const Vec& c_prev, const LstmParams& p) {
    require(x.size() == p.input_dim() && h_prev.size() == p.hidden_dim() &&
                c_prev.size() == p.hidden_dim(),
            Errc::shape_mismatch, "lstm_cell: input/state sizes do not match parameters");
}

} // namespace

LstmParams LstmParams::init(Index d_in, Index d_h, Rng& rng) {
    LstmParams p;
    const double kw = 1.0 / std::sqrt(static_cast<double>(d_in));
    const double ku = 1.0 / std::sqrt(static_cast<double>(d_h));
    p.W_i = uniform_mat(d_h, d_in, kw, rng);
    p.W_f = uniform_mat(d_h, d_in, kw, rng);
    p.W_o = uniform_mat(d_h, d_in, kw, rng);
    p.W_g = uniform_mat(d_h, d_in, kw, rng);
    p.U_i = uniform_mat(d_h, d_h, ku, rng);
    p.U_f = uniform_mat(d_h, d_h, ku, rng);
    p.U_o = uniform_mat(d_h, d_h, ku, rng);
    p.U_g = uniform_mat(d_h, d_h, ku, rng);
    p.b_i = Vec::Zero(d_h);
    p.b_f = Vec::Ones(d_h);
    p.b_o = Vec::Zero(d_h);
    p.b_g = Vec::Zero(d_h);
    return p;
}

LstmParams LstmParams::zeros(Index d_in, Index d_h) {
    LstmParams p;
    p.W_i = p.W_f = p.W_o = p.W_g = Mat::Zero(d_h, d_in);
    p.U_i = p.U_f = p.U_o = p.U_g = Mat::Zero(d_h, d_h);
    p.b_i = p.b_f = p.b_o = p.b_g = Vec::Zero(d_h);
    return p;
}

LstmStep lstm_cell(const Vec& x, const Vec& h_prev, const Vec& c_prev, const LstmParams& p) {
    check_cell_shapes(x, h_prev, c_prev, p);
    const Vec i = sigmoid(p.W_i * x + p.U_i * h_prev + p.b_i);
    const Vec f = sigmoid(p.W_f * x + p.U_f * h_prev + p.b_f);
    const Vec o = sigmoid(p.W_o * x + p.U_o * h_prev + p.b_o);
    const Vec g = tanh(p.W_g * x + p.U_g * h_prev + p.b_g);
    LstmStep s;
    s.c = f.cwiseProduct(c_prev) + i.cwiseProduct(g);
    s.h = o.cwiseProduct(tanh(s.c));
    return s;
}

LstmTrace lstm_forward(const Mat& X, const LstmParams& p) {
    require(X.cols() == p.input_dim(), Errc::shape_mismatch,
            "lstm_forward: input width does not match parameters");
    require(X.rows() >= 1, Errc::shape_mismatch, "lstm_forward: empty sequence");
    const Index T = X.rows();
    const Index d = p.hidden_dim();

    LstmTrace t;
    t.X = X;
    t.gi.resize(T, d);
    t.gf.resize(T, d);
    t.go.resize(T, d);
    t.gg.resize(T, d);
    t.c.resize(T, d);
    t.h.resize(T, d);

    Vec h = Vec::Zero(d);
    Vec c = Vec::Zero(d);
    for (Index step = 0; step < T; ++step) {
        const Vec x = X.row(step).transpose();
        const Vec i = sigmoid(p.W_i * x + p.U_i * h + p.b_i);
        const Vec f = sigmoid(p.W_f * x + p.U_f * h + p.b_f);
        const Vec o = sigmoid(p.W_o * x + p.U_o * h + p.b_o);
        const Vec g = tanh(p.W_g * x + p.U_g * h + p.b_g);
        c = f.cwiseProduct(c) + i.cwiseProduct(g);
        h = o.cwiseProduct(tanh(c));
        t.gi.row(step) = i.transpose();
        t.gf.row(step) = f.transpose();
        t.go.row(step) = o.transpose();
        t.gg.row(step) = g.transpose();
        t.c.row(step) = c.transpose();
        t.h.row(step) = h.transpose();
    }
    return t;
}

LstmBackResult lstm_backward(const LstmTrace& t, const LstmParams& p, const Mat& dH) {
    const Index T = t.steps();
    const Index d = p.hidden_dim();
    require(dH.rows() == T && dH.cols() == d, Errc::shape_mismatch,
            "lstm_backward: dH shape does not match the trace");

    LstmBackResult out;
    out.grads = LstmParams::zeros(p.input_dim(), d);
    out.dX = Mat::Zero(T, p.input_dim());

    Vec dh = Vec::Zero(d);
    Vec dc = Vec::Zero(d);
    for (Index step = T - 1; step >= 0; --step) {
        dh += dH.row(step).transpose();

        const Vec i = t.gi.row(step).transpose();
        const Vec f = t.gf.row(step).transpose();
        const Vec o = t.go.row(step).transpose();
        const Vec g = t.gg.row(step).transpose();
        const Vec c = t.c.row(step).transpose();
        const Vec c_prev = step > 0 ? Vec(t.c.row(step - 1).transpose()) : Vec(Vec::Zero(d));
        const Vec h_prev = step > 0 ? Vec(t.h.row(step - 1).transpose()) : Vec(Vec::Zero(d));
        const Vec x = t.X.row(step).transpose();

        const Vec tanh_c = tanh(c);
        const Vec do_ = dh.cwiseProduct(tanh_c);
        dc += dh.cwiseProduct(o).cwiseProduct(Vec::Ones(d) - tanh_c.cwiseProduct(tanh_c));

        const Vec di = dc.cwiseProduct(g);
        const Vec dg = dc.cwiseProduct(i);
        const Vec df = dc.cwiseProduct(c_prev);
        const Vec dc_prev = dc.cwiseProduct(f);

        const Vec dai = di.cwiseProduct(i).cwiseProduct(Vec::Ones(d) - i);
        const Vec daf = df.cwiseProduct(f).cwiseProduct(Vec::Ones(d) - f);
        const Vec dao = do_.cwiseProduct(o).cwiseProduct(Vec::Ones(d) - o);
        const Vec dag = dg.cwiseProduct(Vec::Ones(d) - g.cwiseProduct(g));

        out.grads.W_i += dai * x.transpose();
        out.grads.W_f += daf * x.transpose();
        out.grads.W_o += dao * x.transpose();
        out.grads.W_g += dag * x.transpose();
        out.grads.U_i += dai * h_prev.transpose();
        out.grads.U_f += daf * h_prev.transpose();
        out.grads.U_o += dao * h_prev.transpose();
        out.grads.U_g += dag * h_prev.transpose();
        out.grads.b_i += dai;
        out.grads.b_f += daf;
        out.grads.b_o += dao;
        out.grads.b_g += dag;

        out.dX.row(step) = (p.W_i.transpose() * dai + p.W_f.transpose() * daf +
                            p.W_o.transpose() * dao + p.W_g.transpose() * dag)
                               .transpose();
        dh = p.U_i.transpose() * dai + p.U_f.transpose() * daf + p.U_o.transpose() * dao +
             p.U_g.transpose() * dag;
        dc = dc_prev;
    }
    return out;
}

BilstmTrace bilstm_forward(const Mat& X, const LstmParams& fwd, const LstmParams& bwd) {
    require(fwd.hidden_dim() == bwd.hidden_dim() && fwd.input_dim() == bwd.input_dim(),
            Errc::shape_mismatch, "bilstm_forward: direction parameter shapes disagree");
    const Index T = X.rows();
    const Index d = fwd.hidden_dim();

    BilstmTrace t;
    t.fwd = lstm_forward(X, fwd);
    t.bwd = lstm_forward(X.colwise().reverse(), bwd);
    t.H.resize(T, 2 * d);
    for (Index j = 0; j < T; ++j) {
        t.H.row(j).head(d) = t.fwd.h.row(j);
        t.H.row(j).tail(d) = t.bwd.h.row(T - 1 - j);
    }
    return t;
}

BilstmBackResult bilstm_backward(const BilstmTrace& t, const LstmParams& fwd,
                                 const LstmParams& bwd, const Mat& dH) {
    const Index T = t.H.rows();
    const Index d = fwd.hidden_dim();
    require(dH.rows() == T && dH.cols() == 2 * d, Errc::shape_mismatch,
            "bilstm_backward: dH shape does not match the trace");

    const Mat dHf = dH.leftCols(d);
    Mat dHb(T, d);
    for (Index j = 0; j < T; ++j) dHb.row(T - 1 - j) = dH.row(j).tail(d);

    BilstmBackResult out;
    auto f = lstm_backward(t.fwd, fwd, dHf);
    auto b = lstm_backward(t.bwd, bwd, dHb);
    out.fwd_grads = std::move(f.grads);
    out.bwd_grads = std::move(b.grads);
    out.dX = f.dX + b.dX.colwise().reverse();
    return out;
}

} // namespace melodia
