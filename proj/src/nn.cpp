#include "dcvar/nn.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "dcvar/rng.hpp"

namespace dcvar {

namespace {

ad::Var activate(ad::Tape& t, ad::Var x, Activation a) {
    switch (a) {
        case Activation::ReLU: return t.relu(x);
        case Activation::Tanh: return t.tanh_(x);
        case Activation::Sigmoid: return t.sigmoid(x);
    }
    throw std::logic_error("unknown activation");
}

}  // namespace

Eigen::MatrixXd kaiming_uniform(int fan_in, int fan_out, std::uint64_t seed) {
    double bound = std::sqrt(6.0 / fan_in);
    GaussianStream g(seed);
    Eigen::MatrixXd w(fan_in, fan_out);
    for (Eigen::Index i = 0; i < w.rows(); ++i)
        for (Eigen::Index j = 0; j < w.cols(); ++j)
            w(i, j) = bound * (2.0 * g.uniform01() - 1.0);
    return w;
}

Mlp Mlp::init(const MlpSpec& spec, std::uint64_t seed, const std::string& prefix) {
    if (spec.input_dim < 1 || spec.output_dim < 1)
        throw std::invalid_argument("mlp dims must be >= 1");
    for (int h : spec.hidden_dims)
        if (h < 1) throw std::invalid_argument("mlp dims must be >= 1");

    Mlp mlp;
    mlp.spec_ = spec;
    std::vector<int> dims;
    dims.push_back(spec.input_dim);
    for (int h : spec.hidden_dims) dims.push_back(h);
    dims.push_back(spec.output_dim);

    for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
        auto name = prefix + ".w" + std::to_string(l);
        mlp.weights_.emplace_back(name, kaiming_uniform(dims[l], dims[l + 1],
                                                        stream_seed(seed, l)));
        TensorParam b(prefix + ".b" + std::to_string(l),
                      Eigen::MatrixXd::Zero(1, dims[l + 1]));
        b.weight_decay = false;
        mlp.biases_.push_back(std::move(b));
    }
    return mlp;
}

ad::Var Mlp::forward(ad::Tape& tape, ad::Var input) {
    if (tape.val(input).cols() != spec_.input_dim)
        throw std::invalid_argument("mlp input dim mismatch");
    ad::Var h = input;
    const std::size_t n_layers = weights_.size();
    for (std::size_t l = 0; l < n_layers; ++l) {
        ad::Var w = tape.param(weights_[l]);
        ad::Var b = tape.param(biases_[l]);
        ad::Var z = tape.add_rowvec(tape.matmul(h, w), b);
        if (l + 1 == n_layers) {
            h = z;  // linear output layer
            break;
        }
        if (spec_.layer_norm) z = tape.layer_norm_rows(z);
        ad::Var a = activate(tape, z, spec_.activation);
        // residual only when shapes agree
        if (spec_.residual && tape.val(h).cols() == tape.val(a).cols())
            h = tape.add(h, a);
        else
            h = a;
    }
    return h;
}

std::vector<TensorParam*> Mlp::params() {
    std::vector<TensorParam*> out;
    for (auto& w : weights_) out.push_back(&w);
    for (auto& b : biases_) out.push_back(&b);
    return out;
}

GruCell GruCell::init(const GruSpec& spec, std::uint64_t seed, const std::string& prefix) {
    if (spec.input_dim < 1 || spec.hidden_dim < 1)
        throw std::invalid_argument("gru dims must be >= 1");
    GruCell c;
    c.spec_ = spec;
    const int d = spec.input_dim, h = spec.hidden_dim;
    auto w = [&](const char* n, int rows, int cols, int k) {
        return TensorParam(prefix + "." + n, kaiming_uniform(rows, cols, stream_seed(seed, k)));
    };
    c.wz_ = w("wz", d, h, 0);
    c.uz_ = w("uz", h, h, 1);
    c.wr_ = w("wr", d, h, 2);
    c.ur_ = w("ur", h, h, 3);
    c.wn_ = w("wn", d, h, 4);
    c.un_ = w("un", h, h, 5);
    for (auto* b : {&c.bz_, &c.br_, &c.bn_in_, &c.bn_hid_}) {
        *b = TensorParam(prefix + ".b", Eigen::MatrixXd::Zero(1, h));
        b->weight_decay = false;
    }
    c.bz_.name = prefix + ".bz";
    c.br_.name = prefix + ".br";
    c.bn_in_.name = prefix + ".bn_in";
    c.bn_hid_.name = prefix + ".bn_hid";
    return c;
}

ad::Var GruCell::step(ad::Tape& t, ad::Var hidden_prev, ad::Var input) {
    if (t.val(input).cols() != spec_.input_dim || t.val(hidden_prev).cols() != spec_.hidden_dim)
        throw std::invalid_argument("gru shape mismatch");
    ad::Var z = t.sigmoid(t.add_rowvec(
        t.add(t.matmul(input, t.param(wz_)), t.matmul(hidden_prev, t.param(uz_))),
        t.param(bz_)));
    ad::Var r = t.sigmoid(t.add_rowvec(
        t.add(t.matmul(input, t.param(wr_)), t.matmul(hidden_prev, t.param(ur_))),
        t.param(br_)));
    ad::Var n = t.tanh_(t.add(
        t.add_rowvec(t.matmul(input, t.param(wn_)), t.param(bn_in_)),
        t.mul(r, t.add_rowvec(t.matmul(hidden_prev, t.param(un_)), t.param(bn_hid_)))));
    // h' = (1-z).n + z.h
    ad::Var one_minus_z = t.add_const(t.neg(z), 1.0);
    return t.add(t.mul(one_minus_z, n), t.mul(z, hidden_prev));
}

std::vector<TensorParam*> GruCell::params() {
    return {&wz_, &uz_, &bz_, &wr_, &ur_, &br_, &wn_, &un_, &bn_in_, &bn_hid_};
}

ad::Var softmax_project(ad::Tape& tape, ad::Var logits) {
    return tape.softmax_rows(logits);
}

ad::Var box_project(ad::Tape& tape, ad::Var raw, const Eigen::VectorXd& lower,
                    const Eigen::VectorXd& upper) {
    const auto k = lower.size();
    if (upper.size() != k || tape.val(raw).cols() != k)
        throw std::invalid_argument("box_project dimension mismatch");
    Eigen::RowVectorXd finite(k), width(k), base(k);
    for (Eigen::Index i = 0; i < k; ++i) {
        if (lower(i) > upper(i)) throw std::invalid_argument("box_project: lower > upper");
        bool fin = std::isfinite(upper(i));
        finite(i) = fin ? 1.0 : 0.0;
        width(i) = fin ? upper(i) - lower(i) : 0.0;
        base(i) = lower(i);
    }
    ad::Var bounded = tape.mul_rowvec_const(tape.sigmoid(raw), width);
    ad::Var unbounded = tape.mul_rowvec_const(tape.softplus(raw),
                                              (1.0 - finite.array()).matrix());
    return tape.add_rowvec_const(tape.add(bounded, unbounded), base);
}

void AdamW::step(const std::vector<TensorParam*>& params) {
    for (auto* p : params) {
        auto& st = state_[p];
        if (st.t == 0) {
            st.m = Eigen::MatrixXd::Zero(p->value.rows(), p->value.cols());
            st.v = st.m;
        }
        ++st.t;
        st.m = cfg_.beta1 * st.m + (1.0 - cfg_.beta1) * p->grad;
        st.v = (cfg_.beta2 * st.v.array() + (1.0 - cfg_.beta2) * p->grad.array().square()).matrix();
        double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(st.t));
        double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(st.t));
        double lr = cfg_.lr * lr_factor_ * p->lr_scale;
        Eigen::ArrayXXd update = (st.m.array() / bc1) /
                                 ((st.v.array() / bc2).sqrt() + cfg_.eps);
        p->value.array() -= lr * update;
        if (p->weight_decay && cfg_.weight_decay > 0.0)
            p->value.array() -= lr * cfg_.weight_decay * p->value.array();
    }
}

double clip_gradients(const std::vector<TensorParam*>& params, double max_norm) {
    if (!(max_norm > 0.0)) throw std::invalid_argument("max_norm must be positive");
    double sq = 0.0;
    for (auto* p : params) sq += p->grad.squaredNorm();
    double norm = std::sqrt(sq);
    if (norm <= max_norm) return 1.0;
    double scale = max_norm / norm;
    for (auto* p : params) p->grad *= scale;
    return scale;
}

void zero_grads(const std::vector<TensorParam*>& params) {
    for (auto* p : params) p->zero_grad();
}

void save_params(const std::vector<TensorParam*>& params, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot open " + path);
    f.precision(17);
    for (auto* p : params) {
        f << p->name << " " << p->value.rows() << " " << p->value.cols() << "\n";
        for (Eigen::Index i = 0; i < p->value.rows(); ++i) {
            for (Eigen::Index j = 0; j < p->value.cols(); ++j) {
                if (j) f << " ";
                f << p->value(i, j);
            }
            f << "\n";
        }
    }
}

void load_params(const std::vector<TensorParam*>& params, const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open " + path);
    for (auto* p : params) {
        std::string name;
        Eigen::Index rows, cols;
        if (!(f >> name >> rows >> cols))
            throw std::runtime_error("checkpoint truncated at " + p->name);
        if (name != p->name)
            throw std::runtime_error("checkpoint name mismatch: expected " + p->name +
                                     ", found " + name);
        if (rows != p->value.rows() || cols != p->value.cols())
            throw std::runtime_error("checkpoint shape mismatch for " + name);
        for (Eigen::Index i = 0; i < rows; ++i)
            for (Eigen::Index j = 0; j < cols; ++j)
                if (!(f >> p->value(i, j)))
                    throw std::runtime_error("checkpoint truncated in " + name);
    }
}

}  // namespace dcvar
