#include <cmath>
#include <cstdio>

#include "dcvar/nn.hpp"
#include "dcvar/rng.hpp"
#include "doctest.h"

using namespace dcvar;
using ad::Tape;
using ad::Var;

namespace {

Eigen::MatrixXd randn(int r, int c, std::uint64_t seed) {
    GaussianStream g(seed);
    Eigen::MatrixXd m(r, c);
    for (int i = 0; i < r; ++i)
        for (int j = 0; j < c; ++j) m(i, j) = g.next();
    return m;
}

}  // namespace

TEST_CASE("mlp initialization") {
    MlpSpec spec;
    spec.input_dim = 2;
    spec.hidden_dims = {50, 50};
    spec.output_dim = 5;
    Mlp mlp = Mlp::init(spec, 1, "net");
    auto ps = mlp.params();
    CHECK(ps.size() == 6);

    // kaiming bound sqrt(6/fan_in), biases zero and decay-exempt
    double bound0 = std::sqrt(6.0 / 2.0);
    bool nonzero = false;
    for (auto* p : ps) {
        if (p->name.find(".b") != std::string::npos) {
            CHECK(p->value.cwiseAbs().maxCoeff() == 0.0);
            CHECK_FALSE(p->weight_decay);
        } else {
            nonzero = nonzero || p->value.cwiseAbs().maxCoeff() > 0.0;
        }
    }
    CHECK(nonzero);
    Eigen::MatrixXd w0;
    for (auto* p : ps)
        if (p->name == "net.w0") w0 = p->value;
    CHECK(w0.rows() == 2);
    CHECK(w0.cols() == 50);
    CHECK(w0.cwiseAbs().maxCoeff() <= bound0);

    Mlp again = Mlp::init(spec, 1, "net");
    CHECK(again.params()[0]->value == ps[0]->value);  // deterministic init
}

TEST_CASE("mlp gradients") {
    MlpSpec spec;
    spec.input_dim = 3;
    spec.hidden_dims = {7, 7};
    spec.output_dim = 2;
    Mlp mlp = Mlp::init(spec, 3, "m");
    Eigen::MatrixXd x = randn(6, 3, 4);
    auto build = [&](Tape& t) -> Var {
        Var y = mlp.forward(t, t.constant(x));
        return t.mean_all(t.mul(y, y));
    };
    CHECK(ad::grad_check(build, mlp.params()) < 1e-5);
}

TEST_CASE("mlp with layer norm gradients") {
    MlpSpec spec;
    spec.input_dim = 3;
    spec.hidden_dims = {6};
    spec.output_dim = 2;
    spec.layer_norm = true;
    Mlp mlp = Mlp::init(spec, 5, "m");
    Eigen::MatrixXd x = randn(4, 3, 6);
    auto build = [&](Tape& t) -> Var {
        Var y = mlp.forward(t, t.constant(x));
        return t.mean_all(t.mul(y, y));
    };
    CHECK(ad::grad_check(build, mlp.params()) < 1e-5);
}

TEST_CASE("gru with zero parameters halves the hidden state") {
    GruSpec spec;
    spec.input_dim = 2;
    spec.hidden_dim = 3;
    GruCell cell = GruCell::init(spec, 7, "g");
    for (auto* p : cell.params()) p->value.setZero();
    Tape t;
    Eigen::MatrixXd h0 = randn(4, 3, 8);
    Var h1 = cell.step(t, t.constant(h0), t.constant(randn(4, 2, 9)));
    CHECK((t.val(h1) - 0.5 * h0).norm() == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("gru gradients through two steps") {
    GruSpec spec;
    spec.input_dim = 2;
    spec.hidden_dim = 4;
    GruCell cell = GruCell::init(spec, 11, "g");
    Eigen::MatrixXd x0 = randn(3, 2, 12), x1 = randn(3, 2, 13);
    auto build = [&](Tape& t) -> Var {
        Var h = t.constant(Eigen::MatrixXd::Zero(3, 4));
        h = cell.step(t, h, t.constant(x0));
        h = cell.step(t, h, t.constant(x1));
        return t.mean_all(t.mul(h, h));
    };
    CHECK(ad::grad_check(build, cell.params()) < 1e-5);
}

TEST_CASE("box projection respects bounds") {
    Eigen::VectorXd lo(3), up(3);
    lo << 0.6, -1.0, 0.0;
    up << 30.0, 2.0, kUnbounded;
    Eigen::MatrixXd raw = 3.0 * randn(20, 3, 14);
    Tape t;
    Var out = t.constant(raw);
    Var proj = box_project(t, out, lo, up);
    const auto& v = t.val(proj);
    for (int i = 0; i < 20; ++i)
        for (int j = 0; j < 3; ++j) {
            CHECK(v(i, j) >= lo(j));
            if (std::isfinite(up(j))) CHECK(v(i, j) <= up(j));
        }

    TensorParam p("raw", randn(5, 3, 15));
    auto build = [&](Tape& tp) -> Var {
        Var pr = box_project(tp, tp.param(p), lo, up);
        return tp.mean_all(tp.mul(pr, pr));
    };
    CHECK(ad::grad_check(build, {&p}) < 1e-5);

    Eigen::VectorXd bad_lo = up;
    CHECK_THROWS(box_project(t, out, bad_lo, lo));
}

TEST_CASE("softmax projection lands on the simplex") {
    Tape t;
    Var s = softmax_project(t, t.constant(randn(6, 4, 16)));
    for (int i = 0; i < 6; ++i) CHECK(t.val(s).row(i).sum() == doctest::Approx(1.0));
}

TEST_CASE("adamw minimizes a quadratic") {
    TensorParam x("x", Eigen::MatrixXd::Constant(1, 1, 5.0));
    AdamW::Config cfg;
    cfg.lr = 0.1;
    AdamW opt(cfg);
    for (int i = 0; i < 500; ++i) {
        x.grad = x.value;  // d/dx of x^2/2
        opt.step({&x});
    }
    CHECK(std::abs(x.value(0, 0)) < 1e-3);
}

TEST_CASE("adamw decoupled decay and lr scaling") {
    TensorParam a("a", Eigen::MatrixXd::Constant(1, 1, 1.0));
    TensorParam b("b", Eigen::MatrixXd::Constant(1, 1, 1.0));
    b.weight_decay = false;
    AdamW::Config cfg;
    cfg.lr = 0.01;
    cfg.weight_decay = 0.5;
    AdamW opt(cfg);
    a.grad.setZero();
    b.grad.setZero();
    opt.step({&a, &b});
    CHECK(a.value(0, 0) == doctest::Approx(1.0 - 0.01 * 0.5));
    CHECK(b.value(0, 0) == doctest::Approx(1.0));

    // per-parameter lr scale moves eta-style params on a slower timescale
    TensorParam c("c", Eigen::MatrixXd::Constant(1, 1, 1.0));
    TensorParam d("d", Eigen::MatrixXd::Constant(1, 1, 1.0));
    d.lr_scale = 0.1;
    AdamW opt2(cfg);
    c.grad.setOnes();
    d.grad.setOnes();
    opt2.step({&c, &d});
    double dc = 1.0 - c.value(0, 0), dd = 1.0 - d.value(0, 0);
    CHECK(dd / dc == doctest::Approx(0.1).epsilon(0.05));
}

TEST_CASE("gradient clipping") {
    TensorParam x("x", Eigen::MatrixXd::Zero(1, 2));
    x.grad = Eigen::MatrixXd::Constant(1, 2, 3.0);  // norm sqrt(18) > 2
    double s = clip_gradients({&x}, 2.0);
    CHECK(x.grad.norm() == doctest::Approx(2.0));
    CHECK(s == doctest::Approx(2.0 / std::sqrt(18.0)));
    CHECK(clip_gradients({&x}, 10.0) == doctest::Approx(1.0));
}

TEST_CASE("checkpoint roundtrip") {
    TensorParam a("a", randn(2, 3, 20));
    TensorParam b("b", randn(1, 1, 21));
    save_params({&a, &b}, "ckpt_test.txt");
    TensorParam a2("a", Eigen::MatrixXd::Zero(2, 3));
    TensorParam b2("b", Eigen::MatrixXd::Zero(1, 1));
    load_params({&a2, &b2}, "ckpt_test.txt");
    CHECK((a.value - a2.value).norm() == doctest::Approx(0.0));
    CHECK((b.value - b2.value).norm() == doctest::Approx(0.0));

    TensorParam wrong("c", Eigen::MatrixXd::Zero(2, 3));
    CHECK_THROWS(load_params({&wrong}, "ckpt_test.txt"));
    TensorParam badshape("a", Eigen::MatrixXd::Zero(3, 3));
    CHECK_THROWS(load_params({&badshape}, "ckpt_test.txt"));
    std::remove("ckpt_test.txt");
}
