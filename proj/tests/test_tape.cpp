#include <cmath>

#include "dcvar/rng.hpp"
#include "dcvar/tape.hpp"
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

TEST_CASE("forward values of basic ops") {
    Tape t;
    Eigen::MatrixXd a(2, 2), b(2, 2);
    a << 1, 2, 3, 4;
    b << 5, 6, 7, 8;
    Var va = t.constant(a), vb = t.constant(b);
    CHECK(t.val(t.add(va, vb))(1, 1) == doctest::Approx(12));
    CHECK(t.val(t.mul(va, vb))(0, 1) == doctest::Approx(12));
    CHECK(t.val(t.matmul(va, vb))(0, 0) == doctest::Approx(19));
    CHECK(t.val(t.matmul_const(a, vb))(0, 0) == doctest::Approx(19));
    CHECK(t.val(t.transpose(va))(0, 1) == doctest::Approx(3));
    CHECK(t.scalar(t.sum_all(va)) == doctest::Approx(10));
    CHECK(t.scalar(t.mean_all(vb)) == doctest::Approx(6.5));
    CHECK(t.val(t.relu(t.add_const(va, -2.5)))(0, 0) == doctest::Approx(0.0));
    CHECK(t.val(t.cols(va, 1, 1))(1, 0) == doctest::Approx(4));
}

TEST_CASE("softmax rows sum to one and are invariant to shifts") {
    Tape t;
    Eigen::MatrixXd a = randn(3, 5, 1);
    Var s = t.softmax_rows(t.constant(a));
    for (int i = 0; i < 3; ++i) {
        CHECK(t.val(s).row(i).sum() == doctest::Approx(1.0).epsilon(1e-12));
        for (int j = 0; j < 5; ++j) CHECK(t.val(s)(i, j) > 0.0);
    }
    Var s2 = t.softmax_rows(t.add_const(t.constant(a), 100.0));
    CHECK((t.val(s) - t.val(s2)).norm() == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("where keeps the masked branch out of the gradient") {
    Tape t;
    TensorParam x("x", randn(3, 1, 2));
    Eigen::MatrixXd mask(3, 1);
    mask << 1, 0, 1;
    Var vx = t.param(x);
    Var dead = t.scale(vx, 100.0);
    Var w = t.where(mask, vx, dead);
    x.zero_grad();
    t.backward(t.sum_all(w));
    CHECK(x.grad(0, 0) == doctest::Approx(1.0));
    CHECK(x.grad(1, 0) == doctest::Approx(100.0));
    CHECK(x.grad(2, 0) == doctest::Approx(1.0));
}

TEST_CASE("grad check over a deep composite expression") {
    TensorParam w1("w1", 0.3 * randn(4, 6, 3));
    TensorParam w2("w2", 0.3 * randn(6, 3, 4));
    TensorParam b("b", 0.1 * randn(1, 6, 5));
    Eigen::MatrixXd x = randn(5, 4, 6);

    auto build = [&](Tape& t) -> Var {
        Var h = t.add_rowvec(t.matmul(t.constant(x), t.param(w1)), t.param(b));
        Var r = t.relu(h);
        Var s = t.sigmoid(h);
        Var m = t.mul(r, s);
        Var u = t.tanh_(t.matmul(m, t.param(w2)));
        Var soft = t.softmax_rows(u);
        Var cat = t.hconcat({soft, t.softplus(u)});
        Var picked = t.cols(cat, 1, 4);
        Var lg = t.log_(t.add_const(t.softplus(picked), 0.1));
        return t.mean_all(t.mul(lg, lg));
    };
    CHECK(ad::grad_check(build, {&w1, &w2, &b}) < 1e-5);
}

TEST_CASE("grad check of broadcast, scalar and normalization ops") {
    TensorParam a("a", randn(4, 3, 7));
    TensorParam s("s", 0.5 * randn(1, 1, 8));
    Eigen::RowVectorXd row(3);
    row << 0.5, -1.0, 2.0;

    auto build = [&](Tape& t) -> Var {
        Var x = t.param(a);
        Var y = t.mul_rowvec_const(t.add_rowvec_const(x, row), row);
        Var z = t.layer_norm_rows(t.add_scalar(y, t.param(s)));
        Var q = t.sub_scalar(t.mul_scalar(z, t.param(s)), t.param(s));
        Var rs = t.rowsum(t.mul_elem_const(q, Eigen::MatrixXd::Constant(4, 3, 0.7)));
        return t.mean_all(t.mul(rs, rs));
    };
    CHECK(ad::grad_check(build, {&a, &s}) < 5e-5);
}

TEST_CASE("grad check through where and matmul_const") {
    TensorParam a("a", randn(4, 2, 9));
    Eigen::MatrixXd mask(4, 1);
    mask << 1, 0, 1, 0;
    Eigen::MatrixXd c = randn(4, 4, 10);

    auto build = [&](Tape& t) -> Var {
        Var x = t.param(a);
        Var v = t.rowsum(t.mul(x, x));                       // 4x1
        Var frozen = t.where(mask, v, t.scale(v, 0.5));      // mix branches
        Var lift = t.matmul_const(c, frozen);                // 4x1
        return t.sum_all(t.sigmoid(lift));
    };
    CHECK(ad::grad_check(build, {&a}) < 1e-5);
}

TEST_CASE("backward accumulates into reused nodes") {
    Tape t;
    TensorParam x("x", Eigen::MatrixXd::Constant(1, 1, 3.0));
    Var vx = t.param(x);
    Var y = t.add(t.mul(vx, vx), vx);  // x^2 + x -> dy/dx = 2x + 1 = 7
    x.zero_grad();
    t.backward(t.sum_all(y));
    CHECK(x.grad(0, 0) == doctest::Approx(7.0));
}

TEST_CASE("shape mismatches throw") {
    Tape t;
    Var a = t.constant(Eigen::MatrixXd::Zero(2, 3));
    Var b = t.constant(Eigen::MatrixXd::Zero(3, 2));
    CHECK_THROWS(t.add(a, b));
    CHECK_THROWS(t.matmul(a, a));
    CHECK_THROWS(t.backward(a));  // root must be 1x1
}
