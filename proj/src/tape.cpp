#include "dcvar/tape.hpp"

#include <cmath>
#include <stdexcept>

namespace dcvar::ad {

Var Tape::push(Mat value, std::function<void(Tape&)> back) {
    Node n;
    n.value = std::move(value);
    n.grad = Mat::Zero(n.value.rows(), n.value.cols());
    n.back = std::move(back);
    nodes_.push_back(std::move(n));
    return {static_cast<int>(nodes_.size()) - 1};
}

Var Tape::constant(Mat v) { return push(std::move(v), nullptr); }

Var Tape::param(TensorParam& p) {
    Var v = push(p.value, nullptr);
    param_leaves_.emplace_back(v.i, &p);
    return v;
}

namespace {

void check_same_shape(const Mat& a, const Mat& b, const char* op) {
    if (a.rows() != b.rows() || a.cols() != b.cols())
        throw std::invalid_argument(std::string(op) + " shape mismatch");
}

}  // namespace

Var Tape::add(Var a, Var b) {
    check_same_shape(val(a), val(b), "add");
    Mat v = val(a) + val(b);
    return push(std::move(v), [a, b, c = int(nodes_.size())](Tape& t) {
        t.grad_ref(a.i) += t.grad(Var{c});
        t.grad_ref(b.i) += t.grad(Var{c});
    });
}

Var Tape::sub(Var a, Var b) {
    check_same_shape(val(a), val(b), "sub");
    Mat v = val(a) - val(b);
    return push(std::move(v), [a, b, c = int(nodes_.size())](Tape& t) {
        t.grad_ref(a.i) += t.grad(Var{c});
        t.grad_ref(b.i) -= t.grad(Var{c});
    });
}

Var Tape::mul(Var a, Var b) {
    check_same_shape(val(a), val(b), "mul");
    Mat v = val(a).cwiseProduct(val(b));
    return push(std::move(v), [a, b, c = int(nodes_.size())](Tape& t) {
        t.grad_ref(a.i).array() += t.grad(Var{c}).array() * t.val(b).array();
        t.grad_ref(b.i).array() += t.grad(Var{c}).array() * t.val(a).array();
    });
}

Var Tape::scale(Var a, double s) {
    Mat v = val(a) * s;
    return push(std::move(v), [a, s, c = int(nodes_.size())](Tape& t) {
        t.grad_ref(a.i) += s * t.grad(Var{c});
    });
}

Var Tape::add_const(Var a, double s) {
    Mat v = val(a).array() + s;
    return push(std::move(v), [a, c = int(nodes_.size())](Tape& t) {
        t.grad_ref(a.i) += t.grad(Var{c});
    });
}

Var Tape::mul_elem_const(Var a, const Mat& cmat) {
    check_same_shape(val(a), cmat, "mul_elem_const");
    Mat v = val(a).cwiseProduct(cmat);
    return push(std::move(v), [a, cmat, c = int(nodes_.size())](Tape& t) {
        t.grad_ref(a.i).array() += t.grad(Var{c}).array() * cmat.array();
    });
}

Var Tape::matmul(Var a, Var b) {
    if (val(a).cols() != val(b).rows()) throw std::invalid_argument("matmul shape mismatch");
    Mat v = val(a) * val(b);
    return push(std::move(v), [a, b, c = int(nodes_.size())](Tape& t) {
        t.grad_ref(a.i).noalias() += t.grad(Var{c}) * t.val(b).transpose();
        t.grad_ref(b.i).noalias() += t.val(a).transpose() * t.grad(Var{c});
    });
}

Var Tape::matmul_const(const Mat& a, Var b) {
    if (a.cols() != val(b).rows()) throw std::invalid_argument("matmul_const shape mismatch");
    Mat v = a * val(b);
    return push(std::move(v), [a, b, c = int(nodes_.size())](Tape& t) {
        t.grad_ref(b.i).noalias() += a.transpose() * t.grad(Var{c});
    });
}

Var Tape::transpose(Var a) {
    Mat v = val(a).transpose();
    return push(std::move(v), [a, c = int(nodes_.size())](Tape& t) {
        t.grad_ref(a.i) += t.grad(Var{c}).transpose();
    });
}

Var Tape::add_rowvec(Var a, Var row) {
    if (val(row).rows() != 1 || val(row).cols() != val(a).cols())
        throw std::invalid_argument("add_rowvec shape mismatch");
    Mat v = val(a).rowwise() + val(row).row(0);
    return push(std::move(v), [a, row, c = int(nodes_.size())](Tape& t) {
        t.grad_ref(a.i) += t.grad(Var{c});
        t.grad_ref(row.i).row(0) += t.grad(Var{c}).colwise().sum();
    });
}

Var Tape::add_rowvec_const(Var a, const Eigen::RowVectorXd& row) {
    Mat v = val(a).rowwise() + row;
    return push(std::move(v), [a, c = int(nodes_.size())](Tape& t) {
        t.grad_ref(a.i) += t.grad(Var{c});
    });
}

Var Tape::mul_rowvec_const(Var a, const Eigen::RowVectorXd& row) {
    Mat v = val(a).array().rowwise() * row.array();
    return push(std::move(v), [a, row, c = int(nodes_.size())](Tape& t) {
        t.grad_ref(a.i).array() += t.grad(Var{c}).array().rowwise() * row.array();
    });
}

Var Tape::add_scalar(Var a, Var s) {
    Mat v = val(a).array() + scalar(s);
    return push(std::move(v), [a, s, c = int(nodes_.size())](Tape& t) {
        t.grad_ref(a.i) += t.grad(Var{c});
        t.grad_ref(s.i)(0, 0) += t.grad(Var{c}).sum();
    });
}

Var Tape::sub_scalar(Var a, Var s) {
    Mat v = val(a).array() - scalar(s);
    return push(std::move(v), [a, s, c = int(nodes_.size())](Tape& t) {
        t.grad_ref(a.i) += t.grad(Var{c});
        t.grad_ref(s.i)(0, 0) -= t.grad(Var{c}).sum();
    });
}

Var Tape::mul_scalar(Var a, Var s) {
    Mat v = val(a) * scalar(s);
    return push(std::move(v), [a, s, c = int(nodes_.size())](Tape& t) {
        t.grad_ref(a.i) += t.scalar(s) * t.grad(Var{c});
        t.grad_ref(s.i)(0, 0) += t.grad(Var{c}).cwiseProduct(t.val(a)).sum();
    });
}

Var Tape::relu(Var a) {
    Mat v = val(a).cwiseMax(0.0);
    return push(std::move(v), [a, c = int(nodes_.size())](Tape& t) {
        t.grad_ref(a.i).array() +=
            t.grad(Var{c}).array() * (t.val(a).array() > 0.0).cast<double>();
    });
}

Var Tape::sigmoid(Var a) {
    Mat v = (1.0 / (1.0 + (-val(a).array()).exp())).matrix();
    return push(std::move(v), [a, c = int(nodes_.size())](Tape& t) {
        const auto& y = t.val(Var{c}).array();
        t.grad_ref(a.i).array() += t.grad(Var{c}).array() * y * (1.0 - y);
    });
}

Var Tape::tanh_(Var a) {
    Mat v = val(a).array().tanh().matrix();
    return push(std::move(v), [a, c = int(nodes_.size())](Tape& t) {
        const auto& y = t.val(Var{c}).array();
        t.grad_ref(a.i).array() += t.grad(Var{c}).array() * (1.0 - y * y);
    });
}

Var Tape::softplus(Var a) {
    // log(1+e^x) computed stably as max(x,0) + log1p(e^{-|x|})
    Mat v = val(a).unaryExpr(
        [](double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); });
    return push(std::move(v), [a, c = int(nodes_.size())](Tape& t) {
        t.grad_ref(a.i).array() +=
            t.grad(Var{c}).array() * (1.0 / (1.0 + (-t.val(a).array()).exp()));
    });
}

Var Tape::log_(Var a) {
    Mat v = val(a).array().log().matrix();
    return push(std::move(v), [a, c = int(nodes_.size())](Tape& t) {
        t.grad_ref(a.i).array() += t.grad(Var{c}).array() / t.val(a).array();
    });
}

Var Tape::softmax_rows(Var a) {
    Mat v = val(a);
    for (Eigen::Index r = 0; r < v.rows(); ++r) {
        Eigen::RowVectorXd row = v.row(r);
        double m = row.maxCoeff();
        row = (row.array() - m).exp();
        v.row(r) = row / row.sum();
    }
    return push(std::move(v), [a, c = int(nodes_.size())](Tape& t) {
        const Mat& y = t.val(Var{c});
        const Mat& gy = t.grad(Var{c});
        Eigen::VectorXd dot = (y.array() * gy.array()).rowwise().sum();
        t.grad_ref(a.i).array() += y.array() * (gy.array().colwise() - dot.array());
    });
}

Var Tape::layer_norm_rows(Var a, double eps) {
    const Mat& x = val(a);
    const double k = static_cast<double>(x.cols());
    Eigen::VectorXd mean = x.rowwise().mean();
    Mat centered = x.array().colwise() - mean.array();
    Eigen::VectorXd var = centered.array().square().rowwise().sum() / k;
    Eigen::VectorXd inv_std = (var.array() + eps).sqrt().inverse();
    Mat v = centered.array().colwise() * inv_std.array();
    return push(std::move(v),
                [a, inv_std, k, c = int(nodes_.size())](Tape& t) {
                    const Mat& y = t.val(Var{c});
                    const Mat& gy = t.grad(Var{c});
                    Eigen::VectorXd gmean = gy.rowwise().mean();
                    Eigen::VectorXd gdot = (gy.array() * y.array()).rowwise().sum() / k;
                    // dx = inv_std * (gy - mean(gy) - y * mean(gy .* y))
                    t.grad_ref(a.i).array() +=
                        ((gy.array().colwise() - gmean.array()) -
                         y.array().colwise() * gdot.array())
                            .colwise() *
                        inv_std.array();
                });
}

Var Tape::rowsum(Var a) {
    Mat v = val(a).rowwise().sum();
    return push(std::move(v), [a, c = int(nodes_.size())](Tape& t) {
        t.grad_ref(a.i).array().colwise() += t.grad(Var{c}).col(0).array();
    });
}

Var Tape::sum_all(Var a) {
    Mat v(1, 1);
    v(0, 0) = val(a).sum();
    return push(std::move(v), [a, c = int(nodes_.size())](Tape& t) {
        t.grad_ref(a.i).array() += t.grad(Var{c})(0, 0);
    });
}

Var Tape::mean_all(Var a) {
    double n = static_cast<double>(val(a).size());
    Mat v(1, 1);
    v(0, 0) = val(a).sum() / n;
    return push(std::move(v), [a, n, c = int(nodes_.size())](Tape& t) {
        t.grad_ref(a.i).array() += t.grad(Var{c})(0, 0) / n;
    });
}

Var Tape::hconcat(const std::vector<Var>& parts) {
    if (parts.empty()) throw std::invalid_argument("hconcat: empty");
    Eigen::Index rows = val(parts[0]).rows();
    Eigen::Index cols = 0;
    for (Var p : parts) {
        if (val(p).rows() != rows) throw std::invalid_argument("hconcat row mismatch");
        cols += val(p).cols();
    }
    Mat v(rows, cols);
    Eigen::Index at = 0;
    for (Var p : parts) {
        v.middleCols(at, val(p).cols()) = val(p);
        at += val(p).cols();
    }
    return push(std::move(v), [parts, c = int(nodes_.size())](Tape& t) {
        Eigen::Index at = 0;
        for (Var p : parts) {
            Eigen::Index w = t.val(p).cols();
            t.grad_ref(p.i) += t.grad(Var{c}).middleCols(at, w);
            at += w;
        }
    });
}

Var Tape::cols(Var a, int start, int n) {
    Mat v = val(a).middleCols(start, n);
    return push(std::move(v), [a, start, n, c = int(nodes_.size())](Tape& t) {
        t.grad_ref(a.i).middleCols(start, n) += t.grad(Var{c});
    });
}

Var Tape::where(const Mat& mask, Var a, Var b) {
    Mat v = mask.cwiseProduct(val(a)) + (1.0 - mask.array()).matrix().cwiseProduct(val(b));
    return push(std::move(v), [mask, a, b, c = int(nodes_.size())](Tape& t) {
        t.grad_ref(a.i).array() += t.grad(Var{c}).array() * mask.array();
        t.grad_ref(b.i).array() += t.grad(Var{c}).array() * (1.0 - mask.array());
    });
}

void Tape::backward(Var root) {
    if (val(root).size() != 1) throw std::invalid_argument("backward root must be scalar");
    nodes_[root.i].grad(0, 0) = 1.0;
    for (int i = root.i; i >= 0; --i)
        if (nodes_[i].back) nodes_[i].back(*this);
    for (auto& [idx, p] : param_leaves_) p->grad += nodes_[idx].grad;
}

void Tape::clear() {
    nodes_.clear();
    param_leaves_.clear();
}

double grad_check(const std::function<Var(Tape&)>& build,
                  const std::vector<TensorParam*>& params, double eps) {
    for (auto* p : params) p->zero_grad();
    Tape tape;
    Var loss = build(tape);
    tape.backward(loss);

    std::vector<Eigen::MatrixXd> analytic;
    analytic.reserve(params.size());
    for (auto* p : params) analytic.push_back(p->grad);

    double max_err = 0.0;
    for (std::size_t k = 0; k < params.size(); ++k) {
        auto* p = params[k];
        for (Eigen::Index i = 0; i < p->value.size(); ++i) {
            double saved = p->value(i);
            p->value(i) = saved + eps;
            Tape tp;
            double up = tp.scalar(build(tp));
            p->value(i) = saved - eps;
            Tape tm;
            double dn = tm.scalar(build(tm));
            p->value(i) = saved;
            double fd = (up - dn) / (2.0 * eps);
            double a = analytic[k](i);
            double err = std::abs(a - fd) / std::max({std::abs(a), std::abs(fd), 1e-6});
            max_err = std::max(max_err, err);
        }
        p->zero_grad();
    }
    return max_err;
}

}  // namespace dcvar::ad
