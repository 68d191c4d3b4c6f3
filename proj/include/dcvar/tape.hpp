#pragma once

#include <Eigen/Dense>
#include <functional>
#include <string>
#include <utility>
#include <vector>

namespace dcvar {

// A named trainable tensor with its gradient accumulator.
struct TensorParam {
    std::string name;
    Eigen::MatrixXd value;
    Eigen::MatrixXd grad;
    double lr_scale = 1.0;     // per-parameter learning-rate multiplier
    bool weight_decay = true;  // decoupled decay applies (off for biases / eta)

    TensorParam() = default;
    TensorParam(std::string n, Eigen::MatrixXd v)
        : name(std::move(n)), value(std::move(v)),
          grad(Eigen::MatrixXd::Zero(value.rows(), value.cols())) {}

    void zero_grad() { grad.setZero(); }
};

namespace ad {

using Mat = Eigen::MatrixXd;

struct Var {
    int i = -1;
    bool valid() const { return i >= 0; }
};

// Reverse-mode tape over dense matrices. Nodes are created by the op methods
// below; backward() propagates adjoints from a 1x1 root and accumulates
// gradients of registered parameter leaves into their TensorParam.
class Tape {
  public:
    Var constant(Mat v);
    Var param(TensorParam& p);

    // elementwise, same shape
    Var add(Var a, Var b);
    Var sub(Var a, Var b);
    Var mul(Var a, Var b);

    Var scale(Var a, double c);
    Var add_const(Var a, double c);
    Var mul_elem_const(Var a, const Mat& c);  // hadamard with a constant

    Var matmul(Var a, Var b);
    Var matmul_const(const Mat& a, Var b);  // constant left factor
    Var transpose(Var a);

    // broadcast a [1 x k] row over all rows of a [m x k] matrix
    Var add_rowvec(Var a, Var row);
    Var add_rowvec_const(Var a, const Eigen::RowVectorXd& row);
    Var mul_rowvec_const(Var a, const Eigen::RowVectorXd& row);

    // broadcast a 1x1 scalar node
    Var add_scalar(Var a, Var s);
    Var sub_scalar(Var a, Var s);
    Var mul_scalar(Var a, Var s);

    Var relu(Var a);
    Var sigmoid(Var a);
    Var tanh_(Var a);
    Var softplus(Var a);
    Var log_(Var a);
    Var neg(Var a) { return scale(a, -1.0); }

    Var softmax_rows(Var a);
    Var layer_norm_rows(Var a, double eps = 1e-5);

    Var rowsum(Var a);    // [m x k] -> [m x 1]
    Var sum_all(Var a);   // -> 1x1
    Var mean_all(Var a);  // -> 1x1

    Var hconcat(const std::vector<Var>& parts);
    Var cols(Var a, int start, int n);

    // mask is constant: value = mask .* a + (1-mask) .* b; no gradient
    // flows through the mask itself.
    Var where(const Mat& mask, Var a, Var b);

    void backward(Var root);

    const Mat& val(Var v) const { return nodes_[v.i].value; }
    const Mat& grad(Var v) const { return nodes_[v.i].grad; }
    double scalar(Var v) const { return nodes_[v.i].value(0, 0); }

    void clear();
    std::size_t size() const { return nodes_.size(); }

  private:
    struct Node {
        Mat value;
        Mat grad;
        std::function<void(Tape&)> back;  // may be empty for leaves
    };

    Var push(Mat value, std::function<void(Tape&)> back);
    Mat& grad_ref(int i) { return nodes_[i].grad; }

    std::vector<Node> nodes_;
    std::vector<std::pair<int, TensorParam*>> param_leaves_;
};

// Max relative error between reverse-mode and central finite differences of a
// scalar loss over all entries of the given parameters. `build` must be
// deterministic given the parameter values.
double grad_check(const std::function<Var(Tape&)>& build,
                  const std::vector<TensorParam*>& params, double eps = 1e-5);

}  // namespace ad
}  // namespace dcvar
