#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <unordered_map>
#include <vector>

#include "dcvar/tape.hpp"

namespace dcvar {

enum class Activation { ReLU, Tanh, Sigmoid };

struct MlpSpec {
    int input_dim = 1;
    std::vector<int> hidden_dims;
    Activation activation = Activation::ReLU;
    bool layer_norm = false;
    bool residual = true;
    int output_dim = 1;
};

// Feedforward network with optional residual hidden updates
// h <- h + act(W h + b) whenever consecutive dims agree.
class Mlp {
  public:
    Mlp() = default;
    static Mlp init(const MlpSpec& spec, std::uint64_t seed, const std::string& prefix = "mlp");

    ad::Var forward(ad::Tape& tape, ad::Var input);
    std::vector<TensorParam*> params();
    const MlpSpec& spec() const { return spec_; }

  private:
    MlpSpec spec_;
    std::vector<TensorParam> weights_;
    std::vector<TensorParam> biases_;
};

struct GruSpec {
    int input_dim = 1;
    int hidden_dim = 1;
};

// Standard GRU cell: update/reset gates with sigmoid, tanh candidate.
class GruCell {
  public:
    GruCell() = default;
    static GruCell init(const GruSpec& spec, std::uint64_t seed,
                        const std::string& prefix = "gru");

    // hidden_prev [m x H], input [m x D] -> hidden_next [m x H]
    ad::Var step(ad::Tape& tape, ad::Var hidden_prev, ad::Var input);
    std::vector<TensorParam*> params();
    const GruSpec& spec() const { return spec_; }

  private:
    GruSpec spec_;
    TensorParam wz_, uz_, bz_;
    TensorParam wr_, ur_, br_;
    TensorParam wn_, un_, bn_in_, bn_hid_;
};

// Softmax onto the simplex (long-only, fully invested).
ad::Var softmax_project(ad::Tape& tape, ad::Var logits);

// Componentwise smooth box projection. For finite bounds
// w = l + (u - l) * sigmoid(raw); for u = +inf, w = l + softplus(raw).
ad::Var box_project(ad::Tape& tape, ad::Var raw, const Eigen::VectorXd& lower,
                    const Eigen::VectorXd& upper);

constexpr double kUnbounded = std::numeric_limits<double>::infinity();

// Kaiming uniform weight matrix [fan_in x fan_out], bound sqrt(6/fan_in).
Eigen::MatrixXd kaiming_uniform(int fan_in, int fan_out, std::uint64_t seed);

// AdamW with decoupled weight decay and an externally driven lr factor.
class AdamW {
  public:
    struct Config {
        double lr = 1e-3;
        double beta1 = 0.9;
        double beta2 = 0.999;
        double eps = 1e-8;
        double weight_decay = 0.0;
    };

    AdamW() = default;
    explicit AdamW(Config cfg) : cfg_(cfg) {}

    void step(const std::vector<TensorParam*>& params);
    void set_lr_factor(double f) { lr_factor_ = f; }
    double lr_factor() const { return lr_factor_; }
    const Config& config() const { return cfg_; }

  private:
    struct Moments {
        Eigen::MatrixXd m, v;
        long t = 0;
    };
    Config cfg_;
    double lr_factor_ = 1.0;
    std::unordered_map<TensorParam*, Moments> state_;
};

// Scales all gradients by max_norm/norm when the global L2 norm exceeds
// max_norm; returns the scale applied (1 when no clipping occurred).
double clip_gradients(const std::vector<TensorParam*>& params, double max_norm);

void zero_grads(const std::vector<TensorParam*>& params);

// Text checkpoint: `name rows cols` followed by row-major values.
void save_params(const std::vector<TensorParam*>& params, const std::string& path);
void load_params(const std::vector<TensorParam*>& params, const std::string& path);

}  // namespace dcvar
