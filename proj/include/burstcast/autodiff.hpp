#pragma once

// Minimal dense tensor with reverse-mode differentiation.
//
// Tensors are row-major float64. Every op records its parents and a backward
// rule when any input requires a gradient; backward() walks the graph once in
// reverse topological order and then frees it.
//
// Broadcasting is limited to one rule ("leading-batch"): a binary elementwise
// op accepts a second operand whose shape is a suffix of the first operand's
// shape, and matmul accepts a 2-D right operand against a batched left one.
// Anything else is a shape error.

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace burstcast::ad {

using Shape = std::vector<std::size_t>;

std::string to_string(const Shape& shape);
std::size_t numel(const Shape& shape);

struct Node {
    Shape shape;
    std::vector<double> value;
    std::vector<double> grad;
    bool requires_grad = false;
    bool consumed = false;
    const char* op = "leaf";
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void(Node&)> backward;
};

class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(Shape shape, bool requires_grad = false);
    static Tensor full(Shape shape, double value, bool requires_grad = false);
    static Tensor from(Shape shape, std::vector<double> values, bool requires_grad = false);
    static Tensor scalar(double value, bool requires_grad = false);

    bool defined() const { return node_ != nullptr; }
    const Shape& shape() const { return node_->shape; }
    std::size_t dim() const { return node_->shape.size(); }
    std::size_t size(int axis) const;
    std::size_t numel() const { return node_->value.size(); }

    std::span<const double> values() const { return node_->value; }
    /// Direct access for leaves (parameter init, finite differences).
    std::span<double> mutable_values() { return node_->value; }
    double item() const;

    bool requires_grad() const { return node_->requires_grad; }
    bool has_grad() const { return !node_->grad.empty(); }
    std::span<const double> grad() const { return node_->grad; }
    std::span<double> mutable_grad();
    void zero_grad() { node_->grad.clear(); }

    const char* op() const { return node_->op; }
    bool is_leaf() const { return node_->parents.empty() && !node_->backward; }

    /// Same values, no graph history.
    Tensor detach() const;

    const std::shared_ptr<Node>& node() const { return node_; }
    explicit Tensor(std::shared_ptr<Node> node) : node_(std::move(node)) {}

private:
    std::shared_ptr<Node> node_;
};

/// Disables graph recording on the current thread while alive.
class NoGradGuard {
public:
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    bool prev_;
};

bool grad_enabled();

// Linear algebra ------------------------------------------------------------

/// [..., m, k] x [k, n] -> [..., m, n], or batched [B..., m, k] x [B..., k, n].
Tensor matmul(const Tensor& a, const Tensor& b);
/// Swaps the last two axes.
Tensor transpose(const Tensor& a);
Tensor reshape(const Tensor& a, Shape shape);

// Elementwise ---------------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
/// Hadamard product.
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);
Tensor add_scalar(const Tensor& a, double s);
Tensor exp(const Tensor& a);
Tensor log(const Tensor& a);
Tensor sqrt(const Tensor& a);
Tensor abs(const Tensor& a);
Tensor relu(const Tensor& a);
Tensor sigmoid(const Tensor& a);
/// max(x, 0) + log1p(exp(-|x|)).
Tensor softplus(const Tensor& a);
/// Clamps into [lo, hi]; the gradient is zero where clamping is active.
Tensor clamp(const Tensor& a, double lo, double hi);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }
inline Tensor operator*(const Tensor& a, double s) { return scale(a, s); }
inline Tensor operator*(double s, const Tensor& a) { return scale(a, s); }

// Reductions and shaping ----------------------------------------------------

Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);
/// Max over the last axis; result keeps that axis with size 1.
/// Ties route the gradient to the first maximum.
Tensor max_last(const Tensor& a);
Tensor softmax_last(const Tensor& a);
/// Zero-mean, unit-variance over the last axis (no affine part).
Tensor layer_norm_last(const Tensor& a, double eps = 1e-5);
Tensor concat_last(const std::vector<Tensor>& parts);
Tensor slice_last(const Tensor& a, std::size_t start, std::size_t len);
/// Selects rows (axis -2) by index, identically for every leading batch.
Tensor gather_rows(const Tensor& a, std::span<const std::size_t> rows);
/// For [..., Lq, Lk], sets entries with key index j > i + offset to `fill`.
Tensor causal_mask_fill(const Tensor& a, double fill, std::ptrdiff_t offset = 0);

// Differentiation -----------------------------------------------------------

/// Populates grad on every requires_grad ancestor of the scalar `loss` and
/// frees the intermediate graph. Leaf gradients accumulate across calls.
void backward(const Tensor& loss);

struct GradCheckReport {
    /// Max relative error per input.
    std::vector<double> max_rel_error;
    double worst = 0.0;
};

/// Compares reverse-mode gradients of scalar f(inputs) with central
/// differences. Per element the error is |a - n| / max(|a|, |n|, floor).
GradCheckReport grad_check(const std::function<Tensor(const std::vector<Tensor>&)>& f,
                           std::vector<Tensor> inputs, double step = 1e-5, double floor = 1e-3);

// Optimisation --------------------------------------------------------------

struct Parameter {
    std::string name;
    Tensor tensor;
};

struct AdamConfig {
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

/// Bias-corrected adaptive-moment optimiser with per-parameter moments.
class Adam {
public:
    Adam(std::vector<Parameter> params, AdamConfig cfg);

    /// One update using the current grads; throws if any grad is missing.
    void step();
    void zero_grad();
    long long steps() const { return t_; }
    const AdamConfig& config() const { return cfg_; }

private:
    std::vector<Parameter> params_;
    AdamConfig cfg_;
    std::vector<std::vector<double>> m_;
    std::vector<std::vector<double>> v_;
    long long t_ = 0;
};

/// Stateless single update at step t (1-based) with caller-held moments.
void adam_update(std::span<double> param, std::span<const double> grad, std::span<double> m,
                 std::span<double> v, const AdamConfig& cfg, long long t);

}  // namespace burstcast::ad
