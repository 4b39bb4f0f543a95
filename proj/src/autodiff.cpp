#include "burstcast/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <unordered_set>

namespace burstcast::ad {

namespace {

thread_local bool g_grad_enabled = true;

std::vector<double>& ensure_grad(Node& n) {
    if (n.grad.empty()) n.grad.assign(n.value.size(), 0.0);
    return n.grad;
}

[[noreturn]] void shape_error(const char* op, const Shape& a, const Shape& b) {
    throw std::invalid_argument(std::string(op) + ": incompatible shapes " + to_string(a) + " and " +
                                to_string(b));
}

Tensor make_op(Shape shape, std::vector<double> value, const char* op, std::initializer_list<const Tensor*> inputs,
               std::function<void(Node&)> bw) {
    auto node = std::make_shared<Node>();
    node->shape = std::move(shape);
    node->value = std::move(value);
    node->op = op;
    bool needs = false;
    if (g_grad_enabled)
        for (auto* t : inputs) needs = needs || t->requires_grad();
    if (needs) {
        node->requires_grad = true;
        for (auto* t : inputs) node->parents.push_back(t->node());
        node->backward = std::move(bw);
    }
    return Tensor(std::move(node));
}

Tensor make_op_n(Shape shape, std::vector<double> value, const char* op, const std::vector<Tensor>& inputs,
                 std::function<void(Node&)> bw) {
    auto node = std::make_shared<Node>();
    node->shape = std::move(shape);
    node->value = std::move(value);
    node->op = op;
    bool needs = false;
    if (g_grad_enabled)
        for (const auto& t : inputs) needs = needs || t.requires_grad();
    if (needs) {
        node->requires_grad = true;
        for (const auto& t : inputs) node->parents.push_back(t.node());
        node->backward = std::move(bw);
    }
    return Tensor(std::move(node));
}

// C[m,n] += A[m,k] B[k,n]
void gemm_acc(std::size_t m, std::size_t k, std::size_t n, const double* A, const double* B, double* C) {
    for (std::size_t i = 0; i < m; ++i) {
        double* c = C + i * n;
        const double* a = A + i * k;
        for (std::size_t kk = 0; kk < k; ++kk) {
            const double av = a[kk];
            const double* b = B + kk * n;
            for (std::size_t j = 0; j < n; ++j) c[j] += av * b[j];
        }
    }
}

// C[k,n] += A[m,k]^T G[m,n]
void gemm_at_acc(std::size_t m, std::size_t k, std::size_t n, const double* A, const double* G, double* C) {
    for (std::size_t i = 0; i < m; ++i) {
        const double* g = G + i * n;
        const double* a = A + i * k;
        for (std::size_t kk = 0; kk < k; ++kk) {
            const double av = a[kk];
            double* c = C + kk * n;
            for (std::size_t j = 0; j < n; ++j) c[j] += av * g[j];
        }
    }
}

std::vector<double> transpose_2d(const double* B, std::size_t rows, std::size_t cols) {
    std::vector<double> t(rows * cols);
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c) t[c * rows + r] = B[r * cols + c];
    return t;
}

// Leading-batch broadcast check: b equals a or is a suffix of it.
bool is_suffix(const Shape& a, const Shape& b) {
    if (b.size() > a.size()) return false;
    return std::equal(b.rbegin(), b.rend(), a.rbegin());
}

template <class Fwd, class Bwd>
Tensor unary(const Tensor& a, const char* op, Fwd fwd, Bwd dfdx) {
    auto x = a.values();
    std::vector<double> y(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) y[i] = fwd(x[i]);
    return make_op(a.shape(), std::move(y), op, {&a}, [dfdx](Node& self) {
        auto& p = *self.parents[0];
        auto& g = ensure_grad(p);
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * dfdx(p.value[i], self.value[i]);
    });
}

double stable_sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    double e = std::exp(x);
    return e / (1.0 + e);
}

}  // namespace

std::string to_string(const Shape& shape) {
    std::string s = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) s += ", ";
        s += std::to_string(shape[i]);
    }
    return s + "]";
}

std::size_t numel(const Shape& shape) {
    std::size_t n = 1;
    for (auto d : shape) n *= d;
    return n;
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) { return full(std::move(shape), 0.0, requires_grad); }

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
    auto n = ad::numel(shape);
    return from(std::move(shape), std::vector<double>(n, value), requires_grad);
}

Tensor Tensor::from(Shape shape, std::vector<double> values, bool requires_grad) {
    if (ad::numel(shape) != values.size())
        throw std::invalid_argument("tensor shape " + to_string(shape) + " does not match " +
                                    std::to_string(values.size()) + " values");
    auto node = std::make_shared<Node>();
    node->shape = std::move(shape);
    node->value = std::move(values);
    node->requires_grad = requires_grad;
    return Tensor(std::move(node));
}

Tensor Tensor::scalar(double value, bool requires_grad) { return from({}, {value}, requires_grad); }

std::size_t Tensor::size(int axis) const {
    auto nd = static_cast<int>(dim());
    if (axis < 0) axis += nd;
    if (axis < 0 || axis >= nd) throw std::out_of_range("tensor axis out of range");
    return shape()[static_cast<std::size_t>(axis)];
}

double Tensor::item() const {
    if (numel() != 1) throw std::invalid_argument("item() on tensor of shape " + to_string(shape()));
    return node_->value[0];
}

std::span<double> Tensor::mutable_grad() { return ensure_grad(*node_); }

Tensor Tensor::detach() const { return from(shape(), node_->value, false); }

NoGradGuard::NoGradGuard() : prev_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = prev_; }
bool grad_enabled() { return g_grad_enabled; }

// ---------------------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
    const auto& sa = a.shape();
    const auto& sb = b.shape();
    if (sa.size() < 2 || sb.size() < 2) shape_error("matmul", sa, sb);
    const auto m = sa[sa.size() - 2];
    const auto k = sa.back();
    if (sb[sb.size() - 2] != k) shape_error("matmul", sa, sb);
    const auto n = sb.back();
    Shape out_shape(sa.begin(), sa.end() - 1);
    out_shape.push_back(n);

    if (sb.size() == 2) {
        const auto rows = a.numel() / k;
        std::vector<double> c(rows * n, 0.0);
        gemm_acc(rows, k, n, a.values().data(), b.values().data(), c.data());
        return make_op(std::move(out_shape), std::move(c), "matmul", {&a, &b}, [rows, k, n](Node& self) {
            auto& pa = *self.parents[0];
            auto& pb = *self.parents[1];
            if (pa.requires_grad) {
                auto bt = transpose_2d(pb.value.data(), k, n);
                gemm_acc(rows, n, k, self.grad.data(), bt.data(), ensure_grad(pa).data());
            }
            if (pb.requires_grad) gemm_at_acc(rows, k, n, pa.value.data(), self.grad.data(), ensure_grad(pb).data());
        });
    }

    if (sa.size() != sb.size() || !std::equal(sa.begin(), sa.end() - 2, sb.begin())) shape_error("matmul", sa, sb);
    const auto batch = a.numel() / (m * k);
    std::vector<double> c(batch * m * n, 0.0);
    for (std::size_t bi = 0; bi < batch; ++bi)
        gemm_acc(m, k, n, a.values().data() + bi * m * k, b.values().data() + bi * k * n, c.data() + bi * m * n);
    return make_op(std::move(out_shape), std::move(c), "bmm", {&a, &b}, [batch, m, k, n](Node& self) {
        auto& pa = *self.parents[0];
        auto& pb = *self.parents[1];
        for (std::size_t bi = 0; bi < batch; ++bi) {
            const double* g = self.grad.data() + bi * m * n;
            if (pa.requires_grad) {
                auto bt = transpose_2d(pb.value.data() + bi * k * n, k, n);
                gemm_acc(m, n, k, g, bt.data(), ensure_grad(pa).data() + bi * m * k);
            }
            if (pb.requires_grad)
                gemm_at_acc(m, k, n, pa.value.data() + bi * m * k, g, ensure_grad(pb).data() + bi * k * n);
        }
    });
}

Tensor transpose(const Tensor& a) {
    const auto& s = a.shape();
    if (s.size() < 2) throw std::invalid_argument("transpose: needs at least 2 axes, got " + to_string(s));
    const auto r = s[s.size() - 2];
    const auto c = s.back();
    const auto batch = a.numel() / (r * c);
    std::vector<double> y(a.numel());
    auto x = a.values();
    for (std::size_t b = 0; b < batch; ++b)
        for (std::size_t i = 0; i < r; ++i)
            for (std::size_t j = 0; j < c; ++j) y[b * r * c + j * r + i] = x[b * r * c + i * c + j];
    Shape out = s;
    std::swap(out[out.size() - 1], out[out.size() - 2]);
    return make_op(std::move(out), std::move(y), "transpose", {&a}, [batch, r, c](Node& self) {
        auto& g = ensure_grad(*self.parents[0]);
        for (std::size_t b = 0; b < batch; ++b)
            for (std::size_t i = 0; i < r; ++i)
                for (std::size_t j = 0; j < c; ++j) g[b * r * c + i * c + j] += self.grad[b * r * c + j * r + i];
    });
}

Tensor reshape(const Tensor& a, Shape shape) {
    if (numel(shape) != a.numel()) shape_error("reshape", a.shape(), shape);
    std::vector<double> y(a.values().begin(), a.values().end());
    return make_op(std::move(shape), std::move(y), "reshape", {&a}, [](Node& self) {
        auto& g = ensure_grad(*self.parents[0]);
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    });
}

// ---------------------------------------------------------------------------

namespace {

enum class BinOp { add, sub, mul };

Tensor binary(const Tensor& a, const Tensor& b, BinOp kind, const char* name) {
    if (!is_suffix(a.shape(), b.shape())) shape_error(name, a.shape(), b.shape());
    const auto na = a.numel();
    const auto nb = b.numel();
    auto x = a.values();
    auto z = b.values();
    std::vector<double> y(na);
    for (std::size_t base = 0; base < na; base += nb) {
        for (std::size_t j = 0; j < nb; ++j) {
            auto i = base + j;
            switch (kind) {
                case BinOp::add: y[i] = x[i] + z[j]; break;
                case BinOp::sub: y[i] = x[i] - z[j]; break;
                case BinOp::mul: y[i] = x[i] * z[j]; break;
            }
        }
    }
    return make_op(a.shape(), std::move(y), name, {&a, &b}, [kind, na, nb](Node& self) {
        auto& pa = *self.parents[0];
        auto& pb = *self.parents[1];
        const auto& g = self.grad;
        if (pa.requires_grad) {
            auto& ga = ensure_grad(pa);
            for (std::size_t base = 0; base < na; base += nb)
                for (std::size_t j = 0; j < nb; ++j) {
                    auto i = base + j;
                    ga[i] += kind == BinOp::mul ? g[i] * pb.value[j] : g[i];
                }
        }
        if (pb.requires_grad) {
            auto& gb = ensure_grad(pb);
            for (std::size_t base = 0; base < na; base += nb)
                for (std::size_t j = 0; j < nb; ++j) {
                    auto i = base + j;
                    switch (kind) {
                        case BinOp::add: gb[j] += g[i]; break;
                        case BinOp::sub: gb[j] -= g[i]; break;
                        case BinOp::mul: gb[j] += g[i] * pa.value[i]; break;
                    }
                }
        }
    });
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) { return binary(a, b, BinOp::add, "add"); }
Tensor sub(const Tensor& a, const Tensor& b) { return binary(a, b, BinOp::sub, "sub"); }
Tensor mul(const Tensor& a, const Tensor& b) { return binary(a, b, BinOp::mul, "mul"); }

Tensor scale(const Tensor& a, double s) {
    return unary(a, "scale", [s](double x) { return s * x; }, [s](double, double) { return s; });
}

Tensor add_scalar(const Tensor& a, double s) {
    return unary(a, "add_scalar", [s](double x) { return x + s; }, [](double, double) { return 1.0; });
}

Tensor exp(const Tensor& a) {
    return unary(a, "exp", [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Tensor log(const Tensor& a) {
    return unary(a, "log", [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

Tensor sqrt(const Tensor& a) {
    return unary(a, "sqrt", [](double x) { return std::sqrt(x); }, [](double, double y) { return 0.5 / y; });
}

Tensor abs(const Tensor& a) {
    return unary(
        a, "abs", [](double x) { return std::abs(x); },
        [](double x, double) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); });
}

Tensor relu(const Tensor& a) {
    return unary(
        a, "relu", [](double x) { return x > 0.0 ? x : 0.0; }, [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Tensor sigmoid(const Tensor& a) {
    return unary(a, "sigmoid", stable_sigmoid, [](double, double y) { return y * (1.0 - y); });
}

Tensor softplus(const Tensor& a) {
    return unary(
        a, "softplus", [](double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); },
        [](double x, double) { return stable_sigmoid(x); });
}

Tensor clamp(const Tensor& a, double lo, double hi) {
    return unary(
        a, "clamp", [lo, hi](double x) { return std::clamp(x, lo, hi); },
        [lo, hi](double x, double) { return (x >= lo && x <= hi) ? 1.0 : 0.0; });
}

// ---------------------------------------------------------------------------

Tensor sum(const Tensor& a) {
    double s = 0.0;
    for (double v : a.values()) s += v;
    return make_op({}, {s}, "sum", {&a}, [](Node& self) {
        auto& g = ensure_grad(*self.parents[0]);
        for (auto& v : g) v += self.grad[0];
    });
}

Tensor mean(const Tensor& a) {
    double s = 0.0;
    for (double v : a.values()) s += v;
    const double inv = 1.0 / static_cast<double>(a.numel());
    return make_op({}, {s * inv}, "mean", {&a}, [inv](Node& self) {
        auto& g = ensure_grad(*self.parents[0]);
        for (auto& v : g) v += self.grad[0] * inv;
    });
}

Tensor max_last(const Tensor& a) {
    if (a.dim() < 1) throw std::invalid_argument("max_last: needs at least 1 axis");
    const auto n = a.shape().back();
    const auto rows = a.numel() / n;
    auto x = a.values();
    std::vector<double> y(rows);
    std::vector<std::size_t> arg(rows);
    for (std::size_t r = 0; r < rows; ++r) {
        std::size_t best = 0;
        for (std::size_t j = 1; j < n; ++j)
            if (x[r * n + j] > x[r * n + best]) best = j;
        arg[r] = best;
        y[r] = x[r * n + best];
    }
    Shape out = a.shape();
    out.back() = 1;
    return make_op(std::move(out), std::move(y), "max_last", {&a}, [arg = std::move(arg), n](Node& self) {
        auto& g = ensure_grad(*self.parents[0]);
        for (std::size_t r = 0; r < arg.size(); ++r) g[r * n + arg[r]] += self.grad[r];
    });
}

Tensor softmax_last(const Tensor& a) {
    if (a.dim() < 1) throw std::invalid_argument("softmax_last: needs at least 1 axis");
    const auto n = a.shape().back();
    const auto rows = a.numel() / n;
    auto x = a.values();
    std::vector<double> y(a.numel());
    for (std::size_t r = 0; r < rows; ++r) {
        const double* xr = x.data() + r * n;
        double* yr = y.data() + r * n;
        double mx = -std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < n; ++j) mx = std::max(mx, xr[j]);
        double s = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            yr[j] = std::exp(xr[j] - mx);
            s += yr[j];
        }
        for (std::size_t j = 0; j < n; ++j) yr[j] /= s;
    }
    return make_op(a.shape(), std::move(y), "softmax_last", {&a}, [n, rows](Node& self) {
        auto& g = ensure_grad(*self.parents[0]);
        for (std::size_t r = 0; r < rows; ++r) {
            const double* yr = self.value.data() + r * n;
            const double* gr = self.grad.data() + r * n;
            double dot = 0.0;
            for (std::size_t j = 0; j < n; ++j) dot += gr[j] * yr[j];
            for (std::size_t j = 0; j < n; ++j) g[r * n + j] += yr[j] * (gr[j] - dot);
        }
    });
}

Tensor layer_norm_last(const Tensor& a, double eps) {
    if (a.dim() < 1) throw std::invalid_argument("layer_norm_last: needs at least 1 axis");
    const auto n = a.shape().back();
    const auto rows = a.numel() / n;
    auto x = a.values();
    std::vector<double> y(a.numel());
    std::vector<double> inv_sd(rows);
    const double inv_n = 1.0 / static_cast<double>(n);
    for (std::size_t r = 0; r < rows; ++r) {
        const double* xr = x.data() + r * n;
        double mu = 0.0;
        for (std::size_t j = 0; j < n; ++j) mu += xr[j];
        mu *= inv_n;
        double var = 0.0;
        for (std::size_t j = 0; j < n; ++j) var += (xr[j] - mu) * (xr[j] - mu);
        var *= inv_n;
        inv_sd[r] = 1.0 / std::sqrt(var + eps);
        for (std::size_t j = 0; j < n; ++j) y[r * n + j] = (xr[j] - mu) * inv_sd[r];
    }
    return make_op(a.shape(), std::move(y), "layer_norm_last", {&a},
                   [n, rows, inv_n, inv_sd = std::move(inv_sd)](Node& self) {
                       auto& g = ensure_grad(*self.parents[0]);
                       for (std::size_t r = 0; r < rows; ++r) {
                           const double* yr = self.value.data() + r * n;
                           const double* gr = self.grad.data() + r * n;
                           double mg = 0.0;
                           double mgy = 0.0;
                           for (std::size_t j = 0; j < n; ++j) {
                               mg += gr[j];
                               mgy += gr[j] * yr[j];
                           }
                           mg *= inv_n;
                           mgy *= inv_n;
                           for (std::size_t j = 0; j < n; ++j)
                               g[r * n + j] += inv_sd[r] * (gr[j] - mg - yr[j] * mgy);
                       }
                   });
}

Tensor concat_last(const std::vector<Tensor>& parts) {
    if (parts.empty()) throw std::invalid_argument("concat_last: no inputs");
    const auto& s0 = parts[0].shape();
    if (s0.empty()) throw std::invalid_argument("concat_last: scalar input");
    std::vector<std::size_t> widths;
    std::size_t total = 0;
    for (const auto& p : parts) {
        const auto& s = p.shape();
        if (s.size() != s0.size() || !std::equal(s.begin(), s.end() - 1, s0.begin()))
            shape_error("concat_last", s0, s);
        widths.push_back(s.back());
        total += s.back();
    }
    const auto rows = parts[0].numel() / s0.back();
    std::vector<double> y(rows * total);
    std::size_t off = 0;
    for (std::size_t p = 0; p < parts.size(); ++p) {
        auto x = parts[p].values();
        for (std::size_t r = 0; r < rows; ++r)
            std::copy_n(x.data() + r * widths[p], widths[p], y.data() + r * total + off);
        off += widths[p];
    }
    Shape out = s0;
    out.back() = total;
    return make_op_n(std::move(out), std::move(y), "concat_last", parts, [widths, rows, total](Node& self) {
        std::size_t off = 0;
        for (std::size_t p = 0; p < widths.size(); ++p) {
            auto& parent = *self.parents[p];
            if (parent.requires_grad) {
                auto& g = ensure_grad(parent);
                for (std::size_t r = 0; r < rows; ++r)
                    for (std::size_t j = 0; j < widths[p]; ++j) g[r * widths[p] + j] += self.grad[r * total + off + j];
            }
            off += widths[p];
        }
    });
}

Tensor slice_last(const Tensor& a, std::size_t start, std::size_t len) {
    if (a.dim() < 1 || start + len > a.shape().back())
        throw std::invalid_argument("slice_last: range [" + std::to_string(start) + ", " +
                                    std::to_string(start + len) + ") outside shape " + to_string(a.shape()));
    const auto n = a.shape().back();
    const auto rows = a.numel() / n;
    auto x = a.values();
    std::vector<double> y(rows * len);
    for (std::size_t r = 0; r < rows; ++r) std::copy_n(x.data() + r * n + start, len, y.data() + r * len);
    Shape out = a.shape();
    out.back() = len;
    return make_op(std::move(out), std::move(y), "slice_last", {&a}, [n, rows, start, len](Node& self) {
        auto& g = ensure_grad(*self.parents[0]);
        for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t j = 0; j < len; ++j) g[r * n + start + j] += self.grad[r * len + j];
    });
}

Tensor gather_rows(const Tensor& a, std::span<const std::size_t> rows) {
    if (a.dim() < 2) throw std::invalid_argument("gather_rows: needs at least 2 axes, got " + to_string(a.shape()));
    const auto L = a.shape()[a.dim() - 2];
    const auto d = a.shape().back();
    for (auto r : rows)
        if (r >= L) throw std::invalid_argument("gather_rows: row " + std::to_string(r) + " out of range");
    const auto batch = a.numel() / (L * d);
    const auto R = rows.size();
    std::vector<std::size_t> idx(rows.begin(), rows.end());
    auto x = a.values();
    std::vector<double> y(batch * R * d);
    for (std::size_t b = 0; b < batch; ++b)
        for (std::size_t i = 0; i < R; ++i) std::copy_n(x.data() + (b * L + idx[i]) * d, d, y.data() + (b * R + i) * d);
    Shape out = a.shape();
    out[out.size() - 2] = R;
    return make_op(std::move(out), std::move(y), "gather_rows", {&a}, [idx, batch, L, d](Node& self) {
        auto& g = ensure_grad(*self.parents[0]);
        const auto R = idx.size();
        for (std::size_t b = 0; b < batch; ++b)
            for (std::size_t i = 0; i < R; ++i)
                for (std::size_t j = 0; j < d; ++j) g[(b * L + idx[i]) * d + j] += self.grad[(b * R + i) * d + j];
    });
}

Tensor causal_mask_fill(const Tensor& a, double fill, std::ptrdiff_t offset) {
    if (a.dim() < 2) throw std::invalid_argument("causal_mask_fill: needs at least 2 axes");
    const auto lq = a.shape()[a.dim() - 2];
    const auto lk = a.shape().back();
    const auto batch = a.numel() / (lq * lk);
    auto masked = [offset](std::size_t i, std::size_t j) {
        return static_cast<std::ptrdiff_t>(j) > static_cast<std::ptrdiff_t>(i) + offset;
    };
    std::vector<double> y(a.values().begin(), a.values().end());
    for (std::size_t b = 0; b < batch; ++b)
        for (std::size_t i = 0; i < lq; ++i)
            for (std::size_t j = 0; j < lk; ++j)
                if (masked(i, j)) y[(b * lq + i) * lk + j] = fill;
    return make_op(a.shape(), std::move(y), "causal_mask_fill", {&a}, [batch, lq, lk, masked](Node& self) {
        auto& g = ensure_grad(*self.parents[0]);
        for (std::size_t b = 0; b < batch; ++b)
            for (std::size_t i = 0; i < lq; ++i)
                for (std::size_t j = 0; j < lk; ++j)
                    if (!masked(i, j)) g[(b * lq + i) * lk + j] += self.grad[(b * lq + i) * lk + j];
    });
}

// ---------------------------------------------------------------------------

void backward(const Tensor& loss) {
    if (!loss.defined()) throw std::invalid_argument("backward: undefined tensor");
    if (loss.numel() != 1)
        throw std::invalid_argument("backward: loss must be scalar, got shape " + to_string(loss.shape()));
    auto root = loss.node();
    if (root->consumed) throw std::logic_error("backward: graph already consumed");
    if (!root->requires_grad) throw std::logic_error("backward: loss is detached from any parameter");

    // Iterative post-order DFS over nodes that require gradients.
    std::vector<Node*> order;
    std::unordered_set<Node*> visited;
    std::vector<std::pair<Node*, std::size_t>> stack{{root.get(), 0}};
    visited.insert(root.get());
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->parents.size()) {
            Node* p = node->parents[next++].get();
            if (p->requires_grad && visited.insert(p).second) stack.emplace_back(p, 0);
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }

    ensure_grad(*root)[0] += 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node* n = *it;
        if (n->backward && !n->grad.empty()) n->backward(*n);
    }
    for (Node* n : order) {
        if (!n->backward) continue;
        n->parents.clear();
        n->backward = nullptr;
        n->grad.clear();
        n->grad.shrink_to_fit();
        n->consumed = true;
    }
}

GradCheckReport grad_check(const std::function<Tensor(const std::vector<Tensor>&)>& f, std::vector<Tensor> inputs,
                           double step, double floor) {
    for (auto& t : inputs) t.zero_grad();
    auto loss = f(inputs);
    backward(loss);
    GradCheckReport report;
    for (auto& t : inputs) {
        std::vector<double> analytic(t.numel(), 0.0);
        if (t.has_grad()) std::copy(t.grad().begin(), t.grad().end(), analytic.begin());
        double worst = 0.0;
        auto vals = t.mutable_values();
        for (std::size_t i = 0; i < vals.size(); ++i) {
            const double orig = vals[i];
            double fp = 0.0;
            double fm = 0.0;
            {
                NoGradGuard guard;
                vals[i] = orig + step;
                fp = f(inputs).item();
                vals[i] = orig - step;
                fm = f(inputs).item();
            }
            vals[i] = orig;
            const double numeric = (fp - fm) / (2.0 * step);
            const double denom = std::max({std::abs(analytic[i]), std::abs(numeric), floor});
            worst = std::max(worst, std::abs(analytic[i] - numeric) / denom);
        }
        report.max_rel_error.push_back(worst);
        report.worst = std::max(report.worst, worst);
    }
    return report;
}

// ---------------------------------------------------------------------------

void adam_update(std::span<double> param, std::span<const double> grad, std::span<double> m, std::span<double> v,
                 const AdamConfig& cfg, long long t) {
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t));
    for (std::size_t i = 0; i < param.size(); ++i) {
        m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * grad[i];
        v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * grad[i] * grad[i];
        const double mhat = m[i] / bc1;
        const double vhat = v[i] / bc2;
        param[i] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
    }
}

Adam::Adam(std::vector<Parameter> params, AdamConfig cfg) : params_(std::move(params)), cfg_(cfg) {
    for (const auto& p : params_) {
        m_.emplace_back(p.tensor.numel(), 0.0);
        v_.emplace_back(p.tensor.numel(), 0.0);
    }
}

void Adam::step() {
    for (const auto& p : params_)
        if (!p.tensor.has_grad()) throw std::logic_error("adam: missing gradient for parameter '" + p.name + "'");
    ++t_;
    for (std::size_t i = 0; i < params_.size(); ++i) {
        auto& t = params_[i].tensor;
        adam_update(t.mutable_values(), t.grad(), m_[i], v_[i], cfg_, t_);
    }
}

void Adam::zero_grad() {
    for (auto& p : params_) p.tensor.zero_grad();
}

}  // namespace burstcast::ad
