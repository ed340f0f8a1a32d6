#include "attribroi/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <string>

#include "attribroi/errors.hpp"

namespace attribroi::ops {

namespace {

constexpr double kClampFloor = 1e-12;

bool want_grad(std::initializer_list<const Tensor*> inputs) {
    if (!NoGradGuard::grad_enabled()) return false;
    for (const Tensor* t : inputs) {
        if (t->requires_grad()) return true;
    }
    return false;
}

void record(const Tensor& out, std::function<void()> backprop) {
    ComputationRecord::active().push(out.node(), std::move(backprop));
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape() != b.shape()) {
        throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
    }
}

// C += A.B, A[m,k] B[k,n]; ikj order keeps the inner loop contiguous.
void mm(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
        std::size_t n) {
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t l = 0; l < k; ++l) {
            const double av = a[i * k + l];
            const double* brow = b + l * n;
            double* crow = c + i * n;
            for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

// dA += G.B^T, G[m,n] B[k,n] -> dA[m,k]; row-dot over contiguous memory.
void mm_nt(const double* g, const double* b, double* da, std::size_t m, std::size_t n,
           std::size_t k) {
    for (std::size_t i = 0; i < m; ++i) {
        const double* grow = g + i * n;
        for (std::size_t l = 0; l < k; ++l) {
            const double* brow = b + l * n;
            double s = 0.0;
            for (std::size_t j = 0; j < n; ++j) s += grow[j] * brow[j];
            da[i * k + l] += s;
        }
    }
}

// dB += A^T.G, A[m,k] G[m,n] -> dB[k,n].
void mm_tn(const double* a, const double* g, double* db, std::size_t m, std::size_t k,
           std::size_t n) {
    for (std::size_t i = 0; i < m; ++i) {
        const double* grow = g + i * n;
        for (std::size_t l = 0; l < k; ++l) {
            const double av = a[i * k + l];
            double* drow = db + l * n;
            for (std::size_t j = 0; j < n; ++j) drow[j] += av * grow[j];
        }
    }
}

void axis_extents(const Shape& shape, std::size_t axis, std::size_t& outer, std::size_t& ext,
                  std::size_t& inner) {
    outer = 1;
    inner = 1;
    for (std::size_t i = 0; i < axis; ++i) outer *= shape[i];
    ext = shape[axis];
    for (std::size_t i = axis + 1; i < shape.size(); ++i) inner *= shape[i];
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "add");
    std::vector<double> v(a.size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = a.data()[i] + b.data()[i];
    Tensor out = Tensor::from_data(a.shape(), std::move(v), want_grad({&a, &b}));
    if (out.requires_grad()) {
        auto an = a.node(), bn = b.node(), on = out.node();
        record(out, [an, bn, on] {
            for (std::size_t i = 0; i < on->grad.size(); ++i) {
                if (an->requires_grad) an->grad[i] += on->grad[i];
                if (bn->requires_grad) bn->grad[i] += on->grad[i];
            }
        });
    }
    return out;
}

Tensor sub(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "sub");
    std::vector<double> v(a.size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = a.data()[i] - b.data()[i];
    Tensor out = Tensor::from_data(a.shape(), std::move(v), want_grad({&a, &b}));
    if (out.requires_grad()) {
        auto an = a.node(), bn = b.node(), on = out.node();
        record(out, [an, bn, on] {
            for (std::size_t i = 0; i < on->grad.size(); ++i) {
                if (an->requires_grad) an->grad[i] += on->grad[i];
                if (bn->requires_grad) bn->grad[i] -= on->grad[i];
            }
        });
    }
    return out;
}

Tensor mul(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "mul");
    std::vector<double> v(a.size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = a.data()[i] * b.data()[i];
    Tensor out = Tensor::from_data(a.shape(), std::move(v), want_grad({&a, &b}));
    if (out.requires_grad()) {
        auto an = a.node(), bn = b.node(), on = out.node();
        record(out, [an, bn, on] {
            for (std::size_t i = 0; i < on->grad.size(); ++i) {
                if (an->requires_grad) an->grad[i] += on->grad[i] * bn->values[i];
                if (bn->requires_grad) bn->grad[i] += on->grad[i] * an->values[i];
            }
        });
    }
    return out;
}

Tensor div(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "div");
    std::vector<double> v(a.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
        v[i] = a.data()[i] / std::max(b.data()[i], kClampFloor);
    }
    Tensor out = Tensor::from_data(a.shape(), std::move(v), want_grad({&a, &b}));
    if (out.requires_grad()) {
        auto an = a.node(), bn = b.node(), on = out.node();
        record(out, [an, bn, on] {
            for (std::size_t i = 0; i < on->grad.size(); ++i) {
                const double denom = std::max(bn->values[i], kClampFloor);
                if (an->requires_grad) an->grad[i] += on->grad[i] / denom;
                if (bn->requires_grad && bn->values[i] >= kClampFloor) {
                    bn->grad[i] -= on->grad[i] * an->values[i] / (denom * denom);
                }
            }
        });
    }
    return out;
}

Tensor scale(const Tensor& t, double s) {
    std::vector<double> v(t.size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = t.data()[i] * s;
    Tensor out = Tensor::from_data(t.shape(), std::move(v), want_grad({&t}));
    if (out.requires_grad()) {
        auto tn = t.node(), on = out.node();
        record(out, [tn, on, s] {
            for (std::size_t i = 0; i < on->grad.size(); ++i) tn->grad[i] += on->grad[i] * s;
        });
    }
    return out;
}

Tensor relu(const Tensor& t) {
    std::vector<double> v(t.size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = t.data()[i] > 0.0 ? t.data()[i] : 0.0;
    Tensor out = Tensor::from_data(t.shape(), std::move(v), want_grad({&t}));
    if (out.requires_grad()) {
        auto tn = t.node(), on = out.node();
        record(out, [tn, on] {
            for (std::size_t i = 0; i < on->grad.size(); ++i) {
                if (tn->values[i] > 0.0) tn->grad[i] += on->grad[i];
            }
        });
    }
    return out;
}

Tensor gelu(const Tensor& t) {
    static const double kRoot = std::sqrt(2.0 / M_PI);
    constexpr double kCubic = 0.044715;
    std::vector<double> v(t.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
        const double x = t.data()[i];
        v[i] = 0.5 * x * (1.0 + std::tanh(kRoot * (x + kCubic * x * x * x)));
    }
    Tensor out = Tensor::from_data(t.shape(), std::move(v), want_grad({&t}));
    if (out.requires_grad()) {
        auto tn = t.node(), on = out.node();
        record(out, [tn, on] {
            for (std::size_t i = 0; i < on->grad.size(); ++i) {
                const double x = tn->values[i];
                const double th = std::tanh(kRoot * (x + kCubic * x * x * x));
                const double d = 0.5 * (1.0 + th) +
                                 0.5 * x * (1.0 - th * th) * kRoot * (1.0 + 3.0 * kCubic * x * x);
                tn->grad[i] += on->grad[i] * d;
            }
        });
    }
    return out;
}

Tensor log(const Tensor& t) {
    std::vector<double> v(t.size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = std::log(std::max(t.data()[i], kClampFloor));
    Tensor out = Tensor::from_data(t.shape(), std::move(v), want_grad({&t}));
    if (out.requires_grad()) {
        auto tn = t.node(), on = out.node();
        record(out, [tn, on] {
            for (std::size_t i = 0; i < on->grad.size(); ++i) {
                if (tn->values[i] >= kClampFloor) {
                    tn->grad[i] += on->grad[i] / tn->values[i];
                }
            }
        });
    }
    return out;
}

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.rank() != 2 || b.rank() != 2 || a.shape()[1] != b.shape()[0]) {
        throw ShapeError("matmul: incompatible shapes " + shape_str(a.shape()) + " x " +
                         shape_str(b.shape()));
    }
    const std::size_t m = a.shape()[0], k = a.shape()[1], n = b.shape()[1];
    std::vector<double> v(m * n, 0.0);
    mm(a.data().data(), b.data().data(), v.data(), m, k, n);
    Tensor out = Tensor::from_data({m, n}, std::move(v), want_grad({&a, &b}));
    if (out.requires_grad()) {
        auto an = a.node(), bn = b.node(), on = out.node();
        record(out, [an, bn, on, m, k, n] {
            if (an->requires_grad) {
                mm_nt(on->grad.data(), bn->values.data(), an->grad.data(), m, n, k);
            }
            if (bn->requires_grad) {
                mm_tn(an->values.data(), on->grad.data(), bn->grad.data(), m, k, n);
            }
        });
    }
    return out;
}

Tensor add_bias(const Tensor& x, const Tensor& bias) {
    if (x.rank() != 2 || bias.rank() != 1 || bias.shape()[0] != x.shape()[1]) {
        throw ShapeError("add_bias: shapes " + shape_str(x.shape()) + " and " +
                         shape_str(bias.shape()) + " do not align");
    }
    const std::size_t m = x.shape()[0], n = x.shape()[1];
    std::vector<double> v(m * n);
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) v[i * n + j] = x.data()[i * n + j] + bias.data()[j];
    }
    Tensor out = Tensor::from_data({m, n}, std::move(v), want_grad({&x, &bias}));
    if (out.requires_grad()) {
        auto xn = x.node(), bn = bias.node(), on = out.node();
        record(out, [xn, bn, on, m, n] {
            for (std::size_t i = 0; i < m; ++i) {
                for (std::size_t j = 0; j < n; ++j) {
                    const double g = on->grad[i * n + j];
                    if (xn->requires_grad) xn->grad[i * n + j] += g;
                    if (bn->requires_grad) bn->grad[j] += g;
                }
            }
        });
    }
    return out;
}

Tensor transpose(const Tensor& t) {
    if (t.rank() != 2) {
        throw ShapeError("transpose: rank-2 tensor required, got " + shape_str(t.shape()));
    }
    const std::size_t m = t.shape()[0], n = t.shape()[1];
    std::vector<double> v(m * n);
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) v[j * m + i] = t.data()[i * n + j];
    }
    Tensor out = Tensor::from_data({n, m}, std::move(v), want_grad({&t}));
    if (out.requires_grad()) {
        auto tn = t.node(), on = out.node();
        record(out, [tn, on, m, n] {
            for (std::size_t i = 0; i < m; ++i) {
                for (std::size_t j = 0; j < n; ++j) tn->grad[i * n + j] += on->grad[j * m + i];
            }
        });
    }
    return out;
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps) {
    if (x.rank() == 0) throw ShapeError("layer_norm: empty shape");
    const std::size_t d = x.shape().back();
    if (gamma.shape() != Shape{d} || beta.shape() != Shape{d}) {
        throw ShapeError("layer_norm: gamma/beta must be [" + std::to_string(d) + "], got " +
                         shape_str(gamma.shape()) + " and " + shape_str(beta.shape()));
    }
    const std::size_t outer = x.size() / d;
    std::vector<double> v(x.size());
    std::vector<double> inv_std(outer), mu(outer);
    for (std::size_t o = 0; o < outer; ++o) {
        const double* row = x.data().data() + o * d;
        double m = 0.0;
        for (std::size_t j = 0; j < d; ++j) m += row[j];
        m /= static_cast<double>(d);
        double var = 0.0;
        for (std::size_t j = 0; j < d; ++j) var += (row[j] - m) * (row[j] - m);
        var /= static_cast<double>(d);
        const double inv = 1.0 / std::sqrt(var + eps);
        mu[o] = m;
        inv_std[o] = inv;
        for (std::size_t j = 0; j < d; ++j) {
            v[o * d + j] = (row[j] - m) * inv * gamma.data()[j] + beta.data()[j];
        }
    }
    Tensor out = Tensor::from_data(x.shape(), std::move(v), want_grad({&x, &gamma, &beta}));
    if (out.requires_grad()) {
        auto xn = x.node(), gn = gamma.node(), bn = beta.node(), on = out.node();
        record(out, [xn, gn, bn, on, mu = std::move(mu), inv_std = std::move(inv_std), outer, d] {
            std::vector<double> xhat(d), dxhat(d);
            for (std::size_t o = 0; o < outer; ++o) {
                const double* row = xn->values.data() + o * d;
                const double* g = on->grad.data() + o * d;
                double m1 = 0.0, m2 = 0.0;
                for (std::size_t j = 0; j < d; ++j) {
                    xhat[j] = (row[j] - mu[o]) * inv_std[o];
                    dxhat[j] = g[j] * gn->values[j];
                    m1 += dxhat[j];
                    m2 += dxhat[j] * xhat[j];
                    if (gn->requires_grad) gn->grad[j] += g[j] * xhat[j];
                    if (bn->requires_grad) bn->grad[j] += g[j];
                }
                if (!xn->requires_grad) continue;
                m1 /= static_cast<double>(d);
                m2 /= static_cast<double>(d);
                for (std::size_t j = 0; j < d; ++j) {
                    xn->grad[o * d + j] += inv_std[o] * (dxhat[j] - m1 - xhat[j] * m2);
                }
            }
        });
    }
    return out;
}

Tensor softmax(const Tensor& t, std::size_t axis) {
    if (axis >= t.rank()) {
        throw ShapeError("softmax: axis " + std::to_string(axis) + " out of range for shape " +
                         shape_str(t.shape()));
    }
    for (double x : t.data()) {
        if (!std::isfinite(x)) throw DomainError("softmax: non-finite input entry");
    }
    std::size_t outer, ext, inner;
    axis_extents(t.shape(), axis, outer, ext, inner);
    std::vector<double> v(t.size());
    for (std::size_t o = 0; o < outer; ++o) {
        for (std::size_t i = 0; i < inner; ++i) {
            double mx = -std::numeric_limits<double>::infinity();
            for (std::size_t a = 0; a < ext; ++a) {
                mx = std::max(mx, t.data()[(o * ext + a) * inner + i]);
            }
            double z = 0.0;
            for (std::size_t a = 0; a < ext; ++a) {
                const std::size_t idx = (o * ext + a) * inner + i;
                v[idx] = std::exp(t.data()[idx] - mx);
                z += v[idx];
            }
            for (std::size_t a = 0; a < ext; ++a) v[(o * ext + a) * inner + i] /= z;
        }
    }
    Tensor out = Tensor::from_data(t.shape(), std::move(v), want_grad({&t}));
    if (out.requires_grad()) {
        auto tn = t.node(), on = out.node();
        record(out, [tn, on, outer, ext, inner] {
            for (std::size_t o = 0; o < outer; ++o) {
                for (std::size_t i = 0; i < inner; ++i) {
                    double dot = 0.0;
                    for (std::size_t a = 0; a < ext; ++a) {
                        const std::size_t idx = (o * ext + a) * inner + i;
                        dot += on->grad[idx] * on->values[idx];
                    }
                    for (std::size_t a = 0; a < ext; ++a) {
                        const std::size_t idx = (o * ext + a) * inner + i;
                        tn->grad[idx] += on->values[idx] * (on->grad[idx] - dot);
                    }
                }
            }
        });
    }
    return out;
}

Tensor sum(const Tensor& t) {
    double s = 0.0;
    for (double x : t.data()) s += x;
    Tensor out = Tensor::from_data({1}, {s}, want_grad({&t}));
    if (out.requires_grad()) {
        auto tn = t.node(), on = out.node();
        record(out, [tn, on] {
            for (double& g : tn->grad) g += on->grad[0];
        });
    }
    return out;
}

Tensor mean(const Tensor& t) {
    double s = 0.0;
    for (double x : t.data()) s += x;
    const double scale_factor = 1.0 / static_cast<double>(t.size());
    Tensor out = Tensor::from_data({1}, {s * scale_factor}, want_grad({&t}));
    if (out.requires_grad()) {
        auto tn = t.node(), on = out.node();
        record(out, [tn, on, scale_factor] {
            for (double& g : tn->grad) g += on->grad[0] * scale_factor;
        });
    }
    return out;
}

Tensor mean_axis(const Tensor& t, std::size_t axis) {
    if (axis >= t.rank()) {
        throw ShapeError("mean_axis: axis " + std::to_string(axis) + " out of range for shape " +
                         shape_str(t.shape()));
    }
    std::size_t outer, ext, inner;
    axis_extents(t.shape(), axis, outer, ext, inner);
    Shape out_shape;
    for (std::size_t i = 0; i < t.rank(); ++i) {
        if (i != axis) out_shape.push_back(t.shape()[i]);
    }
    if (out_shape.empty()) out_shape = {1};
    std::vector<double> v(outer * inner, 0.0);
    const double f = 1.0 / static_cast<double>(ext);
    for (std::size_t o = 0; o < outer; ++o) {
        for (std::size_t a = 0; a < ext; ++a) {
            for (std::size_t i = 0; i < inner; ++i) {
                v[o * inner + i] += t.data()[(o * ext + a) * inner + i] * f;
            }
        }
    }
    Tensor out = Tensor::from_data(out_shape, std::move(v), want_grad({&t}));
    if (out.requires_grad()) {
        auto tn = t.node(), on = out.node();
        record(out, [tn, on, outer, ext, inner, f] {
            for (std::size_t o = 0; o < outer; ++o) {
                for (std::size_t a = 0; a < ext; ++a) {
                    for (std::size_t i = 0; i < inner; ++i) {
                        tn->grad[(o * ext + a) * inner + i] += on->grad[o * inner + i] * f;
                    }
                }
            }
        });
    }
    return out;
}

Tensor reshape(const Tensor& t, const Shape& shape) {
    if (shape_numel(shape) != t.size()) {
        throw ShapeError("reshape: cannot view " + shape_str(t.shape()) + " as " +
                         shape_str(shape));
    }
    Tensor out = Tensor::from_data(shape, std::vector<double>(t.data().begin(), t.data().end()),
                                   want_grad({&t}));
    if (out.requires_grad()) {
        auto tn = t.node(), on = out.node();
        record(out, [tn, on] {
            for (std::size_t i = 0; i < on->grad.size(); ++i) tn->grad[i] += on->grad[i];
        });
    }
    return out;
}

Tensor gather(const Tensor& t, std::vector<std::size_t> indices, const Shape& out_shape) {
    if (indices.size() != shape_numel(out_shape)) {
        throw ShapeError("gather: " + std::to_string(indices.size()) +
                         " indices for output shape " + shape_str(out_shape));
    }
    for (std::size_t idx : indices) {
        if (idx >= t.size()) {
            throw IndexError("gather: flat index " + std::to_string(idx) +
                             " out of range for tensor of " + std::to_string(t.size()) +
                             " elements");
        }
    }
    std::vector<double> v(indices.size());
    for (std::size_t j = 0; j < indices.size(); ++j) v[j] = t.data()[indices[j]];
    Tensor out = Tensor::from_data(out_shape, std::move(v), want_grad({&t}));
    if (out.requires_grad()) {
        auto tn = t.node(), on = out.node();
        record(out, [tn, on, idx = std::move(indices)] {
            for (std::size_t j = 0; j < idx.size(); ++j) tn->grad[idx[j]] += on->grad[j];
        });
    }
    return out;
}

Tensor slice_rows(const Tensor& t, std::size_t start, std::size_t count) {
    if (t.rank() != 2) {
        throw ShapeError("slice_rows: rank-2 tensor required, got " + shape_str(t.shape()));
    }
    if (count == 0 || start + count > t.shape()[0]) {
        throw IndexError("slice_rows: rows [" + std::to_string(start) + ", " +
                         std::to_string(start + count) + ") out of range for " +
                         shape_str(t.shape()));
    }
    const std::size_t n = t.shape()[1];
    std::vector<double> v(t.data().begin() + static_cast<std::ptrdiff_t>(start * n),
                          t.data().begin() + static_cast<std::ptrdiff_t>((start + count) * n));
    Tensor out = Tensor::from_data({count, n}, std::move(v), want_grad({&t}));
    if (out.requires_grad()) {
        auto tn = t.node(), on = out.node();
        record(out, [tn, on, start, n] {
            for (std::size_t j = 0; j < on->grad.size(); ++j) tn->grad[start * n + j] += on->grad[j];
        });
    }
    return out;
}

Tensor concat(const std::vector<Tensor>& parts, std::size_t axis) {
    if (parts.empty()) throw ContractError("concat: no tensors given");
    if (axis > 1) throw ShapeError("concat: axis must be 0 or 1");
    const std::size_t fixed_axis = 1 - axis;
    const std::size_t fixed = parts[0].rank() == 2 ? parts[0].shape()[fixed_axis] : 0;
    std::size_t total = 0;
    bool rg = false;
    for (const Tensor& p : parts) {
        if (p.rank() != 2 || p.shape()[fixed_axis] != fixed || fixed == 0) {
            throw ShapeError("concat: incompatible part shape " + shape_str(p.shape()));
        }
        total += p.shape()[axis];
        rg = rg || p.requires_grad();
    }
    rg = rg && NoGradGuard::grad_enabled();
    Shape out_shape = axis == 0 ? Shape{total, fixed} : Shape{fixed, total};
    std::vector<double> v(total * fixed);
    std::size_t offset = 0;
    for (const Tensor& p : parts) {
        const std::size_t pc = p.shape()[axis];
        if (axis == 0) {
            std::copy(p.data().begin(), p.data().end(), v.begin() + static_cast<std::ptrdiff_t>(offset * fixed));
        } else {
            for (std::size_t i = 0; i < fixed; ++i) {
                for (std::size_t j = 0; j < pc; ++j) {
                    v[i * total + offset + j] = p.data()[i * pc + j];
                }
            }
        }
        offset += pc;
    }
    Tensor out = Tensor::from_data(out_shape, std::move(v), rg);
    if (out.requires_grad()) {
        std::vector<std::shared_ptr<TensorNode>> nodes;
        nodes.reserve(parts.size());
        for (const Tensor& p : parts) nodes.push_back(p.node());
        auto on = out.node();
        record(out, [nodes = std::move(nodes), on, axis, fixed, total] {
            std::size_t offset = 0;
            for (const auto& pn : nodes) {
                const std::size_t pc = axis == 0 ? pn->shape[0] : pn->shape[1];
                if (pn->requires_grad) {
                    if (axis == 0) {
                        for (std::size_t j = 0; j < pc * fixed; ++j) {
                            pn->grad[j] += on->grad[offset * fixed + j];
                        }
                    } else {
                        for (std::size_t i = 0; i < fixed; ++i) {
                            for (std::size_t j = 0; j < pc; ++j) {
                                pn->grad[i * pc + j] += on->grad[i * total + offset + j];
                            }
                        }
                    }
                }
                offset += pc;
            }
        });
    }
    return out;
}

Tensor upsample_bilinear(const Tensor& t, std::size_t out_h, std::size_t out_w) {
    if (t.rank() != 2) {
        throw ShapeError("upsample_bilinear: rank-2 tensor required, got " +
                         shape_str(t.shape()));
    }
    if (out_h == 0 || out_w == 0) throw ShapeError("upsample_bilinear: zero output extent");
    const std::size_t h = t.shape()[0], w = t.shape()[1];
    // Align-corners sampling so source corners map exactly onto output corners.
    auto src = [](std::size_t i, std::size_t in, std::size_t out) {
        if (out <= 1 || in <= 1) return 0.0;
        return static_cast<double>(i) * static_cast<double>(in - 1) /
               static_cast<double>(out - 1);
    };
    std::vector<double> v(out_h * out_w);
    for (std::size_t i = 0; i < out_h; ++i) {
        const double sy = src(i, h, out_h);
        const std::size_t y0 = static_cast<std::size_t>(sy);
        const std::size_t y1 = std::min(y0 + 1, h - 1);
        const double wy = sy - static_cast<double>(y0);
        for (std::size_t j = 0; j < out_w; ++j) {
            const double sx = src(j, w, out_w);
            const std::size_t x0 = static_cast<std::size_t>(sx);
            const std::size_t x1 = std::min(x0 + 1, w - 1);
            const double wx = sx - static_cast<double>(x0);
            v[i * out_w + j] = (1.0 - wy) * (1.0 - wx) * t.data()[y0 * w + x0] +
                               (1.0 - wy) * wx * t.data()[y0 * w + x1] +
                               wy * (1.0 - wx) * t.data()[y1 * w + x0] +
                               wy * wx * t.data()[y1 * w + x1];
        }
    }
    Tensor out = Tensor::from_data({out_h, out_w}, std::move(v), want_grad({&t}));
    if (out.requires_grad()) {
        auto tn = t.node(), on = out.node();
        record(out, [tn, on, h, w, out_h, out_w, src] {
            for (std::size_t i = 0; i < out_h; ++i) {
                const double sy = src(i, h, out_h);
                const std::size_t y0 = static_cast<std::size_t>(sy);
                const std::size_t y1 = std::min(y0 + 1, h - 1);
                const double wy = sy - static_cast<double>(y0);
                for (std::size_t j = 0; j < out_w; ++j) {
                    const double sx = src(j, w, out_w);
                    const std::size_t x0 = static_cast<std::size_t>(sx);
                    const std::size_t x1 = std::min(x0 + 1, w - 1);
                    const double wx = sx - static_cast<double>(x0);
                    const double g = on->grad[i * out_w + j];
                    tn->grad[y0 * w + x0] += g * (1.0 - wy) * (1.0 - wx);
                    tn->grad[y0 * w + x1] += g * (1.0 - wy) * wx;
                    tn->grad[y1 * w + x0] += g * wy * (1.0 - wx);
                    tn->grad[y1 * w + x1] += g * wy * wx;
                }
            }
        });
    }
    return out;
}

}  // namespace attribroi::ops
