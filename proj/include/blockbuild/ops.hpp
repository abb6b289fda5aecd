#pragma once

#include "blockbuild/tensor.hpp"

#include <cmath>
#include <vector>

namespace blockbuild {

struct TargetOutOfRange : DataError {
    using DataError::DataError;
};

namespace detail {

template <class Real>
TensorT<Real> op_result(std::vector<int> shape, std::vector<Real> data,
                        std::initializer_list<TensorT<Real>> parents) {
    TensorT<Real> out = TensorT<Real>::from_data(std::move(shape), std::move(data));
    bool needs_grad = false;
    for (const TensorT<Real>& p : parents) needs_grad = needs_grad || p.requires_grad();
    if (needs_grad) {
        out.set_requires_grad(true);
        for (const TensorT<Real>& p : parents) out.node()->parents.push_back(p.node());
    }
    return out;
}

template <class Real>
void require_2d(const TensorT<Real>& t, const char* who) {
    if (t.shape().size() != 2) {
        throw ShapeMismatch(std::string(who) + ": expected 2-d tensor, got " +
                            shape_string(t.shape()));
    }
}

// Rows/width view for ops applied over the last axis of an n-d tensor.
template <class Real>
std::pair<std::int64_t, int> row_view(const TensorT<Real>& t, const char* who) {
    if (t.shape().empty()) throw ShapeMismatch(std::string(who) + ": scalar input");
    const int width = t.shape().back();
    return {t.numel() / width, width};
}

} // namespace detail

// ---------------------------------------------------------------------------
// Elementwise and structural ops
// ---------------------------------------------------------------------------

template <class Real>
TensorT<Real> add(const TensorT<Real>& a, const TensorT<Real>& b) {
    if (a.shape() != b.shape()) {
        throw ShapeMismatch("add: " + shape_string(a.shape()) + " vs " + shape_string(b.shape()));
    }
    std::vector<Real> data(a.data());
    for (std::size_t i = 0; i < data.size(); ++i) data[i] += b.data()[i];
    TensorT<Real> out = detail::op_result<Real>(a.shape(), std::move(data), {a, b});
    if (out.requires_grad()) {
        auto an = a.node(), bn = b.node();
        auto* on = out.node().get();
        out.node()->backward_fn = [an, bn, on] {
            if (an->requires_grad) {
                for (std::size_t i = 0; i < on->grad.size(); ++i) an->grad[i] += on->grad[i];
            }
            if (bn->requires_grad) {
                for (std::size_t i = 0; i < on->grad.size(); ++i) bn->grad[i] += on->grad[i];
            }
        };
    }
    return out;
}

/// [n, d] + [d], broadcast over rows.
template <class Real>
TensorT<Real> add_row(const TensorT<Real>& a, const TensorT<Real>& row) {
    const auto [n, d] = detail::row_view(a, "add_row");
    if (row.shape().size() != 1 || row.shape()[0] != d) {
        throw ShapeMismatch("add_row: row " + shape_string(row.shape()) + " does not match width " +
                            std::to_string(d));
    }
    std::vector<Real> data(a.data());
    for (std::int64_t r = 0; r < n; ++r) {
        for (int j = 0; j < d; ++j) data[static_cast<std::size_t>(r * d + j)] += row.data()[static_cast<std::size_t>(j)];
    }
    TensorT<Real> out = detail::op_result<Real>(a.shape(), std::move(data), {a, row});
    if (out.requires_grad()) {
        auto an = a.node(), rn = row.node();
        auto* on = out.node().get();
        const std::int64_t nn = n;
        const int dd = d;
        out.node()->backward_fn = [an, rn, on, nn, dd] {
            if (an->requires_grad) {
                for (std::size_t i = 0; i < on->grad.size(); ++i) an->grad[i] += on->grad[i];
            }
            if (rn->requires_grad) {
                for (std::int64_t r = 0; r < nn; ++r) {
                    for (int j = 0; j < dd; ++j) {
                        rn->grad[static_cast<std::size_t>(j)] += on->grad[static_cast<std::size_t>(r * dd + j)];
                    }
                }
            }
        };
    }
    return out;
}

template <class Real>
TensorT<Real> scale(const TensorT<Real>& a, Real s) {
    std::vector<Real> data(a.data());
    for (Real& v : data) v *= s;
    TensorT<Real> out = detail::op_result<Real>(a.shape(), std::move(data), {a});
    if (out.requires_grad()) {
        auto an = a.node();
        auto* on = out.node().get();
        out.node()->backward_fn = [an, on, s] {
            for (std::size_t i = 0; i < on->grad.size(); ++i) an->grad[i] += s * on->grad[i];
        };
    }
    return out;
}

/// Same data, new shape; numel must match.
template <class Real>
TensorT<Real> reshape(const TensorT<Real>& a, std::vector<int> shape) {
    if (shape_numel(shape) != a.numel()) {
        throw ShapeMismatch("reshape: " + shape_string(a.shape()) + " to " + shape_string(shape));
    }
    TensorT<Real> out = detail::op_result<Real>(std::move(shape), std::vector<Real>(a.data()), {a});
    if (out.requires_grad()) {
        auto an = a.node();
        auto* on = out.node().get();
        out.node()->backward_fn = [an, on] {
            for (std::size_t i = 0; i < on->grad.size(); ++i) an->grad[i] += on->grad[i];
        };
    }
    return out;
}

template <class Real>
TensorT<Real> sum(const TensorT<Real>& a) {
    Real s = 0;
    for (Real v : a.data()) s += v;
    TensorT<Real> out = detail::op_result<Real>({1}, {s}, {a});
    if (out.requires_grad()) {
        auto an = a.node();
        auto* on = out.node().get();
        out.node()->backward_fn = [an, on] {
            for (std::size_t i = 0; i < an->grad.size(); ++i) an->grad[i] += on->grad[0];
        };
    }
    return out;
}

template <class Real>
TensorT<Real> mean(const TensorT<Real>& a) {
    return scale(sum(a), Real(1) / static_cast<Real>(a.numel()));
}

// ---------------------------------------------------------------------------
// Matrix products
// ---------------------------------------------------------------------------

template <class Real>
TensorT<Real> matmul(const TensorT<Real>& a, const TensorT<Real>& b) {
    detail::require_2d(a, "matmul");
    detail::require_2d(b, "matmul");
    const int m = a.rows(), k = a.cols(), n = b.cols();
    if (b.rows() != k) {
        throw ShapeMismatch("matmul: " + shape_string(a.shape()) + " x " + shape_string(b.shape()));
    }
    std::vector<Real> data(static_cast<std::size_t>(m) * n, Real(0));
    const Real* ap = a.data().data();
    const Real* bp = b.data().data();
    for (int i = 0; i < m; ++i) {
        for (int l = 0; l < k; ++l) {
            const Real av = ap[i * k + l];
            const Real* brow = bp + static_cast<std::size_t>(l) * n;
            Real* crow = data.data() + static_cast<std::size_t>(i) * n;
            for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
    TensorT<Real> out = detail::op_result<Real>({m, n}, std::move(data), {a, b});
    if (out.requires_grad()) {
        auto an = a.node(), bn = b.node();
        auto* on = out.node().get();
        out.node()->backward_fn = [an, bn, on, m, k, n] {
            const Real* g = on->grad.data();
            if (an->requires_grad) {
                // dA = dC B^T
                const Real* bp2 = bn->data.data();
                for (int i = 0; i < m; ++i) {
                    for (int l = 0; l < k; ++l) {
                        Real acc = 0;
                        const Real* grow = g + static_cast<std::size_t>(i) * n;
                        const Real* brow = bp2 + static_cast<std::size_t>(l) * n;
                        for (int j = 0; j < n; ++j) acc += grow[j] * brow[j];
                        an->grad[static_cast<std::size_t>(i) * k + l] += acc;
                    }
                }
            }
            if (bn->requires_grad) {
                // dB = A^T dC
                const Real* ap2 = an->data.data();
                for (int i = 0; i < m; ++i) {
                    const Real* grow = g + static_cast<std::size_t>(i) * n;
                    for (int l = 0; l < k; ++l) {
                        const Real av = ap2[static_cast<std::size_t>(i) * k + l];
                        Real* brow = bn->grad.data() + static_cast<std::size_t>(l) * n;
                        for (int j = 0; j < n; ++j) brow[j] += av * grow[j];
                    }
                }
            }
        };
    }
    return out;
}

/// C = A B^T for A [m,k], B [n,k].
template <class Real>
TensorT<Real> matmul_nt(const TensorT<Real>& a, const TensorT<Real>& b) {
    detail::require_2d(a, "matmul_nt");
    detail::require_2d(b, "matmul_nt");
    const int m = a.rows(), k = a.cols(), n = b.rows();
    if (b.cols() != k) {
        throw ShapeMismatch("matmul_nt: " + shape_string(a.shape()) + " x " +
                            shape_string(b.shape()) + "^T");
    }
    std::vector<Real> data(static_cast<std::size_t>(m) * n, Real(0));
    for (int i = 0; i < m; ++i) {
        const Real* arow = a.data().data() + static_cast<std::size_t>(i) * k;
        for (int j = 0; j < n; ++j) {
            const Real* brow = b.data().data() + static_cast<std::size_t>(j) * k;
            Real acc = 0;
            for (int l = 0; l < k; ++l) acc += arow[l] * brow[l];
            data[static_cast<std::size_t>(i) * n + j] = acc;
        }
    }
    TensorT<Real> out = detail::op_result<Real>({m, n}, std::move(data), {a, b});
    if (out.requires_grad()) {
        auto an = a.node(), bn = b.node();
        auto* on = out.node().get();
        out.node()->backward_fn = [an, bn, on, m, k, n] {
            const Real* g = on->grad.data();
            if (an->requires_grad) {
                // dA = dC B
                for (int i = 0; i < m; ++i) {
                    const Real* grow = g + static_cast<std::size_t>(i) * n;
                    Real* arow = an->grad.data() + static_cast<std::size_t>(i) * k;
                    for (int j = 0; j < n; ++j) {
                        const Real gv = grow[j];
                        const Real* brow = bn->data.data() + static_cast<std::size_t>(j) * k;
                        for (int l = 0; l < k; ++l) arow[l] += gv * brow[l];
                    }
                }
            }
            if (bn->requires_grad) {
                // dB = dC^T A
                for (int i = 0; i < m; ++i) {
                    const Real* grow = g + static_cast<std::size_t>(i) * n;
                    const Real* arow = an->data.data() + static_cast<std::size_t>(i) * k;
                    for (int j = 0; j < n; ++j) {
                        const Real gv = grow[j];
                        Real* brow = bn->grad.data() + static_cast<std::size_t>(j) * k;
                        for (int l = 0; l < k; ++l) brow[l] += gv * arow[l];
                    }
                }
            }
        };
    }
    return out;
}

// ---------------------------------------------------------------------------
// Row selection
// ---------------------------------------------------------------------------

/// Embedding-style lookup: out[i] = table[indices[i]].
template <class Real>
TensorT<Real> gather_rows(const TensorT<Real>& table, const std::vector<int>& indices) {
    detail::require_2d(table, "gather_rows");
    const int v = table.rows(), d = table.cols();
    std::vector<Real> data(indices.size() * static_cast<std::size_t>(d));
    for (std::size_t i = 0; i < indices.size(); ++i) {
        const int idx = indices[i];
        if (idx < 0 || idx >= v) {
            throw ShapeMismatch("gather_rows: index " + std::to_string(idx) + " out of [0, " +
                                std::to_string(v) + ")");
        }
        const Real* src = table.data().data() + static_cast<std::size_t>(idx) * d;
        std::copy(src, src + d, data.begin() + static_cast<std::ptrdiff_t>(i * d));
    }
    TensorT<Real> out = detail::op_result<Real>({static_cast<int>(indices.size()), d},
                                                std::move(data), {table});
    if (out.requires_grad()) {
        auto tn = table.node();
        auto* on = out.node().get();
        auto idxs = indices;
        out.node()->backward_fn = [tn, on, idxs, d] {
            for (std::size_t i = 0; i < idxs.size(); ++i) {
                Real* dst = tn->grad.data() + static_cast<std::size_t>(idxs[i]) * d;
                const Real* src = on->grad.data() + i * static_cast<std::size_t>(d);
                for (int j = 0; j < d; ++j) dst[j] += src[j];
            }
        };
    }
    return out;
}

template <class Real>
TensorT<Real> slice_rows(const TensorT<Real>& a, int start, int len) {
    detail::require_2d(a, "slice_rows");
    const int n = a.rows(), d = a.cols();
    if (start < 0 || len <= 0 || start + len > n) {
        throw ShapeMismatch("slice_rows: [" + std::to_string(start) + ", " +
                            std::to_string(start + len) + ") out of " + std::to_string(n));
    }
    std::vector<Real> data(a.data().begin() + static_cast<std::ptrdiff_t>(start) * d,
                           a.data().begin() + static_cast<std::ptrdiff_t>(start + len) * d);
    TensorT<Real> out = detail::op_result<Real>({len, d}, std::move(data), {a});
    if (out.requires_grad()) {
        auto an = a.node();
        auto* on = out.node().get();
        out.node()->backward_fn = [an, on, start, d] {
            Real* dst = an->grad.data() + static_cast<std::size_t>(start) * d;
            for (std::size_t i = 0; i < on->grad.size(); ++i) dst[i] += on->grad[i];
        };
    }
    return out;
}

template <class Real>
TensorT<Real> slice_cols(const TensorT<Real>& a, int start, int len) {
    detail::require_2d(a, "slice_cols");
    const int n = a.rows(), d = a.cols();
    if (start < 0 || len <= 0 || start + len > d) {
        throw ShapeMismatch("slice_cols: [" + std::to_string(start) + ", " +
                            std::to_string(start + len) + ") out of " + std::to_string(d));
    }
    std::vector<Real> data(static_cast<std::size_t>(n) * len);
    for (int r = 0; r < n; ++r) {
        const Real* src = a.data().data() + static_cast<std::size_t>(r) * d + start;
        std::copy(src, src + len, data.begin() + static_cast<std::ptrdiff_t>(r) * len);
    }
    TensorT<Real> out = detail::op_result<Real>({n, len}, std::move(data), {a});
    if (out.requires_grad()) {
        auto an = a.node();
        auto* on = out.node().get();
        out.node()->backward_fn = [an, on, n, d, start, len] {
            for (int r = 0; r < n; ++r) {
                Real* dst = an->grad.data() + static_cast<std::size_t>(r) * d + start;
                const Real* src = on->grad.data() + static_cast<std::size_t>(r) * len;
                for (int j = 0; j < len; ++j) dst[j] += src[j];
            }
        };
    }
    return out;
}

template <class Real>
TensorT<Real> concat_cols(const std::vector<TensorT<Real>>& parts) {
    if (parts.empty()) throw ShapeMismatch("concat_cols: no inputs");
    const int n = parts.front().rows();
    int total = 0;
    bool needs_grad = false;
    for (const auto& p : parts) {
        detail::require_2d(p, "concat_cols");
        if (p.rows() != n) throw ShapeMismatch("concat_cols: row counts differ");
        total += p.cols();
        needs_grad = needs_grad || p.requires_grad();
    }
    std::vector<Real> data(static_cast<std::size_t>(n) * total);
    int off = 0;
    for (const auto& p : parts) {
        const int d = p.cols();
        for (int r = 0; r < n; ++r) {
            const Real* src = p.data().data() + static_cast<std::size_t>(r) * d;
            std::copy(src, src + d, data.begin() + static_cast<std::ptrdiff_t>(r) * total + off);
        }
        off += d;
    }
    TensorT<Real> out = TensorT<Real>::from_data({n, total}, std::move(data));
    if (needs_grad) {
        out.set_requires_grad(true);
        for (const auto& p : parts) out.node()->parents.push_back(p.node());
        auto* on = out.node().get();
        std::vector<int> widths;
        for (const auto& p : parts) widths.push_back(p.cols());
        out.node()->backward_fn = [on, widths, n, total] {
            int off2 = 0;
            for (std::size_t pi = 0; pi < widths.size(); ++pi) {
                auto& pn = on->parents[pi];
                const int d = widths[pi];
                if (pn->requires_grad) {
                    for (int r = 0; r < n; ++r) {
                        Real* dst = pn->grad.data() + static_cast<std::size_t>(r) * d;
                        const Real* src = on->grad.data() + static_cast<std::size_t>(r) * total + off2;
                        for (int j = 0; j < d; ++j) dst[j] += src[j];
                    }
                }
                off2 += d;
            }
        };
    }
    return out;
}

// ---------------------------------------------------------------------------
// Nonlinearities and normalization
// ---------------------------------------------------------------------------

/// Max-subtracted softmax over the last axis.
template <class Real>
TensorT<Real> softmax(const TensorT<Real>& a) {
    const auto [n, d] = detail::row_view(a, "softmax");
    std::vector<Real> data(a.data().size());
    for (std::int64_t r = 0; r < n; ++r) {
        const Real* x = a.data().data() + static_cast<std::size_t>(r) * d;
        Real* y = data.data() + static_cast<std::size_t>(r) * d;
        Real mx = x[0];
        for (int j = 1; j < d; ++j) mx = std::max(mx, x[j]);
        Real denom = 0;
        for (int j = 0; j < d; ++j) {
            y[j] = std::exp(x[j] - mx);
            denom += y[j];
        }
        for (int j = 0; j < d; ++j) y[j] /= denom;
    }
    TensorT<Real> out = detail::op_result<Real>(a.shape(), std::move(data), {a});
    if (out.requires_grad()) {
        auto an = a.node();
        auto* on = out.node().get();
        const std::int64_t nn = n;
        const int dd = d;
        out.node()->backward_fn = [an, on, nn, dd] {
            for (std::int64_t r = 0; r < nn; ++r) {
                const Real* y = on->data.data() + static_cast<std::size_t>(r) * dd;
                const Real* g = on->grad.data() + static_cast<std::size_t>(r) * dd;
                Real dot = 0;
                for (int j = 0; j < dd; ++j) dot += y[j] * g[j];
                Real* dx = an->grad.data() + static_cast<std::size_t>(r) * dd;
                for (int j = 0; j < dd; ++j) dx[j] += y[j] * (g[j] - dot);
            }
        };
    }
    return out;
}

/// Per-row normalization with population variance, then affine.
template <class Real>
TensorT<Real> layer_norm(const TensorT<Real>& x, const TensorT<Real>& gain,
                         const TensorT<Real>& bias, Real eps = Real(1e-5)) {
    const auto [n, d] = detail::row_view(x, "layer_norm");
    if (gain.shape().size() != 1 || gain.shape()[0] != d || bias.shape() != gain.shape()) {
        throw ShapeMismatch("layer_norm: gain/bias must be [" + std::to_string(d) + "]");
    }
    std::vector<Real> data(x.data().size());
    std::vector<Real> xhat(x.data().size());
    std::vector<Real> inv_std(static_cast<std::size_t>(n));
    for (std::int64_t r = 0; r < n; ++r) {
        const Real* xp = x.data().data() + static_cast<std::size_t>(r) * d;
        Real mu = 0;
        for (int j = 0; j < d; ++j) mu += xp[j];
        mu /= static_cast<Real>(d);
        Real var = 0;
        for (int j = 0; j < d; ++j) var += (xp[j] - mu) * (xp[j] - mu);
        var /= static_cast<Real>(d);
        const Real inv = Real(1) / std::sqrt(var + eps);
        inv_std[static_cast<std::size_t>(r)] = inv;
        for (int j = 0; j < d; ++j) {
            const Real h = (xp[j] - mu) * inv;
            xhat[static_cast<std::size_t>(r * d + j)] = h;
            data[static_cast<std::size_t>(r * d + j)] =
                h * gain.data()[static_cast<std::size_t>(j)] + bias.data()[static_cast<std::size_t>(j)];
        }
    }
    TensorT<Real> out = detail::op_result<Real>(x.shape(), std::move(data), {x, gain, bias});
    if (out.requires_grad()) {
        auto xn = x.node(), gn = gain.node(), bn = bias.node();
        auto* on = out.node().get();
        const std::int64_t nn = n;
        const int dd = d;
        out.node()->backward_fn = [xn, gn, bn, on, xhat = std::move(xhat),
                                   inv_std = std::move(inv_std), nn, dd] {
            for (std::int64_t r = 0; r < nn; ++r) {
                const Real* g = on->grad.data() + static_cast<std::size_t>(r) * dd;
                const Real* h = xhat.data() + static_cast<std::size_t>(r) * dd;
                if (gn->requires_grad) {
                    for (int j = 0; j < dd; ++j) gn->grad[static_cast<std::size_t>(j)] += g[j] * h[j];
                }
                if (bn->requires_grad) {
                    for (int j = 0; j < dd; ++j) bn->grad[static_cast<std::size_t>(j)] += g[j];
                }
                if (xn->requires_grad) {
                    Real mean_dh = 0, mean_dh_h = 0;
                    for (int j = 0; j < dd; ++j) {
                        const Real dh = g[j] * gn->data[static_cast<std::size_t>(j)];
                        mean_dh += dh;
                        mean_dh_h += dh * h[j];
                    }
                    mean_dh /= static_cast<Real>(dd);
                    mean_dh_h /= static_cast<Real>(dd);
                    Real* dx = xn->grad.data() + static_cast<std::size_t>(r) * dd;
                    const Real inv = inv_std[static_cast<std::size_t>(r)];
                    for (int j = 0; j < dd; ++j) {
                        const Real dh = g[j] * gn->data[static_cast<std::size_t>(j)];
                        dx[j] += inv * (dh - mean_dh - h[j] * mean_dh_h);
                    }
                }
            }
        };
    }
    return out;
}

/// tanh-approximation GELU; smooth everywhere, which keeps central
/// differences honest near zero.
namespace detail {
template <class Real>
inline constexpr Real kGeluC = Real(0.7978845608028654L); // sqrt(2/pi)
template <class Real>
inline constexpr Real kGeluA = Real(0.044715L);
} // namespace detail

template <class Real>
TensorT<Real> gelu(const TensorT<Real>& a) {
    constexpr Real kC = detail::kGeluC<Real>;
    constexpr Real kA = detail::kGeluA<Real>;
    std::vector<Real> data(a.data().size());
    for (std::size_t i = 0; i < data.size(); ++i) {
        const Real x = a.data()[i];
        data[i] = Real(0.5) * x * (Real(1) + std::tanh(kC * (x + kA * x * x * x)));
    }
    TensorT<Real> out = detail::op_result<Real>(a.shape(), std::move(data), {a});
    if (out.requires_grad()) {
        auto an = a.node();
        auto* on = out.node().get();
        out.node()->backward_fn = [an, on] {
            constexpr Real c = detail::kGeluC<Real>;
            constexpr Real aa = detail::kGeluA<Real>;
            for (std::size_t i = 0; i < on->grad.size(); ++i) {
                const Real x = an->data[i];
                const Real t = std::tanh(c * (x + aa * x * x * x));
                const Real dt = (Real(1) - t * t) * c * (Real(1) + Real(3) * aa * x * x);
                an->grad[i] += on->grad[i] * (Real(0.5) * (Real(1) + t) + Real(0.5) * x * dt);
            }
        };
    }
    return out;
}

/// Inverted dropout with an explicit rng; identity when prob == 0.
template <class Real>
TensorT<Real> dropout(const TensorT<Real>& a, double prob, RandomSource& rng) {
    if (prob < 0.0 || prob >= 1.0) throw DataError("dropout prob must be in [0, 1)");
    if (prob == 0.0) return a;
    const Real keep_scale = Real(1.0 / (1.0 - prob));
    std::vector<Real> mask(a.data().size());
    for (Real& m : mask) m = rng.uniform() >= prob ? keep_scale : Real(0);
    std::vector<Real> data(a.data().size());
    for (std::size_t i = 0; i < data.size(); ++i) data[i] = a.data()[i] * mask[i];
    TensorT<Real> out = detail::op_result<Real>(a.shape(), std::move(data), {a});
    if (out.requires_grad()) {
        auto an = a.node();
        auto* on = out.node().get();
        out.node()->backward_fn = [an, on, mask = std::move(mask)] {
            for (std::size_t i = 0; i < on->grad.size(); ++i) an->grad[i] += on->grad[i] * mask[i];
        };
    }
    return out;
}

// ---------------------------------------------------------------------------
// Loss
// ---------------------------------------------------------------------------

enum class Reduction { Mean, Sum };

/// Mean (or sum) negative log-softmax over rows whose target is not the
/// ignore marker -1. All rows ignored yields 0 with zero gradient.
template <class Real>
TensorT<Real> cross_entropy(const TensorT<Real>& logits, const std::vector<int>& targets,
                            Reduction reduction = Reduction::Mean) {
    detail::require_2d(logits, "cross_entropy");
    const int n = logits.rows(), v = logits.cols();
    if (static_cast<int>(targets.size()) != n) {
        throw ShapeMismatch("cross_entropy: " + std::to_string(targets.size()) + " targets for " +
                            std::to_string(n) + " rows");
    }
    int valid = 0;
    Real total = 0;
    for (int r = 0; r < n; ++r) {
        const int t = targets[static_cast<std::size_t>(r)];
        if (t == -1) continue;
        if (t < 0 || t >= v) {
            throw TargetOutOfRange("cross_entropy: target " + std::to_string(t) + " at row " +
                                   std::to_string(r) + " outside [0, " + std::to_string(v) + ")");
        }
        ++valid;
        const Real* x = logits.data().data() + static_cast<std::size_t>(r) * v;
        Real mx = x[0];
        for (int j = 1; j < v; ++j) mx = std::max(mx, x[j]);
        Real denom = 0;
        for (int j = 0; j < v; ++j) denom += std::exp(x[j] - mx);
        total += mx + std::log(denom) - x[t];
    }
    const Real norm = reduction == Reduction::Mean && valid > 0 ? Real(1) / valid : Real(1);
    TensorT<Real> out = detail::op_result<Real>({1}, {valid > 0 ? total * norm : Real(0)}, {logits});
    if (out.requires_grad() && valid > 0) {
        auto ln = logits.node();
        auto* on = out.node().get();
        auto tg = targets;
        out.node()->backward_fn = [ln, on, tg, n, v, norm] {
            const Real gscale = on->grad[0] * norm;
            for (int r = 0; r < n; ++r) {
                const int t = tg[static_cast<std::size_t>(r)];
                if (t == -1) continue;
                const Real* x = ln->data.data() + static_cast<std::size_t>(r) * v;
                Real mx = x[0];
                for (int j = 1; j < v; ++j) mx = std::max(mx, x[j]);
                Real denom = 0;
                for (int j = 0; j < v; ++j) denom += std::exp(x[j] - mx);
                Real* dx = ln->grad.data() + static_cast<std::size_t>(r) * v;
                for (int j = 0; j < v; ++j) {
                    const Real p = std::exp(x[j] - mx) / denom;
                    dx[j] += gscale * (p - (j == t ? Real(1) : Real(0)));
                }
            }
        };
    }
    return out;
}

} // namespace blockbuild
