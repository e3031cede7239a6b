#include "rxncond/autograd.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "rxncond/kernels.hpp"

namespace rxncond {

namespace {

thread_local Tape* t_active_tape = nullptr;

template <class F>
void dispatch(Dtype dt, F&& f) {
    if (dt == Dtype::F32) f(float{});
    else f(double{});
}

bool wants_grad(const Tensor& t) { return t.defined() && t.requires_grad(); }

void check_finite_out(const Tensor& out, const char* op) {
    if (finite_checks_enabled() && !out.all_finite())
        throw std::runtime_error(std::string("non-finite values in output of ") + op);
}

void require_rank2(const Tensor& t, const char* op) {
    if (t.rank() != 2) throw std::invalid_argument(std::string(op) + ": expected a rank-2 tensor");
}

// Marks the output and registers the closure if grads are needed.
void finish(Tensor& out, bool needs, std::function<void()> fn, const char* op) {
    check_finite_out(out, op);
    if (needs && Tape::active()) {
        out.set_requires_grad(true);
        Tape::active()->record(out, std::move(fn));
    }
}

}  // namespace

Tape::Tape() {
    prev_ = t_active_tape;
    t_active_tape = this;
}

Tape::~Tape() { t_active_tape = prev_; }

Tape* Tape::active() { return t_active_tape; }

void Tape::record(Tensor out, std::function<void()> fn) {
    records_.push_back({std::move(out), std::move(fn)});
}

void Tape::backward(const Tensor& loss) {
    if (loss.numel() != 1) throw std::invalid_argument("backward: loss must be a scalar");
    // Intermediate (op output) grads are per-call state; leaves accumulate.
    for (auto& r : records_) {
        r.out.ensure_grad();
        r.out.zero_grad();
    }
    Tensor seed = loss;
    seed.ensure_grad();
    dispatch(seed.dtype(), [&](auto tag) {
        using T = decltype(tag);
        seed.grad<T>()[0] += T(1);
    });
    for (auto it = records_.rbegin(); it != records_.rend(); ++it) it->fn();
}

// ----------------------------------------------------------------- matmul

Tensor matmul(const Tensor& a, const Tensor& b, bool trans_a, bool trans_b) {
    require_rank2(a, "matmul");
    require_rank2(b, "matmul");
    check_same_dtype(a, b, "matmul");
    const int m = trans_a ? a.dim(1) : a.dim(0);
    const int k = trans_a ? a.dim(0) : a.dim(1);
    const int kb = trans_b ? b.dim(1) : b.dim(0);
    const int n = trans_b ? b.dim(0) : b.dim(1);
    if (k != kb)
        throw std::invalid_argument("matmul: inner dimensions disagree (" + a.shape_str() + " vs " +
                                    b.shape_str() + ")");
    Tensor out = Tensor::zeros({m, n}, a.dtype());
    dispatch(a.dtype(), [&](auto tag) {
        using T = decltype(tag);
        kern::gemm<T>(a.data<T>().data(), b.data<T>().data(), out.data<T>().data(), m, n, k,
                      trans_a, trans_b, false);
    });
    const bool needs = wants_grad(a) || wants_grad(b);
    Tensor ac = a, bc = b, oc = out;
    finish(
        out, needs,
        [ac, bc, oc, m, n, k, trans_a, trans_b]() mutable {
            dispatch(ac.dtype(), [&](auto tag) {
                using T = decltype(tag);
                const T* dy = oc.grad<T>().data();
                if (ac.requires_grad()) {
                    T* da = ac.grad<T>().data();
                    const T* bp = bc.data<T>().data();
                    if (!trans_a && !trans_b)       // dA += dY * B^T
                        kern::gemm<T>(dy, bp, da, m, k, n, false, true, true);
                    else if (!trans_a && trans_b)   // dA += dY * B
                        kern::gemm<T>(dy, bp, da, m, k, n, false, false, true);
                    else if (trans_a && !trans_b)   // dA += B * dY^T
                        kern::gemm<T>(bp, dy, da, k, m, n, false, true, true);
                    else                            // dA += B^T * dY^T
                        kern::gemm<T>(bp, dy, da, k, m, n, true, true, true);
                }
                if (bc.requires_grad()) {
                    T* db = bc.grad<T>().data();
                    const T* ap = ac.data<T>().data();
                    if (!trans_a && !trans_b)       // dB += A^T * dY
                        kern::gemm<T>(ap, dy, db, k, n, m, true, false, true);
                    else if (!trans_a && trans_b)   // dB += dY^T * A
                        kern::gemm<T>(dy, ap, db, n, k, m, true, false, true);
                    else if (trans_a && !trans_b)   // dB += A * dY
                        kern::gemm<T>(ap, dy, db, k, n, m, false, false, true);
                    else                            // dB += dY^T * A^T
                        kern::gemm<T>(dy, ap, db, n, k, m, true, true, true);
                }
            });
        },
        "matmul");
    return out;
}

// ------------------------------------------------------------ elementwise

namespace {

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape() != b.shape())
        throw std::invalid_argument(std::string(op) + ": shape mismatch " + a.shape_str() + " vs " +
                                    b.shape_str());
}

template <class T>
void axpy(const T* src, T* dst, int64_t n) {
    for (int64_t i = 0; i < n; ++i) dst[i] += src[i];
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "add");
    check_same_dtype(a, b, "add");
    Tensor out = Tensor::zeros(a.shape(), a.dtype());
    const int64_t n = a.numel();
    dispatch(a.dtype(), [&](auto tag) {
        using T = decltype(tag);
        kern::map2<T>(a.data<T>().data(), b.data<T>().data(), out.data<T>().data(), n,
                      [](T x, T y) { return x + y; });
    });
    Tensor ac = a, bc = b, oc = out;
    finish(
        out, wants_grad(a) || wants_grad(b),
        [ac, bc, oc, n]() mutable {
            dispatch(ac.dtype(), [&](auto tag) {
                using T = decltype(tag);
                const T* g = oc.grad<T>().data();
                if (ac.requires_grad()) axpy(g, ac.grad<T>().data(), n);
                if (bc.requires_grad()) axpy(g, bc.grad<T>().data(), n);
            });
        },
        "add");
    return out;
}

Tensor sub(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "sub");
    check_same_dtype(a, b, "sub");
    Tensor out = Tensor::zeros(a.shape(), a.dtype());
    const int64_t n = a.numel();
    dispatch(a.dtype(), [&](auto tag) {
        using T = decltype(tag);
        kern::map2<T>(a.data<T>().data(), b.data<T>().data(), out.data<T>().data(), n,
                      [](T x, T y) { return x - y; });
    });
    Tensor ac = a, bc = b, oc = out;
    finish(
        out, wants_grad(a) || wants_grad(b),
        [ac, bc, oc, n]() mutable {
            dispatch(ac.dtype(), [&](auto tag) {
                using T = decltype(tag);
                const T* g = oc.grad<T>().data();
                if (ac.requires_grad()) axpy(g, ac.grad<T>().data(), n);
                if (bc.requires_grad()) {
                    T* db = bc.grad<T>().data();
                    for (int64_t i = 0; i < n; ++i) db[i] -= g[i];
                }
            });
        },
        "sub");
    return out;
}

Tensor mul(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "mul");
    check_same_dtype(a, b, "mul");
    Tensor out = Tensor::zeros(a.shape(), a.dtype());
    const int64_t n = a.numel();
    dispatch(a.dtype(), [&](auto tag) {
        using T = decltype(tag);
        kern::map2<T>(a.data<T>().data(), b.data<T>().data(), out.data<T>().data(), n,
                      [](T x, T y) { return x * y; });
    });
    Tensor ac = a, bc = b, oc = out;
    finish(
        out, wants_grad(a) || wants_grad(b),
        [ac, bc, oc, n]() mutable {
            dispatch(ac.dtype(), [&](auto tag) {
                using T = decltype(tag);
                const T* g = oc.grad<T>().data();
                if (ac.requires_grad()) {
                    T* da = ac.grad<T>().data();
                    const T* bp = bc.data<T>().data();
                    for (int64_t i = 0; i < n; ++i) da[i] += g[i] * bp[i];
                }
                if (bc.requires_grad()) {
                    T* db = bc.grad<T>().data();
                    const T* ap = ac.data<T>().data();
                    for (int64_t i = 0; i < n; ++i) db[i] += g[i] * ap[i];
                }
            });
        },
        "mul");
    return out;
}

Tensor scale(const Tensor& a, double c) {
    Tensor out = Tensor::zeros(a.shape(), a.dtype());
    const int64_t n = a.numel();
    dispatch(a.dtype(), [&](auto tag) {
        using T = decltype(tag);
        const T cv = static_cast<T>(c);
        kern::map1<T>(a.data<T>().data(), out.data<T>().data(), n, [cv](T x) { return cv * x; });
    });
    Tensor ac = a, oc = out;
    finish(
        out, wants_grad(a),
        [ac, oc, c, n]() mutable {
            dispatch(ac.dtype(), [&](auto tag) {
                using T = decltype(tag);
                const T cv = static_cast<T>(c);
                const T* g = oc.grad<T>().data();
                T* da = ac.grad<T>().data();
                for (int64_t i = 0; i < n; ++i) da[i] += cv * g[i];
            });
        },
        "scale");
    return out;
}

Tensor add_rowvec(const Tensor& x, const Tensor& v) {
    require_rank2(x, "add_rowvec");
    check_same_dtype(x, v, "add_rowvec");
    if (v.rank() != 1 || v.dim(0) != x.dim(1))
        throw std::invalid_argument("add_rowvec: vector length must equal column count");
    const int m = x.dim(0), n = x.dim(1);
    Tensor out = Tensor::zeros({m, n}, x.dtype());
    dispatch(x.dtype(), [&](auto tag) {
        using T = decltype(tag);
        kern::add_rowvec<T>(x.data<T>().data(), v.data<T>().data(), out.data<T>().data(), m, n);
    });
    Tensor xc = x, vc = v, oc = out;
    finish(
        out, wants_grad(x) || wants_grad(v),
        [xc, vc, oc, m, n]() mutable {
            dispatch(xc.dtype(), [&](auto tag) {
                using T = decltype(tag);
                const T* g = oc.grad<T>().data();
                if (xc.requires_grad()) axpy(g, xc.grad<T>().data(), static_cast<int64_t>(m) * n);
                if (vc.requires_grad()) kern::col_sums_accum<T>(g, vc.grad<T>().data(), m, n);
            });
        },
        "add_rowvec");
    return out;
}

Tensor relu(const Tensor& x) {
    Tensor out = Tensor::zeros(x.shape(), x.dtype());
    const int64_t n = x.numel();
    dispatch(x.dtype(), [&](auto tag) {
        using T = decltype(tag);
        kern::map1<T>(x.data<T>().data(), out.data<T>().data(), n,
                      [](T v) { return v > T(0) ? v : T(0); });
    });
    Tensor xc = x, oc = out;
    finish(
        out, wants_grad(x),
        [xc, oc, n]() mutable {
            dispatch(xc.dtype(), [&](auto tag) {
                using T = decltype(tag);
                const T* g = oc.grad<T>().data();
                const T* xp = xc.data<T>().data();
                T* dx = xc.grad<T>().data();
                for (int64_t i = 0; i < n; ++i)
                    if (xp[i] > T(0)) dx[i] += g[i];
            });
        },
        "relu");
    return out;
}

// -------------------------------------------------------------- layernorm

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps) {
    require_rank2(x, "layer_norm");
    check_same_dtype(x, gain, "layer_norm");
    check_same_dtype(x, bias, "layer_norm");
    const int m = x.dim(0), n = x.dim(1);
    if (gain.numel() != n || bias.numel() != n)
        throw std::invalid_argument("layer_norm: gain/bias length must equal column count");
    Tensor out = Tensor::zeros({m, n}, x.dtype());
    // saved statistics shared with the backward closure
    auto rstd = std::make_shared<std::vector<double>>();
    auto mean = std::make_shared<std::vector<double>>();
    dispatch(x.dtype(), [&](auto tag) {
        using T = decltype(tag);
        std::vector<T> rs(static_cast<size_t>(m)), mu(static_cast<size_t>(m));
        kern::layernorm_rows<T>(x.data<T>().data(), gain.data<T>().data(), bias.data<T>().data(),
                                out.data<T>().data(), rs.data(), mu.data(), m, n,
                                static_cast<T>(eps));
        rstd->assign(rs.begin(), rs.end());
        mean->assign(mu.begin(), mu.end());
    });
    Tensor xc = x, gc = gain, bc = bias, oc = out;
    finish(
        out, wants_grad(x) || wants_grad(gain) || wants_grad(bias),
        [xc, gc, bc, oc, rstd, mean, m, n]() mutable {
            dispatch(xc.dtype(), [&](auto tag) {
                using T = decltype(tag);
                std::vector<T> rs(rstd->begin(), rstd->end());
                std::vector<T> mu(mean->begin(), mean->end());
                const T* g = oc.grad<T>().data();
                if (xc.requires_grad())
                    kern::layernorm_rows_backward<T>(xc.data<T>().data(), gc.data<T>().data(),
                                                     rs.data(), mu.data(), g,
                                                     xc.grad<T>().data(), m, n);
                if (gc.requires_grad() || bc.requires_grad()) {
                    std::vector<T> dg(static_cast<size_t>(n), T(0)), db(static_cast<size_t>(n), T(0));
                    kern::layernorm_param_grads<T>(xc.data<T>().data(), rs.data(), mu.data(), g,
                                                   dg.data(), db.data(), m, n);
                    if (gc.requires_grad()) axpy(dg.data(), gc.grad<T>().data(), n);
                    if (bc.requires_grad()) axpy(db.data(), bc.grad<T>().data(), n);
                }
            });
        },
        "layer_norm");
    return out;
}

// ---------------------------------------------------------------- softmax

Tensor softmax(const Tensor& x) {
    require_rank2(x, "softmax");
    const int m = x.dim(0), n = x.dim(1);
    Tensor out = Tensor::zeros({m, n}, x.dtype());
    dispatch(x.dtype(), [&](auto tag) {
        using T = decltype(tag);
        kern::softmax_rows<T>(x.data<T>().data(), out.data<T>().data(), m, n);
    });
    Tensor xc = x, oc = out;
    finish(
        out, wants_grad(x),
        [xc, oc, m, n]() mutable {
            dispatch(xc.dtype(), [&](auto tag) {
                using T = decltype(tag);
                kern::softmax_rows_backward<T>(oc.data<T>().data(), oc.grad<T>().data(),
                                               xc.grad<T>().data(), m, n);
            });
        },
        "softmax");
    return out;
}

Tensor softmax_cross_entropy(const Tensor& logits, const std::vector<int>& targets,
                             Reduction reduction) {
    require_rank2(logits, "softmax_cross_entropy");
    const int m = logits.dim(0), n = logits.dim(1);
    if (static_cast<int>(targets.size()) != m)
        throw std::invalid_argument("softmax_cross_entropy: one target per row required");
    for (int t : targets)
        if (t < 0 || t >= n)
            throw std::invalid_argument("softmax_cross_entropy: target index out of range");
    Tensor out = Tensor::zeros({1}, logits.dtype());
    auto tgt = std::make_shared<std::vector<int>>(targets);
    dispatch(logits.dtype(), [&](auto tag) {
        using T = decltype(tag);
        std::vector<T> rows(static_cast<size_t>(m));
        kern::ce_rows<T>(logits.data<T>().data(), tgt->data(), rows.data(), m, n);
        T total = T(0);
        for (T r : rows) total += r;
        if (reduction == Reduction::Mean) total /= T(m);
        out.data<T>()[0] = total;
    });
    Tensor lc = logits, oc = out;
    finish(
        out, wants_grad(logits),
        [lc, oc, tgt, m, n, reduction]() mutable {
            dispatch(lc.dtype(), [&](auto tag) {
                using T = decltype(tag);
                T coeff = oc.grad<T>()[0];
                if (reduction == Reduction::Mean) coeff /= T(m);
                kern::ce_rows_backward<T>(lc.data<T>().data(), tgt->data(), coeff,
                                          lc.grad<T>().data(), m, n);
            });
        },
        "softmax_cross_entropy");
    return out;
}

// ------------------------------------------------------- shape plumbing

Tensor concat(const std::vector<Tensor>& parts, int axis) {
    if (parts.empty()) throw std::invalid_argument("concat: no inputs");
    if (axis != 0 && axis != 1) throw std::invalid_argument("concat: axis must be 0 or 1");
    for (const auto& p : parts) {
        require_rank2(p, "concat");
        check_same_dtype(parts[0], p, "concat");
    }
    int rows = 0, cols = 0;
    if (axis == 0) {
        cols = parts[0].dim(1);
        for (const auto& p : parts) {
            if (p.dim(1) != cols) throw std::invalid_argument("concat: column counts differ");
            rows += p.dim(0);
        }
    } else {
        rows = parts[0].dim(0);
        for (const auto& p : parts) {
            if (p.dim(0) != rows) throw std::invalid_argument("concat: row counts differ");
            cols += p.dim(1);
        }
    }
    Tensor out = Tensor::zeros({rows, cols}, parts[0].dtype());
    bool needs = false;
    for (const auto& p : parts) needs = needs || wants_grad(p);
    dispatch(out.dtype(), [&](auto tag) {
        using T = decltype(tag);
        T* o = out.data<T>().data();
        if (axis == 0) {
            int64_t off = 0;
            for (const auto& p : parts) {
                auto src = p.data<T>();
                std::copy(src.begin(), src.end(), o + off);
                off += p.numel();
            }
        } else {
            int coff = 0;
            for (const auto& p : parts) {
                auto src = p.data<T>();
                const int pc = p.dim(1);
                for (int i = 0; i < rows; ++i)
                    std::copy(src.begin() + static_cast<int64_t>(i) * pc,
                              src.begin() + static_cast<int64_t>(i + 1) * pc,
                              o + static_cast<int64_t>(i) * cols + coff);
                coff += pc;
            }
        }
    });
    std::vector<Tensor> pc = parts;
    Tensor oc = out;
    finish(
        out, needs,
        [pc, oc, axis, rows, cols]() mutable {
            dispatch(oc.dtype(), [&](auto tag) {
                using T = decltype(tag);
                const T* g = oc.grad<T>().data();
                if (axis == 0) {
                    int64_t off = 0;
                    for (auto& p : pc) {
                        if (p.requires_grad()) axpy(g + off, p.grad<T>().data(), p.numel());
                        off += p.numel();
                    }
                } else {
                    int coff = 0;
                    for (auto& p : pc) {
                        const int pcn = p.dim(1);
                        if (p.requires_grad()) {
                            T* dp = p.grad<T>().data();
                            for (int i = 0; i < rows; ++i)
                                for (int j = 0; j < pcn; ++j)
                                    dp[static_cast<int64_t>(i) * pcn + j] +=
                                        g[static_cast<int64_t>(i) * cols + coff + j];
                        }
                        coff += pcn;
                    }
                }
            });
        },
        "concat");
    return out;
}

Tensor slice_rows(const Tensor& x, int row_begin, int row_end) {
    require_rank2(x, "slice_rows");
    if (row_begin < 0 || row_end > x.dim(0) || row_begin >= row_end)
        throw std::invalid_argument("slice_rows: bad row range");
    const int n = x.dim(1), m = row_end - row_begin;
    Tensor out = Tensor::zeros({m, n}, x.dtype());
    dispatch(x.dtype(), [&](auto tag) {
        using T = decltype(tag);
        auto src = x.data<T>();
        std::copy(src.begin() + static_cast<int64_t>(row_begin) * n,
                  src.begin() + static_cast<int64_t>(row_end) * n, out.data<T>().begin());
    });
    Tensor xc = x, oc = out;
    finish(
        out, wants_grad(x),
        [xc, oc, row_begin, m, n]() mutable {
            dispatch(xc.dtype(), [&](auto tag) {
                using T = decltype(tag);
                axpy(oc.grad<T>().data(), xc.grad<T>().data() + static_cast<int64_t>(row_begin) * n,
                     static_cast<int64_t>(m) * n);
            });
        },
        "slice_rows");
    return out;
}

Tensor slice_cols(const Tensor& x, int col_begin, int col_end) {
    require_rank2(x, "slice_cols");
    if (col_begin < 0 || col_end > x.dim(1) || col_begin >= col_end)
        throw std::invalid_argument("slice_cols: bad column range");
    const int m = x.dim(0), nc = col_end - col_begin, n = x.dim(1);
    Tensor out = Tensor::zeros({m, nc}, x.dtype());
    dispatch(x.dtype(), [&](auto tag) {
        using T = decltype(tag);
        const T* src = x.data<T>().data();
        T* dst = out.data<T>().data();
        for (int i = 0; i < m; ++i)
            std::copy(src + static_cast<int64_t>(i) * n + col_begin,
                      src + static_cast<int64_t>(i) * n + col_end,
                      dst + static_cast<int64_t>(i) * nc);
    });
    Tensor xc = x, oc = out;
    finish(
        out, wants_grad(x),
        [xc, oc, col_begin, m, nc, n]() mutable {
            dispatch(xc.dtype(), [&](auto tag) {
                using T = decltype(tag);
                const T* g = oc.grad<T>().data();
                T* dx = xc.grad<T>().data();
                for (int i = 0; i < m; ++i)
                    for (int j = 0; j < nc; ++j)
                        dx[static_cast<int64_t>(i) * n + col_begin + j] +=
                            g[static_cast<int64_t>(i) * nc + j];
            });
        },
        "slice_cols");
    return out;
}

Tensor mean_rows(const Tensor& x) {
    require_rank2(x, "mean_rows");
    const int m = x.dim(0), n = x.dim(1);
    Tensor out = Tensor::zeros({n}, x.dtype());
    dispatch(x.dtype(), [&](auto tag) {
        using T = decltype(tag);
        T* o = out.data<T>().data();
        kern::col_sums_accum<T>(x.data<T>().data(), o, m, n);
        const T inv = T(1) / T(m);
        for (int j = 0; j < n; ++j) o[j] *= inv;
    });
    Tensor xc = x, oc = out;
    finish(
        out, wants_grad(x),
        [xc, oc, m, n]() mutable {
            dispatch(xc.dtype(), [&](auto tag) {
                using T = decltype(tag);
                const T* g = oc.grad<T>().data();
                T* dx = xc.grad<T>().data();
                const T inv = T(1) / T(m);
                for (int i = 0; i < m; ++i)
                    for (int j = 0; j < n; ++j) dx[static_cast<int64_t>(i) * n + j] += g[j] * inv;
            });
        },
        "mean_rows");
    return out;
}

namespace {
Tensor reduce_all(const Tensor& x, bool mean) {
    Tensor out = Tensor::zeros({1}, x.dtype());
    const int64_t n = x.numel();
    dispatch(x.dtype(), [&](auto tag) {
        using T = decltype(tag);
        const T* p = x.data<T>().data();
        T acc = T(0);
        for (int64_t i = 0; i < n; ++i) acc += p[i];
        out.data<T>()[0] = mean ? acc / T(n) : acc;
    });
    Tensor xc = x, oc = out;
    finish(
        out, wants_grad(x),
        [xc, oc, n, mean]() mutable {
            dispatch(xc.dtype(), [&](auto tag) {
                using T = decltype(tag);
                T g = oc.grad<T>()[0];
                if (mean) g /= T(n);
                T* dx = xc.grad<T>().data();
                for (int64_t i = 0; i < n; ++i) dx[i] += g;
            });
        },
        mean ? "mean_all" : "sum_all");
    return out;
}
}  // namespace

Tensor sum_all(const Tensor& x) { return reduce_all(x, false); }
Tensor mean_all(const Tensor& x) { return reduce_all(x, true); }

Tensor reshape(const Tensor& x, std::vector<int> new_shape) {
    int64_t n = 1;
    for (int d : new_shape) n *= d;
    if (n != x.numel()) throw std::invalid_argument("reshape: element count mismatch");
    Tensor out = Tensor::zeros(new_shape, x.dtype());
    dispatch(x.dtype(), [&](auto tag) {
        using T = decltype(tag);
        auto src = x.data<T>();
        std::copy(src.begin(), src.end(), out.data<T>().begin());
    });
    Tensor xc = x, oc = out;
    finish(
        out, wants_grad(x),
        [xc, oc, n]() mutable {
            dispatch(xc.dtype(), [&](auto tag) {
                using T = decltype(tag);
                axpy(oc.grad<T>().data(), xc.grad<T>().data(), n);
            });
        },
        "reshape");
    return out;
}

Tensor gather_rows(const Tensor& table, const std::vector<int>& ids) {
    require_rank2(table, "gather_rows");
    const int v = table.dim(0), n = table.dim(1);
    const int m = static_cast<int>(ids.size());
    if (m == 0) throw std::invalid_argument("gather_rows: empty index list");
    for (int id : ids)
        if (id < 0 || id >= v) throw std::invalid_argument("gather_rows: index out of range");
    Tensor out = Tensor::zeros({m, n}, table.dtype());
    auto idc = std::make_shared<std::vector<int>>(ids);
    dispatch(table.dtype(), [&](auto tag) {
        using T = decltype(tag);
        const T* src = table.data<T>().data();
        T* dst = out.data<T>().data();
        for (int i = 0; i < m; ++i)
            std::copy(src + static_cast<int64_t>((*idc)[i]) * n,
                      src + static_cast<int64_t>((*idc)[i] + 1) * n,
                      dst + static_cast<int64_t>(i) * n);
    });
    Tensor tc = table, oc = out;
    finish(
        out, wants_grad(table),
        [tc, oc, idc, m, n]() mutable {
            dispatch(tc.dtype(), [&](auto tag) {
                using T = decltype(tag);
                const T* g = oc.grad<T>().data();
                T* dt = tc.grad<T>().data();
                // serial: repeated ids must accumulate race-free
                for (int i = 0; i < m; ++i)
                    axpy(g + static_cast<int64_t>(i) * n,
                         dt + static_cast<int64_t>((*idc)[i]) * n, n);
            });
        },
        "gather_rows");
    return out;
}

}  // namespace rxncond
