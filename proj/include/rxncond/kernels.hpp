#pragma once

// Dense kernels backing the autograd ops. Each hot kernel comes in two
// flavors: the OpenMP-parallel version used by the model, and a plain
// serial version under rxncond::ref kept as the reference for tests and
// the kernel benchmark. Parallel kernels partition independent output
// elements across threads and keep every inner accumulation in a fixed
// order, so results are bit-identical to the serial reference at any
// thread count.

#include <cmath>
#include <cstdint>
#include <vector>

namespace rxncond::kern {

// ---------------------------------------------------------------- gemm

// C[m x n] = op(A) * op(B) (+ C if accumulate), op selected by trans flags.
// A is m x k (or k x m when trans_a), B is k x n (or n x k when trans_b).
template <class T>
void gemm(const T* a, const T* b, T* c, int m, int n, int k, bool trans_a, bool trans_b,
          bool accumulate) {
    if (!trans_a && !trans_b) {
#pragma omp parallel for schedule(static) if (m > 1)
        for (int i = 0; i < m; ++i) {
            T* crow = c + static_cast<int64_t>(i) * n;
            if (!accumulate)
                for (int j = 0; j < n; ++j) crow[j] = T(0);
            const T* arow = a + static_cast<int64_t>(i) * k;
            for (int p = 0; p < k; ++p) {
                const T av = arow[p];
                const T* brow = b + static_cast<int64_t>(p) * n;
                for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
            }
        }
    } else if (!trans_a && trans_b) {
#pragma omp parallel for schedule(static) if (m > 1)
        for (int i = 0; i < m; ++i) {
            const T* arow = a + static_cast<int64_t>(i) * k;
            T* crow = c + static_cast<int64_t>(i) * n;
            for (int j = 0; j < n; ++j) {
                const T* brow = b + static_cast<int64_t>(j) * k;
                T acc = T(0);
                for (int p = 0; p < k; ++p) acc += arow[p] * brow[p];
                crow[j] = accumulate ? crow[j] + acc : acc;
            }
        }
    } else if (trans_a && !trans_b) {
#pragma omp parallel for schedule(static) if (m > 1)
        for (int i = 0; i < m; ++i) {
            T* crow = c + static_cast<int64_t>(i) * n;
            if (!accumulate)
                for (int j = 0; j < n; ++j) crow[j] = T(0);
            for (int p = 0; p < k; ++p) {
                const T av = a[static_cast<int64_t>(p) * m + i];
                const T* brow = b + static_cast<int64_t>(p) * n;
                for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
            }
        }
    } else {
#pragma omp parallel for schedule(static) if (m > 1)
        for (int i = 0; i < m; ++i) {
            T* crow = c + static_cast<int64_t>(i) * n;
            for (int j = 0; j < n; ++j) {
                const T* brow = b + static_cast<int64_t>(j) * k;
                T acc = T(0);
                for (int p = 0; p < k; ++p) acc += a[static_cast<int64_t>(p) * m + i] * brow[p];
                crow[j] = accumulate ? crow[j] + acc : acc;
            }
        }
    }
}

// -------------------------------------------------------- elementwise

template <class T, class F>
void map1(const T* x, T* y, int64_t n, F f) {
#pragma omp parallel for schedule(static) if (n > 4096)
    for (int64_t i = 0; i < n; ++i) y[i] = f(x[i]);
}

template <class T, class F>
void map2(const T* a, const T* b, T* y, int64_t n, F f) {
#pragma omp parallel for schedule(static) if (n > 4096)
    for (int64_t i = 0; i < n; ++i) y[i] = f(a[i], b[i]);
}

// y[i,j] = x[i,j] + v[j]
template <class T>
void add_rowvec(const T* x, const T* v, T* y, int m, int n) {
#pragma omp parallel for schedule(static) if (m > 1)
    for (int i = 0; i < m; ++i) {
        const T* xr = x + static_cast<int64_t>(i) * n;
        T* yr = y + static_cast<int64_t>(i) * n;
        for (int j = 0; j < n; ++j) yr[j] = xr[j] + v[j];
    }
}

// out[j] += sum_i g[i,j]; column-parallel so each output has a fixed
// row-major accumulation order.
template <class T>
void col_sums_accum(const T* g, T* out, int m, int n) {
#pragma omp parallel for schedule(static) if (n > 16)
    for (int j = 0; j < n; ++j) {
        T acc = T(0);
        for (int i = 0; i < m; ++i) acc += g[static_cast<int64_t>(i) * n + j];
        out[j] += acc;
    }
}

// ------------------------------------------------------------ softmax

template <class T>
void softmax_rows(const T* x, T* y, int m, int n) {
#pragma omp parallel for schedule(static) if (m > 1)
    for (int i = 0; i < m; ++i) {
        const T* xr = x + static_cast<int64_t>(i) * n;
        T* yr = y + static_cast<int64_t>(i) * n;
        T mx = xr[0];
        for (int j = 1; j < n; ++j)
            if (xr[j] > mx) mx = xr[j];
        T sum = T(0);
        for (int j = 0; j < n; ++j) {
            yr[j] = std::exp(xr[j] - mx);
            sum += yr[j];
        }
        const T inv = T(1) / sum;
        for (int j = 0; j < n; ++j) yr[j] *= inv;
    }
}

// dx_i = y_i * (dy_i - sum_j dy_j y_j), accumulated into dx
template <class T>
void softmax_rows_backward(const T* y, const T* dy, T* dx, int m, int n) {
#pragma omp parallel for schedule(static) if (m > 1)
    for (int i = 0; i < m; ++i) {
        const T* yr = y + static_cast<int64_t>(i) * n;
        const T* dyr = dy + static_cast<int64_t>(i) * n;
        T* dxr = dx + static_cast<int64_t>(i) * n;
        T dot = T(0);
        for (int j = 0; j < n; ++j) dot += dyr[j] * yr[j];
        for (int j = 0; j < n; ++j) dxr[j] += yr[j] * (dyr[j] - dot);
    }
}

// ---------------------------------------------------------- layernorm

// Per-row normalization with learned gain/bias; saves 1/std per row.
template <class T>
void layernorm_rows(const T* x, const T* gain, const T* bias, T* y, T* rstd_out, T* mean_out,
                    int m, int n, T eps) {
#pragma omp parallel for schedule(static) if (m > 1)
    for (int i = 0; i < m; ++i) {
        const T* xr = x + static_cast<int64_t>(i) * n;
        T* yr = y + static_cast<int64_t>(i) * n;
        T mu = T(0);
        for (int j = 0; j < n; ++j) mu += xr[j];
        mu /= T(n);
        T var = T(0);
        for (int j = 0; j < n; ++j) {
            const T d = xr[j] - mu;
            var += d * d;
        }
        var /= T(n);
        const T rstd = T(1) / std::sqrt(var + eps);
        rstd_out[i] = rstd;
        mean_out[i] = mu;
        for (int j = 0; j < n; ++j) yr[j] = gain[j] * ((xr[j] - mu) * rstd) + bias[j];
    }
}

template <class T>
void layernorm_rows_backward(const T* x, const T* gain, const T* rstd, const T* mean,
                             const T* dy, T* dx, int m, int n) {
#pragma omp parallel for schedule(static) if (m > 1)
    for (int i = 0; i < m; ++i) {
        const T* xr = x + static_cast<int64_t>(i) * n;
        const T* dyr = dy + static_cast<int64_t>(i) * n;
        T* dxr = dx + static_cast<int64_t>(i) * n;
        const T rs = rstd[i];
        const T mu = mean[i];
        T sum_dxhat = T(0);
        T sum_dxhat_xhat = T(0);
        for (int j = 0; j < n; ++j) {
            const T xhat = (xr[j] - mu) * rs;
            const T dxhat = dyr[j] * gain[j];
            sum_dxhat += dxhat;
            sum_dxhat_xhat += dxhat * xhat;
        }
        const T invn = T(1) / T(n);
        for (int j = 0; j < n; ++j) {
            const T xhat = (xr[j] - mu) * rs;
            const T dxhat = dyr[j] * gain[j];
            dxr[j] += rs * (dxhat - invn * sum_dxhat - xhat * invn * sum_dxhat_xhat);
        }
    }
}

// gain/bias grads: dg[j] += sum_i dy[i,j]*xhat[i,j]; db[j] += sum_i dy[i,j]
template <class T>
void layernorm_param_grads(const T* x, const T* rstd, const T* mean, const T* dy, T* dgain,
                           T* dbias, int m, int n) {
#pragma omp parallel for schedule(static) if (n > 16)
    for (int j = 0; j < n; ++j) {
        T dg = T(0), db = T(0);
        for (int i = 0; i < m; ++i) {
            const T xhat = (x[static_cast<int64_t>(i) * n + j] - mean[i]) * rstd[i];
            const T d = dy[static_cast<int64_t>(i) * n + j];
            dg += d * xhat;
            db += d;
        }
        dgain[j] += dg;
        dbias[j] += db;
    }
}

// ------------------------------------------------------ cross entropy

// loss_rows[i] = logsumexp(x[i,:]) - x[i,target[i]]
template <class T>
void ce_rows(const T* logits, const int* targets, T* loss_rows, int m, int n) {
#pragma omp parallel for schedule(static) if (m > 1)
    for (int i = 0; i < m; ++i) {
        const T* xr = logits + static_cast<int64_t>(i) * n;
        T mx = xr[0];
        for (int j = 1; j < n; ++j)
            if (xr[j] > mx) mx = xr[j];
        T sum = T(0);
        for (int j = 0; j < n; ++j) sum += std::exp(xr[j] - mx);
        loss_rows[i] = mx + std::log(sum) - xr[targets[i]];
    }
}

// dlogits[i,:] += coeff * (softmax(x[i,:]) - onehot(target[i]))
template <class T>
void ce_rows_backward(const T* logits, const int* targets, T coeff, T* dlogits, int m, int n) {
#pragma omp parallel for schedule(static) if (m > 1)
    for (int i = 0; i < m; ++i) {
        const T* xr = logits + static_cast<int64_t>(i) * n;
        T* dr = dlogits + static_cast<int64_t>(i) * n;
        T mx = xr[0];
        for (int j = 1; j < n; ++j)
            if (xr[j] > mx) mx = xr[j];
        T sum = T(0);
        for (int j = 0; j < n; ++j) sum += std::exp(xr[j] - mx);
        const T inv = T(1) / sum;
        for (int j = 0; j < n; ++j) dr[j] += coeff * std::exp(xr[j] - mx) * inv;
        dr[targets[i]] -= coeff;
    }
}

}  // namespace rxncond::kern

// Serial reference kernels. Same contracts and accumulation order as the
// parallel versions above; used by unit tests and bench/ to validate and
// time the OpenMP variants.
namespace rxncond::ref {

template <class T>
void gemm(const T* a, const T* b, T* c, int m, int n, int k, bool trans_a, bool trans_b,
          bool accumulate) {
    for (int i = 0; i < m; ++i) {
        T* crow = c + static_cast<int64_t>(i) * n;
        if (trans_b) {
            for (int j = 0; j < n; ++j) {
                T acc = T(0);
                for (int p = 0; p < k; ++p) {
                    const T av = trans_a ? a[static_cast<int64_t>(p) * m + i]
                                         : a[static_cast<int64_t>(i) * k + p];
                    acc += av * b[static_cast<int64_t>(j) * k + p];
                }
                crow[j] = accumulate ? crow[j] + acc : acc;
            }
        } else {
            if (!accumulate)
                for (int j = 0; j < n; ++j) crow[j] = T(0);
            for (int p = 0; p < k; ++p) {
                const T av = trans_a ? a[static_cast<int64_t>(p) * m + i]
                                     : a[static_cast<int64_t>(i) * k + p];
                const T* brow = b + static_cast<int64_t>(p) * n;
                for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
            }
        }
    }
}

template <class T>
void softmax_rows(const T* x, T* y, int m, int n) {
    for (int i = 0; i < m; ++i) {
        const T* xr = x + static_cast<int64_t>(i) * n;
        T* yr = y + static_cast<int64_t>(i) * n;
        T mx = xr[0];
        for (int j = 1; j < n; ++j)
            if (xr[j] > mx) mx = xr[j];
        T sum = T(0);
        for (int j = 0; j < n; ++j) {
            yr[j] = std::exp(xr[j] - mx);
            sum += yr[j];
        }
        const T inv = T(1) / sum;
        for (int j = 0; j < n; ++j) yr[j] *= inv;
    }
}

template <class T>
void layernorm_rows(const T* x, const T* gain, const T* bias, T* y, T* rstd_out, T* mean_out,
                    int m, int n, T eps) {
    for (int i = 0; i < m; ++i) {
        const T* xr = x + static_cast<int64_t>(i) * n;
        T* yr = y + static_cast<int64_t>(i) * n;
        T mu = T(0);
        for (int j = 0; j < n; ++j) mu += xr[j];
        mu /= T(n);
        T var = T(0);
        for (int j = 0; j < n; ++j) {
            const T d = xr[j] - mu;
            var += d * d;
        }
        var /= T(n);
        const T rstd = T(1) / std::sqrt(var + eps);
        rstd_out[i] = rstd;
        mean_out[i] = mu;
        for (int j = 0; j < n; ++j) yr[j] = gain[j] * ((xr[j] - mu) * rstd) + bias[j];
    }
}

}  // namespace rxncond::ref
