#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "rxncond/dtype.hpp"
#include "rxncond/rng.hpp"

namespace rxncond {

// Dense n-d array. Rank 1 and 2 cover everything the model needs; a scalar
// is a rank-1 tensor of length 1. Buffers are contiguous row-major.
struct TensorImpl {
    std::vector<int> shape;
    Dtype dtype = Dtype::F32;
    std::vector<float> data32;
    std::vector<double> data64;
    std::vector<float> grad32;
    std::vector<double> grad64;
    bool requires_grad = false;
    bool grad_present = false;

    int64_t numel() const {
        int64_t n = 1;
        for (int d : shape) n *= d;
        return n;
    }
};

class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(std::vector<int> shape, Dtype dt, bool requires_grad = false);
    static Tensor zeros(std::vector<int> shape) { return zeros(std::move(shape), default_dtype()); }
    static Tensor full(std::vector<int> shape, double value, Dtype dt);
    static Tensor full(std::vector<int> shape, double value) { return full(std::move(shape), value, default_dtype()); }
    static Tensor scalar(double value, Dtype dt);
    static Tensor scalar(double value) { return scalar(value, default_dtype()); }
    static Tensor from(std::vector<int> shape, const std::vector<double>& values, Dtype dt);
    static Tensor from(std::vector<int> shape, const std::vector<double>& values) {
        return from(std::move(shape), values, default_dtype());
    }
    // i.i.d. normal(0, stddev), drawn in double then cast to the buffer dtype
    static Tensor randn(std::vector<int> shape, Rng& rng, double stddev, Dtype dt);
    static Tensor randn(std::vector<int> shape, Rng& rng, double stddev) {
        return randn(std::move(shape), rng, stddev, default_dtype());
    }

    bool defined() const { return impl_ != nullptr; }
    const std::vector<int>& shape() const { return impl_->shape; }
    int rank() const { return static_cast<int>(impl_->shape.size()); }
    int dim(int i) const { return impl_->shape[static_cast<size_t>(i)]; }
    int64_t numel() const { return impl_->numel(); }
    Dtype dtype() const { return impl_->dtype; }

    bool requires_grad() const { return impl_->requires_grad; }
    Tensor& set_requires_grad(bool v) {
        impl_->requires_grad = v;
        return *this;
    }

    template <class T>
    std::span<T> data() {
        check_type<T>();
        if constexpr (std::is_same_v<T, float>) return impl_->data32;
        else return impl_->data64;
    }
    template <class T>
    std::span<const T> data() const {
        check_type<T>();
        if constexpr (std::is_same_v<T, float>) return impl_->data32;
        else return impl_->data64;
    }

    // Gradient buffer, zero-allocated on first access.
    template <class T>
    std::span<T> grad() {
        check_type<T>();
        ensure_grad();
        if constexpr (std::is_same_v<T, float>) return impl_->grad32;
        else return impl_->grad64;
    }

    bool has_grad() const { return impl_->grad_present; }
    void ensure_grad();
    void zero_grad();

    // Convenience accessors that go through double regardless of dtype.
    double item() const;
    double at(int64_t i) const;
    double at(int i, int j) const;
    void set(int64_t i, double v);
    void set(int i, int j, double v);
    double grad_at(int64_t i) const;
    std::vector<double> to_vector() const;
    std::vector<double> grad_to_vector() const;

    // Deep copy of data (grad not copied).
    Tensor clone() const;
    // Copies data from src (same numel); shapes may differ.
    void copy_data_from(const Tensor& src);

    bool all_finite() const;
    std::string shape_str() const;

    TensorImpl* impl() const { return impl_.get(); }
    std::shared_ptr<TensorImpl> impl_ptr() const { return impl_; }

    static Tensor wrap(std::shared_ptr<TensorImpl> impl) {
        Tensor t;
        t.impl_ = std::move(impl);
        return t;
    }

private:
    template <class T>
    void check_type() const {
        static_assert(std::is_same_v<T, float> || std::is_same_v<T, double>);
        const Dtype want = std::is_same_v<T, float> ? Dtype::F32 : Dtype::F64;
        if (impl_->dtype != want)
            throw std::logic_error("tensor dtype mismatch: buffer is " + std::string(dtype_name(impl_->dtype)));
    }

    std::shared_ptr<TensorImpl> impl_;
};

inline void check_same_dtype(const Tensor& a, const Tensor& b, const char* op) {
    if (a.dtype() != b.dtype())
        throw std::invalid_argument(std::string(op) + ": operand dtypes differ");
}

}  // namespace rxncond
