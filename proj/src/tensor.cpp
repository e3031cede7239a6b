#include "rxncond/tensor.hpp"

#include <cmath>
#include <sstream>

namespace rxncond {

namespace {
std::shared_ptr<TensorImpl> make_impl(std::vector<int> shape, Dtype dt) {
    for (int d : shape) {
        if (d <= 0) throw std::invalid_argument("tensor dimensions must be positive");
    }
    auto impl = std::make_shared<TensorImpl>();
    impl->shape = std::move(shape);
    impl->dtype = dt;
    const size_t n = static_cast<size_t>(impl->numel());
    if (dt == Dtype::F32) impl->data32.assign(n, 0.0f);
    else impl->data64.assign(n, 0.0);
    return impl;
}
}  // namespace

Tensor Tensor::zeros(std::vector<int> shape, Dtype dt, bool requires_grad) {
    Tensor t = wrap(make_impl(std::move(shape), dt));
    t.impl()->requires_grad = requires_grad;
    return t;
}

Tensor Tensor::full(std::vector<int> shape, double value, Dtype dt) {
    Tensor t = wrap(make_impl(std::move(shape), dt));
    const int64_t n = t.numel();
    for (int64_t i = 0; i < n; ++i) t.set(i, value);
    return t;
}

Tensor Tensor::scalar(double value, Dtype dt) { return full({1}, value, dt); }

Tensor Tensor::from(std::vector<int> shape, const std::vector<double>& values, Dtype dt) {
    Tensor t = wrap(make_impl(std::move(shape), dt));
    if (static_cast<int64_t>(values.size()) != t.numel())
        throw std::invalid_argument("tensor: value count does not match shape");
    for (int64_t i = 0; i < t.numel(); ++i) t.set(i, values[static_cast<size_t>(i)]);
    return t;
}

Tensor Tensor::randn(std::vector<int> shape, Rng& rng, double stddev, Dtype dt) {
    Tensor t = wrap(make_impl(std::move(shape), dt));
    for (int64_t i = 0; i < t.numel(); ++i) t.set(i, rng.normal(0.0, stddev));
    return t;
}

void Tensor::ensure_grad() {
    if (impl_->grad_present) return;
    const size_t n = static_cast<size_t>(numel());
    if (impl_->dtype == Dtype::F32) impl_->grad32.assign(n, 0.0f);
    else impl_->grad64.assign(n, 0.0);
    impl_->grad_present = true;
}

void Tensor::zero_grad() {
    if (!impl_->grad_present) return;
    if (impl_->dtype == Dtype::F32) std::fill(impl_->grad32.begin(), impl_->grad32.end(), 0.0f);
    else std::fill(impl_->grad64.begin(), impl_->grad64.end(), 0.0);
}

double Tensor::item() const {
    if (numel() != 1) throw std::logic_error("item(): tensor is not a scalar");
    return at(0);
}

double Tensor::at(int64_t i) const {
    return dtype() == Dtype::F32 ? static_cast<double>(impl_->data32[static_cast<size_t>(i)])
                                 : impl_->data64[static_cast<size_t>(i)];
}

double Tensor::at(int i, int j) const {
    return at(static_cast<int64_t>(i) * dim(1) + j);
}

void Tensor::set(int64_t i, double v) {
    if (dtype() == Dtype::F32) impl_->data32[static_cast<size_t>(i)] = static_cast<float>(v);
    else impl_->data64[static_cast<size_t>(i)] = v;
}

void Tensor::set(int i, int j, double v) { set(static_cast<int64_t>(i) * dim(1) + j, v); }

double Tensor::grad_at(int64_t i) const {
    if (!impl_->grad_present) throw std::logic_error("grad_at(): no gradient present");
    return dtype() == Dtype::F32 ? static_cast<double>(impl_->grad32[static_cast<size_t>(i)])
                                 : impl_->grad64[static_cast<size_t>(i)];
}

std::vector<double> Tensor::to_vector() const {
    std::vector<double> out(static_cast<size_t>(numel()));
    for (int64_t i = 0; i < numel(); ++i) out[static_cast<size_t>(i)] = at(i);
    return out;
}

std::vector<double> Tensor::grad_to_vector() const {
    std::vector<double> out(static_cast<size_t>(numel()));
    for (int64_t i = 0; i < numel(); ++i) out[static_cast<size_t>(i)] = grad_at(i);
    return out;
}

Tensor Tensor::clone() const {
    Tensor t = wrap(make_impl(shape(), dtype()));
    t.impl()->requires_grad = impl_->requires_grad;
    t.impl()->data32 = impl_->data32;
    t.impl()->data64 = impl_->data64;
    return t;
}

void Tensor::copy_data_from(const Tensor& src) {
    if (src.numel() != numel()) throw std::invalid_argument("copy_data_from: element counts differ");
    for (int64_t i = 0; i < numel(); ++i) set(i, src.at(i));
}

bool Tensor::all_finite() const {
    if (dtype() == Dtype::F32) {
        for (float v : impl_->data32)
            if (!std::isfinite(v)) return false;
    } else {
        for (double v : impl_->data64)
            if (!std::isfinite(v)) return false;
    }
    return true;
}

std::string Tensor::shape_str() const {
    std::ostringstream os;
    os << '[';
    for (size_t i = 0; i < impl_->shape.size(); ++i) {
        if (i) os << 'x';
        os << impl_->shape[i];
    }
    os << ']';
    return os.str();
}

}  // namespace rxncond
