#include "rxncond/params.hpp"

#include <cmath>
#include <stdexcept>

namespace rxncond {

void OneCycleSchedule::validate() const {
    if (total_steps < 2) throw std::invalid_argument("schedule: total_steps must be >= 2");
    if (!(max_lr > 0)) throw std::invalid_argument("schedule: max_lr must be positive");
    if (!(warmup_fraction > 0.0 && warmup_fraction < 1.0))
        throw std::invalid_argument("schedule: warmup_fraction must lie in (0,1)");
    if (!(final_lr_fraction > 0.0 && final_lr_fraction < 1.0))
        throw std::invalid_argument("schedule: final_lr_fraction must lie in (0,1)");
    if (!(start_lr_fraction > 0.0 && start_lr_fraction < 1.0))
        throw std::invalid_argument("schedule: start_lr_fraction must lie in (0,1)");
}

int OneCycleSchedule::warmup_end() const {
    int we = static_cast<int>(std::lround(warmup_fraction * total_steps));
    if (we < 1) we = 1;
    if (we > total_steps - 1) we = total_steps - 1;
    return we;
}

double OneCycleSchedule::lr(int t) const {
    validate();
    if (t < 0 || t > total_steps) throw std::out_of_range("schedule: step index out of range");
    const int we = warmup_end();
    const double start = max_lr * start_lr_fraction;
    if (t <= we) {
        return start + (max_lr - start) * (static_cast<double>(t) / we);
    }
    const double final_lr = max_lr * final_lr_fraction;
    const double progress = static_cast<double>(t - we) / (total_steps - we);
    return final_lr + (max_lr - final_lr) * 0.5 * (1.0 + std::cos(3.14159265358979323846 * progress));
}

Tensor ParamStore::create(const std::string& name, std::vector<int> shape, Rng& rng,
                          double stddev) {
    Tensor t = Tensor::randn(std::move(shape), rng, stddev).set_requires_grad(true);
    put(name, t);
    return t;
}

Tensor ParamStore::create_zeros(const std::string& name, std::vector<int> shape) {
    Tensor t = Tensor::zeros(std::move(shape), default_dtype()).set_requires_grad(true);
    put(name, t);
    return t;
}

Tensor ParamStore::create_full(const std::string& name, std::vector<int> shape, double value) {
    Tensor t = Tensor::full(std::move(shape), value).set_requires_grad(true);
    put(name, t);
    return t;
}

void ParamStore::put(const std::string& name, Tensor t) {
    if (params_.count(name)) throw std::invalid_argument("parameter name already used: " + name);
    params_.emplace(name, std::move(t));
}

Tensor ParamStore::get(const std::string& name) const {
    auto it = params_.find(name);
    if (it == params_.end()) throw std::out_of_range("no such parameter: " + name);
    return it->second;
}

void ParamStore::freeze_prefix(const std::string& prefix) {
    bool any = false;
    for (const auto& [name, _] : params_) {
        if (name.rfind(prefix, 0) == 0) {
            any = true;
            break;
        }
    }
    if (!any) throw std::invalid_argument("frozen prefix matches no parameter: " + prefix);
    frozen_.push_back(prefix);
}

bool ParamStore::is_frozen(const std::string& name) const {
    for (const auto& p : frozen_)
        if (name.rfind(p, 0) == 0) return true;
    return false;
}

void ParamStore::zero_grad() {
    for (auto& [_, t] : params_) t.zero_grad();
}

int64_t ParamStore::total_parameters() const {
    int64_t n = 0;
    for (const auto& [_, t] : params_) n += t.numel();
    return n;
}

void AdamOptimizer::step(ParamStore& store, const OneCycleSchedule& schedule, int t) {
    if (t >= schedule.total_steps)
        throw std::out_of_range("optimizer step index exceeds schedule total_steps");
    const double lr = schedule.lr(t);
    const double bc1 = 1.0 - std::pow(beta1_, t + 1);
    const double bc2 = 1.0 - std::pow(beta2_, t + 1);
    for (auto& [name, p] : store.entries()) {
        if (store.is_frozen(name) || !p.has_grad()) continue;
        auto& mom = state_[name];
        const size_t n = static_cast<size_t>(p.numel());
        if (mom.m.empty()) {
            mom.m.assign(n, 0.0);
            mom.v.assign(n, 0.0);
        }
        for (size_t i = 0; i < n; ++i) {
            const double g = p.grad_at(static_cast<int64_t>(i));
            mom.m[i] = beta1_ * mom.m[i] + (1.0 - beta1_) * g;
            mom.v[i] = beta2_ * mom.v[i] + (1.0 - beta2_) * g * g;
            const double mhat = mom.m[i] / bc1;
            const double vhat = mom.v[i] / bc2;
            p.set(static_cast<int64_t>(i),
                  p.at(static_cast<int64_t>(i)) - lr * mhat / (std::sqrt(vhat) + eps_));
        }
    }
}

}  // namespace rxncond
