#pragma once

#include <map>
#include <string>
#include <vector>

#include "rxncond/tensor.hpp"

namespace rxncond {

// Piecewise warmup + cosine decay, the one-cycle policy. lr(0) starts at
// max_lr * start_lr_fraction, climbs linearly to max_lr at the end of
// warmup, then decays on a cosine to max_lr * final_lr_fraction at
// total_steps. Continuous everywhere.
struct OneCycleSchedule {
    double max_lr = 3e-5;
    int total_steps = 0;
    double warmup_fraction = 0.3;
    double final_lr_fraction = 1e-2;
    double start_lr_fraction = 0.04;

    void validate() const;
    int warmup_end() const;
    double lr(int t) const;  // defined on [0, total_steps]
};

// Named parameter tensors plus the set of name prefixes excluded from
// optimizer updates. Iteration order is the lexicographic name order,
// which keeps parameter creation and updates deterministic.
class ParamStore {
public:
    // Creates and registers a parameter (requires_grad on).
    Tensor create(const std::string& name, std::vector<int> shape, Rng& rng, double stddev);
    Tensor create_zeros(const std::string& name, std::vector<int> shape);
    Tensor create_full(const std::string& name, std::vector<int> shape, double value);
    void put(const std::string& name, Tensor t);

    Tensor get(const std::string& name) const;
    bool has(const std::string& name) const { return params_.count(name) > 0; }
    size_t size() const { return params_.size(); }

    // Marks a prefix as frozen. The prefix must match at least one
    // existing parameter.
    void freeze_prefix(const std::string& prefix);
    bool is_frozen(const std::string& name) const;
    const std::vector<std::string>& frozen_prefixes() const { return frozen_; }
    void clear_frozen() { frozen_.clear(); }

    void zero_grad();
    int64_t total_parameters() const;

    const std::map<std::string, Tensor>& entries() const { return params_; }
    std::map<std::string, Tensor>& entries() { return params_; }

private:
    std::map<std::string, Tensor> params_;
    std::vector<std::string> frozen_;
};

// Adam with the one-cycle learning rate. Moment buffers are kept in
// double regardless of parameter dtype.
class AdamOptimizer {
public:
    AdamOptimizer(double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
        : beta1_(beta1), beta2_(beta2), eps_(eps) {}

    // Applies one update at schedule step t. Throws if t >= total_steps.
    // Frozen parameters and parameters without gradients are untouched.
    void step(ParamStore& store, const OneCycleSchedule& schedule, int t);

private:
    struct Moments {
        std::vector<double> m, v;
    };
    double beta1_, beta2_, eps_;
    std::map<std::string, Moments> state_;
};

}  // namespace rxncond
