#pragma once

// Central finite-difference gradient checking. The numeric side never
// touches the tape: it reruns the forward map at x +/- h and differences
// the losses, so it stays an independent oracle for the analytic path.

#include <functional>
#include <string>
#include <vector>

#include "rxncond/autograd.hpp"
#include "rxncond/tensor.hpp"

namespace rxncond {

struct GradCheckResult {
    double max_rel_err = 0.0;
    int checked_coords = 0;
    bool pass = false;
    std::string worst;  // "input#i[j]" of the worst coordinate
};

// `forward` maps the given input tensors to a scalar loss. All inputs
// must be f64 with requires_grad. When max_coords_per_tensor > 0, only
// that many coordinates per tensor are differenced (chosen with `rng`),
// which keeps whole-model checks fast.
GradCheckResult check_gradients(const std::function<Tensor(const std::vector<Tensor>&)>& forward,
                                std::vector<Tensor> inputs, double h = 1e-5, double tol = 1e-4,
                                int max_coords_per_tensor = 0, Rng* rng = nullptr);

struct SuiteEntry {
    std::string name;
    double max_rel_err = 0.0;
    bool pass = false;
};

struct SuiteReport {
    std::vector<SuiteEntry> entries;
    bool all_pass = true;
    void add(SuiteEntry e) {
        all_pass = all_pass && e.pass;
        entries.push_back(std::move(e));
    }
};

// Runs every differentiable op against finite differences on
// `configs_per_op` random shapes each.
SuiteReport run_op_gradient_suite(uint64_t seed, int configs_per_op = 20);

}  // namespace rxncond
