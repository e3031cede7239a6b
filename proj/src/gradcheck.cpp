#include "rxncond/gradcheck.hpp"

#include <algorithm>
#include <cmath>

namespace rxncond {

GradCheckResult check_gradients(const std::function<Tensor(const std::vector<Tensor>&)>& forward,
                                std::vector<Tensor> inputs, double h, double tol,
                                int max_coords_per_tensor, Rng* rng) {
    for (auto& in : inputs) {
        if (in.dtype() != Dtype::F64)
            throw std::invalid_argument("gradient checks must run at f64");
        in.set_requires_grad(true);
        in.zero_grad();
    }
    // analytic pass
    {
        Tape tape;
        Tensor loss = forward(inputs);
        tape.backward(loss);
    }
    // inputs the loss never reached hold a zero gradient
    for (auto& in : inputs) in.ensure_grad();
    GradCheckResult res;
    for (size_t ti = 0; ti < inputs.size(); ++ti) {
        Tensor& x = inputs[ti];
        const int64_t n = x.numel();
        std::vector<int64_t> coords;
        if (max_coords_per_tensor > 0 && n > max_coords_per_tensor) {
            for (int c = 0; c < max_coords_per_tensor; ++c)
                coords.push_back(rng ? static_cast<int64_t>(rng->below(static_cast<uint64_t>(n)))
                                     : c);
            std::sort(coords.begin(), coords.end());
            coords.erase(std::unique(coords.begin(), coords.end()), coords.end());
        } else {
            coords.resize(static_cast<size_t>(n));
            for (int64_t i = 0; i < n; ++i) coords[static_cast<size_t>(i)] = i;
        }
        for (int64_t i : coords) {
            const double orig = x.at(i);
            x.set(i, orig + h);
            const double lp = forward(inputs).item();
            x.set(i, orig - h);
            const double lm = forward(inputs).item();
            x.set(i, orig);
            const double numeric = (lp - lm) / (2.0 * h);
            const double analytic = x.grad_at(i);
            const double rel = std::abs(analytic - numeric) /
                               std::max({std::abs(analytic), std::abs(numeric), 1e-6});
            ++res.checked_coords;
            if (rel > res.max_rel_err) {
                res.max_rel_err = rel;
                res.worst = "input#" + std::to_string(ti) + "[" + std::to_string(i) + "]";
            }
        }
    }
    res.pass = res.max_rel_err < tol;
    return res;
}

namespace {

Tensor rand_t(Rng& rng, std::vector<int> shape, double s = 1.0) {
    return Tensor::randn(std::move(shape), rng, s, Dtype::F64);
}

// random linear functional of the op output, so every output element
// influences the scalar loss
Tensor weighted(const Tensor& y, const Tensor& w) {
    return sum_all(mul(y, w));
}

double run_case(const std::function<Tensor(const std::vector<Tensor>&)>& fwd,
                std::vector<Tensor> inputs) {
    auto r = check_gradients(fwd, std::move(inputs));
    return r.max_rel_err;
}

void add_entry(SuiteReport& rep, const std::string& name, double max_err) {
    rep.add({name, max_err, max_err < 1e-4});
}

}  // namespace

SuiteReport run_op_gradient_suite(uint64_t seed, int configs_per_op) {
    Rng rng(seed);
    SuiteReport rep;
    auto dims = [&](int lo, int hi) { return lo + rng.index(static_cast<size_t>(hi - lo + 1)); };

    {
        double worst = 0;
        for (int c = 0; c < configs_per_op; ++c) {
            const int m = dims(1, 6), k = dims(1, 7), n = dims(1, 5);
            const bool ta = rng.uniform() < 0.5, tb = rng.uniform() < 0.5;
            Tensor a = rand_t(rng, ta ? std::vector<int>{k, m} : std::vector<int>{m, k});
            Tensor b = rand_t(rng, tb ? std::vector<int>{n, k} : std::vector<int>{k, n});
            Tensor w = rand_t(rng, {m, n});
            worst = std::max(worst, run_case(
                                             [&](const std::vector<Tensor>& in) {
                                                 return weighted(matmul(in[0], in[1], ta, tb), w);
                                             },
                                             {a, b}));
        }
        add_entry(rep, "matmul", worst);
    }
    {
        double worst = 0;
        for (int c = 0; c < configs_per_op; ++c) {
            const int m = dims(1, 6), n = dims(1, 8);
            Tensor w = rand_t(rng, {m, n});
            worst = std::max(worst, run_case(
                                             [&](const std::vector<Tensor>& in) {
                                                 return weighted(add(in[0], in[1]), w);
                                             },
                                             {rand_t(rng, {m, n}), rand_t(rng, {m, n})}));
            worst = std::max(worst, run_case(
                                             [&](const std::vector<Tensor>& in) {
                                                 return weighted(mul(in[0], in[1]), w);
                                             },
                                             {rand_t(rng, {m, n}), rand_t(rng, {m, n})}));
        }
        add_entry(rep, "add/mul", worst);
    }
    {
        double worst = 0;
        for (int c = 0; c < configs_per_op; ++c) {
            const int m = dims(1, 6), n = dims(1, 8);
            Tensor w = rand_t(rng, {m, n});
            // shift away from the kink at 0 where the subgradient is ambiguous
            Tensor x = rand_t(rng, {m, n});
            for (int64_t i = 0; i < x.numel(); ++i)
                if (std::abs(x.at(i)) < 1e-3) x.set(i, x.at(i) + 0.5);
            worst = std::max(worst, run_case(
                                             [&](const std::vector<Tensor>& in) {
                                                 return weighted(relu(in[0]), w);
                                             },
                                             {x}));
        }
        add_entry(rep, "relu", worst);
    }
    {
        double worst = 0;
        for (int c = 0; c < configs_per_op; ++c) {
            const int m = dims(1, 5), n = dims(2, 9);
            Tensor w = rand_t(rng, {m, n});
            worst = std::max(worst, run_case(
                                             [&](const std::vector<Tensor>& in) {
                                                 return weighted(layer_norm(in[0], in[1], in[2]), w);
                                             },
                                             {rand_t(rng, {m, n}), rand_t(rng, {n}, 0.5),
                                              rand_t(rng, {n}, 0.5)}));
        }
        add_entry(rep, "layer_norm", worst);
    }
    {
        double worst = 0;
        for (int c = 0; c < configs_per_op; ++c) {
            const int m = dims(1, 5), n = dims(2, 9);
            Tensor w = rand_t(rng, {m, n});
            worst = std::max(worst, run_case(
                                             [&](const std::vector<Tensor>& in) {
                                                 return weighted(softmax(in[0]), w);
                                             },
                                             {rand_t(rng, {m, n})}));
        }
        add_entry(rep, "softmax", worst);
    }
    {
        double worst = 0;
        for (int c = 0; c < configs_per_op; ++c) {
            const int m = dims(1, 6), n = dims(2, 9);
            std::vector<int> targets(static_cast<size_t>(m));
            for (auto& t : targets) t = rng.index(static_cast<size_t>(n));
            const Reduction red = rng.uniform() < 0.5 ? Reduction::Mean : Reduction::Sum;
            worst = std::max(worst, run_case(
                                             [&](const std::vector<Tensor>& in) {
                                                 return softmax_cross_entropy(in[0], targets, red);
                                             },
                                             {rand_t(rng, {m, n})}));
        }
        add_entry(rep, "softmax_cross_entropy", worst);
    }
    {
        double worst = 0;
        for (int c = 0; c < configs_per_op; ++c) {
            const int m = dims(1, 4), n = dims(1, 5), m2 = dims(1, 4);
            Tensor w0 = rand_t(rng, {m + m2, n});
            worst = std::max(worst, run_case(
                                             [&](const std::vector<Tensor>& in) {
                                                 return weighted(concat({in[0], in[1]}, 0), w0);
                                             },
                                             {rand_t(rng, {m, n}), rand_t(rng, {m2, n})}));
            const int n2 = dims(1, 5);
            Tensor w1 = rand_t(rng, {m, n + n2});
            worst = std::max(worst, run_case(
                                             [&](const std::vector<Tensor>& in) {
                                                 return weighted(concat({in[0], in[1]}, 1), w1);
                                             },
                                             {rand_t(rng, {m, n}), rand_t(rng, {m, n2})}));
        }
        add_entry(rep, "concat", worst);
    }
    {
        double worst = 0;
        for (int c = 0; c < configs_per_op; ++c) {
            const int m = dims(2, 7), n = dims(1, 6);
            Tensor w = rand_t(rng, {1, n});
            const int r0 = rng.index(static_cast<size_t>(m));
            const int r1 = r0 + 1 + rng.index(static_cast<size_t>(m - r0));
            Tensor ws = rand_t(rng, {r1 - r0, n});
            worst = std::max(worst, run_case(
                                             [&](const std::vector<Tensor>& in) {
                                                 return weighted(slice_rows(in[0], r0, r1), ws);
                                             },
                                             {rand_t(rng, {m, n})}));
            Tensor wm = rand_t(rng, {n});
            worst = std::max(worst, run_case(
                                             [&](const std::vector<Tensor>& in) {
                                                 return sum_all(mul(
                                                     reshape(mean_rows(in[0]), {1, n}),
                                                     reshape(wm, {1, n})));
                                             },
                                             {rand_t(rng, {m, n})}));
        }
        add_entry(rep, "slice/mean_rows", worst);
    }
    {
        double worst = 0;
        for (int c = 0; c < configs_per_op; ++c) {
            const int v = dims(2, 8), n = dims(1, 6), m = dims(1, 7);
            std::vector<int> ids(static_cast<size_t>(m));
            for (auto& id : ids) id = rng.index(static_cast<size_t>(v));
            Tensor w = rand_t(rng, {m, n});
            worst = std::max(worst, run_case(
                                             [&](const std::vector<Tensor>& in) {
                                                 return weighted(gather_rows(in[0], ids), w);
                                             },
                                             {rand_t(rng, {v, n})}));
        }
        add_entry(rep, "gather_rows", worst);
    }
    {
        double worst = 0;
        for (int c = 0; c < configs_per_op; ++c) {
            const int m = dims(1, 6), n = dims(1, 7);
            const double s = rng.uniform(-2.0, 2.0);
            Tensor w = rand_t(rng, {m, n});
            worst = std::max(worst, run_case(
                                             [&](const std::vector<Tensor>& in) {
                                                 return weighted(add_rowvec(scale(in[0], s), in[1]),
                                                                 w);
                                             },
                                             {rand_t(rng, {m, n}), rand_t(rng, {n})}));
        }
        add_entry(rep, "scale/add_rowvec", worst);
    }
    return rep;
}

}  // namespace rxncond
