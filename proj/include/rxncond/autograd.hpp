#pragma once

// Reverse-mode automatic differentiation. A Tape is a per-forward-pass
// object: constructing one makes it the active tape for the current
// thread, ops record backward closures onto it, backward() replays them
// in reverse, and the tape is discarded afterwards. Ops called with no
// active tape (or on tensors that do not require grad) are pure forward
// computations.

#include <functional>
#include <vector>

#include "rxncond/tensor.hpp"

namespace rxncond {

class Tape {
public:
    Tape();
    ~Tape();
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    // Registers an op: `out` is the op's output, `fn` propagates out.grad
    // into the inputs' grads (accumulating).
    void record(Tensor out, std::function<void()> fn);

    // Seeds d(loss)/d(loss) = 1 and propagates to every reachable tensor
    // with requires_grad. Gradients accumulate into leaf tensors across
    // calls; intermediate grads are reset per call.
    void backward(const Tensor& loss);

    size_t size() const { return records_.size(); }

    static Tape* active();

private:
    struct Record {
        Tensor out;
        std::function<void()> fn;
    };
    std::vector<Record> records_;
    Tape* prev_ = nullptr;
};

enum class Reduction { Mean, Sum };

// Matrix product with optional operand transposes. Shapes: op(a) is m x k,
// op(b) is k x n.
Tensor matmul(const Tensor& a, const Tensor& b, bool trans_a = false, bool trans_b = false);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double c);
// x[m x n] + v[n] broadcast over rows
Tensor add_rowvec(const Tensor& x, const Tensor& v);
Tensor relu(const Tensor& x);
// row-wise normalization over the last axis with learned gain/bias[n]
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps = 1e-5);
// row-wise softmax
Tensor softmax(const Tensor& x);
// mean (or sum) over rows of logsumexp(logits[i,:]) - logits[i, target[i]]
Tensor softmax_cross_entropy(const Tensor& logits, const std::vector<int>& targets,
                             Reduction reduction = Reduction::Mean);

// 2-d concatenation along axis 0 (rows) or 1 (columns)
Tensor concat(const std::vector<Tensor>& parts, int axis);
Tensor slice_rows(const Tensor& x, int row_begin, int row_end);
Tensor slice_cols(const Tensor& x, int col_begin, int col_end);

Tensor mean_rows(const Tensor& x);  // [m x n] -> [n]
Tensor sum_all(const Tensor& x);    // -> scalar
Tensor mean_all(const Tensor& x);   // -> scalar
Tensor reshape(const Tensor& x, std::vector<int> new_shape);
// rows gathered from table[v x n] by index; grads scatter-add back
Tensor gather_rows(const Tensor& table, const std::vector<int>& ids);

}  // namespace rxncond
