#pragma once

#include <deque>
#include <vector>

#include "lrea/matrix.hpp"

namespace lrea {

// Handle to a value slot on a Tape.
struct Var {
    int id = -1;
    bool valid() const { return id >= 0; }
};

// Reverse-mode autodiff over an eagerly evaluated operation tape.
//
// Values are computed as operations are recorded; backward() replays the
// record once in reverse, accumulating adjoints into per-slot gradient
// buffers. A tape is single-owner: build, run backward once, read
// gradients, drop it. Parameters and constants are registered as views,
// so the caller keeps ownership and must outlive the tape.
class Tape {
public:
    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    // Leaf with a gradient slot. `m` is referenced, not copied.
    Var param(const Matrix& m);

    // Leaf without a gradient slot. `m` is referenced, not copied.
    Var constant(const Matrix& m);

    // Leaf without a gradient slot, storage owned by the tape.
    Var constant_owned(Matrix m);

    Var matmul(Var a, Var b);
    Var add(Var a, Var b);
    Var sub(Var a, Var b);
    Var hadamard(Var a, Var b);
    Var transpose(Var a);
    Var broadcast_row(Var a, int count);
    Var leaky_relu(Var a, double slope);
    Var sigmoid(Var a);
    Var clamp(Var a, double lo, double hi);
    Var scale(Var a, double s);
    Var neg_part_sq_norm(Var a);       // -> 1x1
    Var gather_rows(Var table, std::vector<int> ids);
    Var concat_cols(const std::vector<Var>& parts);  // all 1xN
    Var stop_gradient(Var a);
    // mean-free binary cross entropy term for one example:
    // -(y*log p + (1-y)*log(1-p)), p a clamped 1x1 probability.
    Var bce_term(Var prob, double label);

    const Matrix& value(Var v) const {
        check(v);
        return *values_[v.id];
    }

    // Runs the backward pass from a 1x1 scalar. May be called once.
    void backward(Var loss);

    // Gradient buffer of a slot; valid after backward(). Slots that do
    // not influence the loss report an all-zero gradient.
    const Matrix& grad(Var v) const;

    std::size_t node_count() const { return nodes_.size(); }
    bool backward_done() const { return backward_done_; }

private:
    enum class Op {
        kLeaf,
        kMatMul,
        kAdd,
        kSub,
        kHadamard,
        kTranspose,
        kBroadcastRow,
        kLeakyRelu,
        kSigmoid,
        kClamp,
        kScale,
        kNegPartSqNorm,
        kGatherRows,
        kConcatCols,
        kStopGradient,
        kBceTerm,
    };

    struct Node {
        Op op = Op::kLeaf;
        int a = -1;
        int b = -1;
        double x0 = 0.0;  // slope / scale / clamp lo / label
        double x1 = 0.0;  // clamp hi
        std::vector<int> ids;  // gather indices or concat sources
    };

    Var push(Node node, const Matrix* value_view, Matrix owned, bool needs_grad);
    Var push_owned(Node node, Matrix value, bool needs_grad);
    bool wants_grad(Var v) const { return needs_grad_[v.id]; }
    Matrix& grad_buf(int id);
    void check(Var v) const;

    std::vector<Node> nodes_;
    std::vector<const Matrix*> values_;  // one per node
    std::deque<Matrix> owned_;           // stable addresses for owned values
    std::vector<bool> needs_grad_;
    std::vector<Matrix> grads_;  // sized like nodes_ at backward time
    bool backward_done_ = false;
    Matrix zero_like_;  // scratch for grad() on no-grad slots
};

}  // namespace lrea
