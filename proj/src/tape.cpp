#include "lrea/tape.hpp"

#include <cmath>
#include <stdexcept>
#include <utility>

namespace lrea {

void Tape::check(Var v) const {
    if (v.id < 0 || static_cast<std::size_t>(v.id) >= nodes_.size()) {
        throw std::logic_error("tape: operand handle does not belong to this tape");
    }
}

Var Tape::push(Node node, const Matrix* view, Matrix owned, bool needs_grad) {
    if (view == nullptr) {
        owned_.push_back(std::move(owned));
        view = &owned_.back();
    }
    nodes_.push_back(std::move(node));
    values_.push_back(view);
    needs_grad_.push_back(needs_grad);
    return Var{static_cast<int>(nodes_.size()) - 1};
}

Var Tape::push_owned(Node node, Matrix value, bool needs_grad) {
    return push(std::move(node), nullptr, std::move(value), needs_grad);
}

Var Tape::param(const Matrix& m) { return push(Node{}, &m, {}, true); }

Var Tape::constant(const Matrix& m) { return push(Node{}, &m, {}, false); }

Var Tape::constant_owned(Matrix m) { return push_owned(Node{}, std::move(m), false); }

Var Tape::matmul(Var a, Var b) {
    check(a);
    check(b);
    Node n{Op::kMatMul, a.id, b.id, 0.0, 0.0, {}};
    return push_owned(std::move(n), lrea::matmul(value(a), value(b)),
                      wants_grad(a) || wants_grad(b));
}

Var Tape::add(Var a, Var b) {
    check(a);
    check(b);
    Node n{Op::kAdd, a.id, b.id, 0.0, 0.0, {}};
    return push_owned(std::move(n), lrea::add(value(a), value(b)),
                      wants_grad(a) || wants_grad(b));
}

Var Tape::sub(Var a, Var b) {
    check(a);
    check(b);
    Node n{Op::kSub, a.id, b.id, 0.0, 0.0, {}};
    return push_owned(std::move(n), lrea::sub(value(a), value(b)),
                      wants_grad(a) || wants_grad(b));
}

Var Tape::hadamard(Var a, Var b) {
    check(a);
    check(b);
    Node n{Op::kHadamard, a.id, b.id, 0.0, 0.0, {}};
    return push_owned(std::move(n), lrea::hadamard(value(a), value(b)),
                      wants_grad(a) || wants_grad(b));
}

Var Tape::transpose(Var a) {
    check(a);
    Node n{Op::kTranspose, a.id, -1, 0.0, 0.0, {}};
    return push_owned(std::move(n), lrea::transpose(value(a)), wants_grad(a));
}

Var Tape::broadcast_row(Var a, int count) {
    check(a);
    Node n{Op::kBroadcastRow, a.id, -1, 0.0, 0.0, {}};
    return push_owned(std::move(n), lrea::broadcast_row(value(a), count), wants_grad(a));
}

Var Tape::leaky_relu(Var a, double slope) {
    check(a);
    Node n{Op::kLeakyRelu, a.id, -1, slope, 0.0, {}};
    return push_owned(std::move(n), lrea::leaky_relu(value(a), slope), wants_grad(a));
}

Var Tape::sigmoid(Var a) {
    check(a);
    const Matrix& x = value(a);
    Matrix y(x.rows, x.cols);
    for (std::size_t i = 0; i < x.size(); ++i) y.data[i] = 1.0 / (1.0 + std::exp(-x.data[i]));
    Node n{Op::kSigmoid, a.id, -1, 0.0, 0.0, {}};
    return push_owned(std::move(n), std::move(y), wants_grad(a));
}

Var Tape::clamp(Var a, double lo, double hi) {
    check(a);
    const Matrix& x = value(a);
    Matrix y(x.rows, x.cols);
    for (std::size_t i = 0; i < x.size(); ++i)
        y.data[i] = std::min(hi, std::max(lo, x.data[i]));
    Node n{Op::kClamp, a.id, -1, lo, hi, {}};
    return push_owned(std::move(n), std::move(y), wants_grad(a));
}

Var Tape::scale(Var a, double s) {
    check(a);
    Node n{Op::kScale, a.id, -1, s, 0.0, {}};
    return push_owned(std::move(n), lrea::scale(value(a), s), wants_grad(a));
}

Var Tape::neg_part_sq_norm(Var a) {
    check(a);
    Matrix y(1, 1);
    y(0, 0) = lrea::neg_part_sq_norm(value(a));
    Node n{Op::kNegPartSqNorm, a.id, -1, 0.0, 0.0, {}};
    return push_owned(std::move(n), std::move(y), wants_grad(a));
}

Var Tape::gather_rows(Var table, std::vector<int> ids) {
    check(table);
    const Matrix& t = value(table);
    if (ids.empty()) throw ShapeError("gather_rows: empty id list");
    Matrix y(static_cast<int>(ids.size()), t.cols);
    for (std::size_t i = 0; i < ids.size(); ++i) {
        const int id = ids[i];
        if (id < 0 || id >= t.rows) {
            throw IndexError("gather_rows: id " + std::to_string(id) +
                             " outside table with " + std::to_string(t.rows) + " rows");
        }
        for (int j = 0; j < t.cols; ++j) y(static_cast<int>(i), j) = t(id, j);
    }
    Node n{Op::kGatherRows, table.id, -1, 0.0, 0.0, std::move(ids)};
    return push_owned(std::move(n), std::move(y), wants_grad(table));
}

Var Tape::concat_cols(const std::vector<Var>& parts) {
    if (parts.empty()) throw ShapeError("concat_cols: no parts");
    int total = 0;
    bool needs = false;
    for (Var p : parts) {
        check(p);
        if (value(p).rows != 1) {
            throw ShapeError("concat_cols: expected 1xN parts, got " +
                             value(p).shape_str());
        }
        total += value(p).cols;
        needs = needs || wants_grad(p);
    }
    Matrix y(1, total);
    int off = 0;
    std::vector<int> ids;
    ids.reserve(parts.size());
    for (Var p : parts) {
        const Matrix& v = value(p);
        std::copy(v.data.begin(), v.data.end(), y.data.begin() + off);
        off += v.cols;
        ids.push_back(p.id);
    }
    Node n{Op::kConcatCols, -1, -1, 0.0, 0.0, std::move(ids)};
    return push_owned(std::move(n), std::move(y), needs);
}

Var Tape::stop_gradient(Var a) {
    check(a);
    Node n{Op::kStopGradient, a.id, -1, 0.0, 0.0, {}};
    return push_owned(std::move(n), value(a), false);
}

Var Tape::bce_term(Var prob, double label) {
    check(prob);
    const Matrix& p = value(prob);
    if (p.rows != 1 || p.cols != 1) {
        throw ShapeError("bce_term: expected 1x1 probability, got " + p.shape_str());
    }
    Matrix y(1, 1);
    y(0, 0) = -(label * std::log(p(0, 0)) + (1.0 - label) * std::log(1.0 - p(0, 0)));
    Node n{Op::kBceTerm, prob.id, -1, label, 0.0, {}};
    return push_owned(std::move(n), std::move(y), wants_grad(prob));
}

Matrix& Tape::grad_buf(int id) {
    Matrix& g = grads_[id];
    if (g.empty()) {
        const Matrix& v = *values_[id];
        g = Matrix(v.rows, v.cols);
    }
    return g;
}

const Matrix& Tape::grad(Var v) const {
    check(v);
    if (!backward_done_) throw std::logic_error("tape: grad() before backward()");
    const Matrix& g = grads_[v.id];
    if (!g.empty()) return g;
    const Matrix& val = *values_[v.id];
    const_cast<Tape*>(this)->zero_like_ = Matrix(val.rows, val.cols);
    return zero_like_;
}

void Tape::backward(Var loss) {
    check(loss);
    if (backward_done_) throw std::logic_error("tape: backward() may run only once");
    const Matrix& lv = value(loss);
    if (lv.rows != 1 || lv.cols != 1) {
        throw ShapeError("backward: loss must be 1x1, got " + lv.shape_str());
    }
    grads_.assign(nodes_.size(), Matrix{});
    grad_buf(loss.id)(0, 0) = 1.0;

    for (int i = static_cast<int>(nodes_.size()) - 1; i >= 0; --i) {
        if (!needs_grad_[i] || grads_[i].empty()) continue;
        const Node& n = nodes_[i];
        const Matrix& g = grads_[i];
        switch (n.op) {
            case Op::kLeaf:
            case Op::kStopGradient:
                break;
            case Op::kMatMul: {
                if (needs_grad_[n.a])
                    matmul_acc(grad_buf(n.a), g, lrea::transpose(*values_[n.b]));
                if (needs_grad_[n.b])
                    matmul_acc(grad_buf(n.b), lrea::transpose(*values_[n.a]), g);
                break;
            }
            case Op::kAdd: {
                if (needs_grad_[n.a]) {
                    Matrix& ga = grad_buf(n.a);
                    for (std::size_t k = 0; k < g.size(); ++k) ga.data[k] += g.data[k];
                }
                if (needs_grad_[n.b]) {
                    Matrix& gb = grad_buf(n.b);
                    for (std::size_t k = 0; k < g.size(); ++k) gb.data[k] += g.data[k];
                }
                break;
            }
            case Op::kSub: {
                if (needs_grad_[n.a]) {
                    Matrix& ga = grad_buf(n.a);
                    for (std::size_t k = 0; k < g.size(); ++k) ga.data[k] += g.data[k];
                }
                if (needs_grad_[n.b]) {
                    Matrix& gb = grad_buf(n.b);
                    for (std::size_t k = 0; k < g.size(); ++k) gb.data[k] -= g.data[k];
                }
                break;
            }
            case Op::kHadamard: {
                if (needs_grad_[n.a]) {
                    Matrix& ga = grad_buf(n.a);
                    const Matrix& bv = *values_[n.b];
                    for (std::size_t k = 0; k < g.size(); ++k)
                        ga.data[k] += g.data[k] * bv.data[k];
                }
                if (needs_grad_[n.b]) {
                    Matrix& gb = grad_buf(n.b);
                    const Matrix& av = *values_[n.a];
                    for (std::size_t k = 0; k < g.size(); ++k)
                        gb.data[k] += g.data[k] * av.data[k];
                }
                break;
            }
            case Op::kTranspose: {
                Matrix& ga = grad_buf(n.a);
                const Matrix gt = lrea::transpose(g);
                for (std::size_t k = 0; k < gt.size(); ++k) ga.data[k] += gt.data[k];
                break;
            }
            case Op::kBroadcastRow: {
                Matrix& ga = grad_buf(n.a);
                for (int r = 0; r < g.rows; ++r)
                    for (int c = 0; c < g.cols; ++c) ga(0, c) += g(r, c);
                break;
            }
            case Op::kLeakyRelu: {
                Matrix& ga = grad_buf(n.a);
                const Matrix& av = *values_[n.a];
                for (std::size_t k = 0; k < g.size(); ++k)
                    ga.data[k] += g.data[k] * (av.data[k] >= 0.0 ? 1.0 : n.x0);
                break;
            }
            case Op::kSigmoid: {
                Matrix& ga = grad_buf(n.a);
                const Matrix& y = *values_[i];
                for (std::size_t k = 0; k < g.size(); ++k)
                    ga.data[k] += g.data[k] * y.data[k] * (1.0 - y.data[k]);
                break;
            }
            case Op::kClamp: {
                Matrix& ga = grad_buf(n.a);
                const Matrix& av = *values_[n.a];
                for (std::size_t k = 0; k < g.size(); ++k)
                    if (av.data[k] > n.x0 && av.data[k] < n.x1) ga.data[k] += g.data[k];
                break;
            }
            case Op::kScale: {
                Matrix& ga = grad_buf(n.a);
                for (std::size_t k = 0; k < g.size(); ++k) ga.data[k] += g.data[k] * n.x0;
                break;
            }
            case Op::kNegPartSqNorm: {
                Matrix& ga = grad_buf(n.a);
                const Matrix& av = *values_[n.a];
                const double gs = g(0, 0);
                for (std::size_t k = 0; k < av.size(); ++k)
                    if (av.data[k] < 0.0) ga.data[k] += gs * 2.0 * av.data[k];
                break;
            }
            case Op::kGatherRows: {
                Matrix& gt = grad_buf(n.a);
                for (std::size_t r = 0; r < n.ids.size(); ++r) {
                    const int id = n.ids[r];
                    for (int c = 0; c < g.cols; ++c)
                        gt(id, c) += g(static_cast<int>(r), c);
                }
                break;
            }
            case Op::kConcatCols: {
                int off = 0;
                for (int src : n.ids) {
                    const Matrix& v = *values_[src];
                    if (needs_grad_[src]) {
                        Matrix& gs = grad_buf(src);
                        for (int c = 0; c < v.cols; ++c) gs(0, c) += g(0, off + c);
                    }
                    off += v.cols;
                }
                break;
            }
            case Op::kBceTerm: {
                Matrix& gp = grad_buf(n.a);
                const double p = (*values_[n.a])(0, 0);
                const double y = n.x0;
                gp(0, 0) += g(0, 0) * (-(y / p) + (1.0 - y) / (1.0 - p));
                break;
            }
        }
    }
    backward_done_ = true;
}

}  // namespace lrea
