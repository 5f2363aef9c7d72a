#pragma once

// Reverse-mode differentiation over an explicit operation tape.
//
// Every operation appends a node holding its value and a closure that maps
// the node's output gradient to contributions on its parents. backward()
// walks the tape in reverse insertion order, which is a valid topological
// order because parents are always recorded before children.

#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <span>
#include <utility>
#include <vector>

#include "timerep/errors.hpp"
#include "timerep/matrix.hpp"

namespace timerep::ad {

class Tape;

/// Handle to a node on a tape.
struct Var {
    Tape* tape = nullptr;
    std::size_t id = 0;

    const Matrix& value() const;
    std::size_t rows() const { return value().rows(); }
    std::size_t cols() const { return value().cols(); }
};

class Tape {
public:
    using Backward = std::function<void(Tape&, const Matrix&)>;

    Var constant(Matrix value) { return push(std::move(value), false, nullptr); }
    Var variable(Matrix value) { return push(std::move(value), true, nullptr); }

    Var push(Matrix value, bool requires_grad, Backward back) {
        nodes_.push_back(Node{std::move(value), Matrix{}, requires_grad, std::move(back)});
        return Var{this, nodes_.size() - 1};
    }

    const Matrix& value(Var v) const { return nodes_.at(v.id).value; }
    bool requires_grad(Var v) const { return nodes_.at(v.id).requires_grad; }

    /// Gradient of the last backward() root with respect to `v`.
    const Matrix& grad(Var v) const {
        const Node& n = nodes_.at(v.id);
        if (!n.requires_grad) throw StateError("grad: node does not require gradients");
        if (!backward_done_) throw StateError("grad: backward() has not run");
        return n.grad;
    }

    void accumulate(std::size_t id, const Matrix& g) {
        Node& n = nodes_[id];
        if (!n.requires_grad) return;
        if (n.grad.empty()) n.grad = Matrix(n.value.rows(), n.value.cols());
        n.grad += g;
    }

    /// Seeds d(root)/d(root) = 1 for a 1x1 root and propagates to every node.
    void backward(Var root) {
        if (root.tape != this) throw StateError("backward: variable from another tape");
        const Matrix& rv = value(root);
        if (rv.rows() != 1 || rv.cols() != 1) throw DimensionError("backward: root must be 1x1");
        for (auto& n : nodes_) n.grad = Matrix{};
        for (auto& n : nodes_)
            if (n.requires_grad) n.grad = Matrix(n.value.rows(), n.value.cols());
        if (!nodes_[root.id].requires_grad) {
            backward_done_ = true;
            return;
        }
        nodes_[root.id].grad(0, 0) = 1.0;
        for (std::size_t i = root.id + 1; i-- > 0;) {
            Node& n = nodes_[i];
            if (!n.requires_grad || !n.back) continue;
            // Copy: the closure may grow other nodes' gradients but never this one.
            const Matrix g = n.grad;
            n.back(*this, g);
        }
        backward_done_ = true;
    }

    std::size_t size() const { return nodes_.size(); }

private:
    struct Node {
        Matrix value;
        Matrix grad;
        bool requires_grad = false;
        Backward back;
    };
    std::vector<Node> nodes_;
    bool backward_done_ = false;
};

inline const Matrix& Var::value() const { return tape->value(*this); }

namespace detail {
inline void same_tape(Var a, Var b) {
    if (a.tape != b.tape) throw StateError("operands recorded on different tapes");
}
inline bool any_grad(std::initializer_list<Var> vs) {
    for (Var v : vs)
        if (v.tape->requires_grad(v)) return true;
    return false;
}
}  // namespace detail

inline Var matmul(Var a, Var b) {
    detail::same_tape(a, b);
    Matrix out = timerep::matmul(a.value(), b.value());
    if (!detail::any_grad({a, b})) return a.tape->constant(std::move(out));
    return a.tape->push(std::move(out), true, [a, b](Tape& t, const Matrix& g) {
        if (t.requires_grad(a)) t.accumulate(a.id, matmul_nt(g, t.value(b)));
        if (t.requires_grad(b)) t.accumulate(b.id, matmul_tn(t.value(a), g));
    });
}

/// a * b^T
inline Var matmul_nt(Var a, Var b) {
    detail::same_tape(a, b);
    Matrix out = timerep::matmul_nt(a.value(), b.value());
    if (!detail::any_grad({a, b})) return a.tape->constant(std::move(out));
    return a.tape->push(std::move(out), true, [a, b](Tape& t, const Matrix& g) {
        if (t.requires_grad(a)) t.accumulate(a.id, timerep::matmul(g, t.value(b)));
        if (t.requires_grad(b)) t.accumulate(b.id, matmul_tn(g, t.value(a)));
    });
}

inline Var add(Var a, Var b) {
    detail::same_tape(a, b);
    if (!a.value().same_shape(b.value())) throw DimensionError("add: shape mismatch");
    Matrix out = a.value();
    out += b.value();
    if (!detail::any_grad({a, b})) return a.tape->constant(std::move(out));
    return a.tape->push(std::move(out), true, [a, b](Tape& t, const Matrix& g) {
        t.accumulate(a.id, g);
        t.accumulate(b.id, g);
    });
}

/// Adds a 1xC row to every row of an RxC matrix.
inline Var add_row(Var a, Var row) {
    detail::same_tape(a, row);
    const Matrix& av = a.value();
    const Matrix& rv = row.value();
    if (rv.rows() != 1 || rv.cols() != av.cols()) throw DimensionError("add_row: shape mismatch");
    Matrix out = av;
    for (std::size_t r = 0; r < out.rows(); ++r)
        for (std::size_t c = 0; c < out.cols(); ++c) out(r, c) += rv(0, c);
    if (!detail::any_grad({a, row})) return a.tape->constant(std::move(out));
    return a.tape->push(std::move(out), true, [a, row](Tape& t, const Matrix& g) {
        t.accumulate(a.id, g);
        if (t.requires_grad(row)) {
            Matrix gr(1, g.cols());
            for (std::size_t r = 0; r < g.rows(); ++r)
                for (std::size_t c = 0; c < g.cols(); ++c) gr(0, c) += g(r, c);
            t.accumulate(row.id, gr);
        }
    });
}

inline Var hadamard(Var a, Var b) {
    detail::same_tape(a, b);
    if (!a.value().same_shape(b.value())) throw DimensionError("hadamard: shape mismatch");
    Matrix out = a.value();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] *= b.value()[i];
    if (!detail::any_grad({a, b})) return a.tape->constant(std::move(out));
    return a.tape->push(std::move(out), true, [a, b](Tape& t, const Matrix& g) {
        if (t.requires_grad(a)) {
            Matrix ga = g;
            for (std::size_t i = 0; i < ga.size(); ++i) ga[i] *= t.value(b)[i];
            t.accumulate(a.id, ga);
        }
        if (t.requires_grad(b)) {
            Matrix gb = g;
            for (std::size_t i = 0; i < gb.size(); ++i) gb[i] *= t.value(a)[i];
            t.accumulate(b.id, gb);
        }
    });
}

inline Var scale(Var a, double s) {
    Matrix out = a.value();
    for (auto& v : out.data()) v *= s;
    if (!detail::any_grad({a})) return a.tape->constant(std::move(out));
    return a.tape->push(std::move(out), true, [a, s](Tape& t, const Matrix& g) {
        Matrix ga = g;
        for (auto& v : ga.data()) v *= s;
        t.accumulate(a.id, ga);
    });
}

inline Var sin(Var a) {
    Matrix out = a.value();
    for (auto& v : out.data()) v = std::sin(v);
    if (!detail::any_grad({a})) return a.tape->constant(std::move(out));
    return a.tape->push(std::move(out), true, [a](Tape& t, const Matrix& g) {
        Matrix ga = g;
        const Matrix& x = t.value(a);
        for (std::size_t i = 0; i < ga.size(); ++i) ga[i] *= std::cos(x[i]);
        t.accumulate(a.id, ga);
    });
}

inline Var relu(Var a) {
    Matrix out = a.value();
    for (auto& v : out.data()) v = v > 0.0 ? v : 0.0;
    if (!detail::any_grad({a})) return a.tape->constant(std::move(out));
    return a.tape->push(std::move(out), true, [a](Tape& t, const Matrix& g) {
        Matrix ga = g;
        const Matrix& x = t.value(a);
        for (std::size_t i = 0; i < ga.size(); ++i)
            if (!(x[i] > 0.0)) ga[i] = 0.0;
        t.accumulate(a.id, ga);
    });
}

inline Matrix softmax_rows(const Matrix& logits) {
    Matrix p = logits;
    for (std::size_t r = 0; r < p.rows(); ++r) {
        auto row = p.row_span(r);
        double mx = -std::numeric_limits<double>::infinity();
        for (double v : row) mx = std::max(mx, v);
        double s = 0.0;
        for (double& v : row) s += (v = std::exp(v - mx));
        for (double& v : row) v /= s;
    }
    return p;
}

/// Row-wise softmax. `additive_mask`, when non-empty, is added to the logits
/// first (0 for visible entries, a large negative constant for hidden ones).
inline Var softmax_rows(Var logits, const Matrix& additive_mask = {}) {
    Matrix z = logits.value();
    if (!additive_mask.empty()) z += additive_mask;
    Matrix p = softmax_rows(z);
    if (!detail::any_grad({logits})) return logits.tape->constant(std::move(p));
    Matrix y = p;
    return logits.tape->push(std::move(p), true, [logits, y = std::move(y)](Tape& t, const Matrix& g) {
        Matrix gz(y.rows(), y.cols());
        for (std::size_t r = 0; r < y.rows(); ++r) {
            double dot = 0.0;
            for (std::size_t c = 0; c < y.cols(); ++c) dot += g(r, c) * y(r, c);
            for (std::size_t c = 0; c < y.cols(); ++c) gz(r, c) = y(r, c) * (g(r, c) - dot);
        }
        t.accumulate(logits.id, gz);
    });
}

/// Normalizes each row to zero mean and unit variance, then applies gain and bias rows.
inline Var layer_norm_rows(Var a, Var gain, Var bias, double eps = 1e-5) {
    detail::same_tape(a, gain);
    detail::same_tape(a, bias);
    const Matrix& x = a.value();
    const std::size_t n = x.cols();
    if (gain.value().cols() != n || bias.value().cols() != n)
        throw DimensionError("layer_norm_rows: gain/bias width mismatch");
    Matrix xhat(x.rows(), n);
    std::vector<double> inv_std(x.rows());
    for (std::size_t r = 0; r < x.rows(); ++r) {
        double mean = 0.0;
        for (std::size_t c = 0; c < n; ++c) mean += x(r, c);
        mean /= static_cast<double>(n);
        double var = 0.0;
        for (std::size_t c = 0; c < n; ++c) var += (x(r, c) - mean) * (x(r, c) - mean);
        var /= static_cast<double>(n);
        inv_std[r] = 1.0 / std::sqrt(var + eps);
        for (std::size_t c = 0; c < n; ++c) xhat(r, c) = (x(r, c) - mean) * inv_std[r];
    }
    Matrix out = xhat;
    for (std::size_t r = 0; r < out.rows(); ++r)
        for (std::size_t c = 0; c < n; ++c)
            out(r, c) = out(r, c) * gain.value()(0, c) + bias.value()(0, c);
    if (!detail::any_grad({a, gain, bias})) return a.tape->constant(std::move(out));
    return a.tape->push(
        std::move(out), true,
        [a, gain, bias, xhat = std::move(xhat), inv_std = std::move(inv_std)](Tape& t,
                                                                              const Matrix& g) {
            const std::size_t n = xhat.cols();
            const Matrix& gv = t.value(gain);
            if (t.requires_grad(gain) || t.requires_grad(bias)) {
                Matrix gg(1, n), gb(1, n);
                for (std::size_t r = 0; r < g.rows(); ++r)
                    for (std::size_t c = 0; c < n; ++c) {
                        gg(0, c) += g(r, c) * xhat(r, c);
                        gb(0, c) += g(r, c);
                    }
                t.accumulate(gain.id, gg);
                t.accumulate(bias.id, gb);
            }
            if (t.requires_grad(a)) {
                Matrix gx(g.rows(), n);
                for (std::size_t r = 0; r < g.rows(); ++r) {
                    double s1 = 0.0, s2 = 0.0;
                    for (std::size_t c = 0; c < n; ++c) {
                        const double gh = g(r, c) * gv(0, c);
                        s1 += gh;
                        s2 += gh * xhat(r, c);
                    }
                    for (std::size_t c = 0; c < n; ++c) {
                        const double gh = g(r, c) * gv(0, c);
                        gx(r, c) = inv_std[r] / static_cast<double>(n) *
                                   (static_cast<double>(n) * gh - s1 - xhat(r, c) * s2);
                    }
                }
                t.accumulate(a.id, gx);
            }
        });
}

inline Var concat_cols(std::span<const Var> parts) {
    if (parts.empty()) throw ArgumentError("concat_cols: no operands");
    Tape* tape = parts.front().tape;
    const std::size_t rows = parts.front().rows();
    std::size_t cols = 0;
    bool grad = false;
    for (Var p : parts) {
        if (p.tape != tape) throw StateError("concat_cols: operands on different tapes");
        if (p.rows() != rows) throw DimensionError("concat_cols: row count mismatch");
        cols += p.cols();
        grad = grad || tape->requires_grad(p);
    }
    Matrix out(rows, cols);
    std::size_t off = 0;
    for (Var p : parts) {
        const Matrix& v = p.value();
        for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t c = 0; c < v.cols(); ++c) out(r, off + c) = v(r, c);
        off += v.cols();
    }
    if (!grad) return tape->constant(std::move(out));
    std::vector<Var> ps(parts.begin(), parts.end());
    return tape->push(std::move(out), true, [ps = std::move(ps)](Tape& t, const Matrix& g) {
        std::size_t off = 0;
        for (Var p : ps) {
            const std::size_t w = t.value(p).cols();
            if (t.requires_grad(p)) {
                Matrix gp(g.rows(), w);
                for (std::size_t r = 0; r < g.rows(); ++r)
                    for (std::size_t c = 0; c < w; ++c) gp(r, c) = g(r, off + c);
                t.accumulate(p.id, gp);
            }
            off += w;
        }
    });
}

/// Columns [begin, end) of `a`.
inline Var slice_cols(Var a, std::size_t begin, std::size_t end) {
    const Matrix& v = a.value();
    if (begin > end || end > v.cols()) throw DimensionError("slice_cols: bad column range");
    Matrix out(v.rows(), end - begin);
    for (std::size_t r = 0; r < v.rows(); ++r)
        for (std::size_t c = begin; c < end; ++c) out(r, c - begin) = v(r, c);
    if (!detail::any_grad({a})) return a.tape->constant(std::move(out));
    return a.tape->push(std::move(out), true, [a, begin](Tape& t, const Matrix& g) {
        const Matrix& v = t.value(a);
        Matrix ga(v.rows(), v.cols());
        for (std::size_t r = 0; r < g.rows(); ++r)
            for (std::size_t c = 0; c < g.cols(); ++c) ga(r, begin + c) = g(r, c);
        t.accumulate(a.id, ga);
    });
}

/// Weighted mean softmax cross-entropy over rows:
/// sum_r w_r * (-log softmax(logits_r)[label_r]) / normalizer.
/// Rows with zero weight (masked hours) contribute nothing.
inline Var cross_entropy(Var logits, std::span<const int> labels, std::span<const double> weights,
                         double normalizer) {
    const Matrix& z = logits.value();
    if (labels.size() != z.rows() || weights.size() != z.rows())
        throw DimensionError("cross_entropy: label/weight count mismatch");
    if (!(normalizer > 0.0)) throw ArgumentError("cross_entropy: normalizer must be positive");
    Matrix p = softmax_rows(z);
    double loss = 0.0;
    for (std::size_t r = 0; r < z.rows(); ++r) {
        if (weights[r] == 0.0) continue;
        const auto lbl = static_cast<std::size_t>(labels[r]);
        if (lbl >= z.cols()) throw RangeError("cross_entropy: label out of range");
        loss -= weights[r] * std::log(std::max(p(r, lbl), std::numeric_limits<double>::min()));
    }
    loss /= normalizer;
    Matrix out(1, 1, loss);
    if (!detail::any_grad({logits})) return logits.tape->constant(std::move(out));
    std::vector<int> lbls(labels.begin(), labels.end());
    std::vector<double> ws(weights.begin(), weights.end());
    return logits.tape->push(
        std::move(out), true,
        [logits, p = std::move(p), lbls = std::move(lbls), ws = std::move(ws), normalizer](
            Tape& t, const Matrix& g) {
            Matrix gz(p.rows(), p.cols());
            for (std::size_t r = 0; r < p.rows(); ++r) {
                if (ws[r] == 0.0) continue;
                const double k = g(0, 0) * ws[r] / normalizer;
                for (std::size_t c = 0; c < p.cols(); ++c)
                    gz(r, c) = k * (p(r, c) - (static_cast<int>(c) == lbls[r] ? 1.0 : 0.0));
            }
            t.accumulate(logits.id, gz);
        });
}

/// sum_r w_r * ||a_r - target_r||^2 / normalizer.
inline Var weighted_squared_error(Var a, const Matrix& target, std::span<const double> weights,
                                  double normalizer) {
    const Matrix& v = a.value();
    if (!v.same_shape(target) || weights.size() != v.rows())
        throw DimensionError("weighted_squared_error: shape mismatch");
    double loss = 0.0;
    for (std::size_t r = 0; r < v.rows(); ++r)
        for (std::size_t c = 0; c < v.cols(); ++c) {
            const double d = v(r, c) - target(r, c);
            loss += weights[r] * d * d;
        }
    loss /= normalizer;
    Matrix out(1, 1, loss);
    if (!detail::any_grad({a})) return a.tape->constant(std::move(out));
    std::vector<double> ws(weights.begin(), weights.end());
    return a.tape->push(std::move(out), true,
                        [a, target, ws = std::move(ws), normalizer](Tape& t, const Matrix& g) {
                            const Matrix& v = t.value(a);
                            Matrix ga(v.rows(), v.cols());
                            for (std::size_t r = 0; r < v.rows(); ++r)
                                for (std::size_t c = 0; c < v.cols(); ++c)
                                    ga(r, c) = g(0, 0) * 2.0 * ws[r] * (v(r, c) - target(r, c)) /
                                               normalizer;
                            t.accumulate(a.id, ga);
                        });
}

}  // namespace timerep::ad
