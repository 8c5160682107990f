#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "genmeter/errors.hpp"
#include "genmeter/rng.hpp"
#include "genmeter/tensor.hpp"

namespace genmeter {

// Append-only operation log for reverse-mode differentiation. Nodes are
// recorded in execution order, so a single reverse sweep over the log is a
// valid topological traversal and visits each node exactly once. Values are
// checked finite as they are produced; NaN/Inf throws instead of propagating.
//
// Confined to one execution context at a time.
class Tape {
  public:
    using VarId = std::size_t;
    static constexpr VarId npos = std::numeric_limits<VarId>::max();

    VarId input(Tensor t, bool requires_grad) {
        require_finite(t, "tape input");
        return push(Op::kInput, npos, npos, std::move(t), requires_grad);
    }

    // C[n,m] = A[n,k] * B[k,m]
    VarId matmul(VarId a, VarId b) {
        const Tensor& ta = node(a).value;
        const Tensor& tb = node(b).value;
        if (ta.shape.size() != 2 || tb.shape.size() != 2 || ta.cols() != tb.rows())
            throw ShapeError("matmul: incompatible shapes");
        Tensor out = Tensor::matrix(ta.rows(), tb.cols());
        const std::size_t n = ta.rows(), k = ta.cols(), m = tb.cols();
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t p = 0; p < k; ++p) {
                const double aip = ta.at(i, p);
                for (std::size_t j = 0; j < m; ++j) out.at(i, j) += aip * tb.at(p, j);
            }
        return push_checked(Op::kMatmul, a, b, std::move(out));
    }

    // X[n,m] + broadcast row b[m]
    VarId add_rowvec(VarId x, VarId b) {
        const Tensor& tx = node(x).value;
        const Tensor& tb = node(b).value;
        if (tb.size() != tx.cols()) throw ShapeError("add_rowvec: bias length != columns");
        Tensor out = tx;
        for (std::size_t i = 0; i < tx.rows(); ++i)
            for (std::size_t j = 0; j < tx.cols(); ++j) out.at(i, j) += tb[j];
        return push_checked(Op::kAddRow, x, b, std::move(out));
    }

    VarId relu(VarId x) {
        Tensor out = node(x).value;
        for (double& v : out.v) v = std::max(v, 0.0);
        return push_checked(Op::kRelu, x, npos, std::move(out));
    }

    // Inverted dropout with a caller-supplied stream seed; the kept mask is
    // saved for backward. p == 0 is the identity.
    VarId dropout(VarId x, double p, std::uint64_t seed) {
        if (p <= 0.0) return x;
        if (p >= 1.0) throw Error("dropout probability must be < 1");
        const Tensor& tx = node(x).value;
        Rng rng(seed);
        const double keep = 1.0 - p;
        std::vector<double> mask(tx.size());
        for (double& m : mask) m = rng.uniform() < keep ? 1.0 / keep : 0.0;
        Tensor out = tx;
        for (std::size_t i = 0; i < out.size(); ++i) out[i] *= mask[i];
        VarId id = push_checked(Op::kDropout, x, npos, std::move(out));
        node(id).aux = std::move(mask);
        return id;
    }

    // Per-sample softmax cross-entropy from logits Z[n,K]: loss_n =
    // logsumexp(z_n) - z_n[y_n], computed in log space. Softmax probabilities
    // are saved for the backward pass.
    VarId softmax_ce(VarId logits, std::vector<int> labels) {
        const Tensor& z = node(logits).value;
        const std::size_t n = z.rows(), k = z.cols();
        if (labels.size() != n) throw ShapeError("softmax_ce: label count != rows");
        Tensor out({n});
        std::vector<double> probs(n * k);
        for (std::size_t i = 0; i < n; ++i) {
            int y = labels[i];
            if (y < 0 || static_cast<std::size_t>(y) >= k)
                throw Error("softmax_ce: label out of range");
            double m = z.at(i, 0);
            for (std::size_t j = 1; j < k; ++j) m = std::max(m, z.at(i, j));
            double sum = 0.0;
            for (std::size_t j = 0; j < k; ++j) sum += std::exp(z.at(i, j) - m);
            double lse = m + std::log(sum);
            out[i] = lse - z.at(i, static_cast<std::size_t>(y));
            for (std::size_t j = 0; j < k; ++j) probs[i * k + j] = std::exp(z.at(i, j) - lse);
        }
        VarId id = push_checked(Op::kSoftmaxCe, logits, npos, std::move(out));
        node(id).labels = std::move(labels);
        node(id).aux = std::move(probs);
        return id;
    }

    // Scalar mean of all elements.
    VarId mean(VarId x) {
        const Tensor& tx = node(x).value;
        double s = 0.0;
        for (double v : tx.v) s += v;
        Tensor out({1});
        out[0] = s / static_cast<double>(tx.size());
        return push_checked(Op::kMean, x, npos, std::move(out));
    }

    const Tensor& value(VarId id) const { return node(id).value; }
    std::size_t node_count() const { return nodes_.size(); }

    // Reverse sweep seeded with ones at `output` (or an explicit seed tensor).
    // Gradients of inputs created with requires_grad=false stay exactly zero.
    void backward(VarId output) { backward(output, Tensor(node(output).value.shape, 1.0)); }

    void backward(VarId output, const Tensor& seed) {
        if (!seed.same_shape(node(output).value))
            throw ShapeError("backward: seed shape != output shape");
        grads_.assign(nodes_.size(), Tensor());
        for (std::size_t i = 0; i < nodes_.size(); ++i)
            grads_[i] = Tensor(nodes_[i].value.shape, 0.0);
        grads_[output] = seed;
        for (std::size_t i = nodes_.size(); i-- > 0;) {
            const Node& nd = nodes_[i];
            if (!nd.requires_grad || nd.op == Op::kInput) continue;
            const Tensor& g = grads_[i];
            switch (nd.op) {
                case Op::kMatmul: {
                    const Tensor& a = node(nd.a).value;
                    const Tensor& b = node(nd.b).value;
                    if (node(nd.a).requires_grad) {
                        Tensor& ga = grads_[nd.a];  // dA = G * B^T
                        for (std::size_t r = 0; r < a.rows(); ++r)
                            for (std::size_t c = 0; c < a.cols(); ++c) {
                                double s = 0.0;
                                for (std::size_t j = 0; j < b.cols(); ++j)
                                    s += g.at(r, j) * b.at(c, j);
                                ga.at(r, c) += s;
                            }
                    }
                    if (node(nd.b).requires_grad) {
                        Tensor& gb = grads_[nd.b];  // dB = A^T * G
                        for (std::size_t r = 0; r < b.rows(); ++r)
                            for (std::size_t c = 0; c < b.cols(); ++c) {
                                double s = 0.0;
                                for (std::size_t j = 0; j < a.rows(); ++j)
                                    s += a.at(j, r) * g.at(j, c);
                                gb.at(r, c) += s;
                            }
                    }
                    break;
                }
                case Op::kAddRow: {
                    if (node(nd.a).requires_grad) {
                        Tensor& gx = grads_[nd.a];
                        for (std::size_t j = 0; j < g.size(); ++j) gx[j] += g[j];
                    }
                    if (node(nd.b).requires_grad) {
                        Tensor& gb = grads_[nd.b];
                        for (std::size_t r = 0; r < g.rows(); ++r)
                            for (std::size_t c = 0; c < g.cols(); ++c) gb[c] += g.at(r, c);
                    }
                    break;
                }
                case Op::kRelu: {
                    if (!node(nd.a).requires_grad) break;
                    const Tensor& x = node(nd.a).value;
                    Tensor& gx = grads_[nd.a];
                    // Subgradient 0 at the kink.
                    for (std::size_t j = 0; j < g.size(); ++j)
                        if (x[j] > 0.0) gx[j] += g[j];
                    break;
                }
                case Op::kDropout: {
                    if (!node(nd.a).requires_grad) break;
                    Tensor& gx = grads_[nd.a];
                    for (std::size_t j = 0; j < g.size(); ++j) gx[j] += g[j] * nd.aux[j];
                    break;
                }
                case Op::kSoftmaxCe: {
                    if (!node(nd.a).requires_grad) break;
                    const std::size_t k = node(nd.a).value.cols();
                    Tensor& gz = grads_[nd.a];
                    for (std::size_t r = 0; r < g.size(); ++r) {
                        const double gr = g[r];
                        if (gr == 0.0) continue;
                        for (std::size_t c = 0; c < k; ++c) {
                            double p = nd.aux[r * k + c];
                            double onehot = (static_cast<std::size_t>(nd.labels[r]) == c) ? 1.0 : 0.0;
                            gz.at(r, c) += gr * (p - onehot);
                        }
                    }
                    break;
                }
                case Op::kMean: {
                    if (!node(nd.a).requires_grad) break;
                    Tensor& gx = grads_[nd.a];
                    const double s = g[0] / static_cast<double>(gx.size());
                    for (double& v : gx.v) v += s;
                    break;
                }
                case Op::kInput:
                    break;
            }
        }
    }

    const Tensor& grad(VarId id) const { return grads_[id]; }

  private:
    enum class Op { kInput, kMatmul, kAddRow, kRelu, kDropout, kSoftmaxCe, kMean };

    struct Node {
        Op op;
        VarId a;
        VarId b;
        Tensor value;
        bool requires_grad;
        std::vector<int> labels;  // softmax_ce targets
        std::vector<double> aux;  // dropout mask / softmax probabilities
    };

    Node& node(VarId id) { return nodes_[id]; }
    const Node& node(VarId id) const { return nodes_[id]; }

    VarId push(Op op, VarId a, VarId b, Tensor value, bool requires_grad) {
        nodes_.push_back(Node{op, a, b, std::move(value), requires_grad, {}, {}});
        return nodes_.size() - 1;
    }

    VarId push_checked(Op op, VarId a, VarId b, Tensor value) {
        require_finite(value, "tape op");
        bool rg = node(a).requires_grad || (b != npos && node(b).requires_grad);
        return push(op, a, b, std::move(value), rg);
    }

    std::vector<Node> nodes_;
    std::vector<Tensor> grads_;
};

}  // namespace genmeter
