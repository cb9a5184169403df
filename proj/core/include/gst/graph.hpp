#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "gst/rng.hpp"
#include "gst/tensor.hpp"

namespace gst {

enum class Op : std::uint8_t {
    kLeaf,
    kConv2d,
    kRelu,
    kDropout,
    kUpsample2x,
    kConcatChannels,
    kAdd,
    kSub,
    kMul,
    kScale,
    kExp,
    kClamp,
    kSum,
};

inline const char* op_name(Op op) {
    switch (op) {
        case Op::kLeaf: return "leaf";
        case Op::kConv2d: return "conv2d";
        case Op::kRelu: return "relu";
        case Op::kDropout: return "dropout";
        case Op::kUpsample2x: return "nearest_upsample2x";
        case Op::kConcatChannels: return "concat_channels";
        case Op::kAdd: return "add";
        case Op::kSub: return "sub";
        case Op::kMul: return "mul";
        case Op::kScale: return "scale";
        case Op::kExp: return "exp";
        case Op::kClamp: return "clamp";
        case Op::kSum: return "sum";
    }
    return "?";
}

namespace detail {

// Unrolls conv patches into a [C*kh*kw, Ho*Wo] matrix; out-of-bounds reads
// under zero padding stay zero.
template <typename S>
void im2col(const S* x, int C, int H, int W, int kh, int kw, int stride,
            int pad, int Ho, int Wo, S* cols) {
    for (int c = 0; c < C; ++c) {
        for (int r = 0; r < kh; ++r) {
            for (int q = 0; q < kw; ++q) {
                S* row = cols + (static_cast<std::int64_t>((c * kh + r) * kw + q)) * Ho * Wo;
                for (int ho = 0; ho < Ho; ++ho) {
                    const int ih = ho * stride + r - pad;
                    S* dst = row + static_cast<std::int64_t>(ho) * Wo;
                    if (ih < 0 || ih >= H) {
                        for (int wo = 0; wo < Wo; ++wo) dst[wo] = S(0);
                        continue;
                    }
                    const S* src = x + (static_cast<std::int64_t>(c) * H + ih) * W;
                    for (int wo = 0; wo < Wo; ++wo) {
                        const int iw = wo * stride + q - pad;
                        dst[wo] = (iw < 0 || iw >= W) ? S(0) : src[iw];
                    }
                }
            }
        }
    }
}

// Scatter-adds a cols-layout gradient back onto the input image.
template <typename S>
void col2im_add(const S* cols, int C, int H, int W, int kh, int kw, int stride,
                int pad, int Ho, int Wo, S* gx) {
    for (int c = 0; c < C; ++c) {
        for (int r = 0; r < kh; ++r) {
            for (int q = 0; q < kw; ++q) {
                const S* row = cols + (static_cast<std::int64_t>((c * kh + r) * kw + q)) * Ho * Wo;
                for (int ho = 0; ho < Ho; ++ho) {
                    const int ih = ho * stride + r - pad;
                    if (ih < 0 || ih >= H) continue;
                    S* dst = gx + (static_cast<std::int64_t>(c) * H + ih) * W;
                    const S* src = row + static_cast<std::int64_t>(ho) * Wo;
                    for (int wo = 0; wo < Wo; ++wo) {
                        const int iw = wo * stride + q - pad;
                        if (iw >= 0 && iw < W) dst[iw] += src[wo];
                    }
                }
            }
        }
    }
}

// C[M,N] += A[M,K] * B[K,N]; ikj order keeps the inner loop contiguous.
template <typename S>
void gemm_accum(int M, int K, int N, const S* A, const S* B, S* C) {
    for (int i = 0; i < M; ++i) {
        S* crow = C + static_cast<std::int64_t>(i) * N;
        for (int k = 0; k < K; ++k) {
            const S a = A[static_cast<std::int64_t>(i) * K + k];
            if (a == S(0)) continue;
            const S* brow = B + static_cast<std::int64_t>(k) * N;
            for (int j = 0; j < N; ++j) crow[j] += a * brow[j];
        }
    }
}

// C[M,K] += A[M,N] * B[K,N]^T (row-by-row dot products).
template <typename S>
void gemm_abt_accum(int M, int N, int K, const S* A, const S* B, S* C) {
    for (int i = 0; i < M; ++i) {
        const S* arow = A + static_cast<std::int64_t>(i) * N;
        for (int k = 0; k < K; ++k) {
            const S* brow = B + static_cast<std::int64_t>(k) * N;
            S acc = S(0);
            for (int j = 0; j < N; ++j) acc += arow[j] * brow[j];
            C[static_cast<std::int64_t>(i) * K + k] += acc;
        }
    }
}

// C[K,N] += A[M,K]^T * B[M,N].
template <typename S>
void gemm_atb_accum(int M, int K, int N, const S* A, const S* B, S* C) {
    for (int i = 0; i < M; ++i) {
        const S* arow = A + static_cast<std::int64_t>(i) * K;
        const S* brow = B + static_cast<std::int64_t>(i) * N;
        for (int k = 0; k < K; ++k) {
            const S a = arow[k];
            if (a == S(0)) continue;
            S* crow = C + static_cast<std::int64_t>(k) * N;
            for (int j = 0; j < N; ++j) crow[j] += a * brow[j];
        }
    }
}

}  // namespace detail

// Reverse-mode tape over the primitive set needed by the translator and its
// losses. Nodes are appended in evaluation order (already topological);
// backward() walks the ancestors of the loss exactly once in reverse order
// and accumulates gradients into every leaf that requires them.
//
// One tape per training step. Parameters enter as leaves with
// requires_grad=true, data and frozen pseudo-labels as plain leaves.
template <typename S>
class GraphT {
public:
    explicit GraphT(bool check_finite = true) : check_finite_(check_finite) {}

    int leaf(TensorT<S> value, bool requires_grad = false) {
        Node n;
        n.op = Op::kLeaf;
        n.value = std::move(value);
        n.requires_grad = requires_grad;
        return push(std::move(n));
    }

    // Cross-correlation with zero padding. Output extents must divide
    // exactly: H' = (H + 2*pad - kh) / stride + 1.
    int conv2d(int input, int kernel, int bias, int stride, int padding) {
        const TensorT<S>& x = at(input).value;
        const TensorT<S>& k = at(kernel).value;
        const TensorT<S>& b = at(bias).value;
        if (x.shape.size() != 3) throw Error("conv2d: input must be [C,H,W], got " + shape_str(x.shape));
        if (k.shape.size() != 4) throw Error("conv2d: kernel must be [Cout,Cin,kh,kw], got " + shape_str(k.shape));
        const int cin = x.shape[0], h = x.shape[1], w = x.shape[2];
        const int cout = k.shape[0], kh = k.shape[2], kw = k.shape[3];
        if (k.shape[1] != cin)
            throw Error("conv2d: kernel expects " + std::to_string(k.shape[1]) +
                        " input channels, image has " + std::to_string(cin));
        if (b.shape != Shape{cout}) throw Error("conv2d: bias must be [Cout], got " + shape_str(b.shape));
        if (stride < 1) throw Error("conv2d: stride must be >= 1");
        if (padding < 0) throw Error("conv2d: padding must be >= 0");
        if (kh > h + 2 * padding || kw > w + 2 * padding)
            throw Error("conv2d: kernel larger than padded input");
        if ((h + 2 * padding - kh) % stride != 0 || (w + 2 * padding - kw) % stride != 0)
            throw Error("conv2d: output extent not exact for input " + shape_str(x.shape) +
                        ", kernel " + std::to_string(kh) + "x" + std::to_string(kw) +
                        ", stride " + std::to_string(stride) + ", padding " + std::to_string(padding));
        const int ho = (h + 2 * padding - kh) / stride + 1;
        const int wo = (w + 2 * padding - kw) / stride + 1;
        const int kdim = cin * kh * kw;
        const int n = ho * wo;

        Node node;
        node.saved = TensorT<S>({kdim, n});
        detail::im2col(x.data.data(), cin, h, w, kh, kw, stride, padding, ho, wo,
                       node.saved.data.data());
        node.value = TensorT<S>({cout, ho, wo});
        for (int co = 0; co < cout; ++co)
            std::fill_n(node.value.data.begin() + static_cast<std::int64_t>(co) * n, n, b.data[co]);
        detail::gemm_accum(cout, kdim, n, k.data.data(), node.saved.data.data(),
                           node.value.data.data());

        node.op = Op::kConv2d;
        node.inputs = {input, kernel, bias};
        node.iattr0 = stride;
        node.iattr1 = padding;
        return push(std::move(node));
    }

    int relu(int input) {
        const TensorT<S>& x = at(input).value;
        Node node;
        node.value = TensorT<S>(x.shape);
        for (std::size_t i = 0; i < x.data.size(); ++i)
            node.value.data[i] = x.data[i] > S(0) ? x.data[i] : S(0);
        node.op = Op::kRelu;
        node.inputs = {input};
        return push(std::move(node));
    }

    // Inverted dropout: zero with probability `rate`, scale survivors by
    // 1/(1-rate). Inactive (or rate 0) is the identity and draws nothing
    // from the rng, so disabling dropout does not shift downstream streams.
    int dropout(int input, double rate, bool active, Rng& rng) {
        if (!(rate >= 0.0 && rate < 1.0)) throw Error("dropout: rate must be in [0,1)");
        const TensorT<S>& x = at(input).value;
        Node node;
        node.op = Op::kDropout;
        node.inputs = {input};
        if (!active || rate == 0.0) {
            node.value = x;
            return push(std::move(node));
        }
        const S keep_scale = static_cast<S>(1.0 / (1.0 - rate));
        node.saved = TensorT<S>(x.shape);
        node.value = TensorT<S>(x.shape);
        for (std::size_t i = 0; i < x.data.size(); ++i) {
            const S m = rng.uniform() < rate ? S(0) : keep_scale;
            node.saved.data[i] = m;
            node.value.data[i] = x.data[i] * m;
        }
        return push(std::move(node));
    }

    int upsample2x(int input) {
        const TensorT<S>& x = at(input).value;
        if (x.shape.size() != 3) throw Error("nearest_upsample2x: input must be [C,H,W]");
        const int c = x.shape[0], h = x.shape[1], w = x.shape[2];
        Node node;
        node.value = TensorT<S>({c, 2 * h, 2 * w});
        for (int ci = 0; ci < c; ++ci)
            for (int i = 0; i < h; ++i) {
                const S* src = x.data.data() + (static_cast<std::int64_t>(ci) * h + i) * w;
                for (int rep = 0; rep < 2; ++rep) {
                    S* dst = node.value.data.data() +
                             (static_cast<std::int64_t>(ci) * 2 * h + 2 * i + rep) * 2 * w;
                    for (int j = 0; j < w; ++j) {
                        dst[2 * j] = src[j];
                        dst[2 * j + 1] = src[j];
                    }
                }
            }
        node.op = Op::kUpsample2x;
        node.inputs = {input};
        return push(std::move(node));
    }

    int concat_channels(int a, int b) {
        const TensorT<S>& xa = at(a).value;
        const TensorT<S>& xb = at(b).value;
        if (xa.shape.size() != 3 || xb.shape.size() != 3)
            throw Error("concat_channels: inputs must be [C,H,W]");
        if (xa.shape[1] != xb.shape[1] || xa.shape[2] != xb.shape[2])
            throw Error("concat_channels: spatial mismatch " + shape_str(xa.shape) + " vs " +
                        shape_str(xb.shape));
        Node node;
        node.value = TensorT<S>({xa.shape[0] + xb.shape[0], xa.shape[1], xa.shape[2]});
        std::copy(xa.data.begin(), xa.data.end(), node.value.data.begin());
        std::copy(xb.data.begin(), xb.data.end(),
                  node.value.data.begin() + static_cast<std::int64_t>(xa.size()));
        node.op = Op::kConcatChannels;
        node.inputs = {a, b};
        node.iattr0 = xa.shape[0];
        return push(std::move(node));
    }

    int add(int a, int b) { return binary(Op::kAdd, a, b); }
    int sub(int a, int b) { return binary(Op::kSub, a, b); }
    int mul(int a, int b) { return binary(Op::kMul, a, b); }

    int scale(int a, S factor) {
        const TensorT<S>& x = at(a).value;
        Node node;
        node.value = TensorT<S>(x.shape);
        for (std::size_t i = 0; i < x.data.size(); ++i) node.value.data[i] = factor * x.data[i];
        node.op = Op::kScale;
        node.inputs = {a};
        node.sattr0 = factor;
        return push(std::move(node));
    }

    int exp(int a) {
        const TensorT<S>& x = at(a).value;
        Node node;
        node.value = TensorT<S>(x.shape);
        for (std::size_t i = 0; i < x.data.size(); ++i) node.value.data[i] = std::exp(x.data[i]);
        node.op = Op::kExp;
        node.inputs = {a};
        return push(std::move(node));
    }

    // Subgradient 0 outside the open interval (lo, hi).
    int clamp(int a, S lo, S hi) {
        if (!(lo < hi)) throw Error("clamp: lo must be < hi");
        const TensorT<S>& x = at(a).value;
        Node node;
        node.value = TensorT<S>(x.shape);
        for (std::size_t i = 0; i < x.data.size(); ++i)
            node.value.data[i] = std::min(hi, std::max(lo, x.data[i]));
        node.op = Op::kClamp;
        node.inputs = {a};
        node.sattr0 = lo;
        node.sattr1 = hi;
        return push(std::move(node));
    }

    int sum(int a) {
        const TensorT<S>& x = at(a).value;
        S acc = S(0);
        for (S v : x.data) acc += v;
        Node node;
        node.value = TensorT<S>::scalar(acc);
        node.op = Op::kSum;
        node.inputs = {a};
        return push(std::move(node));
    }

    const TensorT<S>& value(int id) const { return at(id).value; }

    // Gradient of the last backward() w.r.t. node `id`. Zero tensor for
    // grad-requiring leaves the loss never reached.
    const TensorT<S>& grad(int id) const {
        const Node& n = at(id);
        if (n.grad.shape.empty() && n.value.size() > 0)
            throw Error("graph: no gradient on node; run backward() first");
        return n.grad;
    }

    Op op(int id) const { return at(id).op; }
    const std::vector<int>& inputs(int id) const { return at(id).inputs; }
    int size() const { return static_cast<int>(nodes_.size()); }

    // Reverse accumulation from a scalar loss. Returns the number of non-leaf
    // nodes visited (each ancestor exactly once).
    int backward(int loss_id) {
        const Node& loss = at(loss_id);
        if (loss.value.size() != 1)
            throw Error("backward: loss must be scalar, got " + shape_str(loss.value.shape));

        active_.assign(nodes_.size(), 0);
        active_[static_cast<std::size_t>(loss_id)] = at(loss_id).requires_grad ? 1 : 0;
        for (int id = loss_id; id >= 0; --id) {
            if (!active_[static_cast<std::size_t>(id)]) continue;
            for (int in : nodes_[static_cast<std::size_t>(id)].inputs)
                if (nodes_[static_cast<std::size_t>(in)].requires_grad)
                    active_[static_cast<std::size_t>(in)] = 1;
        }
        // Parameters unreachable from the loss still get a zero gradient.
        for (std::size_t i = 0; i < nodes_.size(); ++i) {
            Node& n = nodes_[i];
            if (active_[i] || (n.op == Op::kLeaf && n.requires_grad))
                n.grad = TensorT<S>(n.value.shape);
            else
                n.grad = TensorT<S>();
        }
        if (!at(loss_id).requires_grad) return 0;

        nodes_[static_cast<std::size_t>(loss_id)].grad.data[0] = S(1);
        int visits = 0;
        for (int id = loss_id; id >= 0; --id) {
            if (!active_[static_cast<std::size_t>(id)]) continue;
            if (nodes_[static_cast<std::size_t>(id)].op == Op::kLeaf) continue;
            backward_op(id);
            ++visits;
        }
        return visits;
    }

private:
    struct Node {
        Op op = Op::kLeaf;
        TensorT<S> value;
        TensorT<S> grad;
        TensorT<S> saved;  // op scratch: dropout mask, im2col patches
        std::vector<int> inputs;
        int iattr0 = 0, iattr1 = 0;
        S sattr0 = S(0), sattr1 = S(0);
        bool requires_grad = false;
    };

    Node& at(int id) {
        if (id < 0 || id >= size()) throw Error("graph: node id out of range");
        return nodes_[static_cast<std::size_t>(id)];
    }
    const Node& at(int id) const {
        if (id < 0 || id >= size()) throw Error("graph: node id out of range");
        return nodes_[static_cast<std::size_t>(id)];
    }

    int binary(Op op, int a, int b) {
        const TensorT<S>& xa = at(a).value;
        const TensorT<S>& xb = at(b).value;
        if (xa.shape != xb.shape)
            throw Error(std::string(op_name(op)) + ": shape mismatch " + shape_str(xa.shape) +
                        " vs " + shape_str(xb.shape));
        Node node;
        node.value = TensorT<S>(xa.shape);
        switch (op) {
            case Op::kAdd:
                for (std::size_t i = 0; i < xa.data.size(); ++i)
                    node.value.data[i] = xa.data[i] + xb.data[i];
                break;
            case Op::kSub:
                for (std::size_t i = 0; i < xa.data.size(); ++i)
                    node.value.data[i] = xa.data[i] - xb.data[i];
                break;
            case Op::kMul:
                for (std::size_t i = 0; i < xa.data.size(); ++i)
                    node.value.data[i] = xa.data[i] * xb.data[i];
                break;
            default: throw Error("graph: not a binary op");
        }
        node.op = op;
        node.inputs = {a, b};
        return push(std::move(node));
    }

    int push(Node node) {
        for (int in : node.inputs)
            if (at(in).requires_grad) node.requires_grad = true;
        if (check_finite_ && !all_finite(node.value))
            throw Error(std::string(op_name(node.op)) + ": non-finite value in output");
        nodes_.push_back(std::move(node));
        return size() - 1;
    }

    bool wants(int id) const { return active_[static_cast<std::size_t>(id)] != 0; }

    void backward_op(int id) {
        Node& n = nodes_[static_cast<std::size_t>(id)];
        const TensorT<S>& g = n.grad;
        switch (n.op) {
            case Op::kConv2d: {
                const int input = n.inputs[0], kernel = n.inputs[1], bias = n.inputs[2];
                const TensorT<S>& k = nodes_[static_cast<std::size_t>(kernel)].value;
                const TensorT<S>& x = nodes_[static_cast<std::size_t>(input)].value;
                const int cin = x.shape[0], h = x.shape[1], w = x.shape[2];
                const int cout = k.shape[0], kh = k.shape[2], kw = k.shape[3];
                const int ho = n.value.shape[1], wo = n.value.shape[2];
                const int kdim = cin * kh * kw;
                const int cnt = ho * wo;
                if (wants(bias)) {
                    TensorT<S>& gb = nodes_[static_cast<std::size_t>(bias)].grad;
                    for (int co = 0; co < cout; ++co) {
                        const S* grow = g.data.data() + static_cast<std::int64_t>(co) * cnt;
                        S acc = S(0);
                        for (int i = 0; i < cnt; ++i) acc += grow[i];
                        gb.data[static_cast<std::size_t>(co)] += acc;
                    }
                }
                if (wants(kernel)) {
                    detail::gemm_abt_accum(cout, cnt, kdim, g.data.data(), n.saved.data.data(),
                                           nodes_[static_cast<std::size_t>(kernel)].grad.data.data());
                }
                if (wants(input)) {
                    TensorT<S> gcols({kdim, cnt});
                    detail::gemm_atb_accum(cout, kdim, cnt, k.data.data(), g.data.data(),
                                           gcols.data.data());
                    detail::col2im_add(gcols.data.data(), cin, h, w, kh, kw, n.iattr0, n.iattr1,
                                       ho, wo,
                                       nodes_[static_cast<std::size_t>(input)].grad.data.data());
                }
                break;
            }
            case Op::kRelu: {
                const int input = n.inputs[0];
                if (!wants(input)) break;
                const TensorT<S>& x = nodes_[static_cast<std::size_t>(input)].value;
                TensorT<S>& gx = nodes_[static_cast<std::size_t>(input)].grad;
                for (std::size_t i = 0; i < g.data.size(); ++i)
                    if (x.data[i] > S(0)) gx.data[i] += g.data[i];
                break;
            }
            case Op::kDropout: {
                const int input = n.inputs[0];
                if (!wants(input)) break;
                TensorT<S>& gx = nodes_[static_cast<std::size_t>(input)].grad;
                if (n.saved.data.empty()) {
                    for (std::size_t i = 0; i < g.data.size(); ++i) gx.data[i] += g.data[i];
                } else {
                    for (std::size_t i = 0; i < g.data.size(); ++i)
                        gx.data[i] += g.data[i] * n.saved.data[i];
                }
                break;
            }
            case Op::kUpsample2x: {
                const int input = n.inputs[0];
                if (!wants(input)) break;
                const TensorT<S>& x = nodes_[static_cast<std::size_t>(input)].value;
                TensorT<S>& gx = nodes_[static_cast<std::size_t>(input)].grad;
                const int c = x.shape[0], h = x.shape[1], w = x.shape[2];
                for (int ci = 0; ci < c; ++ci)
                    for (int i = 0; i < h; ++i)
                        for (int j = 0; j < w; ++j) {
                            const std::int64_t base =
                                (static_cast<std::int64_t>(ci) * 2 * h + 2 * i) * 2 * w + 2 * j;
                            gx.data[(static_cast<std::int64_t>(ci) * h + i) * w + j] +=
                                g.data[base] + g.data[base + 1] + g.data[base + 2 * w] +
                                g.data[base + 2 * w + 1];
                        }
                break;
            }
            case Op::kConcatChannels: {
                const int a = n.inputs[0], b = n.inputs[1];
                const std::int64_t na = nodes_[static_cast<std::size_t>(a)].value.size();
                if (wants(a)) {
                    TensorT<S>& ga = nodes_[static_cast<std::size_t>(a)].grad;
                    for (std::int64_t i = 0; i < na; ++i) ga.data[i] += g.data[i];
                }
                if (wants(b)) {
                    TensorT<S>& gb = nodes_[static_cast<std::size_t>(b)].grad;
                    for (std::size_t i = 0; i < gb.data.size(); ++i)
                        gb.data[i] += g.data[static_cast<std::size_t>(na) + i];
                }
                break;
            }
            case Op::kAdd: {
                for (int side = 0; side < 2; ++side) {
                    const int in = n.inputs[static_cast<std::size_t>(side)];
                    if (!wants(in)) continue;
                    TensorT<S>& gi = nodes_[static_cast<std::size_t>(in)].grad;
                    for (std::size_t i = 0; i < g.data.size(); ++i) gi.data[i] += g.data[i];
                }
                break;
            }
            case Op::kSub: {
                const int a = n.inputs[0], b = n.inputs[1];
                if (wants(a)) {
                    TensorT<S>& ga = nodes_[static_cast<std::size_t>(a)].grad;
                    for (std::size_t i = 0; i < g.data.size(); ++i) ga.data[i] += g.data[i];
                }
                if (wants(b)) {
                    TensorT<S>& gb = nodes_[static_cast<std::size_t>(b)].grad;
                    for (std::size_t i = 0; i < g.data.size(); ++i) gb.data[i] -= g.data[i];
                }
                break;
            }
            case Op::kMul: {
                const int a = n.inputs[0], b = n.inputs[1];
                const TensorT<S>& xa = nodes_[static_cast<std::size_t>(a)].value;
                const TensorT<S>& xb = nodes_[static_cast<std::size_t>(b)].value;
                if (wants(a)) {
                    TensorT<S>& ga = nodes_[static_cast<std::size_t>(a)].grad;
                    for (std::size_t i = 0; i < g.data.size(); ++i)
                        ga.data[i] += g.data[i] * xb.data[i];
                }
                if (wants(b)) {
                    TensorT<S>& gb = nodes_[static_cast<std::size_t>(b)].grad;
                    for (std::size_t i = 0; i < g.data.size(); ++i)
                        gb.data[i] += g.data[i] * xa.data[i];
                }
                break;
            }
            case Op::kScale: {
                const int in = n.inputs[0];
                if (!wants(in)) break;
                TensorT<S>& gi = nodes_[static_cast<std::size_t>(in)].grad;
                for (std::size_t i = 0; i < g.data.size(); ++i)
                    gi.data[i] += n.sattr0 * g.data[i];
                break;
            }
            case Op::kExp: {
                const int in = n.inputs[0];
                if (!wants(in)) break;
                TensorT<S>& gi = nodes_[static_cast<std::size_t>(in)].grad;
                for (std::size_t i = 0; i < g.data.size(); ++i)
                    gi.data[i] += g.data[i] * n.value.data[i];
                break;
            }
            case Op::kClamp: {
                const int in = n.inputs[0];
                if (!wants(in)) break;
                const TensorT<S>& x = nodes_[static_cast<std::size_t>(in)].value;
                TensorT<S>& gi = nodes_[static_cast<std::size_t>(in)].grad;
                for (std::size_t i = 0; i < g.data.size(); ++i)
                    if (x.data[i] > n.sattr0 && x.data[i] < n.sattr1) gi.data[i] += g.data[i];
                break;
            }
            case Op::kSum: {
                const int in = n.inputs[0];
                if (!wants(in)) break;
                TensorT<S>& gi = nodes_[static_cast<std::size_t>(in)].grad;
                const S go = g.data[0];
                for (std::size_t i = 0; i < gi.data.size(); ++i) gi.data[i] += go;
                break;
            }
            case Op::kLeaf:
                break;
        }
    }

    std::vector<Node> nodes_;
    std::vector<char> active_;
    bool check_finite_;
};

using Graph = GraphT<float>;
using Graph64 = GraphT<double>;

// In-place SGD update p <- p - lr * g. Rejects non-finite gradients before
// touching the parameters so a diverged batch aborts cleanly.
template <typename S>
void sgd_step(TensorT<S>& param, const TensorT<S>& grad, double lr) {
    if (!(lr > 0.0)) throw Error("sgd_step: lr must be positive");
    if (param.shape != grad.shape)
        throw Error("sgd_step: shape mismatch " + shape_str(param.shape) + " vs " +
                    shape_str(grad.shape));
    for (S v : grad.data)
        if (!std::isfinite(v)) throw Error("sgd_step: non-finite gradient");
    const S step = static_cast<S>(lr);
    for (std::size_t i = 0; i < param.data.size(); ++i) param.data[i] -= step * grad.data[i];
}

}  // namespace gst
