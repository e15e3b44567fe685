#pragma once

#include "lut/kernels/conv.hpp"
#include "lut/tensor.hpp"

#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

// Reverse-mode, define-by-run autodiff. Each op produces a fresh node holding
// its value, its parents, and a closure that pulls the node's gradient into
// the parents' gradients. The lookup layer installs its own backward rule the
// same way every other op does.
namespace lut {

template <class S>
struct Node {
    Tensor<S> value;
    Tensor<S> grad; // allocated lazily, same shape as value
    bool requires_grad = false;
    std::vector<std::shared_ptr<Node<S>>> parents;
    std::function<void(Node<S>&)> backward_fn;
    std::string name;

    Tensor<S>& ensure_grad() {
        if (grad.numel() != value.numel()) grad.reset(value.shape());
        return grad;
    }

    void accumulate_grad(const Tensor<S>& g) {
        Tensor<S>& dst = ensure_grad();
        if (!dst.same_shape(g)) throw shape_error("gradient shape mismatch on " + name);
        for (int64_t i = 0; i < g.numel(); ++i) dst[i] += g[i];
    }

    void zero_grad() {
        if (grad.numel()) grad.fill(S(0));
    }
};

template <class S>
using NodePtr = std::shared_ptr<Node<S>>;

template <class S>
NodePtr<S> make_leaf(Tensor<S> v, bool requires_grad = false, std::string name = "leaf") {
    auto n = std::make_shared<Node<S>>();
    n->value = std::move(v);
    n->requires_grad = requires_grad;
    n->name = std::move(name);
    return n;
}

template <class S>
NodePtr<S> make_op(Tensor<S> v, std::vector<NodePtr<S>> parents,
                   std::function<void(Node<S>&)> bw, std::string name) {
    auto n = std::make_shared<Node<S>>();
    n->value = std::move(v);
    if (finite_checks_enabled()) n->value.check_finite(name.c_str());
    n->parents = std::move(parents);
    for (const auto& p : n->parents)
        if (p && p->requires_grad) n->requires_grad = true;
    if (n->requires_grad) n->backward_fn = std::move(bw);
    n->name = std::move(name);
    return n;
}

// Reverse topological order with cycle detection.
template <class S>
std::vector<Node<S>*> topo_order(Node<S>* root) {
    enum class Mark : uint8_t { open, active, done };
    std::unordered_map<Node<S>*, Mark> mark;
    std::vector<Node<S>*> order;
    std::vector<std::pair<Node<S>*, size_t>> stack;
    stack.emplace_back(root, 0);
    mark[root] = Mark::active;
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->parents.size()) {
            Node<S>* p = node->parents[next++].get();
            if (!p) continue;
            auto it = mark.find(p);
            if (it == mark.end()) {
                mark[p] = Mark::active;
                stack.emplace_back(p, 0);
            } else if (it->second == Mark::active) {
                throw std::runtime_error("autodiff: cycle detected in graph at node " + p->name);
            }
        } else {
            mark[node] = Mark::done;
            order.push_back(node);
            stack.pop_back();
        }
    }
    return order; // parents before children; traverse in reverse for backward
}

// Backward from a scalar loss. Each node is visited exactly once, in reverse
// topological order; leaf gradients accumulate across calls until zeroed.
template <class S>
void backward(const NodePtr<S>& loss) {
    if (loss->value.numel() != 1)
        throw std::invalid_argument("backward: loss must be scalar, got shape " +
                                    shape_str(loss->value.shape()));
    auto order = topo_order(loss.get());
    loss->ensure_grad();
    loss->grad[0] += S(1);
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node<S>* n = *it;
        if (n->requires_grad && n->backward_fn && n->grad.numel()) n->backward_fn(*n);
    }
    if (finite_checks_enabled()) {
        for (Node<S>* n : order)
            if (n->grad.numel()) n->grad.check_finite(("grad of " + n->name).c_str());
    }
}

// ---------------------------------------------------------------------------
// Ops

namespace ops {

template <class S>
NodePtr<S> add(const NodePtr<S>& a, const NodePtr<S>& b) {
    if (!a->value.same_shape(b->value)) throw shape_error("add: shape mismatch");
    Tensor<S> out(a->value.shape());
    for (int64_t i = 0; i < out.numel(); ++i) out[i] = a->value[i] + b->value[i];
    auto pa = a, pb = b;
    return make_op<S>(std::move(out), {a, b},
                      [pa, pb](Node<S>& n) {
                          if (pa->requires_grad) pa->accumulate_grad(n.grad);
                          if (pb->requires_grad) pb->accumulate_grad(n.grad);
                      },
                      "add");
}

template <class S>
NodePtr<S> mul(const NodePtr<S>& a, const NodePtr<S>& b) {
    if (!a->value.same_shape(b->value)) throw shape_error("mul: shape mismatch");
    Tensor<S> out(a->value.shape());
    for (int64_t i = 0; i < out.numel(); ++i) out[i] = a->value[i] * b->value[i];
    auto pa = a, pb = b;
    return make_op<S>(std::move(out), {a, b},
                      [pa, pb](Node<S>& n) {
                          if (pa->requires_grad) {
                              Tensor<S> g(n.grad.shape());
                              for (int64_t i = 0; i < g.numel(); ++i) g[i] = n.grad[i] * pb->value[i];
                              pa->accumulate_grad(g);
                          }
                          if (pb->requires_grad) {
                              Tensor<S> g(n.grad.shape());
                              for (int64_t i = 0; i < g.numel(); ++i) g[i] = n.grad[i] * pa->value[i];
                              pb->accumulate_grad(g);
                          }
                      },
                      "mul");
}

template <class S>
NodePtr<S> relu(const NodePtr<S>& x) {
    Tensor<S> out(x->value.shape());
    for (int64_t i = 0; i < out.numel(); ++i) out[i] = x->value[i] > S(0) ? x->value[i] : S(0);
    auto px = x;
    return make_op<S>(std::move(out), {x},
                      [px](Node<S>& n) {
                          Tensor<S> g(n.grad.shape());
                          for (int64_t i = 0; i < g.numel(); ++i)
                              g[i] = px->value[i] > S(0) ? n.grad[i] : S(0);
                          px->accumulate_grad(g);
                      },
                      "relu");
}

template <class S>
NodePtr<S> sum(const NodePtr<S>& x) {
    double acc = 0.0;
    for (int64_t i = 0; i < x->value.numel(); ++i) acc += static_cast<double>(x->value[i]);
    Tensor<S> out(Shape{1});
    out[0] = static_cast<S>(acc);
    auto px = x;
    return make_op<S>(std::move(out), {x},
                      [px](Node<S>& n) {
                          Tensor<S> g(px->value.shape());
                          for (int64_t i = 0; i < g.numel(); ++i) g[i] = n.grad[0];
                          px->accumulate_grad(g);
                      },
                      "sum");
}

// scalar s = exp(e); the chain rule multiplies incoming grads by s.
template <class S>
NodePtr<S> exp_scalar(const NodePtr<S>& e) {
    if (e->value.numel() != 1) throw shape_error("exp_scalar: expects a scalar");
    Tensor<S> out(Shape{1});
    out[0] = static_cast<S>(std::exp(static_cast<double>(e->value[0])));
    auto pe = e;
    return make_op<S>(std::move(out), {e},
                      [pe](Node<S>& n) {
                          Tensor<S> g(Shape{1});
                          g[0] = n.grad[0] * n.value[0];
                          pe->accumulate_grad(g);
                      },
                      "exp_scalar");
}

// scalar ratio exp(e_a - e_b) = exp(e_a) / exp(e_b)
template <class S>
NodePtr<S> exp_diff(const NodePtr<S>& ea, const NodePtr<S>& eb) {
    Tensor<S> out(Shape{1});
    out[0] = static_cast<S>(std::exp(static_cast<double>(ea->value[0]) -
                                     static_cast<double>(eb->value[0])));
    auto pa = ea, pb = eb;
    return make_op<S>(std::move(out), {ea, eb},
                      [pa, pb](Node<S>& n) {
                          Tensor<S> g(Shape{1});
                          g[0] = n.grad[0] * n.value[0];
                          if (pa->requires_grad) pa->accumulate_grad(g);
                          if (pb->requires_grad) {
                              g[0] = -g[0];
                              pb->accumulate_grad(g);
                          }
                      },
                      "exp_diff");
}

// y = a + k * b with scalar node k (residual skip with a trained scale ratio)
template <class S>
NodePtr<S> add_scaled(const NodePtr<S>& a, const NodePtr<S>& b, const NodePtr<S>& k) {
    if (!a->value.same_shape(b->value)) throw shape_error("add_scaled: shape mismatch");
    const S kv = k->value[0];
    Tensor<S> out(a->value.shape());
    for (int64_t i = 0; i < out.numel(); ++i) out[i] = a->value[i] + kv * b->value[i];
    auto pa = a, pb = b, pk = k;
    return make_op<S>(std::move(out), {a, b, k},
                      [pa, pb, pk](Node<S>& n) {
                          if (pa->requires_grad) pa->accumulate_grad(n.grad);
                          if (pb->requires_grad) {
                              Tensor<S> g(n.grad.shape());
                              const S kv = pk->value[0];
                              for (int64_t i = 0; i < g.numel(); ++i) g[i] = kv * n.grad[i];
                              pb->accumulate_grad(g);
                          }
                          if (pk->requires_grad) {
                              double acc = 0.0;
                              for (int64_t i = 0; i < n.grad.numel(); ++i)
                                  acc += static_cast<double>(n.grad[i]) *
                                         static_cast<double>(pb->value[i]);
                              Tensor<S> g(Shape{1});
                              g[0] = static_cast<S>(acc);
                              pk->accumulate_grad(g);
                          }
                      },
                      "add_scaled");
}

template <class S>
NodePtr<S> conv2d(const NodePtr<S>& x, const NodePtr<S>& w, const NodePtr<S>& b,
                  const kernels::Conv2dGeom& geom) {
    kernels::Conv2dGeom g = geom;
    g.validate();
    if (x->value.ndim() != 4) throw shape_error("conv2d: input must be NCHW");
    if (x->value.dim(1) != g.c_in)
        throw shape_error("conv2d: input channels " + std::to_string(x->value.dim(1)) +
                          " != geometry c_in " + std::to_string(g.c_in));
    if (w->value.numel() != g.wgt_numel()) throw shape_error("conv2d: kernel size mismatch");
    if (b && b->value.numel() != g.c_out) throw shape_error("conv2d: bias size mismatch");

    Tensor<S> out(Shape{g.n, g.c_out, g.h_out(), g.w_out()});
    kernels::conv2d_forward(g, x->value.data(), w->value.data(), b ? b->value.data() : nullptr,
                            out.data());
    auto px = x, pw = w, pb = b;
    std::vector<NodePtr<S>> parents = {x, w};
    if (b) parents.push_back(b);
    return make_op<S>(std::move(out), std::move(parents),
                      [px, pw, pb, g](Node<S>& n) {
                          if (px->requires_grad) {
                              Tensor<S> gin(px->value.shape());
                              kernels::conv2d_input_grad(g, n.grad.data(), pw->value.data(),
                                                         gin.data());
                              px->accumulate_grad(gin);
                          }
                          if (pw->requires_grad) {
                              Tensor<S> gw(pw->value.shape());
                              kernels::conv2d_weight_grad(g, n.grad.data(), px->value.data(),
                                                          gw.data());
                              pw->accumulate_grad(gw);
                          }
                          if (pb && pb->requires_grad) {
                              Tensor<S> gb(pb->value.shape());
                              kernels::conv2d_bias_grad(g, n.grad.data(), gb.data());
                              pb->accumulate_grad(gb);
                          }
                      },
                      "conv2d");
}

// Batch norm over NCHW, per channel. Training mode normalizes with batch
// statistics and updates the running buffers in place; eval mode uses the
// running buffers. sigma = sqrt(var + eps).
template <class S>
NodePtr<S> batchnorm2d(const NodePtr<S>& x, const NodePtr<S>& gamma, const NodePtr<S>& beta,
                       Tensor<S>* running_mean, Tensor<S>* running_var, double eps,
                       double momentum, bool training) {
    if (x->value.ndim() != 4) throw shape_error("batchnorm2d: input must be NCHW");
    const int64_t N = x->value.dim(0), C = x->value.dim(1), H = x->value.dim(2),
                  W = x->value.dim(3);
    if (gamma->value.numel() != C || beta->value.numel() != C)
        throw shape_error("batchnorm2d: channel count mismatch");
    const int64_t plane = H * W;
    const double count = static_cast<double>(N * plane);

    std::vector<double> mean(C), var(C);
    if (training) {
        for (int64_t c = 0; c < C; ++c) {
            double s = 0.0, s2 = 0.0;
            for (int64_t n = 0; n < N; ++n) {
                const S* p = x->value.data() + (n * C + c) * plane;
                for (int64_t i = 0; i < plane; ++i) {
                    const double v = static_cast<double>(p[i]);
                    s += v;
                    s2 += v * v;
                }
            }
            mean[c] = s / count;
            var[c] = std::max(0.0, s2 / count - mean[c] * mean[c]);
        }
        if (running_mean && running_var) {
            for (int64_t c = 0; c < C; ++c) {
                (*running_mean)[c] = static_cast<S>((1.0 - momentum) *
                                                        static_cast<double>((*running_mean)[c]) +
                                                    momentum * mean[c]);
                (*running_var)[c] = static_cast<S>((1.0 - momentum) *
                                                       static_cast<double>((*running_var)[c]) +
                                                   momentum * var[c]);
            }
        }
    } else {
        if (!running_mean || !running_var)
            throw std::invalid_argument("batchnorm2d: eval mode requires running statistics");
        for (int64_t c = 0; c < C; ++c) {
            mean[c] = static_cast<double>((*running_mean)[c]);
            var[c] = static_cast<double>((*running_var)[c]);
        }
    }

    std::vector<double> inv_sigma(C);
    for (int64_t c = 0; c < C; ++c) {
        const double s2 = var[c] + eps;
        if (s2 <= 0.0)
            throw numeric_error("batchnorm2d: non-positive variance + eps on channel " +
                                std::to_string(c));
        inv_sigma[c] = 1.0 / std::sqrt(s2);
    }

    Tensor<S> out(x->value.shape());
    for (int64_t n = 0; n < N; ++n)
        for (int64_t c = 0; c < C; ++c) {
            const S* p = x->value.data() + (n * C + c) * plane;
            S* o = out.data() + (n * C + c) * plane;
            const double gm = static_cast<double>(gamma->value[c]);
            const double bt = static_cast<double>(beta->value[c]);
            for (int64_t i = 0; i < plane; ++i)
                o[i] = static_cast<S>(gm * ((static_cast<double>(p[i]) - mean[c]) * inv_sigma[c]) +
                                      bt);
        }

    auto px = x, pg = gamma, pb = beta;
    auto mean_c = std::make_shared<std::vector<double>>(std::move(mean));
    auto inv_c = std::make_shared<std::vector<double>>(std::move(inv_sigma));
    return make_op<S>(
        std::move(out), {x, gamma, beta},
        [px, pg, pb, mean_c, inv_c, N, C, plane, training](Node<S>& n) {
            const double count = static_cast<double>(N * plane);
            std::vector<double> sum_g(C, 0.0), sum_gx(C, 0.0);
            for (int64_t nn = 0; nn < N; ++nn)
                for (int64_t c = 0; c < C; ++c) {
                    const S* gp = n.grad.data() + (nn * C + c) * plane;
                    const S* xp = px->value.data() + (nn * C + c) * plane;
                    double sg = 0.0, sgx = 0.0;
                    for (int64_t i = 0; i < plane; ++i) {
                        const double gv = static_cast<double>(gp[i]);
                        const double xh =
                            (static_cast<double>(xp[i]) - (*mean_c)[c]) * (*inv_c)[c];
                        sg += gv;
                        sgx += gv * xh;
                    }
                    sum_g[c] += sg;
                    sum_gx[c] += sgx;
                }
            if (pg->requires_grad) {
                Tensor<S> g(pg->value.shape());
                for (int64_t c = 0; c < C; ++c) g[c] = static_cast<S>(sum_gx[c]);
                pg->accumulate_grad(g);
            }
            if (pb->requires_grad) {
                Tensor<S> g(pb->value.shape());
                for (int64_t c = 0; c < C; ++c) g[c] = static_cast<S>(sum_g[c]);
                pb->accumulate_grad(g);
            }
            if (px->requires_grad) {
                Tensor<S> g(px->value.shape());
                for (int64_t nn = 0; nn < N; ++nn)
                    for (int64_t c = 0; c < C; ++c) {
                        const S* gp = n.grad.data() + (nn * C + c) * plane;
                        const S* xp = px->value.data() + (nn * C + c) * plane;
                        S* gd = g.data() + (nn * C + c) * plane;
                        const double gm = static_cast<double>(pg->value[c]);
                        for (int64_t i = 0; i < plane; ++i) {
                            const double gv = static_cast<double>(gp[i]);
                            if (training) {
                                const double xh =
                                    (static_cast<double>(xp[i]) - (*mean_c)[c]) * (*inv_c)[c];
                                gd[i] = static_cast<S>(gm * (*inv_c)[c] *
                                                       (gv - sum_g[c] / count -
                                                        xh * sum_gx[c] / count));
                            } else {
                                gd[i] = static_cast<S>(gm * (*inv_c)[c] * gv);
                            }
                        }
                    }
                px->accumulate_grad(g);
            }
        },
        "batchnorm2d");
}

// 2x2 max pooling, stride 2; ties resolved to the first element in scan order.
template <class S>
NodePtr<S> maxpool2(const NodePtr<S>& x) {
    const int64_t N = x->value.dim(0), C = x->value.dim(1), H = x->value.dim(2),
                  W = x->value.dim(3);
    if (H % 2 || W % 2) throw shape_error("maxpool2: spatial dims must be even");
    const int64_t Ho = H / 2, Wo = W / 2;
    Tensor<S> out(Shape{N, C, Ho, Wo});
    auto argmax = std::make_shared<std::vector<int32_t>>(static_cast<size_t>(N * C * Ho * Wo));
    int64_t oi = 0;
    for (int64_t n = 0; n < N; ++n)
        for (int64_t c = 0; c < C; ++c) {
            const S* p = x->value.data() + (n * C + c) * H * W;
            for (int64_t oh = 0; oh < Ho; ++oh)
                for (int64_t ow = 0; ow < Wo; ++ow, ++oi) {
                    S best = p[(2 * oh) * W + 2 * ow];
                    int32_t bi = static_cast<int32_t>((2 * oh) * W + 2 * ow);
                    for (int64_t dy = 0; dy < 2; ++dy)
                        for (int64_t dx = 0; dx < 2; ++dx) {
                            const int64_t ii = (2 * oh + dy) * W + 2 * ow + dx;
                            if (p[ii] > best) {
                                best = p[ii];
                                bi = static_cast<int32_t>(ii);
                            }
                        }
                    out[oi] = best;
                    (*argmax)[static_cast<size_t>(oi)] = bi;
                }
        }
    auto px = x;
    return make_op<S>(std::move(out), {x},
                      [px, argmax, N, C, H, W, Ho, Wo](Node<S>& n) {
                          Tensor<S> g(px->value.shape());
                          int64_t oi = 0;
                          for (int64_t nn = 0; nn < N; ++nn)
                              for (int64_t c = 0; c < C; ++c) {
                                  S* gp = g.data() + (nn * C + c) * H * W;
                                  for (int64_t i = 0; i < Ho * Wo; ++i, ++oi)
                                      gp[(*argmax)[static_cast<size_t>(oi)]] += n.grad[oi];
                              }
                          px->accumulate_grad(g);
                      },
                      "maxpool2");
}

// global average pool: NCHW -> N x C
template <class S>
NodePtr<S> global_avgpool(const NodePtr<S>& x) {
    const int64_t N = x->value.dim(0), C = x->value.dim(1), plane = x->value.dim(2) * x->value.dim(3);
    Tensor<S> out(Shape{N, C});
    for (int64_t n = 0; n < N; ++n)
        for (int64_t c = 0; c < C; ++c) {
            const S* p = x->value.data() + (n * C + c) * plane;
            double acc = 0.0;
            for (int64_t i = 0; i < plane; ++i) acc += static_cast<double>(p[i]);
            out[n * C + c] = static_cast<S>(acc / static_cast<double>(plane));
        }
    auto px = x;
    return make_op<S>(std::move(out), {x},
                      [px, N, C, plane](Node<S>& n) {
                          Tensor<S> g(px->value.shape());
                          for (int64_t nn = 0; nn < N; ++nn)
                              for (int64_t c = 0; c < C; ++c) {
                                  const S gv = static_cast<S>(
                                      static_cast<double>(n.grad[nn * C + c]) /
                                      static_cast<double>(plane));
                                  S* gp = g.data() + (nn * C + c) * plane;
                                  for (int64_t i = 0; i < plane; ++i) gp[i] = gv;
                              }
                          px->accumulate_grad(g);
                      },
                      "global_avgpool");
}

// NCHW -> N x (C*H*W)
template <class S>
NodePtr<S> flatten2d(const NodePtr<S>& x) {
    const int64_t N = x->value.dim(0);
    const int64_t D = x->value.numel() / N;
    Tensor<S> out(Shape{N, D}, x->value.vec());
    auto px = x;
    return make_op<S>(std::move(out), {x},
                      [px](Node<S>& n) {
                          Tensor<S> g(px->value.shape(), n.grad.vec());
                          px->accumulate_grad(g);
                      },
                      "flatten2d");
}

// y = x W^T + b, x: N x D, W: out x D
template <class S>
NodePtr<S> linear(const NodePtr<S>& x, const NodePtr<S>& w, const NodePtr<S>& b) {
    const int64_t N = x->value.dim(0), D = x->value.dim(1);
    const int64_t O = w->value.dim(0);
    if (w->value.dim(1) != D) throw shape_error("linear: weight/input width mismatch");
    if (b && b->value.numel() != O) throw shape_error("linear: bias size mismatch");
    Tensor<S> out(Shape{N, O});
    for (int64_t n = 0; n < N; ++n)
        for (int64_t o = 0; o < O; ++o) {
            double acc = b ? static_cast<double>(b->value[o]) : 0.0;
            const S* xp = x->value.data() + n * D;
            const S* wp = w->value.data() + o * D;
            for (int64_t d = 0; d < D; ++d)
                acc += static_cast<double>(xp[d]) * static_cast<double>(wp[d]);
            out[n * O + o] = static_cast<S>(acc);
        }
    auto px = x, pw = w, pb = b;
    std::vector<NodePtr<S>> parents = {x, w};
    if (b) parents.push_back(b);
    return make_op<S>(std::move(out), std::move(parents),
                      [px, pw, pb, N, D, O](Node<S>& n) {
                          if (px->requires_grad) {
                              Tensor<S> g(px->value.shape());
                              for (int64_t nn = 0; nn < N; ++nn)
                                  for (int64_t d = 0; d < D; ++d) {
                                      double acc = 0.0;
                                      for (int64_t o = 0; o < O; ++o)
                                          acc += static_cast<double>(n.grad[nn * O + o]) *
                                                 static_cast<double>(pw->value[o * D + d]);
                                      g[nn * D + d] = static_cast<S>(acc);
                                  }
                              px->accumulate_grad(g);
                          }
                          if (pw->requires_grad) {
                              Tensor<S> g(pw->value.shape());
                              for (int64_t o = 0; o < O; ++o)
                                  for (int64_t d = 0; d < D; ++d) {
                                      double acc = 0.0;
                                      for (int64_t nn = 0; nn < N; ++nn)
                                          acc += static_cast<double>(n.grad[nn * O + o]) *
                                                 static_cast<double>(px->value[nn * D + d]);
                                      g[o * D + d] = static_cast<S>(acc);
                                  }
                              pw->accumulate_grad(g);
                          }
                          if (pb && pb->requires_grad) {
                              Tensor<S> g(pb->value.shape());
                              for (int64_t o = 0; o < O; ++o) {
                                  double acc = 0.0;
                                  for (int64_t nn = 0; nn < N; ++nn)
                                      acc += static_cast<double>(n.grad[nn * O + o]);
                                  g[o] = static_cast<S>(acc);
                              }
                              pb->accumulate_grad(g);
                          }
                      },
                      "linear");
}

// mean softmax cross-entropy over the batch; logits N x C
template <class S>
NodePtr<S> softmax_cross_entropy(const NodePtr<S>& logits, std::vector<int> labels) {
    const int64_t N = logits->value.dim(0), C = logits->value.dim(1);
    if (static_cast<int64_t>(labels.size()) != N)
        throw shape_error("softmax_cross_entropy: label count mismatch");
    auto probs = std::make_shared<std::vector<double>>(static_cast<size_t>(N * C));
    double loss = 0.0;
    for (int64_t n = 0; n < N; ++n) {
        const S* lp = logits->value.data() + n * C;
        double mx = static_cast<double>(lp[0]);
        for (int64_t c = 1; c < C; ++c) mx = std::max(mx, static_cast<double>(lp[c]));
        double z = 0.0;
        for (int64_t c = 0; c < C; ++c) {
            const double e = std::exp(static_cast<double>(lp[c]) - mx);
            (*probs)[static_cast<size_t>(n * C + c)] = e;
            z += e;
        }
        for (int64_t c = 0; c < C; ++c) (*probs)[static_cast<size_t>(n * C + c)] /= z;
        const int y = labels[static_cast<size_t>(n)];
        if (y < 0 || y >= C) throw std::invalid_argument("softmax_cross_entropy: label out of range");
        loss -= std::log(std::max((*probs)[static_cast<size_t>(n * C + y)], 1e-300));
    }
    Tensor<S> out(Shape{1});
    out[0] = static_cast<S>(loss / static_cast<double>(N));
    auto pl = logits;
    auto lab = std::make_shared<std::vector<int>>(std::move(labels));
    return make_op<S>(std::move(out), {logits},
                      [pl, probs, lab, N, C](Node<S>& n) {
                          Tensor<S> g(pl->value.shape());
                          const double scale = static_cast<double>(n.grad[0]) / static_cast<double>(N);
                          for (int64_t nn = 0; nn < N; ++nn)
                              for (int64_t c = 0; c < C; ++c) {
                                  double v = (*probs)[static_cast<size_t>(nn * C + c)];
                                  if (c == (*lab)[static_cast<size_t>(nn)]) v -= 1.0;
                                  g[nn * C + c] = static_cast<S>(v * scale);
                              }
                          pl->accumulate_grad(g);
                      },
                      "softmax_cross_entropy");
}

} // namespace ops
} // namespace lut
