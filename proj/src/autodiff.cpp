#include "gslm/autodiff.hpp"

#include <algorithm>
#include <cmath>

namespace gslm {

namespace {

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (!a.same_shape(b))
        throw std::invalid_argument(std::string(op) + ": shape mismatch " + shape_str(a.shape()) +
                                    " vs " + shape_str(b.shape()));
}

double stable_sigmoid(double x) {
    if (x >= 0.0) {
        const double t = std::exp(-x);
        return 1.0 / (1.0 + t);
    }
    const double t = std::exp(x);
    return t / (1.0 + t);
}

constexpr double kBceClamp = 1e-12;

}  // namespace

Tape::Id Tape::input(Tensor t) {
    Node n;
    n.value = std::move(t);
    return push(std::move(n));
}

Tape::Id Tape::param(Parameter& p) {
    Node n;
    n.value = p.value;
    n.bound = &p;
    n.needs_grad = true;
    return push(std::move(n));
}

Tensor& Tape::grad_buf(Id id) {
    auto i = static_cast<size_t>(id);
    if (!touched_[i]) {
        grads_[i] = Tensor(nodes_[i].value.shape());
        if (nodes_[i].value.rank() == 0) grads_[i] = Tensor::scalar(0.0);
        touched_[i] = 1;
    }
    return grads_[i];
}

void Tape::add_grad(Id id, const Tensor& g) {
    if (!needs(id)) return;
    Tensor& dst = grad_buf(id);
    for (size_t i = 0; i < dst.size(); ++i) dst[i] += g[i];
}

const Tensor& Tape::grad(Id id) const {
    auto i = static_cast<size_t>(id);
    if (i >= touched_.size() || !touched_[i])
        throw std::logic_error("Tape::grad: node has no gradient (backward not run or unreachable)");
    return grads_[i];
}

Tape::Id Tape::conv2d(Id xid, Id wid, Id bid, int stride, int padding) {
    const Tensor& x = value(xid);
    const Tensor& w = value(wid);
    if (x.rank() != 3) throw std::invalid_argument("conv2d: input must be CxHxW, got " + shape_str(x.shape()));
    if (w.rank() != 4) throw std::invalid_argument("conv2d: kernel must be CoxCixKhxKw, got " + shape_str(w.shape()));
    if (stride < 1) throw std::invalid_argument("conv2d: stride must be positive");
    if (padding < 0) throw std::invalid_argument("conv2d: padding must be non-negative");
    const int ci = x.extent(0), h = x.extent(1), wdt = x.extent(2);
    const int co = w.extent(0), kh = w.extent(2), kw = w.extent(3);
    if (w.extent(1) != ci)
        throw std::invalid_argument("conv2d: kernel expects " + std::to_string(w.extent(1)) +
                                    " input channels, input has " + std::to_string(ci));
    if (kh % 2 == 0 || kw % 2 == 0) throw std::invalid_argument("conv2d: kernel extents must be odd");
    const int oh = (h + 2 * padding - kh) / stride + 1;
    const int ow = (wdt + 2 * padding - kw) / stride + 1;
    if (h + 2 * padding < kh || wdt + 2 * padding < kw || oh <= 0 || ow <= 0)
        throw std::invalid_argument("conv2d: input " + shape_str(x.shape()) + " too small for kernel " +
                                    shape_str(w.shape()) + " with stride " + std::to_string(stride) +
                                    ", padding " + std::to_string(padding));
    if (bid >= 0) {
        const Tensor& b = value(bid);
        if (b.rank() != 1 || b.extent(0) != co)
            throw std::invalid_argument("conv2d: bias must have shape [" + std::to_string(co) + "]");
    }

    const int ph = h + 2 * padding, pw = wdt + 2 * padding;
    auto pad_input = [=](const Tensor& src) {
        Tensor padded({ci, ph, pw});
        for (int c = 0; c < ci; ++c)
            for (int y = 0; y < h; ++y) {
                const double* s = src.data() + (static_cast<size_t>(c) * h + y) * wdt;
                double* d = padded.data() + (static_cast<size_t>(c) * ph + y + padding) * pw + padding;
                std::copy(s, s + wdt, d);
            }
        return padded;
    };

    Tensor padded = pad_input(x);
    Tensor out({co, oh, ow});
    for (int oc = 0; oc < co; ++oc) {
        const double bias = bid >= 0 ? value(bid)[static_cast<size_t>(oc)] : 0.0;
        double* oc_base = out.data() + static_cast<size_t>(oc) * oh * ow;
        std::fill(oc_base, oc_base + static_cast<size_t>(oh) * ow, bias);
        for (int c = 0; c < ci; ++c)
            for (int ky = 0; ky < kh; ++ky)
                for (int kx = 0; kx < kw; ++kx) {
                    const double wv = w.data()[((static_cast<size_t>(oc) * ci + c) * kh + ky) * kw + kx];
                    for (int oy = 0; oy < oh; ++oy) {
                        const double* __restrict src = padded.data() + (static_cast<size_t>(c) * ph + oy * stride + ky) * pw + kx;
                        double* __restrict dst = oc_base + static_cast<size_t>(oy) * ow;
                        if (stride == 1) {
                            for (int ox = 0; ox < ow; ++ox) dst[ox] += wv * src[ox];
                        } else {
                            for (int ox = 0; ox < ow; ++ox) dst[ox] += wv * src[ox * stride];
                        }
                    }
                }
    }

    Node n;
    n.value = std::move(out);
    n.needs_grad = needs(xid) || needs(wid) || (bid >= 0 && needs(bid));
    n.back = [=](Tape& t, Id self) {
        const Tensor& g = t.grads_[static_cast<size_t>(self)];
        const Tensor& xv = t.value(xid);
        const Tensor& wv = t.value(wid);
        if (bid >= 0 && t.needs(bid)) {
            Tensor& gb = t.grad_buf(bid);
            for (int oc = 0; oc < co; ++oc) {
                double acc = 0.0;
                const double* gp = g.data() + static_cast<size_t>(oc) * oh * ow;
                for (int i = 0; i < oh * ow; ++i) acc += gp[i];
                gb[static_cast<size_t>(oc)] += acc;
            }
        }
        if (t.needs(wid)) {
            Tensor xpad = pad_input(xv);
            Tensor& gw = t.grad_buf(wid);
            for (int oc = 0; oc < co; ++oc)
                for (int c = 0; c < ci; ++c)
                    for (int ky = 0; ky < kh; ++ky)
                        for (int kx = 0; kx < kw; ++kx) {
                            double acc = 0.0;
                            for (int oy = 0; oy < oh; ++oy) {
                                const double* __restrict gp = g.data() + (static_cast<size_t>(oc) * oh + oy) * ow;
                                const double* __restrict xp = xpad.data() + (static_cast<size_t>(c) * ph + oy * stride + ky) * pw + kx;
                                if (stride == 1) {
                                    for (int ox = 0; ox < ow; ++ox) acc += gp[ox] * xp[ox];
                                } else {
                                    for (int ox = 0; ox < ow; ++ox) acc += gp[ox] * xp[ox * stride];
                                }
                            }
                            gw.data()[((static_cast<size_t>(oc) * ci + c) * kh + ky) * kw + kx] += acc;
                        }
        }
        if (t.needs(xid)) {
            Tensor gpad({ci, ph, pw});
            for (int oc = 0; oc < co; ++oc)
                for (int c = 0; c < ci; ++c)
                    for (int ky = 0; ky < kh; ++ky)
                        for (int kx = 0; kx < kw; ++kx) {
                            const double wvv = wv.data()[((static_cast<size_t>(oc) * ci + c) * kh + ky) * kw + kx];
                            for (int oy = 0; oy < oh; ++oy) {
                                const double* __restrict gp = g.data() + (static_cast<size_t>(oc) * oh + oy) * ow;
                                double* __restrict dp = gpad.data() + (static_cast<size_t>(c) * ph + oy * stride + ky) * pw + kx;
                                if (stride == 1) {
                                    for (int ox = 0; ox < ow; ++ox) dp[ox] += wvv * gp[ox];
                                } else {
                                    for (int ox = 0; ox < ow; ++ox) dp[ox * stride] += wvv * gp[ox];
                                }
                            }
                        }
            Tensor gx({ci, h, wdt});
            for (int c = 0; c < ci; ++c)
                for (int y = 0; y < h; ++y) {
                    const double* s = gpad.data() + (static_cast<size_t>(c) * ph + y + padding) * pw + padding;
                    double* d = gx.data() + (static_cast<size_t>(c) * h + y) * wdt;
                    std::copy(s, s + wdt, d);
                }
            t.add_grad(xid, gx);
        }
    };
    return push(std::move(n));
}

Tape::Id Tape::relu(Id xid) {
    const Tensor& x = value(xid);
    Tensor out(x.shape().empty() ? Tensor::scalar(0.0) : Tensor(x.shape()));
    for (size_t i = 0; i < x.size(); ++i) out[i] = x[i] > 0.0 ? x[i] : 0.0;
    Node n;
    n.value = std::move(out);
    n.needs_grad = needs(xid);
    n.back = [xid](Tape& t, Id self) {
        if (!t.needs(xid)) return;
        const Tensor& g = t.grads_[static_cast<size_t>(self)];
        const Tensor& x = t.value(xid);
        Tensor& gx = t.grad_buf(xid);
        for (size_t i = 0; i < x.size(); ++i)
            if (x[i] > 0.0) gx[i] += g[i];
    };
    return push(std::move(n));
}

Tape::Id Tape::relu_k(Id xid, double k) {
    if (!(k > 0.0)) throw std::invalid_argument("relu_k: k must be positive");
    const Tensor& x = value(xid);
    Tensor out(x.shape().empty() ? Tensor::scalar(0.0) : Tensor(x.shape()));
    for (size_t i = 0; i < x.size(); ++i) out[i] = std::min(std::max(x[i], 0.0), k);
    Node n;
    n.value = std::move(out);
    n.needs_grad = needs(xid);
    n.back = [xid, k](Tape& t, Id self) {
        if (!t.needs(xid)) return;
        const Tensor& g = t.grads_[static_cast<size_t>(self)];
        const Tensor& x = t.value(xid);
        Tensor& gx = t.grad_buf(xid);
        for (size_t i = 0; i < x.size(); ++i)
            if (x[i] > 0.0 && x[i] < k) gx[i] += g[i];
    };
    return push(std::move(n));
}

Tape::Id Tape::sigmoid(Id xid) {
    const Tensor& x = value(xid);
    Tensor out(x.shape().empty() ? Tensor::scalar(0.0) : Tensor(x.shape()));
    for (size_t i = 0; i < x.size(); ++i) out[i] = stable_sigmoid(x[i]);
    Node n;
    n.value = std::move(out);
    n.needs_grad = needs(xid);
    n.back = [xid](Tape& t, Id self) {
        if (!t.needs(xid)) return;
        const Tensor& g = t.grads_[static_cast<size_t>(self)];
        const Tensor& y = t.value(self);
        Tensor& gx = t.grad_buf(xid);
        for (size_t i = 0; i < y.size(); ++i) gx[i] += g[i] * y[i] * (1.0 - y[i]);
    };
    return push(std::move(n));
}

Tape::Id Tape::global_average_pool(Id xid) {
    const Tensor& x = value(xid);
    if (x.rank() != 3) throw std::invalid_argument("global_average_pool: input must be CxHxW");
    const int c = x.extent(0), h = x.extent(1), w = x.extent(2);
    Tensor out({c});
    const double inv = 1.0 / (static_cast<double>(h) * w);
    for (int ch = 0; ch < c; ++ch) {
        double acc = 0.0;
        const double* p = x.data() + static_cast<size_t>(ch) * h * w;
        for (int i = 0; i < h * w; ++i) acc += p[i];
        out[static_cast<size_t>(ch)] = acc * inv;
    }
    Node n;
    n.value = std::move(out);
    n.needs_grad = needs(xid);
    n.back = [xid, c, h, w, inv](Tape& t, Id self) {
        if (!t.needs(xid)) return;
        const Tensor& g = t.grads_[static_cast<size_t>(self)];
        Tensor& gx = t.grad_buf(xid);
        for (int ch = 0; ch < c; ++ch) {
            const double gv = g[static_cast<size_t>(ch)] * inv;
            double* p = gx.data() + static_cast<size_t>(ch) * h * w;
            for (int i = 0; i < h * w; ++i) p[i] += gv;
        }
    };
    return push(std::move(n));
}

Tape::Id Tape::scale(Id xid, double c) {
    const Tensor& x = value(xid);
    Tensor out = x;
    for (size_t i = 0; i < out.size(); ++i) out[i] *= c;
    Node n;
    n.value = std::move(out);
    n.needs_grad = needs(xid);
    n.back = [xid, c](Tape& t, Id self) {
        if (!t.needs(xid)) return;
        const Tensor& g = t.grads_[static_cast<size_t>(self)];
        Tensor& gx = t.grad_buf(xid);
        for (size_t i = 0; i < gx.size(); ++i) gx[i] += c * g[i];
    };
    return push(std::move(n));
}

Tape::Id Tape::shift(Id xid, double c) {
    const Tensor& x = value(xid);
    Tensor out = x;
    for (size_t i = 0; i < out.size(); ++i) out[i] += c;
    Node n;
    n.value = std::move(out);
    n.needs_grad = needs(xid);
    n.back = [xid](Tape& t, Id self) {
        t.add_grad(xid, t.grads_[static_cast<size_t>(self)]);
    };
    return push(std::move(n));
}

Tape::Id Tape::add(Id a, Id b) { return add_scaled(a, b, 1.0); }

Tape::Id Tape::add_scaled(Id aid, Id bid, double beta) {
    const Tensor& a = value(aid);
    const Tensor& b = value(bid);
    check_same_shape(a, b, "add");
    Tensor out = a;
    for (size_t i = 0; i < out.size(); ++i) out[i] += beta * b[i];
    Node n;
    n.value = std::move(out);
    n.needs_grad = needs(aid) || needs(bid);
    n.back = [aid, bid, beta](Tape& t, Id self) {
        const Tensor& g = t.grads_[static_cast<size_t>(self)];
        t.add_grad(aid, g);
        if (t.needs(bid)) {
            Tensor& gb = t.grad_buf(bid);
            for (size_t i = 0; i < gb.size(); ++i) gb[i] += beta * g[i];
        }
    };
    return push(std::move(n));
}

Tape::Id Tape::mul(Id aid, Id bid) {
    const Tensor& a = value(aid);
    const Tensor& b = value(bid);
    check_same_shape(a, b, "mul");
    Tensor out = a;
    for (size_t i = 0; i < out.size(); ++i) out[i] *= b[i];
    Node n;
    n.value = std::move(out);
    n.needs_grad = needs(aid) || needs(bid);
    n.back = [aid, bid](Tape& t, Id self) {
        const Tensor& g = t.grads_[static_cast<size_t>(self)];
        const Tensor& a = t.value(aid);
        const Tensor& b = t.value(bid);
        if (t.needs(aid)) {
            Tensor& ga = t.grad_buf(aid);
            for (size_t i = 0; i < ga.size(); ++i) ga[i] += g[i] * b[i];
        }
        if (t.needs(bid)) {
            Tensor& gb = t.grad_buf(bid);
            for (size_t i = 0; i < gb.size(); ++i) gb[i] += g[i] * a[i];
        }
    };
    return push(std::move(n));
}

Tape::Id Tape::sum(Id xid) {
    const Tensor& x = value(xid);
    double acc = 0.0;
    for (size_t i = 0; i < x.size(); ++i) acc += x[i];
    Node n;
    n.value = Tensor::scalar(acc);
    n.needs_grad = needs(xid);
    n.back = [xid](Tape& t, Id self) {
        if (!t.needs(xid)) return;
        const double g = t.grads_[static_cast<size_t>(self)].item();
        Tensor& gx = t.grad_buf(xid);
        for (size_t i = 0; i < gx.size(); ++i) gx[i] += g;
    };
    return push(std::move(n));
}

Tape::Id Tape::max_norm_cam(Id xid) {
    const Tensor& x = value(xid);
    if (x.rank() != 3) throw std::invalid_argument("max_norm_cam: input must be CxHxW");
    const int c = x.extent(0);
    const int hw = x.extent(1) * x.extent(2);
    Tensor out(x.shape());
    std::vector<int> argmax(static_cast<size_t>(c), 0);
    std::vector<double> mx(static_cast<size_t>(c), 0.0);
    for (int ch = 0; ch < c; ++ch) {
        const double* p = x.data() + static_cast<size_t>(ch) * hw;
        int am = 0;
        double m = p[0];
        for (int i = 1; i < hw; ++i)
            if (p[i] > m) { m = p[i]; am = i; }
        argmax[static_cast<size_t>(ch)] = am;
        mx[static_cast<size_t>(ch)] = m;
        double* o = out.data() + static_cast<size_t>(ch) * hw;
        if (m <= 0.0) continue;  // all-zero map: no positive evidence
        for (int i = 0; i < hw; ++i) o[i] = p[i] > 0.0 ? p[i] / m : 0.0;
    }
    Node n;
    n.value = std::move(out);
    n.needs_grad = needs(xid);
    n.back = [xid, c, hw, argmax, mx](Tape& t, Id self) {
        if (!t.needs(xid)) return;
        const Tensor& g = t.grads_[static_cast<size_t>(self)];
        const Tensor& x = t.value(xid);
        const Tensor& y = t.value(self);
        Tensor& gx = t.grad_buf(xid);
        for (int ch = 0; ch < c; ++ch) {
            const double m = mx[static_cast<size_t>(ch)];
            if (m <= 0.0) continue;
            const size_t base = static_cast<size_t>(ch) * hw;
            double max_pull = 0.0;
            for (int i = 0; i < hw; ++i) {
                if (x[base + i] > 0.0) {
                    gx[base + i] += g[base + i] / m;
                    max_pull += g[base + i] * y[base + i];
                }
            }
            gx[base + argmax[static_cast<size_t>(ch)]] -= max_pull / m;
        }
    };
    return push(std::move(n));
}

Tape::Id Tape::bce_mean(Id pid, std::vector<double> target) {
    const Tensor& p = value(pid);
    if (p.rank() != 1 || static_cast<size_t>(p.extent(0)) != target.size())
        throw std::invalid_argument("bce_mean: prediction length " + shape_str(p.shape()) +
                                    " does not match target length " + std::to_string(target.size()));
    const int c = p.extent(0);
    double acc = 0.0;
    for (int i = 0; i < c; ++i) {
        const double ph = std::min(std::max(p[static_cast<size_t>(i)], kBceClamp), 1.0 - kBceClamp);
        acc -= target[static_cast<size_t>(i)] * std::log(ph) +
               (1.0 - target[static_cast<size_t>(i)]) * std::log(1.0 - ph);
    }
    Node n;
    n.value = Tensor::scalar(acc / c);
    n.needs_grad = needs(pid);
    n.back = [pid, c, tgt = std::move(target)](Tape& t, Id self) {
        if (!t.needs(pid)) return;
        const double g = t.grads_[static_cast<size_t>(self)].item();
        const Tensor& p = t.value(pid);
        Tensor& gp = t.grad_buf(pid);
        for (int i = 0; i < c; ++i) {
            const double pv = p[static_cast<size_t>(i)];
            if (pv <= kBceClamp || pv >= 1.0 - kBceClamp) continue;  // clamp region
            gp[static_cast<size_t>(i)] += g * (-(tgt[static_cast<size_t>(i)] / pv -
                                                 (1.0 - tgt[static_cast<size_t>(i)]) / (1.0 - pv)) / c);
        }
    };
    return push(std::move(n));
}

Tape::Id Tape::masked_smooth_l1(Id mid, Tensor target, std::vector<char> use_class,
                                long* supervised_count_out) {
    const Tensor& m = value(mid);
    if (m.rank() != 3) throw std::invalid_argument("masked_smooth_l1: maps must be CxHxW");
    check_same_shape(m, target, "masked_smooth_l1");
    const int c = m.extent(0);
    if (use_class.size() != static_cast<size_t>(c))
        throw std::invalid_argument("masked_smooth_l1: class flag count mismatch");
    const int hw = m.extent(1) * m.extent(2);

    std::vector<long> counts(static_cast<size_t>(c), 0);
    std::vector<double> class_sum(static_cast<size_t>(c), 0.0);
    long total = 0;
    int included = 0;
    for (int ch = 0; ch < c; ++ch) {
        if (!use_class[static_cast<size_t>(ch)]) continue;
        const size_t base = static_cast<size_t>(ch) * hw;
        for (int i = 0; i < hw; ++i) {
            const double tv = target[base + i];
            if (tv < 0.0) continue;
            const double d = m[base + i] - tv;
            const double ad = std::abs(d);
            class_sum[static_cast<size_t>(ch)] += ad < 1.0 ? 0.5 * d * d : ad - 0.5;
            ++counts[static_cast<size_t>(ch)];
        }
        if (counts[static_cast<size_t>(ch)] > 0) {
            ++included;
            total += counts[static_cast<size_t>(ch)];
        }
    }
    double loss = 0.0;
    if (included > 0) {
        for (int ch = 0; ch < c; ++ch)
            if (use_class[static_cast<size_t>(ch)] && counts[static_cast<size_t>(ch)] > 0)
                loss += class_sum[static_cast<size_t>(ch)] / static_cast<double>(counts[static_cast<size_t>(ch)]);
        loss /= included;
    }
    if (supervised_count_out) *supervised_count_out = total;

    Node n;
    n.value = Tensor::scalar(loss);
    n.needs_grad = needs(mid);
    n.back = [mid, c, hw, counts, included, tgt = std::move(target),
              flags = std::move(use_class)](Tape& t, Id self) {
        if (!t.needs(mid) || included == 0) return;
        const double g = t.grads_[static_cast<size_t>(self)].item();
        const Tensor& m = t.value(mid);
        Tensor& gm = t.grad_buf(mid);
        for (int ch = 0; ch < c; ++ch) {
            if (!flags[static_cast<size_t>(ch)] || counts[static_cast<size_t>(ch)] == 0) continue;
            const double coef = g / (static_cast<double>(included) * static_cast<double>(counts[static_cast<size_t>(ch)]));
            const size_t base = static_cast<size_t>(ch) * hw;
            for (int i = 0; i < hw; ++i) {
                const double tv = tgt[base + i];
                if (tv < 0.0) continue;
                const double d = m[base + i] - tv;
                gm[base + i] += coef * (std::abs(d) < 1.0 ? d : (d > 0.0 ? 1.0 : -1.0));
            }
        }
    };
    return push(std::move(n));
}

void Tape::run_backward(Id loss, GradSink* sink) {
    if (loss < 0 || static_cast<size_t>(loss) >= nodes_.size())
        throw std::invalid_argument("backward: invalid node");
    if (nodes_[static_cast<size_t>(loss)].value.rank() != 0)
        throw std::invalid_argument("backward: loss must be a scalar, got " +
                                    shape_str(nodes_[static_cast<size_t>(loss)].value.shape()));
    grads_.assign(nodes_.size(), Tensor());
    touched_.assign(nodes_.size(), 0);
    grad_buf(loss)[0] = 1.0;
    for (Id id = loss; id >= 0; --id) {
        if (!touched_[static_cast<size_t>(id)]) continue;
        Node& nd = nodes_[static_cast<size_t>(id)];
        if (nd.bound) {
            const Tensor& g = grads_[static_cast<size_t>(id)];
            if (sink) {
                auto it = sink->find(nd.bound);
                if (it == sink->end())
                    it = sink->emplace(nd.bound, Tensor(nd.bound->value.shape())).first;
                for (size_t i = 0; i < g.size(); ++i) it->second[i] += g[i];
            } else {
                for (size_t i = 0; i < g.size(); ++i) nd.bound->grad[i] += g[i];
            }
        }
        if (nd.back) nd.back(*this, id);
    }
}

void Tape::backward(Id loss) { run_backward(loss, nullptr); }
void Tape::backward(Id loss, GradSink& sink) { run_backward(loss, &sink); }

double poly_lr(double base_lr, int iteration, int max_iterations, double power) {
    if (base_lr < 0.0) throw std::invalid_argument("poly_lr: negative base rate");
    if (max_iterations <= 0 || iteration < 0 || iteration >= max_iterations)
        throw std::invalid_argument("poly_lr: iteration " + std::to_string(iteration) +
                                    " out of range [0, " + std::to_string(max_iterations) + ")");
    return base_lr * std::pow(1.0 - static_cast<double>(iteration) / max_iterations, power);
}

namespace {

double scale_for(const std::string& name, const std::vector<std::pair<std::string, double>>& scales) {
    for (const auto& [prefix, s] : scales)
        if (name.rfind(prefix, 0) == 0) return s;
    return 1.0;
}

}  // namespace

void sgd_step(const std::vector<Parameter*>& params, double base_lr, int iteration,
              int max_iterations, double power, double weight_decay,
              const std::vector<std::pair<std::string, double>>& group_lr_scale) {
    if (weight_decay < 0.0) throw std::invalid_argument("sgd_step: negative weight decay");
    const double lr = poly_lr(base_lr, iteration, max_iterations, power);
    for (Parameter* p : params) {
        const double s = lr * scale_for(p->name, group_lr_scale);
        for (size_t i = 0; i < p->value.size(); ++i)
            p->value[i] -= s * (p->grad[i] + weight_decay * p->value[i]);
    }
}

SgdOptimizer::SgdOptimizer(double base_lr, int max_iterations, double power, double weight_decay,
                           double momentum, std::vector<std::pair<std::string, double>> group_lr_scale)
    : base_lr_(base_lr), power_(power), weight_decay_(weight_decay), momentum_(momentum),
      max_iterations_(max_iterations), scales_(std::move(group_lr_scale)) {
    if (base_lr < 0.0 || weight_decay < 0.0 || momentum < 0.0)
        throw std::invalid_argument("SgdOptimizer: negative hyperparameter");
}

void SgdOptimizer::step(const std::vector<Parameter*>& params, int iteration) {
    const double lr = poly_lr(base_lr_, iteration, max_iterations_, power_);
    for (Parameter* p : params) {
        const double s = lr * scale_for(p->name, scales_);
        if (momentum_ > 0.0) {
            auto it = velocity_.find(p->name);
            if (it == velocity_.end()) it = velocity_.emplace(p->name, Tensor(p->value.shape())).first;
            Tensor& v = it->second;
            for (size_t i = 0; i < p->value.size(); ++i) {
                v[i] = momentum_ * v[i] + p->grad[i] + weight_decay_ * p->value[i];
                p->value[i] -= s * v[i];
            }
        } else {
            for (size_t i = 0; i < p->value.size(); ++i)
                p->value[i] -= s * (p->grad[i] + weight_decay_ * p->value[i]);
        }
    }
}

}  // namespace gslm
