#include "lgrn/ops.hpp"

#include <algorithm>
#include <cmath>

namespace lgrn {

double canonical_sum(std::vector<double> terms) {
    std::sort(terms.begin(), terms.end());
    double s = 0.0;
    for (double v : terms) s += v;
    return s;
}

} // namespace lgrn

namespace lgrn::nn {

static void check_same_shape(const Var& a, const Var& b, const char* op) {
    if (!a->value.same_shape(b->value))
        throw Error("shape_mismatch", std::string(op) + ": operand shapes differ");
}

Var relu(Tape& t, const Var& x) {
    Tensor out = x->value;
    for (long i = 0; i < out.numel(); ++i) out[i] = std::max(0.0, out[i]);
    return t.record(std::move(out), {x}, [x](Node& n) {
        for (long i = 0; i < n.grad.numel(); ++i)
            if (x->value[i] > 0.0) x->grad[i] += n.grad[i];
    });
}

Var sigmoid(Tape& t, const Var& x) {
    Tensor out = x->value;
    for (long i = 0; i < out.numel(); ++i) out[i] = 1.0 / (1.0 + std::exp(-out[i]));
    return t.record(std::move(out), {x}, [x](Node& n) {
        for (long i = 0; i < n.grad.numel(); ++i) {
            double y = n.value[i];
            x->grad[i] += n.grad[i] * y * (1.0 - y);
        }
    });
}

Var add(Tape& t, const Var& a, const Var& b) {
    check_same_shape(a, b, "add");
    Tensor out = a->value;
    for (long i = 0; i < out.numel(); ++i) out[i] += b->value[i];
    return t.record(std::move(out), {a, b}, [a, b](Node& n) {
        for (long i = 0; i < n.grad.numel(); ++i) {
            a->grad[i] += n.grad[i];
            b->grad[i] += n.grad[i];
        }
    });
}

Var mul(Tape& t, const Var& a, const Var& b) {
    check_same_shape(a, b, "mul");
    Tensor out = a->value;
    for (long i = 0; i < out.numel(); ++i) out[i] *= b->value[i];
    return t.record(std::move(out), {a, b}, [a, b](Node& n) {
        for (long i = 0; i < n.grad.numel(); ++i) {
            a->grad[i] += n.grad[i] * b->value[i];
            b->grad[i] += n.grad[i] * a->value[i];
        }
    });
}

Var scale_const(Tape& t, const Var& x, double c) {
    Tensor out = x->value;
    for (long i = 0; i < out.numel(); ++i) out[i] *= c;
    return t.record(std::move(out), {x}, [x, c](Node& n) {
        for (long i = 0; i < n.grad.numel(); ++i) x->grad[i] += n.grad[i] * c;
    });
}

Var scale_row(Tape& t, const Var& x, const Var& r, int row) {
    if (r->value.ndim() != 2 || r->value.dim(1) != 1 || row >= r->value.dim(0))
        throw Error("shape_mismatch", "scale_row: weight vector must be {N,1}");
    double w = r->value.at(row, 0);
    Tensor out = x->value;
    for (long i = 0; i < out.numel(); ++i) out[i] *= w;
    return t.record(std::move(out), {x, r}, [x, r, row, w](Node& n) {
        double acc = 0.0;
        for (long i = 0; i < n.grad.numel(); ++i) {
            x->grad[i] += n.grad[i] * w;
            acc += n.grad[i] * x->value[i];
        }
        r->grad.at(row, 0) += acc;
    });
}

Var reshape(Tape& t, const Var& x, std::vector<int> shape) {
    if (Tensor::numel_of(shape) != x->value.numel())
        throw Error("shape_mismatch", "reshape: element count mismatch");
    Tensor out(shape, std::vector<double>(x->value.data(), x->value.data() + x->value.numel()));
    return t.record(std::move(out), {x}, [x](Node& n) {
        for (long i = 0; i < n.grad.numel(); ++i) x->grad[i] += n.grad[i];
    });
}

Var conv2d(Tape& t, const Var& x, const Var& w, const Var& b,
           int stride, int pad, int groups) {
    const Tensor& X = x->value;
    const Tensor& W = w->value;
    if (X.ndim() != 3 || W.ndim() != 4)
        throw Error("shape_mismatch", "conv2d: expects x {C,H,W}, w {Co,Cg,k,k}");
    int ci = X.dim(0), h = X.dim(1), wd = X.dim(2);
    int co = W.dim(0), cg = W.dim(1), k = W.dim(2);
    if (ci != cg * groups || co % groups != 0)
        throw Error("channel_mismatch", "conv2d: channel/group mismatch");
    int oh = (h + 2 * pad - k) / stride + 1;
    int ow = (wd + 2 * pad - k) / stride + 1;
    if (oh <= 0 || ow <= 0)
        throw Error("shape_mismatch", "conv2d: output would be empty");
    int co_g = co / groups;

    Tensor out({co, oh, ow});
    for (int oc = 0; oc < co; ++oc) {
        int g = oc / co_g;
        double bias = b->value[oc];
        for (int oy = 0; oy < oh; ++oy)
            for (int ox = 0; ox < ow; ++ox) {
                double acc = bias;
                for (int icg = 0; icg < cg; ++icg) {
                    int ic = g * cg + icg;
                    for (int ky = 0; ky < k; ++ky) {
                        int iy = oy * stride - pad + ky;
                        if (iy < 0 || iy >= h) continue;
                        for (int kx = 0; kx < k; ++kx) {
                            int ix = ox * stride - pad + kx;
                            if (ix < 0 || ix >= wd) continue;
                            acc += X.at(ic, iy, ix) *
                                   W[((static_cast<long>(oc) * cg + icg) * k + ky) * k + kx];
                        }
                    }
                }
                out.at(oc, oy, ox) = acc;
            }
    }

    return t.record(std::move(out), {x, w, b},
                    [x, w, b, stride, pad, groups, co_g, cg, k, h, wd](Node& n) {
        const Tensor& G = n.grad;
        int co = n.value.dim(0), oh = n.value.dim(1), ow = n.value.dim(2);
        for (int oc = 0; oc < co; ++oc) {
            int g = oc / co_g;
            for (int oy = 0; oy < oh; ++oy)
                for (int ox = 0; ox < ow; ++ox) {
                    double go = G.at(oc, oy, ox);
                    if (go == 0.0) continue;
                    b->grad[oc] += go;
                    for (int icg = 0; icg < cg; ++icg) {
                        int ic = g * cg + icg;
                        for (int ky = 0; ky < k; ++ky) {
                            int iy = oy * stride - pad + ky;
                            if (iy < 0 || iy >= h) continue;
                            for (int kx = 0; kx < k; ++kx) {
                                int ix = ox * stride - pad + kx;
                                if (ix < 0 || ix >= wd) continue;
                                long wi = ((static_cast<long>(oc) * cg + icg) * k + ky) * k + kx;
                                w->grad[wi] += go * x->value.at(ic, iy, ix);
                                x->grad.at(ic, iy, ix) += go * w->value[wi];
                            }
                        }
                    }
                }
        }
    });
}

Var channel_norm(Tape& t, const Var& x, const Var& gamma, const Var& beta, double eps) {
    const Tensor& X = x->value;
    if (X.ndim() != 3) throw Error("shape_mismatch", "channel_norm: expects {C,H,W}");
    int c = X.dim(0), h = X.dim(1), w = X.dim(2);
    long n = static_cast<long>(h) * w;
    Tensor out(X.shape());
    std::vector<double> inv_std(static_cast<size_t>(c)), means(static_cast<size_t>(c));
    for (int ch = 0; ch < c; ++ch) {
        const double* xp = X.data() + static_cast<long>(ch) * n;
        double mean = 0.0;
        for (long i = 0; i < n; ++i) mean += xp[i];
        mean /= static_cast<double>(n);
        double var = 0.0;
        for (long i = 0; i < n; ++i) var += (xp[i] - mean) * (xp[i] - mean);
        var /= static_cast<double>(n);
        double is = 1.0 / std::sqrt(var + eps);
        means[static_cast<size_t>(ch)] = mean;
        inv_std[static_cast<size_t>(ch)] = is;
        double* op = out.data() + static_cast<long>(ch) * n;
        double g = gamma->value[ch], bt = beta->value[ch];
        for (long i = 0; i < n; ++i) op[i] = g * (xp[i] - mean) * is + bt;
    }
    return t.record(std::move(out), {x, gamma, beta},
                    [x, gamma, beta, means, inv_std, c, n](Node& nd) {
        for (int ch = 0; ch < c; ++ch) {
            const double* xp = x->value.data() + static_cast<long>(ch) * n;
            const double* gp = nd.grad.data() + static_cast<long>(ch) * n;
            double* xg = x->grad.data() + static_cast<long>(ch) * n;
            double mean = means[static_cast<size_t>(ch)];
            double is = inv_std[static_cast<size_t>(ch)];
            double g = gamma->value[ch];
            double sum_g = 0.0, sum_gx = 0.0;
            for (long i = 0; i < n; ++i) {
                double xhat = (xp[i] - mean) * is;
                sum_g += gp[i];
                sum_gx += gp[i] * xhat;
            }
            gamma->grad[ch] += sum_gx;
            beta->grad[ch] += sum_g;
            double inv_n = 1.0 / static_cast<double>(n);
            for (long i = 0; i < n; ++i) {
                double xhat = (xp[i] - mean) * is;
                xg[i] += g * is * (gp[i] - inv_n * sum_g - xhat * inv_n * sum_gx);
            }
        }
    });
}

namespace {
struct LerpWeights {
    int i0, i1;
    double w0, w1;
};
LerpWeights lerp_axis(int dst, int out_n, int in_n) {
    double src = (static_cast<double>(dst) + 0.5) * static_cast<double>(in_n) /
                     static_cast<double>(out_n) - 0.5;
    if (src < 0.0) src = 0.0;
    if (src > in_n - 1) src = in_n - 1;
    int i0 = static_cast<int>(std::floor(src));
    int i1 = std::min(i0 + 1, in_n - 1);
    double w1 = src - i0;
    return {i0, i1, 1.0 - w1, w1};
}
} // namespace

Var resize_bilinear(Tape& t, const Var& x, int out_h, int out_w) {
    const Tensor& X = x->value;
    if (X.ndim() != 3) throw Error("shape_mismatch", "resize_bilinear: expects {C,H,W}");
    int c = X.dim(0), h = X.dim(1), w = X.dim(2);
    if (h == out_h && w == out_w) return x;
    Tensor out({c, out_h, out_w});
    std::vector<LerpWeights> ys(static_cast<size_t>(out_h)), xs(static_cast<size_t>(out_w));
    for (int i = 0; i < out_h; ++i) ys[static_cast<size_t>(i)] = lerp_axis(i, out_h, h);
    for (int j = 0; j < out_w; ++j) xs[static_cast<size_t>(j)] = lerp_axis(j, out_w, w);
    for (int ch = 0; ch < c; ++ch)
        for (int i = 0; i < out_h; ++i) {
            const auto& yw = ys[static_cast<size_t>(i)];
            for (int j = 0; j < out_w; ++j) {
                const auto& xw = xs[static_cast<size_t>(j)];
                out.at(ch, i, j) = yw.w0 * (xw.w0 * X.at(ch, yw.i0, xw.i0) +
                                            xw.w1 * X.at(ch, yw.i0, xw.i1)) +
                                   yw.w1 * (xw.w0 * X.at(ch, yw.i1, xw.i0) +
                                            xw.w1 * X.at(ch, yw.i1, xw.i1));
            }
        }
    return t.record(std::move(out), {x}, [x, ys, xs, c, out_h, out_w](Node& n) {
        for (int ch = 0; ch < c; ++ch)
            for (int i = 0; i < out_h; ++i) {
                const auto& yw = ys[static_cast<size_t>(i)];
                for (int j = 0; j < out_w; ++j) {
                    const auto& xw = xs[static_cast<size_t>(j)];
                    double g = n.grad.at(ch, i, j);
                    if (g == 0.0) continue;
                    x->grad.at(ch, yw.i0, xw.i0) += g * yw.w0 * xw.w0;
                    x->grad.at(ch, yw.i0, xw.i1) += g * yw.w0 * xw.w1;
                    x->grad.at(ch, yw.i1, xw.i0) += g * yw.w1 * xw.w0;
                    x->grad.at(ch, yw.i1, xw.i1) += g * yw.w1 * xw.w1;
                }
            }
    });
}

Var concat_channels(Tape& t, const std::vector<Var>& xs) {
    if (xs.empty()) throw Error("empty_input", "concat_channels: no inputs");
    int h = xs[0]->value.dim(1), w = xs[0]->value.dim(2);
    int ctot = 0;
    for (const auto& v : xs) {
        if (v->value.ndim() != 3 || v->value.dim(1) != h || v->value.dim(2) != w)
            throw Error("shape_mismatch", "concat_channels: spatial sizes differ");
        ctot += v->value.dim(0);
    }
    Tensor out({ctot, h, w});
    long off = 0;
    for (const auto& v : xs) {
        std::copy(v->value.data(), v->value.data() + v->value.numel(), out.data() + off);
        off += v->value.numel();
    }
    return t.record(std::move(out), xs, [xs](Node& n) {
        long off = 0;
        for (const auto& v : xs) {
            for (long i = 0; i < v->value.numel(); ++i) v->grad[i] += n.grad[off + i];
            off += v->value.numel();
        }
    });
}

Var global_avg_pool(Tape& t, const Var& x) {
    const Tensor& X = x->value;
    if (X.ndim() != 3) throw Error("shape_mismatch", "global_avg_pool: expects {C,H,W}");
    int c = X.dim(0);
    long n = static_cast<long>(X.dim(1)) * X.dim(2);
    Tensor out({c});
    for (int ch = 0; ch < c; ++ch) {
        const double* xp = X.data() + static_cast<long>(ch) * n;
        double s = 0.0;
        for (long i = 0; i < n; ++i) s += xp[i];
        out[ch] = s / static_cast<double>(n);
    }
    return t.record(std::move(out), {x}, [x, c, n](Node& nd) {
        double inv = 1.0 / static_cast<double>(n);
        for (int ch = 0; ch < c; ++ch) {
            double g = nd.grad[ch] * inv;
            double* xg = x->grad.data() + static_cast<long>(ch) * n;
            for (long i = 0; i < n; ++i) xg[i] += g;
        }
    });
}

Var stack_rows(Tape& t, const std::vector<Var>& rows) {
    if (rows.empty()) throw Error("empty_input", "stack_rows: no inputs");
    int d = static_cast<int>(rows[0]->value.numel());
    Tensor out({static_cast<int>(rows.size()), d});
    for (size_t i = 0; i < rows.size(); ++i) {
        if (rows[i]->value.numel() != d)
            throw Error("shape_mismatch", "stack_rows: row lengths differ");
        std::copy(rows[i]->value.data(), rows[i]->value.data() + d,
                  out.data() + static_cast<long>(i) * d);
    }
    return t.record(std::move(out), rows, [rows, d](Node& n) {
        for (size_t i = 0; i < rows.size(); ++i)
            for (int j = 0; j < d; ++j)
                rows[i]->grad[j] += n.grad[static_cast<long>(i) * d + j];
    });
}

Var matmul(Tape& t, const Var& a, const Var& b) {
    const Tensor& A = a->value;
    const Tensor& B = b->value;
    if (A.ndim() != 2 || B.ndim() != 2 || A.dim(1) != B.dim(0))
        throw Error("dimension_mismatch", "matmul: inner dimensions differ");
    int n = A.dim(0), k = A.dim(1), m = B.dim(1);
    Tensor out({n, m});
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < m; ++j) {
            double s = 0.0;
            for (int p = 0; p < k; ++p) s += A.at(i, p) * B.at(p, j);
            out.at(i, j) = s;
        }
    return t.record(std::move(out), {a, b}, [a, b, n, k, m](Node& nd) {
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < m; ++j) {
                double g = nd.grad.at(i, j);
                if (g == 0.0) continue;
                for (int p = 0; p < k; ++p) {
                    a->grad.at(i, p) += g * b->value.at(p, j);
                    b->grad.at(p, j) += g * a->value.at(i, p);
                }
            }
    });
}

Var matmul_canonical(Tape& t, const Var& a, const Var& x) {
    const Tensor& A = a->value;
    const Tensor& X = x->value;
    if (A.ndim() != 2 || X.ndim() != 2 || A.dim(0) != A.dim(1) || A.dim(1) != X.dim(0))
        throw Error("dimension_mismatch", "matmul_canonical: expects {N,N}x{N,D}");
    int n = A.dim(0), d = X.dim(1);
    Tensor out({n, d});
    std::vector<double> terms(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < d; ++j) {
            for (int p = 0; p < n; ++p) terms[static_cast<size_t>(p)] = A.at(i, p) * X.at(p, j);
            out.at(i, j) = canonical_sum(terms);
        }
    return t.record(std::move(out), {a, x}, [a, x, n, d](Node& nd) {
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < d; ++j) {
                double g = nd.grad.at(i, j);
                if (g == 0.0) continue;
                for (int p = 0; p < n; ++p) {
                    a->grad.at(i, p) += g * x->value.at(p, j);
                    x->grad.at(p, j) += g * a->value.at(i, p);
                }
            }
    });
}

Var add_rowvec(Tape& t, const Var& x, const Var& b) {
    const Tensor& X = x->value;
    if (X.ndim() != 2 || b->value.numel() != X.dim(1))
        throw Error("shape_mismatch", "add_rowvec: bias length mismatch");
    int n = X.dim(0), m = X.dim(1);
    Tensor out = X;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < m; ++j) out.at(i, j) += b->value[j];
    return t.record(std::move(out), {x, b}, [x, b, n, m](Node& nd) {
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < m; ++j) {
                x->grad.at(i, j) += nd.grad.at(i, j);
                b->grad[j] += nd.grad.at(i, j);
            }
    });
}

Var cosine_adjacency(Tape& t, const Var& v, bool* used_fallback) {
    const Tensor& V = v->value;
    if (V.ndim() != 2) throw Error("shape_mismatch", "cosine_adjacency: expects {N,D}");
    int n = V.dim(0), d = V.dim(1);
    if (used_fallback) *used_fallback = false;
    std::vector<double> norms(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) {
        double s = 0.0;
        for (int j = 0; j < d; ++j) s += V.at(i, j) * V.at(i, j);
        norms[static_cast<size_t>(i)] = std::sqrt(s);
        if (norms[static_cast<size_t>(i)] < 1e-12) {
            // Cosine undefined: substitute the documented uniform adjacency.
            if (used_fallback) *used_fallback = true;
            return t.constant(Tensor::full({n, n}, 1.0));
        }
    }
    Tensor out({n, n});
    for (int i = 0; i < n; ++i) {
        out.at(i, i) = 1.0;
        for (int j = i + 1; j < n; ++j) {
            double dot = 0.0;
            for (int p = 0; p < d; ++p) dot += V.at(i, p) * V.at(j, p);
            double c = dot / (norms[static_cast<size_t>(i)] * norms[static_cast<size_t>(j)]);
            double a = (c + 1.0) * 0.5;
            out.at(i, j) = a;
            out.at(j, i) = a;
        }
    }
    return t.record(std::move(out), {v}, [v, norms, n, d](Node& nd) {
        const Tensor& V = v->value;
        for (int i = 0; i < n; ++i)
            for (int j = i + 1; j < n; ++j) {
                // A(i,j) and A(j,i) are distinct outputs of the same cosine;
                // both depend on v_i and v_j.
                double g = nd.grad.at(i, j) + nd.grad.at(j, i);
                if (g == 0.0) continue;
                double ni = norms[static_cast<size_t>(i)], nj = norms[static_cast<size_t>(j)];
                double dot = 0.0;
                for (int p = 0; p < d; ++p) dot += V.at(i, p) * V.at(j, p);
                double c = dot / (ni * nj);
                // dA/dv_i = 0.5 * (v_j/|v_j| - c * v_i/|v_i|) / |v_i|
                for (int p = 0; p < d; ++p) {
                    v->grad.at(i, p) += g * 0.5 * (V.at(j, p) / nj - c * V.at(i, p) / ni) / ni;
                    v->grad.at(j, p) += g * 0.5 * (V.at(i, p) / ni - c * V.at(j, p) / nj) / nj;
                }
            }
    });
}

Var normalize_adjacency(Tape& t, const Var& a) {
    const Tensor& A = a->value;
    if (A.ndim() != 2 || A.dim(0) != A.dim(1))
        throw Error("shape_mismatch", "normalize_adjacency: expects square matrix");
    int n = A.dim(0);
    std::vector<double> deg(static_cast<size_t>(n));
    std::vector<double> row(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) row[static_cast<size_t>(j)] = A.at(i, j);
        deg[static_cast<size_t>(i)] = canonical_sum(row);
        if (deg[static_cast<size_t>(i)] <= 0.0)
            throw Error("zero_norm", "normalize_adjacency: non-positive degree");
    }
    Tensor out({n, n});
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            out.at(i, j) = A.at(i, j) /
                           std::sqrt(deg[static_cast<size_t>(i)] * deg[static_cast<size_t>(j)]);
    return t.record(std::move(out), {a}, [a, deg, n](Node& nd) {
        // Ahat_ij = A_ij d_i^-1/2 d_j^-1/2, d_i = sum_q A_iq.
        std::vector<double> rowdot(static_cast<size_t>(n), 0.0), coldot(static_cast<size_t>(n), 0.0);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) {
                double gh = nd.grad.at(i, j) * nd.value.at(i, j);
                rowdot[static_cast<size_t>(i)] += gh;
                coldot[static_cast<size_t>(j)] += gh;
            }
        for (int p = 0; p < n; ++p) {
            double dp = deg[static_cast<size_t>(p)];
            double corr = -0.5 / dp * (rowdot[static_cast<size_t>(p)] + coldot[static_cast<size_t>(p)]);
            for (int q = 0; q < n; ++q) {
                double dq = deg[static_cast<size_t>(q)];
                a->grad.at(p, q) += nd.grad.at(p, q) / std::sqrt(dp * dq) + corr;
            }
        }
    });
}

namespace {
inline double clamp_prob(double s) {
    return std::min(std::max(s, kLogClamp), 1.0 - kLogClamp);
}
inline bool clamped(double s) { return s <= kLogClamp || s >= 1.0 - kLogClamp; }

void check_loss_shapes(const Var& s, const Tensor& gt, const char* op) {
    if (!s->value.same_shape(gt))
        throw Error("shape_mismatch", std::string(op) + ": prediction/ground-truth shapes differ");
}
} // namespace

Var bce(Tape& t, const Var& s, const Tensor& gt) {
    check_loss_shapes(s, gt, "bce");
    long n = s->value.numel();
    double acc = 0.0;
    for (long i = 0; i < n; ++i) {
        double p = clamp_prob(s->value[i]);
        acc += -(gt[i] * std::log(p) + (1.0 - gt[i]) * std::log(1.0 - p));
    }
    Tensor out({1}, std::vector<double>{acc / static_cast<double>(n)});
    return t.record(std::move(out), {s}, [s, gt, n](Node& nd) {
        double g = nd.grad[0] / static_cast<double>(n);
        for (long i = 0; i < n; ++i) {
            double raw = s->value[i];
            if (clamped(raw)) continue;
            s->grad[i] += g * (-gt[i] / raw + (1.0 - gt[i]) / (1.0 - raw));
        }
    });
}

Var iou(Tape& t, const Var& s, const Tensor& gt) {
    check_loss_shapes(s, gt, "iou");
    long n = s->value.numel();
    double gsum = 0.0;
    for (long i = 0; i < n; ++i) gsum += gt[i];
    if (gsum == 0.0) {
        // Total extension for empty foreground: sum(s)/(sum(s)+N*delta).
        const double delta = 1e-7;
        double ssum = 0.0;
        for (long i = 0; i < n; ++i) ssum += s->value[i];
        double denom = ssum + static_cast<double>(n) * delta;
        Tensor out({1}, std::vector<double>{ssum / denom});
        return t.record(std::move(out), {s}, [s, n, denom, delta](Node& nd) {
            double g = nd.grad[0] * static_cast<double>(n) * delta / (denom * denom);
            for (long i = 0; i < n; ++i) s->grad[i] += g;
        });
    }
    double inter = 0.0, uni = 0.0;
    for (long i = 0; i < n; ++i) {
        inter += s->value[i] * gt[i];
        uni += s->value[i] + gt[i] - s->value[i] * gt[i];
    }
    Tensor out({1}, std::vector<double>{1.0 - inter / uni});
    return t.record(std::move(out), {s}, [s, gt, n, inter, uni](Node& nd) {
        double g = nd.grad[0];
        for (long i = 0; i < n; ++i)
            s->grad[i] += g * (-(gt[i] * uni - inter * (1.0 - gt[i])) / (uni * uni));
    });
}

Var focal(Tape& t, const Var& s, const Tensor& gt, double alpha, double gamma) {
    check_loss_shapes(s, gt, "focal");
    long n = s->value.numel();
    double acc = 0.0;
    for (long i = 0; i < n; ++i) {
        double p = clamp_prob(s->value[i]);
        if (gt[i] > 0.5)
            acc += -alpha * std::pow(1.0 - p, gamma) * std::log(p);
        else
            acc += -(1.0 - alpha) * std::pow(p, gamma) * std::log(1.0 - p);
    }
    Tensor out({1}, std::vector<double>{acc / static_cast<double>(n)});
    return t.record(std::move(out), {s}, [s, gt, n, alpha, gamma](Node& nd) {
        double g = nd.grad[0] / static_cast<double>(n);
        for (long i = 0; i < n; ++i) {
            double p = s->value[i];
            if (clamped(p)) continue;
            double d;
            if (gt[i] > 0.5) {
                d = -alpha * std::pow(1.0 - p, gamma) / p;
                if (gamma != 0.0)
                    d += alpha * gamma * std::pow(1.0 - p, gamma - 1.0) * std::log(p);
            } else {
                d = (1.0 - alpha) * std::pow(p, gamma) / (1.0 - p);
                if (gamma != 0.0)
                    d += -(1.0 - alpha) * gamma * std::pow(p, gamma - 1.0) * std::log(1.0 - p);
            }
            s->grad[i] += g * d;
        }
    });
}

Var add_scalars(Tape& t, const std::vector<Var>& xs) {
    if (xs.empty()) throw Error("empty_input", "add_scalars: no inputs");
    double acc = 0.0;
    for (const auto& v : xs) {
        if (v->value.numel() != 1) throw Error("shape_mismatch", "add_scalars: non-scalar input");
        acc += v->value[0];
    }
    Tensor out({1}, std::vector<double>{acc});
    return t.record(std::move(out), xs, [xs](Node& n) {
        for (const auto& v : xs) v->grad[0] += n.grad[0];
    });
}

} // namespace lgrn::nn
