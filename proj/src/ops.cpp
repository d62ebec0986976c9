#include "mvt/ops.hpp"

#include <cmath>
#include <string>

#include "mvt/errors.hpp"
#include "mvt/kernels.hpp"

namespace mvt::ops {

namespace {

bool any_grad(const TensorPtr& a) { return a->requires_grad; }
bool any_grad(const TensorPtr& a, const TensorPtr& b) { return a->requires_grad || b->requires_grad; }

TensorPtr fresh(std::vector<std::size_t> shape, bool rg) {
    auto t = make_tensor(std::move(shape));
    if (rg) t->enable_grad();
    return t;
}

void check_same_shape(const char* op, const TensorPtr& a, const TensorPtr& b) {
    if (a->shape() != b->shape())
        throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a->shape()) +
                         " vs " + shape_str(b->shape()));
}

std::vector<double> transposed(const double* src, std::size_t rows, std::size_t cols) {
    std::vector<double> out(rows * cols);
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c) out[c * rows + r] = src[r * cols + c];
    return out;
}

}  // namespace

TensorPtr matmul(GradTape* tape, const TensorPtr& a, const TensorPtr& b) {
    if (a->ndim() != 2 || b->ndim() != 2 || a->shape()[1] != b->shape()[0])
        throw ShapeError("matmul: incompatible shapes " + shape_str(a->shape()) + " vs " +
                         shape_str(b->shape()));
    const std::size_t m = a->shape()[0], k = a->shape()[1], n = b->shape()[1];
    const bool rg = tape && any_grad(a, b);
    auto out = fresh({m, n}, rg);
    kern::active().matmul(a->data(), b->data(), out->data(), m, k, n, false);
    if (rg) {
        tape->record([a, b, out, m, k, n] {
            const auto& K = kern::active();
            if (a->requires_grad) {
                auto bt = transposed(b->data(), k, n);  // [n x k]
                K.matmul(out->grad.data(), bt.data(), a->grad.data(), m, n, k, true);
            }
            if (b->requires_grad) {
                auto at = transposed(a->data(), m, k);  // [k x m]
                K.matmul(at.data(), out->grad.data(), b->grad.data(), k, m, n, true);
            }
        });
    }
    return out;
}

TensorPtr transpose(GradTape* tape, const TensorPtr& a) {
    if (a->ndim() != 2) throw ShapeError("transpose: need a matrix, got " + shape_str(a->shape()));
    const std::size_t m = a->shape()[0], n = a->shape()[1];
    const bool rg = tape && any_grad(a);
    auto out = fresh({n, m}, rg);
    out->values() = transposed(a->data(), m, n);
    if (rg) {
        tape->record([a, out, m, n] {
            auto gt = transposed(out->grad.data(), n, m);
            kern::active().axpy(1.0, gt.data(), a->grad.data(), m * n);
        });
    }
    return out;
}

TensorPtr add(GradTape* tape, const TensorPtr& a, const TensorPtr& b) {
    check_same_shape("add", a, b);
    const bool rg = tape && any_grad(a, b);
    auto out = fresh(a->shape(), rg);
    kern::active().add(a->data(), b->data(), out->data(), a->size());
    if (rg) {
        tape->record([a, b, out] {
            const auto& K = kern::active();
            if (a->requires_grad) K.axpy(1.0, out->grad.data(), a->grad.data(), a->size());
            if (b->requires_grad) K.axpy(1.0, out->grad.data(), b->grad.data(), b->size());
        });
    }
    return out;
}

TensorPtr sub(GradTape* tape, const TensorPtr& a, const TensorPtr& b) {
    check_same_shape("sub", a, b);
    const bool rg = tape && any_grad(a, b);
    auto out = fresh(a->shape(), rg);
    kern::active().sub(a->data(), b->data(), out->data(), a->size());
    if (rg) {
        tape->record([a, b, out] {
            const auto& K = kern::active();
            if (a->requires_grad) K.axpy(1.0, out->grad.data(), a->grad.data(), a->size());
            if (b->requires_grad) K.axpy(-1.0, out->grad.data(), b->grad.data(), b->size());
        });
    }
    return out;
}

TensorPtr mul(GradTape* tape, const TensorPtr& a, const TensorPtr& b) {
    check_same_shape("mul", a, b);
    const bool rg = tape && any_grad(a, b);
    auto out = fresh(a->shape(), rg);
    kern::active().mul(a->data(), b->data(), out->data(), a->size());
    if (rg) {
        tape->record([a, b, out] {
            const std::size_t n = a->size();
            std::vector<double> tmp(n);
            const auto& K = kern::active();
            if (a->requires_grad) {
                K.mul(out->grad.data(), b->data(), tmp.data(), n);
                K.axpy(1.0, tmp.data(), a->grad.data(), n);
            }
            if (b->requires_grad) {
                K.mul(out->grad.data(), a->data(), tmp.data(), n);
                K.axpy(1.0, tmp.data(), b->grad.data(), n);
            }
        });
    }
    return out;
}

TensorPtr scale(GradTape* tape, const TensorPtr& a, double s) {
    const bool rg = tape && any_grad(a);
    auto out = fresh(a->shape(), rg);
    kern::active().scale(a->data(), s, out->data(), a->size());
    if (rg) {
        tape->record([a, out, s] {
            kern::active().axpy(s, out->grad.data(), a->grad.data(), a->size());
        });
    }
    return out;
}

TensorPtr add_rowvec(GradTape* tape, const TensorPtr& x, const TensorPtr& b) {
    const std::size_t m = x->rows(), n = x->cols();
    if (b->ndim() != 1 || b->size() != n)
        throw ShapeError("add_rowvec: bias " + shape_str(b->shape()) + " does not match " +
                         shape_str(x->shape()));
    const bool rg = tape && any_grad(x, b);
    auto out = fresh(x->shape(), rg);
    const auto& K = kern::active();
    for (std::size_t r = 0; r < m; ++r)
        K.add(x->data() + r * n, b->data(), out->data() + r * n, n);
    if (rg) {
        tape->record([x, b, out, m, n] {
            const auto& K2 = kern::active();
            if (x->requires_grad) K2.axpy(1.0, out->grad.data(), x->grad.data(), m * n);
            if (b->requires_grad)
                for (std::size_t r = 0; r < m; ++r)
                    K2.axpy(1.0, out->grad.data() + r * n, b->grad.data(), n);
        });
    }
    return out;
}

TensorPtr relu(GradTape* tape, const TensorPtr& a) {
    const bool rg = tape && any_grad(a);
    auto out = fresh(a->shape(), rg);
    for (std::size_t i = 0; i < a->size(); ++i) out->data()[i] = a->data()[i] > 0.0 ? a->data()[i] : 0.0;
    if (rg) {
        tape->record([a, out] {
            for (std::size_t i = 0; i < a->size(); ++i)
                if (a->data()[i] > 0.0) a->grad[i] += out->grad[i];
        });
    }
    return out;
}

namespace {

// Softmax of one contiguous slice with max subtraction.
void softmax_slice(const double* x, double* y, std::size_t n) {
    const auto& K = kern::active();
    const double mx = K.max(x, n);
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        y[i] = std::exp(x[i] - mx);
        sum += y[i];
    }
    K.divs(y, sum, y, n);
}

void softmax_slice_backward(const double* y, const double* dy, double* dx, std::size_t n) {
    double dot = 0.0;
    for (std::size_t i = 0; i < n; ++i) dot += dy[i] * y[i];
    for (std::size_t i = 0; i < n; ++i) dx[i] += y[i] * (dy[i] - dot);
}

}  // namespace

TensorPtr softmax(GradTape* tape, const TensorPtr& a, std::size_t axis) {
    if (axis >= a->ndim())
        throw ShapeError("softmax: axis " + std::to_string(axis) + " invalid for " +
                         shape_str(a->shape()));
    const bool rg = tape && any_grad(a);
    auto out = fresh(a->shape(), rg);
    const bool row_wise = (a->ndim() == 1) || axis == 1;
    const std::size_t m = a->rows(), n = a->cols();
    if (row_wise) {
        for (std::size_t r = 0; r < m; ++r)
            softmax_slice(a->data() + r * n, out->data() + r * n, n);
    } else {
        std::vector<double> col(m), res(m);
        for (std::size_t c = 0; c < n; ++c) {
            for (std::size_t r = 0; r < m; ++r) col[r] = a->at(r, c);
            softmax_slice(col.data(), res.data(), m);
            for (std::size_t r = 0; r < m; ++r) out->at(r, c) = res[r];
        }
    }
    if (rg) {
        tape->record([a, out, row_wise, m, n] {
            if (row_wise) {
                for (std::size_t r = 0; r < m; ++r)
                    softmax_slice_backward(out->data() + r * n, out->grad.data() + r * n,
                                           a->grad.data() + r * n, n);
            } else {
                std::vector<double> y(m), dy(m), dx(m);
                for (std::size_t c = 0; c < n; ++c) {
                    for (std::size_t r = 0; r < m; ++r) {
                        y[r] = out->at(r, c);
                        dy[r] = out->grad[r * n + c];
                        dx[r] = 0.0;
                    }
                    softmax_slice_backward(y.data(), dy.data(), dx.data(), m);
                    for (std::size_t r = 0; r < m; ++r) a->grad[r * n + c] += dx[r];
                }
            }
        });
    }
    return out;
}

TensorPtr masked_softmax_rows(GradTape* tape, const TensorPtr& scores,
                              const std::vector<std::uint8_t>& mask) {
    const std::size_t m = scores->rows(), n = scores->cols();
    if (mask.size() != m * n)
        throw ShapeError("masked_softmax: mask size " + std::to_string(mask.size()) +
                         " does not match " + shape_str(scores->shape()));
    const bool rg = tape && any_grad(scores);
    auto out = fresh(scores->shape(), rg);
    for (std::size_t r = 0; r < m; ++r) {
        const double* x = scores->data() + r * n;
        double* y = out->data() + r * n;
        const std::uint8_t* mrow = mask.data() + r * n;
        double mx = 0.0;
        bool seen = false;
        for (std::size_t j = 0; j < n; ++j)
            if (mrow[j] && (!seen || x[j] > mx)) {
                mx = x[j];
                seen = true;
            }
        if (!seen) throw ConfigError("masked_softmax: row " + std::to_string(r) + " masks every position");
        double sum = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            if (mrow[j]) {
                y[j] = std::exp(x[j] - mx);
                sum += y[j];
            } else {
                y[j] = 0.0;
            }
        }
        for (std::size_t j = 0; j < n; ++j)
            if (mrow[j]) y[j] /= sum;
    }
    if (rg) {
        tape->record([scores, out, mask, m, n] {
            for (std::size_t r = 0; r < m; ++r) {
                const double* y = out->data() + r * n;
                const double* dy = out->grad.data() + r * n;
                const std::uint8_t* mrow = mask.data() + r * n;
                double dot = 0.0;
                for (std::size_t j = 0; j < n; ++j)
                    if (mrow[j]) dot += dy[j] * y[j];
                for (std::size_t j = 0; j < n; ++j)
                    if (mrow[j]) scores->grad[r * n + j] += y[j] * (dy[j] - dot);
            }
        });
    }
    return out;
}

TensorPtr layer_norm(GradTape* tape, const TensorPtr& x, const TensorPtr& gain,
                     const TensorPtr& bias, double eps) {
    const std::size_t m = x->rows(), d = x->cols();
    if (d == 0) throw ShapeError("layer_norm: zero feature dimension");
    if (gain->size() != d || bias->size() != d)
        throw ShapeError("layer_norm: gain " + shape_str(gain->shape()) + " / bias " +
                         shape_str(bias->shape()) + " do not match " + shape_str(x->shape()));
    const bool rg = tape && (x->requires_grad || gain->requires_grad || bias->requires_grad);
    auto out = fresh(x->shape(), rg);

    auto xhat = std::make_shared<std::vector<double>>(m * d);
    auto inv = std::make_shared<std::vector<double>>(m);
    for (std::size_t r = 0; r < m; ++r) {
        const double* xr = x->data() + r * d;
        double mu = 0.0;
        for (std::size_t j = 0; j < d; ++j) mu += xr[j];
        mu /= static_cast<double>(d);
        double var = 0.0;
        for (std::size_t j = 0; j < d; ++j) {
            const double c = xr[j] - mu;
            var += c * c;
        }
        var /= static_cast<double>(d);
        const double iv = 1.0 / std::sqrt(var + eps);
        (*inv)[r] = iv;
        for (std::size_t j = 0; j < d; ++j) {
            const double h = (xr[j] - mu) * iv;
            (*xhat)[r * d + j] = h;
            out->data()[r * d + j] = h * gain->data()[j] + bias->data()[j];
        }
    }
    if (rg) {
        tape->record([x, gain, bias, out, xhat, inv, m, d] {
            std::vector<double> dxhat(d);
            for (std::size_t r = 0; r < m; ++r) {
                const double* dy = out->grad.data() + r * d;
                const double* h = xhat->data() + r * d;
                if (gain->requires_grad)
                    for (std::size_t j = 0; j < d; ++j) gain->grad[j] += dy[j] * h[j];
                if (bias->requires_grad)
                    for (std::size_t j = 0; j < d; ++j) bias->grad[j] += dy[j];
                if (x->requires_grad) {
                    double mean_dh = 0.0, mean_dh_h = 0.0;
                    for (std::size_t j = 0; j < d; ++j) {
                        dxhat[j] = dy[j] * gain->data()[j];
                        mean_dh += dxhat[j];
                        mean_dh_h += dxhat[j] * h[j];
                    }
                    mean_dh /= static_cast<double>(d);
                    mean_dh_h /= static_cast<double>(d);
                    const double iv = (*inv)[r];
                    for (std::size_t j = 0; j < d; ++j)
                        x->grad[r * d + j] += iv * (dxhat[j] - mean_dh - h[j] * mean_dh_h);
                }
            }
        });
    }
    return out;
}

TensorPtr embedding_rows(GradTape* tape, const TensorPtr& table, const std::vector<int>& ids) {
    if (table->ndim() != 2) throw ShapeError("embedding: table must be a matrix");
    const std::size_t v = table->shape()[0], d = table->shape()[1];
    for (int id : ids)
        if (id < 0 || static_cast<std::size_t>(id) >= v)
            throw DataError("embedding: id " + std::to_string(id) + " out of range [0," +
                            std::to_string(v) + ")");
    const bool rg = tape && any_grad(table);
    auto out = fresh({ids.size(), d}, rg);
    for (std::size_t i = 0; i < ids.size(); ++i)
        std::copy(table->data() + static_cast<std::size_t>(ids[i]) * d,
                  table->data() + (static_cast<std::size_t>(ids[i]) + 1) * d, out->data() + i * d);
    if (rg) {
        tape->record([table, out, ids, d] {
            for (std::size_t i = 0; i < ids.size(); ++i)
                kern::active().axpy(1.0, out->grad.data() + i * d,
                                    table->grad.data() + static_cast<std::size_t>(ids[i]) * d, d);
        });
    }
    return out;
}

TensorPtr concat_cols(GradTape* tape, const TensorPtr& a, const TensorPtr& b) {
    if (a->ndim() != 2 || b->ndim() != 2 || a->shape()[0] != b->shape()[0])
        throw ShapeError("concat_cols: incompatible shapes " + shape_str(a->shape()) + " vs " +
                         shape_str(b->shape()));
    const std::size_t m = a->shape()[0], p = a->shape()[1], q = b->shape()[1];
    const bool rg = tape && any_grad(a, b);
    auto out = fresh({m, p + q}, rg);
    for (std::size_t r = 0; r < m; ++r) {
        std::copy(a->data() + r * p, a->data() + (r + 1) * p, out->data() + r * (p + q));
        std::copy(b->data() + r * q, b->data() + (r + 1) * q, out->data() + r * (p + q) + p);
    }
    if (rg) {
        tape->record([a, b, out, m, p, q] {
            const auto& K = kern::active();
            for (std::size_t r = 0; r < m; ++r) {
                if (a->requires_grad)
                    K.axpy(1.0, out->grad.data() + r * (p + q), a->grad.data() + r * p, p);
                if (b->requires_grad)
                    K.axpy(1.0, out->grad.data() + r * (p + q) + p, b->grad.data() + r * q, q);
            }
        });
    }
    return out;
}

TensorPtr slice_cols(GradTape* tape, const TensorPtr& a, std::size_t c0, std::size_t c1) {
    if (a->ndim() != 2 || c0 >= c1 || c1 > a->shape()[1])
        throw ShapeError("slice_cols: range [" + std::to_string(c0) + "," + std::to_string(c1) +
                         ") invalid for " + shape_str(a->shape()));
    const std::size_t m = a->shape()[0], n = a->shape()[1], w = c1 - c0;
    const bool rg = tape && any_grad(a);
    auto out = fresh({m, w}, rg);
    for (std::size_t r = 0; r < m; ++r)
        std::copy(a->data() + r * n + c0, a->data() + r * n + c1, out->data() + r * w);
    if (rg) {
        tape->record([a, out, m, n, w, c0] {
            for (std::size_t r = 0; r < m; ++r)
                kern::active().axpy(1.0, out->grad.data() + r * w, a->grad.data() + r * n + c0, w);
        });
    }
    return out;
}

TensorPtr sum_all(GradTape* tape, const TensorPtr& a) {
    const bool rg = tape && any_grad(a);
    auto out = fresh({1}, rg);
    double s = 0.0;
    for (std::size_t i = 0; i < a->size(); ++i) s += a->data()[i];
    out->data()[0] = s;
    if (rg) {
        tape->record([a, out] {
            const double g = out->grad[0];
            for (std::size_t i = 0; i < a->size(); ++i) a->grad[i] += g;
        });
    }
    return out;
}

std::vector<double> log_softmax_row(const double* row, std::size_t n) {
    const double mx = kern::active().max(row, n);
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) sum += std::exp(row[i] - mx);
    const double lse = mx + std::log(sum);
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = row[i] - lse;
    return out;
}

TensorPtr cross_entropy_rows(GradTape* tape, const TensorPtr& logits,
                             const std::vector<int>& gold,
                             const std::vector<std::uint8_t>& row_mask) {
    const std::size_t m = logits->rows(), v = logits->cols();
    if (gold.size() != m || row_mask.size() != m)
        throw ShapeError("cross_entropy: got " + std::to_string(gold.size()) + " gold ids / " +
                         std::to_string(row_mask.size()) + " mask entries for " +
                         shape_str(logits->shape()));
    std::size_t count = 0;
    for (auto f : row_mask) count += f ? 1 : 0;
    if (count == 0) throw DataError("cross_entropy: degenerate batch, every target position is padding");

    const bool rg = tape && any_grad(logits);
    auto out = fresh({1}, rg);
    // Probabilities are kept for the backward pass.
    auto probs = std::make_shared<std::vector<double>>(rg ? m * v : 0);
    double total = 0.0;
    for (std::size_t r = 0; r < m; ++r) {
        if (!row_mask[r]) continue;
        if (gold[r] < 0 || static_cast<std::size_t>(gold[r]) >= v)
            throw DataError("cross_entropy: gold id " + std::to_string(gold[r]) + " out of range");
        const double* x = logits->data() + r * v;
        const double mx = kern::active().max(x, v);
        double sum = 0.0;
        for (std::size_t j = 0; j < v; ++j) sum += std::exp(x[j] - mx);
        const double lse = mx + std::log(sum);
        total += lse - x[gold[r]];
        if (rg)
            for (std::size_t j = 0; j < v; ++j)
                (*probs)[r * v + j] = std::exp(x[j] - lse);
    }
    out->data()[0] = total / static_cast<double>(count);
    if (rg) {
        tape->record([logits, out, probs, gold, row_mask, m, v, count] {
            const double g = out->grad[0] / static_cast<double>(count);
            for (std::size_t r = 0; r < m; ++r) {
                if (!row_mask[r]) continue;
                for (std::size_t j = 0; j < v; ++j)
                    logits->grad[r * v + j] += g * (*probs)[r * v + j];
                logits->grad[r * v + static_cast<std::size_t>(gold[r])] -= g;
            }
        });
    }
    return out;
}

}  // namespace mvt::ops
