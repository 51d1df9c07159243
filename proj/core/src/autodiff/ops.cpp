// Copyright 2026 The synthgt Authors
// SPDX-License-Identifier: Apache-2.0

#include "synthgt/autodiff/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "synthgt/error.hpp"

namespace synthgt::ad {

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMatrix>;
using MutMap = Eigen::Map<RowMatrix>;

[[noreturn]] void shape_error(const char* op, const Tensor& a, const Tensor& b) {
  throw DimensionError(std::string(op) + ": incompatible shapes " + shape_string(a.shape()) +
                       " and " + shape_string(b.shape()));
}

[[noreturn]] void shape_error(const char* op, const Tensor& a, const std::string& what) {
  throw DimensionError(std::string(op) + ": shape " + shape_string(a.shape()) + " " + what);
}

bool is_suffix(const Shape& whole, const Shape& part) {
  if (part.size() > whole.size()) return false;
  return std::equal(part.rbegin(), part.rend(), whole.rbegin());
}

void check_segments(const char* op, const Tensor& x, std::span<const std::size_t> segment,
                    std::size_t segments) {
  if (segment.size() != x.rows()) {
    shape_error(op, x, "needs one segment id per row, got " + std::to_string(segment.size()));
  }
  for (std::size_t s : segment) {
    if (s >= segments) {
      throw DimensionError(std::string(op) + ": segment id " + std::to_string(s) +
                           " out of range for " + std::to_string(segments) + " segments");
    }
  }
}

Tensor emit(Shape shape, std::vector<double> data, std::initializer_list<Tensor> inputs,
            Tape::BackwardFn fn) {
  return Tape::make_output(std::move(shape), std::move(data),
                           std::span<const Tensor>(inputs.begin(), inputs.size()), std::move(fn));
}

template <std::size_t D>
double dot_fixed(const double* a, const double* b) {
  double s = 0.0;
  for (std::size_t j = 0; j < D; ++j) s += a[j] * b[j];
  return s;
}

double dot_n(const double* a, const double* b, std::size_t d) {
  switch (d) {
    case 8: return dot_fixed<8>(a, b);
    case 16: return dot_fixed<16>(a, b);
    case 32: return dot_fixed<32>(a, b);
    default: {
      double s = 0.0;
      for (std::size_t j = 0; j < d; ++j) s += a[j] * b[j];
      return s;
    }
  }
}

template <std::size_t D>
void axpy_fixed(double w, const double* x, double* y) {
  for (std::size_t j = 0; j < D; ++j) y[j] += w * x[j];
}

// y += w * x
void axpy_n(double w, const double* x, double* y, std::size_t d) {
  switch (d) {
    case 8: axpy_fixed<8>(w, x, y); break;
    case 16: axpy_fixed<16>(w, x, y); break;
    case 32: axpy_fixed<32>(w, x, y); break;
    default:
      for (std::size_t j = 0; j < d; ++j) y[j] += w * x[j];
  }
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.shape()[1] != b.shape()[0]) {
    shape_error("matmul", a, b);
  }
  const std::size_t m = a.shape()[0];
  const std::size_t k = a.shape()[1];
  const std::size_t n = b.shape()[1];
  std::vector<double> out(m * n);
  ConstMap am(a.data().data(), m, k);
  ConstMap bm(b.data().data(), k, n);
  MutMap(out.data(), m, n).noalias() = am * bm;
  return emit({m, n}, std::move(out), {a, b},
              [m, k, n](TensorImpl& o, std::span<TensorImpl* const> in) {
                ConstMap go(o.grad.data(), m, n);
                if (in[0]->requires_grad) {
                  MutMap(in[0]->grad.data(), m, k).noalias() +=
                      go * ConstMap(in[1]->data.data(), k, n).transpose();
                }
                if (in[1]->requires_grad) {
                  MutMap(in[1]->grad.data(), k, n).noalias() +=
                      ConstMap(in[0]->data.data(), m, k).transpose() * go;
                }
              });
}

Tensor add(const Tensor& a, const Tensor& b) {
  if (a.shape() == b.shape()) {
    std::vector<double> out(a.data().begin(), a.data().end());
    const auto bd = b.data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += bd[i];
    return emit(a.shape(), std::move(out), {a, b},
                [](TensorImpl& o, std::span<TensorImpl* const> in) {
                  for (int j = 0; j < 2; ++j) {
                    if (!in[j]->requires_grad) continue;
                    for (std::size_t i = 0; i < o.grad.size(); ++i) in[j]->grad[i] += o.grad[i];
                  }
                });
  }
  if (!is_suffix(a.shape(), b.shape()) || b.size() == 0) shape_error("add", a, b);
  const std::size_t width = b.size();
  std::vector<double> out(a.data().begin(), a.data().end());
  const auto bd = b.data();
  for (std::size_t r = 0; r < out.size(); r += width) {
    for (std::size_t j = 0; j < width; ++j) out[r + j] += bd[j];
  }
  return emit(a.shape(), std::move(out), {a, b},
              [width](TensorImpl& o, std::span<TensorImpl* const> in) {
                if (in[0]->requires_grad) {
                  for (std::size_t i = 0; i < o.grad.size(); ++i) in[0]->grad[i] += o.grad[i];
                }
                if (in[1]->requires_grad) {
                  double* gb = in[1]->grad.data();
                  for (std::size_t r = 0; r < o.grad.size(); r += width) {
                    for (std::size_t j = 0; j < width; ++j) gb[j] += o.grad[r + j];
                  }
                }
              });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) shape_error("sub", a, b);
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] - b[i];
  return emit(a.shape(), std::move(out), {a, b},
              [](TensorImpl& o, std::span<TensorImpl* const> in) {
                if (in[0]->requires_grad) {
                  for (std::size_t i = 0; i < o.grad.size(); ++i) in[0]->grad[i] += o.grad[i];
                }
                if (in[1]->requires_grad) {
                  for (std::size_t i = 0; i < o.grad.size(); ++i) in[1]->grad[i] -= o.grad[i];
                }
              });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) shape_error("mul", a, b);
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] * b[i];
  return emit(a.shape(), std::move(out), {a, b},
              [](TensorImpl& o, std::span<TensorImpl* const> in) {
                TensorImpl& x = *in[0];
                TensorImpl& y = *in[1];
                for (std::size_t i = 0; i < o.grad.size(); ++i) {
                  if (x.requires_grad) x.grad[i] += o.grad[i] * y.data[i];
                  if (y.requires_grad) y.grad[i] += o.grad[i] * x.data[i];
                }
              });
}

Tensor scale(const Tensor& a, double factor) {
  std::vector<double> out(a.data().begin(), a.data().end());
  for (double& v : out) v *= factor;
  return emit(a.shape(), std::move(out), {a},
              [factor](TensorImpl& o, std::span<TensorImpl* const> in) {
                for (std::size_t i = 0; i < o.grad.size(); ++i) in[0]->grad[i] += factor * o.grad[i];
              });
}

Tensor relu(const Tensor& a) {
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] > 0.0 ? a[i] : 0.0;
  return emit(a.shape(), std::move(out), {a},
              [](TensorImpl& o, std::span<TensorImpl* const> in) {
                for (std::size_t i = 0; i < o.grad.size(); ++i) {
                  if (in[0]->data[i] > 0.0) in[0]->grad[i] += o.grad[i];
                }
              });
}

Tensor log(const Tensor& a) {
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::log(a[i]);
  return emit(a.shape(), std::move(out), {a},
              [](TensorImpl& o, std::span<TensorImpl* const> in) {
                for (std::size_t i = 0; i < o.grad.size(); ++i) {
                  in[0]->grad[i] += o.grad[i] / in[0]->data[i];
                }
              });
}

Tensor sum(const Tensor& a) {
  double total = 0.0;
  for (double v : a.data()) total += v;
  return emit({}, {total}, {a}, [](TensorImpl& o, std::span<TensorImpl* const> in) {
    for (double& g : in[0]->grad) g += o.grad[0];
  });
}

Tensor mean(const Tensor& a) {
  if (a.size() == 0) shape_error("mean", a, "is empty");
  double total = 0.0;
  for (double v : a.data()) total += v;
  const double n = static_cast<double>(a.size());
  return emit({}, {total / n}, {a}, [n](TensorImpl& o, std::span<TensorImpl* const> in) {
    for (double& g : in[0]->grad) g += o.grad[0] / n;
  });
}

Tensor reshape(const Tensor& a, Shape shape) {
  if (shape_size(shape) != a.size()) {
    shape_error("reshape", a, "cannot be viewed as " + shape_string(shape));
  }
  std::vector<double> out(a.data().begin(), a.data().end());
  return emit(std::move(shape), std::move(out), {a},
              [](TensorImpl& o, std::span<TensorImpl* const> in) {
                for (std::size_t i = 0; i < o.grad.size(); ++i) in[0]->grad[i] += o.grad[i];
              });
}

Tensor softmax_rows(const Tensor& a) {
  if (a.rank() != 2 && a.rank() != 1) shape_error("softmax_rows", a, "must be 1-D or 2-D");
  const std::size_t r = a.rank() == 1 ? 1 : a.shape()[0];
  const std::size_t c = a.rank() == 1 ? a.size() : a.shape()[1];
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < r; ++i) {
    const double* x = a.data().data() + i * c;
    double* y = out.data() + i * c;
    const double mx = *std::max_element(x, x + c);
    double z = 0.0;
    for (std::size_t j = 0; j < c; ++j) z += (y[j] = std::exp(x[j] - mx));
    for (std::size_t j = 0; j < c; ++j) y[j] /= z;
  }
  return emit(a.shape(), std::move(out), {a},
              [r, c](TensorImpl& o, std::span<TensorImpl* const> in) {
                for (std::size_t i = 0; i < r; ++i) {
                  const double* y = o.data.data() + i * c;
                  const double* gy = o.grad.data() + i * c;
                  double dot = 0.0;
                  for (std::size_t j = 0; j < c; ++j) dot += y[j] * gy[j];
                  double* gx = in[0]->grad.data() + i * c;
                  for (std::size_t j = 0; j < c; ++j) gx[j] += y[j] * (gy[j] - dot);
                }
              });
}

Tensor segment_softmax(const Tensor& scores, std::span<const std::size_t> segment,
                       std::size_t segments) {
  check_segments("segment_softmax", scores, segment, segments);
  const std::size_t e = scores.rows();
  const std::size_t h = scores.rank() <= 1 ? 1 : scores.cols();
  std::vector<double> mx(segments * h, -std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i < e; ++i) {
    for (std::size_t c = 0; c < h; ++c) {
      double& m = mx[segment[i] * h + c];
      m = std::max(m, scores[i * h + c]);
    }
  }
  std::vector<double> out(scores.size());
  std::vector<double> z(segments * h, 0.0);
  for (std::size_t i = 0; i < e; ++i) {
    for (std::size_t c = 0; c < h; ++c) {
      const std::size_t s = segment[i] * h + c;
      out[i * h + c] = std::exp(scores[i * h + c] - mx[s]);
      z[s] += out[i * h + c];
    }
  }
  for (std::size_t i = 0; i < e; ++i) {
    for (std::size_t c = 0; c < h; ++c) out[i * h + c] /= z[segment[i] * h + c];
  }
  std::vector<std::size_t> seg(segment.begin(), segment.end());
  return emit(scores.shape(), std::move(out), {scores},
              [seg = std::move(seg), segments, h](TensorImpl& o,
                                                  std::span<TensorImpl* const> in) {
                std::vector<double> dot(segments * h, 0.0);
                const std::size_t e = seg.size();
                for (std::size_t i = 0; i < e; ++i) {
                  for (std::size_t c = 0; c < h; ++c) {
                    dot[seg[i] * h + c] += o.data[i * h + c] * o.grad[i * h + c];
                  }
                }
                for (std::size_t i = 0; i < e; ++i) {
                  for (std::size_t c = 0; c < h; ++c) {
                    const std::size_t k = i * h + c;
                    in[0]->grad[k] += o.data[k] * (o.grad[k] - dot[seg[i] * h + c]);
                  }
                }
              });
}

Tensor segment_max(const Tensor& x, std::span<const std::size_t> segment, std::size_t segments) {
  check_segments("segment_max", x, segment, segments);
  const std::size_t c = x.cols();
  constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();
  std::vector<std::size_t> argmax(segments * c, kNone);
  for (std::size_t i = 0; i < x.rows(); ++i) {
    for (std::size_t j = 0; j < c; ++j) {
      std::size_t& best = argmax[segment[i] * c + j];
      if (best == kNone || x[i * c + j] > x[best * c + j]) best = i;
    }
  }
  std::vector<double> out(segments * c, 0.0);
  for (std::size_t k = 0; k < out.size(); ++k) {
    if (argmax[k] != kNone) out[k] = x[argmax[k] * c + k % c];
  }
  return emit({segments, c}, std::move(out), {x},
              [argmax = std::move(argmax), c](TensorImpl& o, std::span<TensorImpl* const> in) {
                for (std::size_t k = 0; k < argmax.size(); ++k) {
                  if (argmax[k] != kNone) in[0]->grad[argmax[k] * c + k % c] += o.grad[k];
                }
              });
}

Tensor segment_sum(const Tensor& x, std::span<const std::size_t> segment, std::size_t segments) {
  check_segments("segment_sum", x, segment, segments);
  const std::size_t c = x.cols();
  std::vector<double> out(segments * c, 0.0);
  for (std::size_t i = 0; i < x.rows(); ++i) {
    for (std::size_t j = 0; j < c; ++j) out[segment[i] * c + j] += x[i * c + j];
  }
  std::vector<std::size_t> seg(segment.begin(), segment.end());
  return emit({segments, c}, std::move(out), {x},
              [seg = std::move(seg), c](TensorImpl& o, std::span<TensorImpl* const> in) {
                for (std::size_t i = 0; i < seg.size(); ++i) {
                  for (std::size_t j = 0; j < c; ++j) in[0]->grad[i * c + j] += o.grad[seg[i] * c + j];
                }
              });
}

Tensor segment_mean(const Tensor& x, std::span<const std::size_t> segment, std::size_t segments) {
  check_segments("segment_mean", x, segment, segments);
  const std::size_t c = x.cols();
  std::vector<double> count(segments, 0.0);
  for (std::size_t s : segment) count[s] += 1.0;
  std::vector<double> out(segments * c, 0.0);
  for (std::size_t i = 0; i < x.rows(); ++i) {
    for (std::size_t j = 0; j < c; ++j) out[segment[i] * c + j] += x[i * c + j] / count[segment[i]];
  }
  std::vector<std::size_t> seg(segment.begin(), segment.end());
  return emit({segments, c}, std::move(out), {x},
              [seg = std::move(seg), count = std::move(count), c](TensorImpl& o,
                                                                 std::span<TensorImpl* const> in) {
                for (std::size_t i = 0; i < seg.size(); ++i) {
                  for (std::size_t j = 0; j < c; ++j) {
                    in[0]->grad[i * c + j] += o.grad[seg[i] * c + j] / count[seg[i]];
                  }
                }
              });
}

Tensor concat_last(std::span<const Tensor> parts) {
  if (parts.empty()) throw DimensionError("concat_last: no inputs");
  // 1-D inputs are joined into one longer vector.
  if (std::all_of(parts.begin(), parts.end(), [](const Tensor& p) { return p.rank() == 1; })) {
    std::vector<double> out;
    std::vector<std::size_t> sizes;
    for (const Tensor& p : parts) {
      out.insert(out.end(), p.data().begin(), p.data().end());
      sizes.push_back(p.size());
    }
    const std::size_t n = out.size();
    return Tape::make_output({n}, std::move(out), parts,
                             [sizes](TensorImpl& o, std::span<TensorImpl* const> in) {
                               std::size_t off = 0;
                               for (std::size_t p = 0; p < in.size(); ++p) {
                                 if (in[p]->requires_grad) {
                                   for (std::size_t i = 0; i < sizes[p]; ++i) in[p]->grad[i] += o.grad[off + i];
                                 }
                                 off += sizes[p];
                               }
                             });
  }
  const std::size_t r = parts[0].rows();
  std::vector<std::size_t> widths;
  std::size_t total = 0;
  for (const Tensor& p : parts) {
    if (p.rank() != 2 || p.rows() != r) shape_error("concat_last", parts[0], p);
    widths.push_back(p.cols());
    total += widths.back();
  }
  std::vector<double> out(r * total);
  std::size_t off = 0;
  for (std::size_t p = 0; p < parts.size(); ++p) {
    const auto d = parts[p].data();
    for (std::size_t i = 0; i < r; ++i) {
      std::copy_n(d.data() + i * widths[p], widths[p], out.data() + i * total + off);
    }
    off += widths[p];
  }
  return Tape::make_output({r, total}, std::move(out), parts,
                           [widths, r, total](TensorImpl& o, std::span<TensorImpl* const> in) {
                             std::size_t off = 0;
                             for (std::size_t p = 0; p < in.size(); ++p) {
                               if (in[p]->requires_grad) {
                                 for (std::size_t i = 0; i < r; ++i) {
                                   for (std::size_t j = 0; j < widths[p]; ++j) {
                                     in[p]->grad[i * widths[p] + j] += o.grad[i * total + off + j];
                                   }
                                 }
                               }
                               off += widths[p];
                             }
                           });
}

Tensor concat_last(std::initializer_list<Tensor> parts) {
  return concat_last(std::span<const Tensor>(parts.begin(), parts.size()));
}

Tensor gather_rows(const Tensor& x, std::span<const std::size_t> index) {
  const std::size_t c = x.cols();
  std::vector<double> out(index.size() * c);
  for (std::size_t i = 0; i < index.size(); ++i) {
    if (index[i] >= x.rows()) {
      shape_error("gather_rows", x, "has no row " + std::to_string(index[i]));
    }
    std::copy_n(x.data().data() + index[i] * c, c, out.data() + i * c);
  }
  Shape shape = x.shape();
  if (shape.empty()) shape = {1};
  shape[0] = index.size();
  std::vector<std::size_t> idx(index.begin(), index.end());
  return emit(std::move(shape), std::move(out), {x},
              [idx = std::move(idx), c](TensorImpl& o, std::span<TensorImpl* const> in) {
                for (std::size_t i = 0; i < idx.size(); ++i) {
                  for (std::size_t j = 0; j < c; ++j) in[0]->grad[idx[i] * c + j] += o.grad[i * c + j];
                }
              });
}

Tensor dropout(const Tensor& x, double p, Rng& rng, bool train) {
  if (!(p >= 0.0 && p < 1.0)) {
    throw ContractError("dropout: rate must lie in [0, 1), got " + std::to_string(p));
  }
  if (!train || p == 0.0) return x;
  std::bernoulli_distribution keep(1.0 - p);
  const double inv = 1.0 / (1.0 - p);
  std::vector<double> mask(x.size());
  for (double& m : mask) m = keep(rng) ? inv : 0.0;
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] * mask[i];
  return emit(x.shape(), std::move(out), {x},
              [mask = std::move(mask)](TensorImpl& o, std::span<TensorImpl* const> in) {
                for (std::size_t i = 0; i < mask.size(); ++i) in[0]->grad[i] += o.grad[i] * mask[i];
              });
}

Tensor head_dot(const Tensor& q, const Tensor& k, std::size_t heads) {
  if (q.shape() != k.shape() || q.rank() != 2) shape_error("head_dot", q, k);
  if (heads == 0 || q.cols() % heads != 0) shape_error("head_dot", q, "not divisible into heads");
  const std::size_t e = q.rows();
  const std::size_t dh = q.cols() / heads;
  std::vector<double> out(e * heads, 0.0);
  for (std::size_t i = 0; i < e; ++i) {
    for (std::size_t h = 0; h < heads; ++h) {
      double s = 0.0;
      for (std::size_t j = 0; j < dh; ++j) {
        const std::size_t idx = i * heads * dh + h * dh + j;
        s += q[idx] * k[idx];
      }
      out[i * heads + h] = s;
    }
  }
  return emit({e, heads}, std::move(out), {q, k},
              [heads, dh, e](TensorImpl& o, std::span<TensorImpl* const> in) {
                for (std::size_t i = 0; i < e; ++i) {
                  for (std::size_t h = 0; h < heads; ++h) {
                    const double g = o.grad[i * heads + h];
                    for (std::size_t j = 0; j < dh; ++j) {
                      const std::size_t idx = i * heads * dh + h * dh + j;
                      if (in[0]->requires_grad) in[0]->grad[idx] += g * in[1]->data[idx];
                      if (in[1]->requires_grad) in[1]->grad[idx] += g * in[0]->data[idx];
                    }
                  }
                }
              });
}

Tensor head_scale(const Tensor& weights, const Tensor& v, std::size_t heads) {
  if (v.rank() != 2 || heads == 0 || v.cols() % heads != 0 || weights.rows() != v.rows() ||
      weights.size() != v.rows() * heads) {
    shape_error("head_scale", weights, v);
  }
  const std::size_t e = v.rows();
  const std::size_t dh = v.cols() / heads;
  std::vector<double> out(v.size());
  for (std::size_t i = 0; i < e; ++i) {
    for (std::size_t h = 0; h < heads; ++h) {
      const double w = weights[i * heads + h];
      for (std::size_t j = 0; j < dh; ++j) {
        const std::size_t idx = (i * heads + h) * dh + j;
        out[idx] = w * v[idx];
      }
    }
  }
  return emit(v.shape(), std::move(out), {weights, v},
              [heads, dh, e](TensorImpl& o, std::span<TensorImpl* const> in) {
                for (std::size_t i = 0; i < e; ++i) {
                  for (std::size_t h = 0; h < heads; ++h) {
                    const double w = in[0]->data[i * heads + h];
                    double gw = 0.0;
                    for (std::size_t j = 0; j < dh; ++j) {
                      const std::size_t idx = (i * heads + h) * dh + j;
                      gw += o.grad[idx] * in[1]->data[idx];
                      if (in[1]->requires_grad) in[1]->grad[idx] += o.grad[idx] * w;
                    }
                    if (in[0]->requires_grad) in[0]->grad[i * heads + h] += gw;
                  }
                }
              });
}

Tensor neighborhood_attention(const Tensor& q, const Tensor& k, const Tensor& v,
                              const NeighborLists& neighbors, std::size_t heads) {
  if (q.rank() != 2 || q.shape() != k.shape() || q.shape() != v.shape()) {
    shape_error("neighborhood_attention", q, k.shape() != q.shape() ? k : v);
  }
  const std::size_t n = neighbors.nodes();
  if (n == 0 || q.rows() % n != 0) {
    shape_error("neighborhood_attention", q,
                "rows are not a multiple of the graph size " + std::to_string(n));
  }
  if (heads == 0 || q.cols() % heads != 0) {
    shape_error("neighborhood_attention", q, "not divisible into " + std::to_string(heads) + " heads");
  }
  const std::size_t graphs = q.rows() / n;
  const std::size_t width = q.cols();
  const std::size_t dh = width / heads;
  const std::size_t edges = neighbors.edges();
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));

  // alpha[(g*edges + e)*heads + h]
  std::vector<double> alpha(graphs * edges * heads);
  std::vector<double> out(q.size(), 0.0);
  const double* qd = q.data().data();
  const double* kd = k.data().data();
  const double* vd = v.data().data();
  for (std::size_t g = 0; g < graphs; ++g) {
    const std::size_t base = g * n;
    for (std::size_t u = 0; u < n; ++u) {
      const std::size_t lo = neighbors.offsets[u];
      const std::size_t hi = neighbors.offsets[u + 1];
      for (std::size_t h = 0; h < heads; ++h) {
        const double* qu = qd + (base + u) * width + h * dh;
        double* a = alpha.data() + g * edges * heads;
        double mx = -std::numeric_limits<double>::infinity();
        for (std::size_t e = lo; e < hi; ++e) {
          const double* kv = kd + (base + neighbors.indices[e]) * width + h * dh;
          const double s = dot_n(qu, kv, dh) * inv_sqrt;
          a[e * heads + h] = s;
          mx = std::max(mx, s);
        }
        double z = 0.0;
        for (std::size_t e = lo; e < hi; ++e) {
          double& w = a[e * heads + h];
          w = std::exp(w - mx);
          z += w;
        }
        double* zu = out.data() + (base + u) * width + h * dh;
        for (std::size_t e = lo; e < hi; ++e) {
          double& w = a[e * heads + h];
          w /= z;
          const double* vv = vd + (base + neighbors.indices[e]) * width + h * dh;
          axpy_n(w, vv, zu, dh);
        }
      }
    }
  }

  const Tensor inputs[] = {q, k, v};
  return Tape::make_output(
      q.shape(), std::move(out), inputs,
      [alpha = std::move(alpha), nbr = neighbors, graphs, n, width, dh, heads, edges,
       inv_sqrt](TensorImpl& o, std::span<TensorImpl* const> in) {
        const bool gq = in[0]->requires_grad;
        const bool gk = in[1]->requires_grad;
        const bool gv = in[2]->requires_grad;
        const double* qd = in[0]->data.data();
        const double* kd = in[1]->data.data();
        const double* vd = in[2]->data.data();
        double* dq = gq ? in[0]->grad.data() : nullptr;
        double* dk = gk ? in[1]->grad.data() : nullptr;
        double* dv = gv ? in[2]->grad.data() : nullptr;
        std::vector<double> dalpha;
        for (std::size_t g = 0; g < graphs; ++g) {
          const std::size_t base = g * n;
          const double* a = alpha.data() + g * edges * heads;
          for (std::size_t u = 0; u < n; ++u) {
            const std::size_t lo = nbr.offsets[u];
            const std::size_t hi = nbr.offsets[u + 1];
            dalpha.assign(hi - lo, 0.0);
            for (std::size_t h = 0; h < heads; ++h) {
              const double* gz = o.grad.data() + (base + u) * width + h * dh;
              double dot = 0.0;
              for (std::size_t e = lo; e < hi; ++e) {
                const std::size_t row = (base + nbr.indices[e]) * width + h * dh;
                const double w = a[e * heads + h];
                const double da = dot_n(gz, vd + row, dh);
                if (gv) axpy_n(w, gz, dv + row, dh);
                dalpha[e - lo] = da;
                dot += w * da;
              }
              const std::size_t qrow = (base + u) * width + h * dh;
              for (std::size_t e = lo; e < hi; ++e) {
                const double ds = a[e * heads + h] * (dalpha[e - lo] - dot) * inv_sqrt;
                if (ds == 0.0) continue;
                const std::size_t krow = (base + nbr.indices[e]) * width + h * dh;
                if (gq) axpy_n(ds, kd + krow, dq + qrow, dh);
                if (gk) axpy_n(ds, qd + qrow, dk + krow, dh);
              }
            }
          }
        }
      });
}

Tensor softmax_cross_entropy(const Tensor& logits, std::span<const int> labels) {
  if (logits.rank() != 2 || logits.rows() != labels.size()) {
    shape_error("softmax_cross_entropy", logits,
                "does not match " + std::to_string(labels.size()) + " labels");
  }
  const std::size_t b = logits.rows();
  const std::size_t c = logits.cols();
  std::vector<double> prob(logits.size());
  double loss = 0.0;
  for (std::size_t i = 0; i < b; ++i) {
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= c) {
      throw ContractError("softmax_cross_entropy: label " + std::to_string(labels[i]) +
                          " outside [0, " + std::to_string(c) + ")");
    }
    const double* x = logits.data().data() + i * c;
    const double mx = *std::max_element(x, x + c);
    double z = 0.0;
    for (std::size_t j = 0; j < c; ++j) z += std::exp(x[j] - mx);
    const double lse = mx + std::log(z);
    for (std::size_t j = 0; j < c; ++j) prob[i * c + j] = std::exp(x[j] - lse);
    loss += lse - x[labels[i]];
  }
  std::vector<int> lab(labels.begin(), labels.end());
  return emit({}, {loss / static_cast<double>(b)}, {logits},
              [prob = std::move(prob), lab = std::move(lab), c](TensorImpl& o,
                                                                std::span<TensorImpl* const> in) {
                const double g = o.grad[0] / static_cast<double>(lab.size());
                for (std::size_t i = 0; i < lab.size(); ++i) {
                  for (std::size_t j = 0; j < c; ++j) {
                    const double target = static_cast<int>(j) == lab[i] ? 1.0 : 0.0;
                    in[0]->grad[i * c + j] += g * (prob[i * c + j] - target);
                  }
                }
              });
}

Tensor mse(const Tensor& prediction, const Tensor& target) {
  if (prediction.size() != target.size()) shape_error("mse", prediction, target);
  if (prediction.size() == 0) shape_error("mse", prediction, "is empty");
  const double n = static_cast<double>(prediction.size());
  double total = 0.0;
  for (std::size_t i = 0; i < prediction.size(); ++i) {
    const double d = prediction[i] - target[i];
    total += d * d;
  }
  return emit({}, {total / n}, {prediction, target},
              [n](TensorImpl& o, std::span<TensorImpl* const> in) {
                const double g = 2.0 * o.grad[0] / n;
                for (std::size_t i = 0; i < in[0]->data.size(); ++i) {
                  const double d = in[0]->data[i] - in[1]->data[i];
                  if (in[0]->requires_grad) in[0]->grad[i] += g * d;
                  if (in[1]->requires_grad) in[1]->grad[i] -= g * d;
                }
              });
}

}  // namespace synthgt::ad
