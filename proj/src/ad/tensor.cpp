#include "trisplat/ad/tensor.hpp"

#include <cmath>

namespace trisplat::ad {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using CMapMat = Eigen::Map<const RowMat>;

CMapMat as_mat(const Eigen::ArrayXd& v, int r, int c) { return CMapMat(v.data(), r, c); }
MapMat as_mat(Eigen::ArrayXd& v, int r, int c) { return MapMat(v.data(), r, c); }

}  // namespace

int Tensor::rows() const { return graph->node(id).rows; }
int Tensor::cols() const { return graph->node(id).cols; }
const Eigen::ArrayXd& Tensor::value() const { return graph->node(id).val; }
double Tensor::scalar() const {
  TS_CHECK(size() == 1, "Tensor::scalar: not a 1x1 tensor");
  return value()[0];
}

Tensor Graph::param(int rows, int cols, Eigen::ArrayXd data) {
  TS_CHECK(data.size() == static_cast<Eigen::Index>(rows) * cols, "param: data size mismatch");
  Node n;
  n.rows = rows;
  n.cols = cols;
  n.val = std::move(data);
  n.needs_grad = grad_enabled_;
  nodes_.push_back(std::move(n));
  return Tensor{this, static_cast<int>(nodes_.size()) - 1};
}

Tensor Graph::constant(int rows, int cols, Eigen::ArrayXd data) {
  TS_CHECK(data.size() == static_cast<Eigen::Index>(rows) * cols, "constant: data size mismatch");
  Node n;
  n.rows = rows;
  n.cols = cols;
  n.val = std::move(data);
  n.needs_grad = false;
  nodes_.push_back(std::move(n));
  return Tensor{this, static_cast<int>(nodes_.size()) - 1};
}

Tensor Graph::adopt(int rows, int cols, Eigen::ArrayXd val, const std::vector<Tensor>& parents,
                    std::function<void()> backprop) {
  TS_CHECK(val.size() == static_cast<Eigen::Index>(rows) * cols, "adopt: value size mismatch");
  TS_CHECK(val.allFinite(), "adopt: non-finite values in forward pass");
  bool needs = false;
  for (const Tensor& p : parents) {
    TS_CHECK(p.graph == this, "adopt: tensor from a different graph");
    needs = needs || nodes_[p.id].needs_grad;
  }
  Node n;
  n.rows = rows;
  n.cols = cols;
  n.val = std::move(val);
  n.needs_grad = needs && grad_enabled_;
  if (n.needs_grad) n.backprop = std::move(backprop);
  nodes_.push_back(std::move(n));
  return Tensor{this, static_cast<int>(nodes_.size()) - 1};
}

Eigen::ArrayXd& Graph::grad_buffer(int id) {
  Node& n = nodes_[id];
  if (n.grad.size() == 0) n.grad = Eigen::ArrayXd::Zero(static_cast<Eigen::Index>(n.rows) * n.cols);
  return n.grad;
}

void Graph::backward(Tensor loss) {
  TS_CHECK(loss.graph == this, "backward: loss from a different graph");
  TS_CHECK(loss.size() == 1, "backward: loss must be scalar");
  TS_CHECK(!backward_done_, "backward: graph already differentiated");
  TS_CHECK(grad_enabled_, "backward: graph built in no-grad mode");
  backward_done_ = true;
  grad_buffer(loss.id)[0] = 1.0;
  for (int i = loss.id; i >= 0; --i) {
    Node& n = nodes_[i];
    if (!n.needs_grad || n.grad.size() == 0 || !n.backprop) continue;
    n.backprop();
  }
}

Eigen::ArrayXd Graph::grad_of(Tensor t) const {
  const Node& n = nodes_[t.id];
  if (n.grad.size() == 0) return Eigen::ArrayXd::Zero(static_cast<Eigen::Index>(n.rows) * n.cols);
  return n.grad;
}

// ---------------------------------------------------------------------------
// elementwise
// ---------------------------------------------------------------------------

namespace {
void check_same_shape(Tensor a, Tensor b, const char* op) {
  TS_CHECK(a.graph == b.graph, std::string(op) + ": tensors from different graphs");
  TS_CHECK(a.rows() == b.rows() && a.cols() == b.cols(), std::string(op) + ": shape mismatch");
}
}  // namespace

namespace {
// Wires an op: computes the forward value, then registers the node with a
// backward closure that knows its own output id.
template <typename Fwd, typename Bwd>
Tensor make_op(Graph* g, int rows, int cols, Fwd&& fwd, const std::vector<Tensor>& parents,
               Bwd&& bwd_builder) {
  Eigen::ArrayXd val = fwd();
  int out_id = static_cast<int>(g->node_count());
  return g->adopt(rows, cols, std::move(val), parents, bwd_builder(out_id));
}
}  // namespace

Tensor add(Tensor a, Tensor b) {
  check_same_shape(a, b, "add");
  Graph* g = a.graph;
  return make_op(
      g, a.rows(), a.cols(), [&] { return Eigen::ArrayXd(a.value() + b.value()); }, {a, b},
      [&](int out) {
        return [g, a, b, out]() {
          const Eigen::ArrayXd& go = g->node(out).grad;
          if (g->node(a.id).needs_grad) g->grad_buffer(a.id) += go;
          if (g->node(b.id).needs_grad) g->grad_buffer(b.id) += go;
        };
      });
}

Tensor sub(Tensor a, Tensor b) {
  check_same_shape(a, b, "sub");
  Graph* g = a.graph;
  return make_op(
      g, a.rows(), a.cols(), [&] { return Eigen::ArrayXd(a.value() - b.value()); }, {a, b},
      [&](int out) {
        return [g, a, b, out]() {
          const Eigen::ArrayXd& go = g->node(out).grad;
          if (g->node(a.id).needs_grad) g->grad_buffer(a.id) += go;
          if (g->node(b.id).needs_grad) g->grad_buffer(b.id) -= go;
        };
      });
}

Tensor mul(Tensor a, Tensor b) {
  check_same_shape(a, b, "mul");
  Graph* g = a.graph;
  return make_op(
      g, a.rows(), a.cols(), [&] { return Eigen::ArrayXd(a.value() * b.value()); }, {a, b},
      [&](int out) {
        return [g, a, b, out]() {
          const Eigen::ArrayXd& go = g->node(out).grad;
          if (g->node(a.id).needs_grad) g->grad_buffer(a.id) += go * g->node(b.id).val;
          if (g->node(b.id).needs_grad) g->grad_buffer(b.id) += go * g->node(a.id).val;
        };
      });
}

Tensor scale(Tensor a, double s) {
  Graph* g = a.graph;
  return make_op(
      g, a.rows(), a.cols(), [&] { return Eigen::ArrayXd(a.value() * s); }, {a},
      [&](int out) {
        return [g, a, s, out]() { g->grad_buffer(a.id) += g->node(out).grad * s; };
      });
}

Tensor add_scalar(Tensor a, double s) {
  Graph* g = a.graph;
  return make_op(
      g, a.rows(), a.cols(), [&] { return Eigen::ArrayXd(a.value() + s); }, {a},
      [&](int out) {
        return [g, a, out]() { g->grad_buffer(a.id) += g->node(out).grad; };
      });
}

Tensor square(Tensor a) { return mul(a, a); }

Tensor sigmoid(Tensor a) {
  Graph* g = a.graph;
  return make_op(
      g, a.rows(), a.cols(),
      [&] { return Eigen::ArrayXd(1.0 / (1.0 + (-a.value()).exp())); }, {a},
      [&](int out) {
        return [g, a, out]() {
          const Eigen::ArrayXd& y = g->node(out).val;
          g->grad_buffer(a.id) += g->node(out).grad * y * (1.0 - y);
        };
      });
}

Tensor tanh_op(Tensor a) {
  Graph* g = a.graph;
  return make_op(
      g, a.rows(), a.cols(), [&] { return Eigen::ArrayXd(a.value().tanh()); }, {a},
      [&](int out) {
        return [g, a, out]() {
          const Eigen::ArrayXd& y = g->node(out).val;
          g->grad_buffer(a.id) += g->node(out).grad * (1.0 - y * y);
        };
      });
}

Tensor leaky_relu(Tensor a, double slope) {
  Graph* g = a.graph;
  return make_op(
      g, a.rows(), a.cols(),
      [&] {
        Eigen::ArrayXd v = a.value();
        for (Eigen::Index i = 0; i < v.size(); ++i)
          if (v[i] < 0.0) v[i] *= slope;
        return v;
      },
      {a},
      [&](int out) {
        return [g, a, slope, out]() {
          const Eigen::ArrayXd& go = g->node(out).grad;
          const Eigen::ArrayXd& x = g->node(a.id).val;
          Eigen::ArrayXd& ga = g->grad_buffer(a.id);
          for (Eigen::Index i = 0; i < x.size(); ++i) ga[i] += go[i] * (x[i] >= 0.0 ? 1.0 : slope);
        };
      });
}

Tensor gelu(Tensor a) {
  Graph* g = a.graph;
  constexpr double kInvSqrt2 = 0.7071067811865475244;
  constexpr double kInvSqrt2Pi = 0.3989422804014326779;
  return make_op(
      g, a.rows(), a.cols(),
      [&] {
        Eigen::ArrayXd x = a.value();
        Eigen::ArrayXd v(x.size());
        for (Eigen::Index i = 0; i < x.size(); ++i)
          v[i] = 0.5 * x[i] * (1.0 + std::erf(x[i] * kInvSqrt2));
        return v;
      },
      {a},
      [&](int out) {
        return [g, a, out]() {
          const Eigen::ArrayXd& go = g->node(out).grad;
          const Eigen::ArrayXd& x = g->node(a.id).val;
          Eigen::ArrayXd& ga = g->grad_buffer(a.id);
          for (Eigen::Index i = 0; i < x.size(); ++i) {
            double cdf = 0.5 * (1.0 + std::erf(x[i] * kInvSqrt2));
            double pdf = kInvSqrt2Pi * std::exp(-0.5 * x[i] * x[i]);
            ga[i] += go[i] * (cdf + x[i] * pdf);
          }
        };
      });
}

Tensor clamp(Tensor a, double lo, double hi) {
  Graph* g = a.graph;
  return make_op(
      g, a.rows(), a.cols(), [&] { return Eigen::ArrayXd(a.value().max(lo).min(hi)); }, {a},
      [&](int out) {
        return [g, a, lo, hi, out]() {
          const Eigen::ArrayXd& go = g->node(out).grad;
          const Eigen::ArrayXd& x = g->node(a.id).val;
          Eigen::ArrayXd& ga = g->grad_buffer(a.id);
          for (Eigen::Index i = 0; i < x.size(); ++i)
            if (x[i] >= lo && x[i] <= hi) ga[i] += go[i];
        };
      });
}

Tensor charbonnier(Tensor a, double eps) {
  Graph* g = a.graph;
  // Shifted so charbonnier(0) == 0; the gradient is x / sqrt(x^2 + eps^2).
  return make_op(
      g, a.rows(), a.cols(),
      [&] { return Eigen::ArrayXd((a.value().square() + eps * eps).sqrt() - eps); }, {a},
      [&](int out) {
        return [g, a, eps, out]() {
          const Eigen::ArrayXd& go = g->node(out).grad;
          const Eigen::ArrayXd& x = g->node(a.id).val;
          const Eigen::ArrayXd& y = g->node(out).val;
          g->grad_buffer(a.id) += go * x / (y + eps);
        };
      });
}

// ---------------------------------------------------------------------------
// row broadcasts
// ---------------------------------------------------------------------------

namespace {
void check_rowvec(Tensor a, Tensor v, const char* op) {
  TS_CHECK(a.graph == v.graph, std::string(op) + ": tensors from different graphs");
  TS_CHECK(v.rows() == 1 && v.cols() == a.cols(), std::string(op) + ": broadcast shape mismatch");
}
}  // namespace

Tensor add_rowvec(Tensor a, Tensor v) {
  check_rowvec(a, v, "add_rowvec");
  Graph* g = a.graph;
  int r = a.rows(), c = a.cols();
  return make_op(
      g, r, c,
      [&] {
        Eigen::ArrayXd out = a.value();
        MapMat m = as_mat(out, r, c);
        m.rowwise() += as_mat(v.value(), 1, c).row(0);
        return out;
      },
      {a, v},
      [&](int out) {
        return [g, a, v, r, c, out]() {
          const Eigen::ArrayXd& go = g->node(out).grad;
          if (g->node(a.id).needs_grad) g->grad_buffer(a.id) += go;
          if (g->node(v.id).needs_grad) {
            Eigen::ArrayXd& gv = g->grad_buffer(v.id);
            CMapMat gm = as_mat(go, r, c);
            as_mat(gv, 1, c).row(0) += gm.colwise().sum();
          }
        };
      });
}

Tensor mul_rowvec(Tensor a, Tensor v) {
  check_rowvec(a, v, "mul_rowvec");
  Graph* g = a.graph;
  int r = a.rows(), c = a.cols();
  return make_op(
      g, r, c,
      [&] {
        Eigen::ArrayXd out = a.value();
        MapMat m = as_mat(out, r, c);
        m.array().rowwise() *= as_mat(v.value(), 1, c).row(0).array();
        return out;
      },
      {a, v},
      [&](int out) {
        return [g, a, v, r, c, out]() {
          const Eigen::ArrayXd& go = g->node(out).grad;
          if (g->node(a.id).needs_grad) {
            Eigen::ArrayXd& ga = g->grad_buffer(a.id);
            CMapMat gm = as_mat(go, r, c);
            as_mat(ga, r, c).array() += gm.array().rowwise() * as_mat(g->node(v.id).val, 1, c).row(0).array();
          }
          if (g->node(v.id).needs_grad) {
            Eigen::ArrayXd& gv = g->grad_buffer(v.id);
            Eigen::ArrayXd prod = go * g->node(a.id).val;
            as_mat(gv, 1, c).row(0) += as_mat(prod, r, c).colwise().sum();
          }
        };
      });
}

// ---------------------------------------------------------------------------
// matmul
// ---------------------------------------------------------------------------

Tensor matmul(Tensor a, Tensor b) {
  TS_CHECK(a.graph == b.graph, "matmul: tensors from different graphs");
  TS_CHECK(a.cols() == b.rows(), "matmul: inner dimension mismatch");
  Graph* g = a.graph;
  int m = a.rows(), k = a.cols(), n = b.cols();
  return make_op(
      g, m, n,
      [&] {
        Eigen::ArrayXd out(static_cast<Eigen::Index>(m) * n);
        as_mat(out, m, n) = as_mat(a.value(), m, k) * as_mat(b.value(), k, n);
        return out;
      },
      {a, b},
      [&](int out) {
        return [g, a, b, m, k, n, out]() {
          const Eigen::ArrayXd& go = g->node(out).grad;
          CMapMat gm = as_mat(go, m, n);
          if (g->node(a.id).needs_grad) {
            Eigen::ArrayXd& ga = g->grad_buffer(a.id);
            as_mat(ga, m, k) += gm * as_mat(g->node(b.id).val, k, n).transpose();
          }
          if (g->node(b.id).needs_grad) {
            Eigen::ArrayXd& gb = g->grad_buffer(b.id);
            as_mat(gb, k, n) += as_mat(g->node(a.id).val, m, k).transpose() * gm;
          }
        };
      });
}

Tensor matmul_nt(Tensor a, Tensor b) {
  TS_CHECK(a.graph == b.graph, "matmul_nt: tensors from different graphs");
  TS_CHECK(a.cols() == b.cols(), "matmul_nt: inner dimension mismatch");
  Graph* g = a.graph;
  int m = a.rows(), k = a.cols(), n = b.rows();
  return make_op(
      g, m, n,
      [&] {
        Eigen::ArrayXd out(static_cast<Eigen::Index>(m) * n);
        as_mat(out, m, n) = as_mat(a.value(), m, k) * as_mat(b.value(), n, k).transpose();
        return out;
      },
      {a, b},
      [&](int out) {
        return [g, a, b, m, k, n, out]() {
          const Eigen::ArrayXd& go = g->node(out).grad;
          CMapMat gm = as_mat(go, m, n);
          if (g->node(a.id).needs_grad) {
            Eigen::ArrayXd& ga = g->grad_buffer(a.id);
            as_mat(ga, m, k) += gm * as_mat(g->node(b.id).val, n, k);
          }
          if (g->node(b.id).needs_grad) {
            Eigen::ArrayXd& gb = g->grad_buffer(b.id);
            as_mat(gb, n, k) += gm.transpose() * as_mat(g->node(a.id).val, m, k);
          }
        };
      });
}

// ---------------------------------------------------------------------------
// rows-as-records
// ---------------------------------------------------------------------------

Tensor softmax_rows(Tensor a) {
  Graph* g = a.graph;
  int r = a.rows(), c = a.cols();
  return make_op(
      g, r, c,
      [&] {
        Eigen::ArrayXd out = a.value();
        for (int i = 0; i < r; ++i) {
          auto row = out.segment(static_cast<Eigen::Index>(i) * c, c);
          row -= row.maxCoeff();
          row = row.exp();
          row /= row.sum();
        }
        return out;
      },
      {a},
      [&](int out) {
        return [g, a, r, c, out]() {
          const Eigen::ArrayXd& go = g->node(out).grad;
          const Eigen::ArrayXd& y = g->node(out).val;
          Eigen::ArrayXd& ga = g->grad_buffer(a.id);
          for (int i = 0; i < r; ++i) {
            auto gr = go.segment(static_cast<Eigen::Index>(i) * c, c);
            auto yr = y.segment(static_cast<Eigen::Index>(i) * c, c);
            double dot = (gr * yr).sum();
            ga.segment(static_cast<Eigen::Index>(i) * c, c) += yr * (gr - dot);
          }
        };
      });
}

Tensor layer_norm_rows(Tensor a, double eps) {
  Graph* g = a.graph;
  int r = a.rows(), c = a.cols();
  return make_op(
      g, r, c,
      [&] {
        Eigen::ArrayXd out = a.value();
        for (int i = 0; i < r; ++i) {
          auto row = out.segment(static_cast<Eigen::Index>(i) * c, c);
          double mu = row.mean();
          double var = (row - mu).square().mean();
          row = (row - mu) / std::sqrt(var + eps);
        }
        return out;
      },
      {a},
      [&](int out) {
        return [g, a, r, c, eps, out]() {
          const Eigen::ArrayXd& go = g->node(out).grad;
          const Eigen::ArrayXd& x = g->node(a.id).val;
          const Eigen::ArrayXd& y = g->node(out).val;
          Eigen::ArrayXd& ga = g->grad_buffer(a.id);
          for (int i = 0; i < r; ++i) {
            auto gr = go.segment(static_cast<Eigen::Index>(i) * c, c);
            auto xr = x.segment(static_cast<Eigen::Index>(i) * c, c);
            auto yr = y.segment(static_cast<Eigen::Index>(i) * c, c);
            double mu = xr.mean();
            double var = (xr - mu).square().mean();
            double inv_sigma = 1.0 / std::sqrt(var + eps);
            double g_mean = gr.mean();
            double gy_mean = (gr * yr).mean();
            ga.segment(static_cast<Eigen::Index>(i) * c, c) +=
                inv_sigma * (gr - g_mean - yr * gy_mean);
          }
        };
      });
}

Tensor l2_normalize_rows(Tensor a) {
  Graph* g = a.graph;
  int r = a.rows(), c = a.cols();
  return make_op(
      g, r, c,
      [&] {
        Eigen::ArrayXd out = a.value();
        for (int i = 0; i < r; ++i) {
          auto row = out.segment(static_cast<Eigen::Index>(i) * c, c);
          double norm = std::sqrt(row.square().sum());
          TS_CHECK(norm > 1e-12, "l2_normalize_rows: near-zero row");
          row /= norm;
        }
        return out;
      },
      {a},
      [&](int out) {
        return [g, a, r, c, out]() {
          const Eigen::ArrayXd& go = g->node(out).grad;
          const Eigen::ArrayXd& x = g->node(a.id).val;
          const Eigen::ArrayXd& y = g->node(out).val;
          Eigen::ArrayXd& ga = g->grad_buffer(a.id);
          for (int i = 0; i < r; ++i) {
            auto gr = go.segment(static_cast<Eigen::Index>(i) * c, c);
            auto xr = x.segment(static_cast<Eigen::Index>(i) * c, c);
            auto yr = y.segment(static_cast<Eigen::Index>(i) * c, c);
            double norm = std::sqrt(xr.square().sum());
            double dot = (gr * yr).sum();
            ga.segment(static_cast<Eigen::Index>(i) * c, c) += (gr - yr * dot) / norm;
          }
        };
      });
}

// ---------------------------------------------------------------------------
// structure
// ---------------------------------------------------------------------------

Tensor concat_rows(const std::vector<Tensor>& parts) {
  TS_CHECK(!parts.empty(), "concat_rows: empty input");
  Graph* g = parts[0].graph;
  int c = parts[0].cols();
  int total = 0;
  for (const Tensor& p : parts) {
    TS_CHECK(p.cols() == c, "concat_rows: column mismatch");
    total += p.rows();
  }
  return make_op(
      g, total, c,
      [&] {
        Eigen::ArrayXd out(static_cast<Eigen::Index>(total) * c);
        Eigen::Index off = 0;
        for (const Tensor& p : parts) {
          out.segment(off, p.value().size()) = p.value();
          off += p.value().size();
        }
        return out;
      },
      parts,
      [&](int out) {
        std::vector<Tensor> ps = parts;
        return [g, ps, out]() {
          const Eigen::ArrayXd& go = g->node(out).grad;
          Eigen::Index off = 0;
          for (const Tensor& p : ps) {
            Eigen::Index sz = g->node(p.id).val.size();
            if (g->node(p.id).needs_grad) g->grad_buffer(p.id) += go.segment(off, sz);
            off += sz;
          }
        };
      });
}

Tensor concat_cols(const std::vector<Tensor>& parts) {
  TS_CHECK(!parts.empty(), "concat_cols: empty input");
  Graph* g = parts[0].graph;
  int r = parts[0].rows();
  int total = 0;
  for (const Tensor& p : parts) {
    TS_CHECK(p.rows() == r, "concat_cols: row mismatch");
    total += p.cols();
  }
  return make_op(
      g, r, total,
      [&] {
        Eigen::ArrayXd out(static_cast<Eigen::Index>(r) * total);
        MapMat m = as_mat(out, r, total);
        int off = 0;
        for (const Tensor& p : parts) {
          m.middleCols(off, p.cols()) = as_mat(p.value(), r, p.cols());
          off += p.cols();
        }
        return out;
      },
      parts,
      [&](int out) {
        std::vector<Tensor> ps = parts;
        return [g, ps, r, total, out]() {
          const Eigen::ArrayXd& go = g->node(out).grad;
          CMapMat gm = as_mat(go, r, total);
          int off = 0;
          for (const Tensor& p : ps) {
            int c = g->node(p.id).cols;
            if (g->node(p.id).needs_grad) {
              Eigen::ArrayXd& gp = g->grad_buffer(p.id);
              as_mat(gp, r, c) += gm.middleCols(off, c);
            }
            off += c;
          }
        };
      });
}

Tensor slice_rows(Tensor a, int r0, int r1) {
  TS_CHECK(0 <= r0 && r0 < r1 && r1 <= a.rows(), "slice_rows: bad range");
  Graph* g = a.graph;
  int c = a.cols();
  int r = r1 - r0;
  return make_op(
      g, r, c,
      [&] {
        return Eigen::ArrayXd(
            a.value().segment(static_cast<Eigen::Index>(r0) * c, static_cast<Eigen::Index>(r) * c));
      },
      {a},
      [&](int out) {
        return [g, a, r0, r, c, out]() {
          g->grad_buffer(a.id).segment(static_cast<Eigen::Index>(r0) * c,
                                       static_cast<Eigen::Index>(r) * c) += g->node(out).grad;
        };
      });
}

Tensor slice_cols(Tensor a, int c0, int c1) {
  TS_CHECK(0 <= c0 && c0 < c1 && c1 <= a.cols(), "slice_cols: bad range");
  Graph* g = a.graph;
  int r = a.rows(), c = a.cols(), w = c1 - c0;
  return make_op(
      g, r, w,
      [&] {
        Eigen::ArrayXd out(static_cast<Eigen::Index>(r) * w);
        as_mat(out, r, w) = as_mat(a.value(), r, c).middleCols(c0, w);
        return out;
      },
      {a},
      [&](int out) {
        return [g, a, r, c, c0, w, out]() {
          Eigen::ArrayXd& ga = g->grad_buffer(a.id);
          as_mat(ga, r, c).middleCols(c0, w) += as_mat(g->node(out).grad, r, w);
        };
      });
}

Tensor reshape(Tensor a, int rows, int cols) {
  TS_CHECK(static_cast<Eigen::Index>(rows) * cols == a.value().size(), "reshape: size mismatch");
  Graph* g = a.graph;
  return make_op(
      g, rows, cols, [&] { return a.value(); }, {a},
      [&](int out) {
        return [g, a, out]() { g->grad_buffer(a.id) += g->node(out).grad; };
      });
}

Tensor weighted_gather_rows(Tensor a, const std::vector<std::vector<Tap>>& taps) {
  Graph* g = a.graph;
  int c = a.cols();
  int r_out = static_cast<int>(taps.size());
  return make_op(
      g, r_out, c,
      [&] {
        Eigen::ArrayXd out = Eigen::ArrayXd::Zero(static_cast<Eigen::Index>(r_out) * c);
        const Eigen::ArrayXd& src = a.value();
        for (int i = 0; i < r_out; ++i) {
          auto dst = out.segment(static_cast<Eigen::Index>(i) * c, c);
          for (const Tap& t : taps[i]) {
            TS_CHECK(t.row >= 0 && t.row < a.rows(), "weighted_gather_rows: row out of range");
            dst += t.weight * src.segment(static_cast<Eigen::Index>(t.row) * c, c);
          }
        }
        return out;
      },
      {a},
      [&](int out) {
        auto taps_copy = taps;  // pattern is part of the op
        return [g, a, taps_copy, c, out]() {
          const Eigen::ArrayXd& go = g->node(out).grad;
          Eigen::ArrayXd& ga = g->grad_buffer(a.id);
          for (size_t i = 0; i < taps_copy.size(); ++i) {
            auto src = go.segment(static_cast<Eigen::Index>(i) * c, c);
            for (const Tap& t : taps_copy[i])
              ga.segment(static_cast<Eigen::Index>(t.row) * c, c) += t.weight * src;
          }
        };
      });
}

// ---------------------------------------------------------------------------
// reductions
// ---------------------------------------------------------------------------

Tensor sum_all(Tensor a) {
  Graph* g = a.graph;
  return make_op(
      g, 1, 1, [&] { return Eigen::ArrayXd(Eigen::ArrayXd::Constant(1, a.value().sum())); }, {a},
      [&](int out) {
        return [g, a, out]() { g->grad_buffer(a.id) += g->node(out).grad[0]; };
      });
}

Tensor mean_all(Tensor a) {
  Graph* g = a.graph;
  double inv = 1.0 / static_cast<double>(a.size());
  return make_op(
      g, 1, 1, [&] { return Eigen::ArrayXd(Eigen::ArrayXd::Constant(1, a.value().mean())); }, {a},
      [&](int out) {
        return [g, a, inv, out]() { g->grad_buffer(a.id) += g->node(out).grad[0] * inv; };
      });
}

// ---------------------------------------------------------------------------
// parameter store
// ---------------------------------------------------------------------------

ParamEntry& ParamStore::add(const std::string& name, int rows, int cols, Eigen::ArrayXd value,
                            bool decay) {
  TS_CHECK(!has(name), "ParamStore::add: duplicate name " + name);
  TS_CHECK(value.size() == static_cast<Eigen::Index>(rows) * cols,
           "ParamStore::add: size mismatch for " + name);
  ParamEntry e;
  e.rows = rows;
  e.cols = cols;
  e.value = std::move(value);
  e.decay = decay;
  return entries.emplace(name, std::move(e)).first->second;
}

ParamEntry& ParamStore::at(const std::string& name) {
  auto it = entries.find(name);
  TS_CHECK(it != entries.end(), "ParamStore: missing entry " + name);
  return it->second;
}

const ParamEntry& ParamStore::at(const std::string& name) const {
  auto it = entries.find(name);
  TS_CHECK(it != entries.end(), "ParamStore: missing entry " + name);
  return it->second;
}

size_t ParamStore::scalar_count() const {
  size_t n = 0;
  for (const auto& [_, e] : entries) n += e.value.size();
  return n;
}

void ParamStore::quantize_f32() {
  for (auto& [_, e] : entries)
    for (Eigen::Index i = 0; i < e.value.size(); ++i)
      e.value[i] = static_cast<double>(static_cast<float>(e.value[i]));
}

Tensor ParamBinder::operator()(const std::string& name) {
  auto it = bound_.find(name);
  if (it != bound_.end()) return it->second;
  const ParamEntry& e = store_->at(name);
  Tensor t = g_->param(e.rows, e.cols, e.value);
  bound_.emplace(name, t);
  return t;
}

}  // namespace trisplat::ad
