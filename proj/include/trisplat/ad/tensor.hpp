#pragma once

// Reverse-mode automatic differentiation over 2-D double tensors.
//
// A Graph is a tape of nodes created in program order; backward() walks the
// tape in reverse from a scalar loss and accumulates adjoints. Tensors are
// cheap handles (graph pointer + node id). All shapes are [rows, cols] with
// row-major storage; anything image- or volume-shaped is flattened so that
// rows index space and cols index channels.
//
// Graphs built with grad_enabled=false skip closure allocation entirely and
// serve as plain forward evaluators for inference paths.

#include <Eigen/Dense>
#include <array>
#include <functional>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "trisplat/core/check.hpp"
#include "trisplat/core/random.hpp"

namespace trisplat::ad {

class Graph;

struct Tensor {
  Graph* graph = nullptr;
  int id = -1;

  bool valid() const { return graph != nullptr && id >= 0; }
  int rows() const;
  int cols() const;
  size_t size() const { return static_cast<size_t>(rows()) * cols(); }
  const Eigen::ArrayXd& value() const;
  double scalar() const;
};

class Graph {
 public:
  struct Node {
    int rows = 0;
    int cols = 0;
    Eigen::ArrayXd val;
    Eigen::ArrayXd grad;  // empty until touched by backward()
    bool needs_grad = false;
    std::function<void()> backprop;  // empty for leaves and no-grad nodes
  };

  explicit Graph(bool grad_enabled = true) : grad_enabled_(grad_enabled) {}
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  bool grad_enabled() const { return grad_enabled_; }

  Tensor param(int rows, int cols, Eigen::ArrayXd data);     // differentiable leaf
  Tensor constant(int rows, int cols, Eigen::ArrayXd data);  // fixed leaf
  Tensor constant_scalar(double v) { return constant(1, 1, Eigen::ArrayXd::Constant(1, v)); }

  // Registers a computed node. needs_grad is inherited from parents; the
  // backprop closure is only stored when some parent needs a gradient.
  Tensor adopt(int rows, int cols, Eigen::ArrayXd val, const std::vector<Tensor>& parents,
               std::function<void()> backprop);

  // Runs reverse accumulation from a scalar loss. Each graph supports one
  // backward pass; build a fresh graph per step.
  void backward(Tensor loss);

  Node& node(int id) { return nodes_[id]; }
  const Node& node(int id) const { return nodes_[id]; }
  size_t node_count() const { return nodes_.size(); }

  // Adjoint of t after backward(); zeros if t never influenced the loss.
  Eigen::ArrayXd grad_of(Tensor t) const;

  // Lazily allocates and returns the adjoint buffer (used by backprop closures).
  Eigen::ArrayXd& grad_buffer(int id);

 private:
  std::vector<Node> nodes_;
  bool grad_enabled_ = true;
  bool backward_done_ = false;
};

// ---- elementwise ----
Tensor add(Tensor a, Tensor b);
Tensor sub(Tensor a, Tensor b);
Tensor mul(Tensor a, Tensor b);
Tensor scale(Tensor a, double s);
Tensor add_scalar(Tensor a, double s);
Tensor square(Tensor a);
Tensor sigmoid(Tensor a);
Tensor tanh_op(Tensor a);
Tensor leaky_relu(Tensor a, double slope);
Tensor gelu(Tensor a);
Tensor clamp(Tensor a, double lo, double hi);            // zero gradient outside [lo,hi]
Tensor charbonnier(Tensor a, double eps);                // sqrt(x^2 + eps^2), smooth |x|

// ---- broadcast over rows (v is 1 x cols) ----
Tensor add_rowvec(Tensor a, Tensor v);
Tensor mul_rowvec(Tensor a, Tensor v);

// ---- linear algebra ----
Tensor matmul(Tensor a, Tensor b);     // [m,k]x[k,n]
Tensor matmul_nt(Tensor a, Tensor b);  // a * b^T, a[m,k] b[n,k] -> [m,n]

// ---- rows-as-records ops ----
Tensor softmax_rows(Tensor a);
Tensor layer_norm_rows(Tensor a, double eps = 1e-6);  // non-affine; pair with mul/add_rowvec
Tensor l2_normalize_rows(Tensor a);                   // throws on a near-zero row

// ---- structure ----
Tensor concat_rows(const std::vector<Tensor>& parts);
Tensor concat_cols(const std::vector<Tensor>& parts);
Tensor slice_rows(Tensor a, int r0, int r1);
Tensor slice_cols(Tensor a, int c0, int c1);
Tensor reshape(Tensor a, int rows, int cols);

// Sparse fixed-pattern linear map: out[i,:] = sum_k w_ik * a[row_ik,:].
// Covers bilinear plane sampling, pooling and finite-difference stencils.
struct Tap {
  int row;
  double weight;
};
Tensor weighted_gather_rows(Tensor a, const std::vector<std::vector<Tap>>& taps);

// ---- reductions ----
Tensor sum_all(Tensor a);
Tensor mean_all(Tensor a);

// ---- named parameter storage (training state) ----
struct ParamEntry {
  int rows = 0;
  int cols = 0;
  Eigen::ArrayXd value;
  bool decay = true;  // false for biases and normalization parameters
};

struct ParamStore {
  std::map<std::string, ParamEntry> entries;  // ordered: deterministic iteration

  ParamEntry& add(const std::string& name, int rows, int cols, Eigen::ArrayXd value,
                  bool decay = true);
  bool has(const std::string& name) const { return entries.count(name) > 0; }
  ParamEntry& at(const std::string& name);
  const ParamEntry& at(const std::string& name) const;
  size_t scalar_count() const;
  // Rounds every value through float32 so checkpoints round-trip bitwise.
  void quantize_f32();
};

// Binds store entries into a graph as parameter leaves, remembering ids so
// gradients can be read back by name after backward().
class ParamBinder {
 public:
  ParamBinder(Graph& g, const ParamStore& store) : g_(&g), store_(&store) {}
  Tensor operator()(const std::string& name);
  const std::map<std::string, Tensor>& bound() const { return bound_; }

 private:
  Graph* g_;
  const ParamStore* store_;
  std::map<std::string, Tensor> bound_;
};

}  // namespace trisplat::ad
