#pragma once

#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "gridnav/numcore/array.hpp"

namespace numcore {

class Graph;

// Named parameter with gradient accumulator and AdamW moment state.
struct ParamTensor {
  Array value;
  Array grad;
  Array m;
  Array v;
};

class ParamStore {
 public:
  Array& create(const std::string& name, Array init);
  bool has(const std::string& name) const { return table_.count(name) != 0; }
  ParamTensor& entry(const std::string& name);
  const ParamTensor& entry(const std::string& name) const;
  Array& value(const std::string& name) { return entry(name).value; }
  Array& grad(const std::string& name) { return entry(name).grad; }
  void zero_grads();
  std::vector<std::string> names() const;
  int64_t param_count() const;
  int64_t step_count = 0;  // AdamW bias-correction step

  std::map<std::string, ParamTensor>& table() { return table_; }
  const std::map<std::string, ParamTensor>& table() const { return table_; }

 private:
  std::map<std::string, ParamTensor> table_;
};

// Handle to a node on a Graph's tape.
class Var {
 public:
  Var() : g_(nullptr), idx_(-1) {}
  Var(Graph* g, int idx) : g_(g), idx_(idx) {}
  const Array& value() const;
  const std::vector<int>& shape() const;
  bool valid() const { return g_ != nullptr; }
  int index() const { return idx_; }
  Graph* graph() const { return g_; }

 private:
  Graph* g_;
  int idx_;
};

// Dynamic tape: ops append nodes in execution order, backward() sweeps the
// tape in exact reverse order (creation order is a topological order).
class Graph {
 public:
  struct Node {
    Array value;
    Array grad;  // allocated on demand during backward
    bool requires_grad = false;
    const char* op = "leaf";
    std::function<void(Graph&, int)> backprop;  // pulls this node's grad into parents
    ParamStore* store = nullptr;                // set for parameter leaves
    std::string param_name;
  };

  // --- leaves ---
  Var input(Array v);                                  // no gradient
  Var constant(Array v) { return input(std::move(v)); }
  Var param(ParamStore& ps, const std::string& name);  // gradient flows to store

  // --- primitive ops ---
  Var add(Var a, Var b);      // same shape, or b broadcast over the last axis
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);      // same shape, or b broadcast over the last axis
  Var scale(Var a, float s);
  Var add_scalar(Var a, float s);
  Var matmul(Var a, Var b, bool transpose_b = false);  // 2-D
  Var conv2d(Var x, Var w, Var bias, int stride, int pad);  // x [N,C,H,W], w [OC,C,kh,kw]
  Var relu(Var a);
  Var gelu(Var a);
  Var softmax(Var a);                                // over last axis
  Var layernorm(Var x, Var gain, Var bias);          // over last axis, eps 1e-5
  Var reshape(Var a, std::vector<int> s);
  Var concat(const std::vector<Var>& parts, int axis);
  Var slice(Var a, int axis, int start, int len);
  Var mean(Var a);       // full reduction -> [1]
  Var sum(Var a);        // full reduction -> [1]
  Var mean_rows(Var a);  // reduce last axis

  // --- composites ---
  Var mse(Var pred, Var target);  // mean squared error -> [1]

  // Reverse sweep from a scalar loss; accumulates parameter-leaf gradients
  // into their ParamStore entries.
  void backward(Var loss);

  const Array& value(Var v) const { return node(v.index()).value; }
  const Array& grad(Var v) const;

  Node& node(int i) { return tape_[i]; }
  const Node& node(int i) const { return tape_[i]; }
  size_t size() const { return tape_.size(); }
  void clear() { tape_.clear(); }

 private:
  friend class Var;
  int push(Node n);
  Var make(const char* op, Array value, std::vector<int> parents,
           std::function<void(Graph&, int)> backprop);
  void ensure_grad(int idx);
  void accumulate(int idx, const float* g, int64_t n);

  std::vector<Node> tape_;
};

}  // namespace numcore
