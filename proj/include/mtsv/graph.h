// include/mtsv/graph.h

// Copyright 2026  The mtsv Authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#ifndef MTSV_GRAPH_H_
#define MTSV_GRAPH_H_

#include <cstddef>
#include <map>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "mtsv/tensor.h"

namespace mtsv {

class Graph;

/// Handle to a node of a Graph.
struct Var {
  Graph *graph = nullptr;
  int id = -1;
  bool valid() const { return graph != nullptr && id >= 0; }
};

/// A named tensor emitted by an op as a side product of its forward pass,
/// e.g. batch statistics of a training-mode batch norm.
struct AuxRecord {
  std::string key;
  Tensor value;
};

/// One operation kind.  Ops may cache forward intermediates for Backward();
/// Backward is only ever called after Forward on the same inputs.
class Op {
 public:
  virtual ~Op() = default;
  virtual std::string Kind() const = 0;
  virtual Tensor Forward(const std::vector<const Tensor *> &in) = 0;
  /// Adds d(root)/d(input) into grads[i]; grads[i] is null when input i
  /// does not need a gradient.
  virtual void Backward(const std::vector<const Tensor *> &in,
                        const Tensor &out, const Tensor &grad_out,
                        const std::vector<Tensor *> &grads) = 0;
  virtual bool PassesGradient() const { return true; }
  /// True when finite inputs always give finite outputs (pure data
  /// movement, selection, relu), so the output scan can be skipped.
  virtual bool PreservesFinite() const { return false; }
  virtual void CollectAux(std::vector<AuxRecord> *) const {}
  /// Appends the branch each element took through a non-smooth piece
  /// (relu side, max-pool winner) for the given inputs.  Smooth ops
  /// append nothing.
  virtual void AppendBranches(const std::vector<const Tensor *> &,
                              std::vector<std::size_t> *) const {}
};

using Bindings = std::unordered_map<std::string, Tensor>;
using GradientMap = std::map<std::string, Tensor>;

/// Expression graph built once and evaluated any number of times.
///
/// Leaves are either named inputs (bound before evaluation, optionally
/// differentiable) or anonymous constants.  Nodes are stored in creation
/// order, which is a topological order because an op can only reference
/// nodes that already exist.
class Graph {
 public:
  Graph() = default;
  Graph(const Graph &) = delete;
  Graph &operator=(const Graph &) = delete;

  /// Declares (or returns the existing) named leaf.
  Var Input(const std::string &name, bool requires_grad = true);
  Var Constant(Tensor value, std::string label = "");
  Var Apply(std::unique_ptr<Op> op, std::vector<Var> inputs,
            std::string label = "");

  void Bind(const std::string &name, Tensor value);
  void Bind(const Bindings &bindings);
  bool HasLeaf(const std::string &name) const;
  const Tensor &Bound(const std::string &name) const;
  std::vector<std::string> LeafNames() const;
  bool RequiresGrad(const std::string &name) const;

  /// Runs every node in order and returns the root value.  Throws
  /// ShapeError naming the node on incompatible operands and NumericError
  /// when any node produces NaN or Inf.
  const Tensor &Evaluate(Var root);
  const Tensor &Evaluate(const Bindings &bindings, Var root);

  const Tensor &Value(Var v) const;

  /// Reverse-mode pass from a scalar root.  Leaves that do not reach the
  /// root (or are not differentiable) receive zero tensors.
  GradientMap Gradients(Var root, const std::vector<std::string> &wrt);

  /// Side products published during the most recent Evaluate, in node order.
  const std::vector<AuxRecord> &aux() const { return aux_; }

  std::size_t num_nodes() const { return nodes_.size(); }
  /// Number of op nodes visited by the most recent Gradients call.
  std::size_t last_backward_visits() const { return last_backward_visits_; }
  /// Longest chain of op nodes from any leaf to v.
  std::size_t Depth(Var v) const;
  std::string Describe(Var v) const;
  /// Branches taken by every non-smooth op in the most recent evaluation.
  /// Two bindings with equal signatures lie on the same smooth piece.
  std::vector<std::size_t> BranchSignature() const;

 private:
  struct Node {
    std::unique_ptr<Op> op;  // null for leaves
    std::vector<int> inputs;
    Tensor value;
    std::string name;  // leaf name or label
    bool is_leaf = false;
    bool is_named_input = false;
    bool requires_grad = false;
    bool bound = false;
  };

  const Node &NodeOf(Var v) const;
  void EvaluateAll();

  std::vector<Node> nodes_;
  std::unordered_map<std::string, int> leaf_index_;
  std::vector<AuxRecord> aux_;
  std::size_t last_backward_visits_ = 0;
  bool evaluated_ = false;
};

/// Maximum over the elements of `leaf` of the relative error between the
/// analytic gradient and central differences with step `epsilon`, using the
/// denominator max(|a|, |n|, 1e-8).  The graph must already be bound.
/// The leaf's bound value is restored before returning.
double FiniteDifferenceCheck(Graph *graph, Var root, const std::string &leaf,
                             double epsilon);

}  // namespace mtsv

#endif  // MTSV_GRAPH_H_
