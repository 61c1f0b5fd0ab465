// src/graph.cc

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

#include "mtsv/graph.h"

#include <algorithm>
#include <cmath>

#include "mtsv/error.h"

namespace mtsv {

Var Graph::Input(const std::string &name, bool requires_grad) {
  auto it = leaf_index_.find(name);
  if (it != leaf_index_.end()) {
    if (nodes_[it->second].requires_grad != requires_grad)
      throw ContractError("leaf '" + name +
                          "' redeclared with a different requires_grad");
    return Var{this, it->second};
  }
  Node n;
  n.name = name;
  n.is_leaf = true;
  n.is_named_input = true;
  n.requires_grad = requires_grad;
  nodes_.push_back(std::move(n));
  int id = static_cast<int>(nodes_.size()) - 1;
  leaf_index_[name] = id;
  return Var{this, id};
}

Var Graph::Constant(Tensor value, std::string label) {
  Node n;
  n.name = std::move(label);
  n.is_leaf = true;
  n.value = std::move(value);
  n.bound = true;
  nodes_.push_back(std::move(n));
  return Var{this, static_cast<int>(nodes_.size()) - 1};
}

Var Graph::Apply(std::unique_ptr<Op> op, std::vector<Var> inputs,
                 std::string label) {
  Node n;
  n.op = std::move(op);
  n.name = std::move(label);
  for (const Var &v : inputs) {
    if (v.graph != this || v.id < 0 ||
        v.id >= static_cast<int>(nodes_.size()))
      throw ContractError("op '" + n.op->Kind() +
                          "' references a node from another graph");
    n.inputs.push_back(v.id);
  }
  nodes_.push_back(std::move(n));
  return Var{this, static_cast<int>(nodes_.size()) - 1};
}

void Graph::Bind(const std::string &name, Tensor value) {
  auto it = leaf_index_.find(name);
  if (it == leaf_index_.end())
    throw ContractError("no leaf named '" + name + "' in graph");
  Node &n = nodes_[it->second];
  n.value = std::move(value);
  n.bound = true;
}

void Graph::Bind(const Bindings &bindings) {
  for (const auto &[name, value] : bindings)
    if (leaf_index_.count(name)) Bind(name, value);
}

bool Graph::HasLeaf(const std::string &name) const {
  return leaf_index_.count(name) > 0;
}

const Tensor &Graph::Bound(const std::string &name) const {
  auto it = leaf_index_.find(name);
  if (it == leaf_index_.end())
    throw ContractError("no leaf named '" + name + "' in graph");
  return nodes_[it->second].value;
}

bool Graph::RequiresGrad(const std::string &name) const {
  auto it = leaf_index_.find(name);
  return it != leaf_index_.end() && nodes_[it->second].requires_grad;
}

std::vector<std::string> Graph::LeafNames() const {
  std::vector<std::string> names;
  for (const Node &n : nodes_)
    if (n.is_named_input) names.push_back(n.name);
  return names;
}

const Graph::Node &Graph::NodeOf(Var v) const {
  if (v.graph != this || v.id < 0 || v.id >= static_cast<int>(nodes_.size()))
    throw ContractError("variable does not belong to this graph");
  return nodes_[v.id];
}

std::string Graph::Describe(Var v) const {
  const Node &n = NodeOf(v);
  std::string kind = n.is_leaf ? "leaf" : n.op->Kind();
  std::string s = "node #" + std::to_string(v.id) + " (" + kind;
  if (!n.name.empty()) s += " '" + n.name + "'";
  return s + ")";
}

std::vector<std::size_t> Graph::BranchSignature() const {
  if (!evaluated_) throw ContractError("BranchSignature called before Evaluate");
  std::vector<std::size_t> out;
  std::vector<const Tensor *> in;
  for (const Node &n : nodes_) {
    if (n.is_leaf) continue;
    in.clear();
    for (int j : n.inputs) in.push_back(&nodes_[j].value);
    n.op->AppendBranches(in, &out);
  }
  return out;
}

void Graph::EvaluateAll() {
  aux_.clear();
  std::vector<const Tensor *> in;
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    Node &n = nodes_[i];
    if (n.is_leaf) {
      if (!n.bound)
        throw ContractError("leaf '" + n.name + "' is not bound");
      if (!n.value.AllFinite())
        throw NumericError("leaf '" + n.name + "' holds a non-finite value");
      continue;
    }
    in.clear();
    for (int j : n.inputs) in.push_back(&nodes_[j].value);
    try {
      n.value = n.op->Forward(in);
    } catch (const ShapeError &e) {
      throw ShapeError(Describe(Var{this, static_cast<int>(i)}) + ": " +
                       e.what());
    } catch (const ContractError &e) {
      throw ContractError(Describe(Var{this, static_cast<int>(i)}) + ": " +
                          e.what());
    }
    if (!n.op->PreservesFinite() && !n.value.AllFinite())
      throw NumericError(Describe(Var{this, static_cast<int>(i)}) +
                         " produced a non-finite value");
    n.op->CollectAux(&aux_);
  }
  evaluated_ = true;
}

const Tensor &Graph::Evaluate(Var root) {
  NodeOf(root);
  EvaluateAll();
  return nodes_[root.id].value;
}

const Tensor &Graph::Evaluate(const Bindings &bindings, Var root) {
  Bind(bindings);
  return Evaluate(root);
}

const Tensor &Graph::Value(Var v) const { return NodeOf(v).value; }

std::size_t Graph::Depth(Var v) const {
  NodeOf(v);
  std::vector<std::size_t> depth(v.id + 1, 0);
  for (int i = 0; i <= v.id; ++i) {
    const Node &n = nodes_[i];
    if (n.is_leaf) continue;
    std::size_t d = 0;
    for (int j : n.inputs) d = std::max(d, depth[j]);
    depth[i] = d + 1;
  }
  return depth[v.id];
}

GradientMap Graph::Gradients(Var root, const std::vector<std::string> &wrt) {
  const Node &r = NodeOf(root);
  if (!evaluated_) throw ContractError("Gradients called before Evaluate");
  if (r.value.size() != 1)
    throw ContractError("gradient root must be scalar, got shape " +
                        ShapeToString(r.value.shape()));
  const std::size_t count = root.id + 1;
  std::vector<char> needs(count, 0), reach(count, 0);
  for (std::size_t i = 0; i < count; ++i) {
    const Node &n = nodes_[i];
    if (n.is_leaf) {
      needs[i] = n.requires_grad;
    } else if (n.op->PassesGradient()) {
      for (int j : n.inputs)
        if (needs[j]) needs[i] = 1;
    }
  }
  reach[root.id] = 1;
  for (int i = root.id; i >= 0; --i) {
    if (!reach[i] || nodes_[i].is_leaf) continue;
    for (int j : nodes_[i].inputs) reach[j] = 1;
  }

  std::vector<Tensor> grad(count);
  grad[root.id] = Tensor(r.value.shape(), 1.0);
  last_backward_visits_ = 0;
  std::vector<const Tensor *> in;
  std::vector<Tensor *> gin;
  for (int i = root.id; i >= 0; --i) {
    Node &n = nodes_[i];
    if (n.is_leaf || !reach[i] || !needs[i] || grad[i].empty()) continue;
    ++last_backward_visits_;
    in.clear();
    gin.clear();
    for (int j : n.inputs) {
      in.push_back(&nodes_[j].value);
      if (needs[j] && n.op->PassesGradient()) {
        if (grad[j].empty()) grad[j] = Tensor(nodes_[j].value.shape(), 0.0);
        gin.push_back(&grad[j]);
      } else {
        gin.push_back(nullptr);
      }
    }
    n.op->Backward(in, n.value, grad[i], gin);
    // Inputs shared by several uses accumulate; this node's buffer is done.
    grad[i] = Tensor();
  }

  GradientMap out;
  for (const std::string &name : wrt) {
    auto it = leaf_index_.find(name);
    if (it == leaf_index_.end())
      throw ContractError("gradient requested for unknown leaf '" + name +
                          "'");
    const Node &leaf = nodes_[it->second];
    if (it->second < static_cast<int>(count) && !grad[it->second].empty())
      out[name] = std::move(grad[it->second]);
    else
      out[name] = Tensor(leaf.value.shape(), 0.0);
  }
  return out;
}

double FiniteDifferenceCheck(Graph *graph, Var root, const std::string &leaf,
                             double epsilon) {
  if (!(epsilon > 0.0 && epsilon <= 1e-2))
    throw ContractError("finite-difference epsilon must lie in (0, 1e-2]");
  graph->Evaluate(root);
  const Tensor analytic = graph->Gradients(root, {leaf}).at(leaf);
  const Tensor base = graph->Bound(leaf);
  Tensor probe = base;
  double worst = 0.0;
  for (std::size_t i = 0; i < base.size(); ++i) {
    probe[i] = base[i] + epsilon;
    graph->Bind(leaf, probe);
    const double up = graph->Evaluate(root)[0];
    probe[i] = base[i] - epsilon;
    graph->Bind(leaf, probe);
    const double down = graph->Evaluate(root)[0];
    probe[i] = base[i];
    const double numeric = (up - down) / (2.0 * epsilon);
    const double a = analytic[i];
    const double denom = std::max({std::abs(a), std::abs(numeric), 1e-8});
    worst = std::max(worst, std::abs(a - numeric) / denom);
  }
  graph->Bind(leaf, base);
  graph->Evaluate(root);
  return worst;
}

}  // namespace mtsv
