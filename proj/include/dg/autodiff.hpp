#pragma once

#include <cstddef>
#include <functional>
#include <vector>

namespace dg {

/// Reverse-mode tape over vector-valued nodes. All arithmetic is double;
/// affine weights are read from their f32 storage without copying, so the
/// referenced parameters must outlive the tape. Build a fresh tape per
/// scalar whose input gradient is wanted — tapes are cheap and single-use.
class Tape {
 public:
  using Node = int;

  /// Leaf node. Gradients accumulate on leaves like everywhere else;
  /// read them back with grad() after backward().
  Node leaf(std::vector<double> v);

  /// y = W x + b with W row-major [out_dim x in_dim].
  Node affine(Node x, int out_dim, int in_dim, const float* w, const float* b);

  /// Elementwise a*x + b*y (same length).
  Node axpby(double a, Node x, double b, Node y);

  /// Elementwise a*x + c with constant c (pass empty c for pure scaling).
  Node scale_shift(double a, Node x, std::vector<double> c);

  /// x * sigmoid(x), elementwise.
  Node silu(Node x);

  /// Elementwise product.
  Node mul(Node x, Node y);

  Node concat(const std::vector<Node>& xs);
  Node slice(Node x, std::size_t offset, std::size_t len);

  /// log softmax over the whole vector.
  Node log_softmax(Node x);

  /// log softmax over each consecutive group of `group` entries.
  Node log_softmax_groups(Node x, int group);

  /// y_j = x[idx[j]] (indices may repeat).
  Node gather(Node x, std::vector<std::size_t> idx);

  Node sum(Node x);
  Node mean(Node x);

  const std::vector<double>& value(Node n) const { return recs_[n].val; }
  const std::vector<double>& grad(Node n) const { return recs_[n].grad; }

  /// Seeds d(scalar)=1 and propagates to every earlier node.
  void backward(Node scalar);

  std::size_t node_count() const { return recs_.size(); }

 private:
  struct Rec {
    std::vector<double> val;
    std::vector<double> grad;                 // sized with val, zero-filled
    std::function<void(Tape&, int)> back;     // null for leaves
  };

  Node push(std::vector<double> val, std::function<void(Tape&, int)> back);
  std::vector<Rec> recs_;
};

}  // namespace dg
