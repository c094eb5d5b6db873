#pragma once

#include <cstdint>
#include <initializer_list>
#include <string>
#include <vector>

#include "errors.hpp"
#include "rng.hpp"

namespace groundnet {

using Vec = std::vector<double>;

struct Shape {
  std::vector<int> d;

  Shape() = default;
  Shape(std::initializer_list<int> dims) : d(dims) {}
  explicit Shape(std::vector<int> dims) : d(std::move(dims)) {}

  int rank() const { return static_cast<int>(d.size()); }
  int operator[](int i) const { return d[i]; }
  int numel() const {
    int n = 1;
    for (int x : d) n *= x;
    return n;
  }
  bool operator==(const Shape& o) const { return d == o.d; }
  std::string str() const;
};

// A named, trainable flat array. Gradients start empty and are sized by
// zero_grad() or by the first accumulation.
struct ParamTensor {
  std::string name;
  Shape shape;
  Vec data;
  Vec grad;
};

class ParamStore {
 public:
  int add(std::string name, Shape shape);
  int add_uniform(std::string name, Shape shape, double bound, Rng& rng);
  ParamTensor& operator[](int id) { return tensors_[id]; }
  const ParamTensor& operator[](int id) const { return tensors_[id]; }
  int size() const { return static_cast<int>(tensors_.size()); }
  int find(const std::string& name) const;  // -1 if absent
  void zero_grad();
  int total_parameters() const;
  // Flat gradient buffer, tensors concatenated in id order.
  void add_gradients_to(Vec& flat) const;
  void set_gradients_from(const Vec& flat);
  void scale_gradients(double s);

 private:
  std::vector<ParamTensor> tensors_;
};

class Tape;

// Handle to a node on a Tape.
struct Var {
  Tape* tape = nullptr;
  int id = -1;
  bool valid() const { return tape != nullptr && id >= 0; }
};

// Reverse-mode tape. One Tape owns one forward graph; backward() walks the
// nodes once in reverse insertion order.
class Tape {
 public:
  Var input(Shape shape, Vec data);
  Var input(Shape shape, const double* data, int n);
  // Leaf that participates in backward (for probing d loss / d input).
  Var input_grad(Shape shape, Vec data);
  Var scalar(double v);
  Var param(const ParamStore& store, int param_id);

  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);
  Var scale(Var a, double c);
  Var add_rowvec(Var mat, Var row);
  Var matmul(Var a, Var b);
  Var transpose(Var a);
  Var tanh(Var a);
  Var sigmoid(Var a);
  Var relu(Var a);
  Var softmax(Var v);
  Var row_softmax(Var m);
  Var log_softmax(Var v);
  Var sum(Var a);
  Var mean(Var a);
  Var mean_squared_error(Var a, Var b);
  Var reshape(Var a, Shape s);
  Var slice(Var a, int offset, int len);
  Var concat(const std::vector<Var>& parts);
  Var concat_cols(const std::vector<Var>& mats);
  Var gather_rows(Var mat, std::vector<int> rows);
  Var pick(Var v, int index);
  Var masked_max(Var v);
  Var masked_max(const std::vector<Var>& scalars);
  Var segment_max(Var v, std::vector<int> segments, int num_segments);
  // Cross-correlation, symmetric zero padding (kh-1)/2, odd kernels only.
  // input H x W x C, kernel kh x kw x C x F, optional per-filter bias.
  Var conv2d(Var input, Var kernel, int stride);
  Var conv2d(Var input, Var kernel, Var bias, int stride);
  // input h x w x C, kernel kh x kw x C x F -> (h*stride) x (w*stride) x F.
  Var conv_transpose2d(Var input, Var kernel, Var bias, int stride);
  // Per-row MLP with per-row weights: row p of params holds
  // [W1 (a1 x U) | W2 (a2 x a1) | W3 (a2)] (a trailing remainder is ignored);
  // output[p] = W3 . tanh(W2 . tanh(W1 . pairs[p])).
  Var dynamic_relation(Var params, Var pairs, int a1, int a2);
  // beta (3) -> beta0*G1 + beta1*G2 + beta2*J with G1[i][j] = j/(n-1),
  // G2[i][j] = i/(m-1), J all ones.
  Var ramp_combine(Var beta, int m, int n);
  Var stack_channels(Var a, Var b);  // two m x n maps -> m x n x 2

  void backward(Var loss);
  void zero_grad();

  const Shape& shape(Var v) const;
  const Vec& value(Var v) const;
  const Vec& grad(Var v) const;
  double scalar_value(Var v) const;

  void accumulate_param_grads(ParamStore& store) const;
  // Accumulates into a flat buffer laid out like ParamStore::add_gradients_to.
  void accumulate_param_grads_flat(Vec& flat, const ParamStore& store) const;

  size_t node_count() const { return nodes_.size(); }

 private:
  enum class OpKind : uint8_t {
    kLeaf,
    kParam,
    kAdd,
    kSub,
    kMul,
    kScale,
    kAddRowVec,
    kMatMul,
    kTranspose,
    kTanh,
    kSigmoid,
    kRelu,
    kSoftmax,
    kRowSoftmax,
    kLogSoftmax,
    kSum,
    kMean,
    kReshape,
    kSlice,
    kConcat,
    kConcatCols,
    kGatherRows,
    kPick,
    kMaskedMax,
    kSegmentMax,
    kConv2d,
    kConvTranspose2d,
    kDynamicRelation,
    kRampCombine,
    kStackChannels,
  };

  struct Node {
    OpKind op;
    Shape shape;
    Vec value;
    Vec grad;
    Vec aux;               // cached intermediates
    std::vector<int> in;   // input node ids
    std::vector<int> idx;  // integer payload (gather rows, segments, argmax)
    int i0 = 0, i1 = 0, i2 = 0, i3 = 0;
    double x0 = 0.0;
    int param_id = -1;
    bool needs_grad = false;
  };

  int push(Node n);
  Node& node(Var v);
  const Node& node(Var v) const;
  Vec& grad_buffer(int id);
  void backward_node(int id);

  std::vector<Node> nodes_;
};

}  // namespace groundnet
