#include "tensor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace groundnet {

std::string Shape::str() const {
  std::ostringstream os;
  os << "[";
  for (size_t i = 0; i < d.size(); ++i) {
    if (i) os << "x";
    os << d[i];
  }
  os << "]";
  return os.str();
}

int ParamStore::add(std::string name, Shape shape) {
  ParamTensor t;
  t.name = std::move(name);
  t.shape = std::move(shape);
  t.data.assign(t.shape.numel(), 0.0);
  tensors_.push_back(std::move(t));
  return static_cast<int>(tensors_.size()) - 1;
}

int ParamStore::add_uniform(std::string name, Shape shape, double bound,
                            Rng& rng) {
  const int id = add(std::move(name), std::move(shape));
  for (double& x : tensors_[id].data) x = rng.uniform(-bound, bound);
  return id;
}

int ParamStore::find(const std::string& name) const {
  for (int i = 0; i < size(); ++i) {
    if (tensors_[i].name == name) return i;
  }
  return -1;
}

void ParamStore::zero_grad() {
  for (auto& t : tensors_) t.grad.assign(t.data.size(), 0.0);
}

int ParamStore::total_parameters() const {
  int n = 0;
  for (const auto& t : tensors_) n += static_cast<int>(t.data.size());
  return n;
}

void ParamStore::add_gradients_to(Vec& flat) const {
  if (flat.empty()) flat.assign(total_parameters(), 0.0);
  size_t off = 0;
  for (const auto& t : tensors_) {
    if (!t.grad.empty()) {
      for (size_t i = 0; i < t.grad.size(); ++i) flat[off + i] += t.grad[i];
    }
    off += t.data.size();
  }
}

void ParamStore::set_gradients_from(const Vec& flat) {
  size_t off = 0;
  for (auto& t : tensors_) {
    t.grad.assign(flat.begin() + off, flat.begin() + off + t.data.size());
    off += t.data.size();
  }
}

void ParamStore::scale_gradients(double s) {
  for (auto& t : tensors_) {
    for (double& g : t.grad) g *= s;
  }
}

// ---------------------------------------------------------------------------

int Tape::push(Node n) {
  nodes_.push_back(std::move(n));
  return static_cast<int>(nodes_.size()) - 1;
}

Tape::Node& Tape::node(Var v) { return nodes_[v.id]; }
const Tape::Node& Tape::node(Var v) const { return nodes_[v.id]; }

Vec& Tape::grad_buffer(int id) {
  Node& n = nodes_[id];
  if (n.grad.empty()) n.grad.assign(n.value.size(), 0.0);
  return n.grad;
}

const Shape& Tape::shape(Var v) const { return node(v).shape; }
const Vec& Tape::value(Var v) const { return node(v).value; }
const Vec& Tape::grad(Var v) const { return node(v).grad; }

double Tape::scalar_value(Var v) const {
  const Node& n = node(v);
  if (n.value.size() != 1) {
    throw DimensionError("scalar_value on tensor of shape " + n.shape.str());
  }
  return n.value[0];
}

Var Tape::input(Shape shape, Vec data) {
  if (static_cast<int>(data.size()) != shape.numel()) {
    throw DimensionError("input data length " + std::to_string(data.size()) +
                         " does not match shape " + shape.str());
  }
  Node n;
  n.op = OpKind::kLeaf;
  n.shape = std::move(shape);
  n.value = std::move(data);
  return {this, push(std::move(n))};
}

Var Tape::input(Shape shape, const double* data, int count) {
  return input(std::move(shape), Vec(data, data + count));
}

Var Tape::input_grad(Shape shape, Vec data) {
  Var v = input(std::move(shape), std::move(data));
  nodes_[v.id].needs_grad = true;
  return v;
}

Var Tape::scalar(double v) { return input(Shape{1}, Vec{v}); }

Var Tape::param(const ParamStore& store, int param_id) {
  const ParamTensor& t = store[param_id];
  Node n;
  n.op = OpKind::kParam;
  n.shape = t.shape;
  n.value = t.data;
  n.param_id = param_id;
  n.needs_grad = true;
  return {this, push(std::move(n))};
}

namespace {
void check_same_shape(const char* op, const Shape& a, const Shape& b) {
  if (!(a == b)) {
    throw DimensionError(std::string(op) + ": shape mismatch " + a.str() +
                         " vs " + b.str());
  }
}
}  // namespace

Var Tape::add(Var a, Var b) {
  check_same_shape("add", shape(a), shape(b));
  Node n;
  n.op = OpKind::kAdd;
  n.shape = shape(a);
  n.in = {a.id, b.id};
  n.needs_grad = node(a).needs_grad || node(b).needs_grad;
  const Vec& va = value(a);
  const Vec& vb = value(b);
  n.value.resize(va.size());
  for (size_t i = 0; i < va.size(); ++i) n.value[i] = va[i] + vb[i];
  return {this, push(std::move(n))};
}

Var Tape::sub(Var a, Var b) {
  check_same_shape("sub", shape(a), shape(b));
  Node n;
  n.op = OpKind::kSub;
  n.shape = shape(a);
  n.in = {a.id, b.id};
  n.needs_grad = node(a).needs_grad || node(b).needs_grad;
  const Vec& va = value(a);
  const Vec& vb = value(b);
  n.value.resize(va.size());
  for (size_t i = 0; i < va.size(); ++i) n.value[i] = va[i] - vb[i];
  return {this, push(std::move(n))};
}

Var Tape::mul(Var a, Var b) {
  check_same_shape("mul", shape(a), shape(b));
  Node n;
  n.op = OpKind::kMul;
  n.shape = shape(a);
  n.in = {a.id, b.id};
  n.needs_grad = node(a).needs_grad || node(b).needs_grad;
  const Vec& va = value(a);
  const Vec& vb = value(b);
  n.value.resize(va.size());
  for (size_t i = 0; i < va.size(); ++i) n.value[i] = va[i] * vb[i];
  return {this, push(std::move(n))};
}

Var Tape::scale(Var a, double c) {
  Node n;
  n.op = OpKind::kScale;
  n.shape = shape(a);
  n.in = {a.id};
  n.x0 = c;
  n.needs_grad = node(a).needs_grad;
  const Vec& va = value(a);
  n.value.resize(va.size());
  for (size_t i = 0; i < va.size(); ++i) n.value[i] = c * va[i];
  return {this, push(std::move(n))};
}

Var Tape::add_rowvec(Var mat, Var row) {
  const Shape& sm = shape(mat);
  const Shape& sr = shape(row);
  if (sm.rank() != 2 || sr.numel() != sm[1]) {
    throw DimensionError("add_rowvec: " + sm.str() + " vs " + sr.str());
  }
  Node n;
  n.op = OpKind::kAddRowVec;
  n.shape = sm;
  n.in = {mat.id, row.id};
  n.needs_grad = node(mat).needs_grad || node(row).needs_grad;
  const Vec& vm = value(mat);
  const Vec& vr = value(row);
  const int rows = sm[0], cols = sm[1];
  n.value.resize(vm.size());
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < cols; ++j) {
      n.value[i * cols + j] = vm[i * cols + j] + vr[j];
    }
  }
  return {this, push(std::move(n))};
}

Var Tape::matmul(Var a, Var b) {
  const Shape& sa = shape(a);
  const Shape& sb = shape(b);
  if (sa.rank() != 2 || sb.rank() != 2 || sa[1] != sb[0]) {
    throw DimensionError("matmul: incompatible shapes " + sa.str() + " and " +
                         sb.str());
  }
  const int p = sa[0], q = sa[1], r = sb[1];
  Node n;
  n.op = OpKind::kMatMul;
  n.shape = Shape{p, r};
  n.in = {a.id, b.id};
  n.needs_grad = node(a).needs_grad || node(b).needs_grad;
  n.value.assign(static_cast<size_t>(p) * r, 0.0);
  const double* A = value(a).data();
  const double* B = value(b).data();
  double* C = n.value.data();
  for (int i = 0; i < p; ++i) {
    const double* arow = A + static_cast<size_t>(i) * q;
    double* crow = C + static_cast<size_t>(i) * r;
    for (int k = 0; k < q; ++k) {
      const double aik = arow[k];
      if (aik == 0.0) continue;
      const double* brow = B + static_cast<size_t>(k) * r;
      for (int j = 0; j < r; ++j) crow[j] += aik * brow[j];
    }
  }
  return {this, push(std::move(n))};
}

Var Tape::transpose(Var a) {
  const Shape& sa = shape(a);
  if (sa.rank() != 2) throw DimensionError("transpose: rank must be 2");
  const int p = sa[0], q = sa[1];
  Node n;
  n.op = OpKind::kTranspose;
  n.shape = Shape{q, p};
  n.in = {a.id};
  n.needs_grad = node(a).needs_grad;
  n.value.resize(static_cast<size_t>(p) * q);
  const Vec& va = value(a);
  for (int i = 0; i < p; ++i) {
    for (int j = 0; j < q; ++j) n.value[j * p + i] = va[i * q + j];
  }
  return {this, push(std::move(n))};
}

Var Tape::tanh(Var a) {
  Node n;
  n.op = OpKind::kTanh;
  n.shape = shape(a);
  n.in = {a.id};
  n.needs_grad = node(a).needs_grad;
  const Vec& va = value(a);
  n.value.resize(va.size());
  for (size_t i = 0; i < va.size(); ++i) n.value[i] = std::tanh(va[i]);
  return {this, push(std::move(n))};
}

Var Tape::sigmoid(Var a) {
  Node n;
  n.op = OpKind::kSigmoid;
  n.shape = shape(a);
  n.in = {a.id};
  n.needs_grad = node(a).needs_grad;
  const Vec& va = value(a);
  n.value.resize(va.size());
  for (size_t i = 0; i < va.size(); ++i) {
    n.value[i] = 1.0 / (1.0 + std::exp(-va[i]));
  }
  return {this, push(std::move(n))};
}

Var Tape::relu(Var a) {
  Node n;
  n.op = OpKind::kRelu;
  n.shape = shape(a);
  n.in = {a.id};
  n.needs_grad = node(a).needs_grad;
  const Vec& va = value(a);
  n.value.resize(va.size());
  for (size_t i = 0; i < va.size(); ++i) n.value[i] = va[i] > 0.0 ? va[i] : 0.0;
  return {this, push(std::move(n))};
}

namespace {
void softmax_row(const double* x, double* y, int len) {
  double mx = x[0];
  for (int i = 1; i < len; ++i) mx = std::max(mx, x[i]);
  double sum = 0.0;
  for (int i = 0; i < len; ++i) {
    y[i] = std::exp(x[i] - mx);
    sum += y[i];
  }
  const double inv = 1.0 / sum;
  for (int i = 0; i < len; ++i) y[i] *= inv;
}
}  // namespace

Var Tape::softmax(Var v) {
  const Shape& s = shape(v);
  if (s.rank() != 1) throw DimensionError("softmax: rank must be 1");
  Node n;
  n.op = OpKind::kSoftmax;
  n.shape = s;
  n.in = {v.id};
  n.needs_grad = node(v).needs_grad;
  n.value.resize(s.numel());
  softmax_row(value(v).data(), n.value.data(), s.numel());
  return {this, push(std::move(n))};
}

Var Tape::row_softmax(Var m) {
  const Shape& s = shape(m);
  if (s.rank() != 2) throw DimensionError("row_softmax: rank must be 2");
  const int rows = s[0], cols = s[1];
  Node n;
  n.op = OpKind::kRowSoftmax;
  n.shape = s;
  n.in = {m.id};
  n.needs_grad = node(m).needs_grad;
  n.value.resize(s.numel());
  const double* x = value(m).data();
  for (int i = 0; i < rows; ++i) {
    softmax_row(x + static_cast<size_t>(i) * cols,
                n.value.data() + static_cast<size_t>(i) * cols, cols);
  }
  return {this, push(std::move(n))};
}

Var Tape::log_softmax(Var v) {
  const Shape& s = shape(v);
  if (s.rank() != 1) throw DimensionError("log_softmax: rank must be 1");
  Node n;
  n.op = OpKind::kLogSoftmax;
  n.shape = s;
  n.in = {v.id};
  n.needs_grad = node(v).needs_grad;
  const Vec& x = value(v);
  const int len = s.numel();
  double mx = x[0];
  for (int i = 1; i < len; ++i) mx = std::max(mx, x[i]);
  double sum = 0.0;
  for (int i = 0; i < len; ++i) sum += std::exp(x[i] - mx);
  const double lse = mx + std::log(sum);
  n.value.resize(len);
  for (int i = 0; i < len; ++i) n.value[i] = x[i] - lse;
  return {this, push(std::move(n))};
}

Var Tape::sum(Var a) {
  Node n;
  n.op = OpKind::kSum;
  n.shape = Shape{1};
  n.in = {a.id};
  n.needs_grad = node(a).needs_grad;
  double s = 0.0;
  for (double x : value(a)) s += x;
  n.value = {s};
  return {this, push(std::move(n))};
}

Var Tape::mean(Var a) {
  Node n;
  n.op = OpKind::kMean;
  n.shape = Shape{1};
  n.in = {a.id};
  n.needs_grad = node(a).needs_grad;
  double s = 0.0;
  for (double x : value(a)) s += x;
  n.value = {s / static_cast<double>(value(a).size())};
  return {this, push(std::move(n))};
}

Var Tape::mean_squared_error(Var a, Var b) {
  Var d = sub(a, b);
  return mean(mul(d, d));
}

Var Tape::reshape(Var a, Shape s) {
  if (s.numel() != shape(a).numel()) {
    throw DimensionError("reshape: " + shape(a).str() + " -> " + s.str());
  }
  Node n;
  n.op = OpKind::kReshape;
  n.shape = std::move(s);
  n.in = {a.id};
  n.needs_grad = node(a).needs_grad;
  n.value = value(a);
  return {this, push(std::move(n))};
}

Var Tape::slice(Var a, int offset, int len) {
  const int total = shape(a).numel();
  if (offset < 0 || len <= 0 || offset + len > total) {
    throw DimensionError("slice: range [" + std::to_string(offset) + ", " +
                         std::to_string(offset + len) + ") out of " +
                         std::to_string(total));
  }
  Node n;
  n.op = OpKind::kSlice;
  n.shape = Shape{len};
  n.in = {a.id};
  n.i0 = offset;
  n.needs_grad = node(a).needs_grad;
  const Vec& va = value(a);
  n.value.assign(va.begin() + offset, va.begin() + offset + len);
  return {this, push(std::move(n))};
}

Var Tape::concat(const std::vector<Var>& parts) {
  if (parts.empty()) throw InputError("concat: empty input list");
  Node n;
  n.op = OpKind::kConcat;
  int total = 0;
  for (Var p : parts) {
    n.in.push_back(p.id);
    n.needs_grad = n.needs_grad || node(p).needs_grad;
    total += shape(p).numel();
  }
  n.shape = Shape{total};
  n.value.reserve(total);
  for (Var p : parts) {
    const Vec& v = value(p);
    n.value.insert(n.value.end(), v.begin(), v.end());
  }
  return {this, push(std::move(n))};
}

Var Tape::concat_cols(const std::vector<Var>& mats) {
  if (mats.empty()) throw InputError("concat_cols: empty input list");
  const int rows = shape(mats[0])[0];
  int cols = 0;
  Node n;
  n.op = OpKind::kConcatCols;
  for (Var m : mats) {
    const Shape& s = shape(m);
    if (s.rank() != 2 || s[0] != rows) {
      throw DimensionError("concat_cols: row mismatch at " + s.str());
    }
    n.in.push_back(m.id);
    n.needs_grad = n.needs_grad || node(m).needs_grad;
    n.idx.push_back(s[1]);
    cols += s[1];
  }
  n.shape = Shape{rows, cols};
  n.value.resize(static_cast<size_t>(rows) * cols);
  int col_off = 0;
  for (size_t k = 0; k < mats.size(); ++k) {
    const Vec& v = value(mats[k]);
    const int c = n.idx[k];
    for (int i = 0; i < rows; ++i) {
      for (int j = 0; j < c; ++j) {
        n.value[static_cast<size_t>(i) * cols + col_off + j] = v[i * c + j];
      }
    }
    col_off += c;
  }
  return {this, push(std::move(n))};
}

Var Tape::gather_rows(Var mat, std::vector<int> rows) {
  const Shape& s = shape(mat);
  if (s.rank() != 2) throw DimensionError("gather_rows: rank must be 2");
  const int r = s[0], c = s[1];
  for (int i : rows) {
    if (i < 0 || i >= r) {
      throw InputError("gather_rows: row " + std::to_string(i) +
                       " outside table of " + std::to_string(r));
    }
  }
  Node n;
  n.op = OpKind::kGatherRows;
  n.shape = Shape{static_cast<int>(rows.size()), c};
  n.in = {mat.id};
  n.needs_grad = node(mat).needs_grad;
  n.value.resize(rows.size() * static_cast<size_t>(c));
  const Vec& v = value(mat);
  for (size_t i = 0; i < rows.size(); ++i) {
    std::copy(v.begin() + static_cast<size_t>(rows[i]) * c,
              v.begin() + static_cast<size_t>(rows[i] + 1) * c,
              n.value.begin() + i * c);
  }
  n.idx = std::move(rows);
  return {this, push(std::move(n))};
}

Var Tape::pick(Var v, int index) {
  if (index < 0 || index >= shape(v).numel()) {
    throw DimensionError("pick: index out of range");
  }
  Node n;
  n.op = OpKind::kPick;
  n.shape = Shape{1};
  n.in = {v.id};
  n.i0 = index;
  n.needs_grad = node(v).needs_grad;
  n.value = {value(v)[index]};
  return {this, push(std::move(n))};
}

Var Tape::masked_max(Var v) {
  const Vec& x = value(v);
  if (x.empty()) throw InputError("masked_max: empty input");
  Node n;
  n.op = OpKind::kMaskedMax;
  n.shape = Shape{1};
  n.in = {v.id};
  n.needs_grad = node(v).needs_grad;
  int arg = 0;
  for (size_t i = 1; i < x.size(); ++i) {
    if (x[i] > x[arg]) arg = static_cast<int>(i);  // first maximal wins
  }
  n.i0 = arg;
  n.value = {x[arg]};
  return {this, push(std::move(n))};
}

Var Tape::masked_max(const std::vector<Var>& scalars) {
  if (scalars.empty()) throw InputError("masked_max: empty input");
  return masked_max(concat(scalars));
}

Var Tape::segment_max(Var v, std::vector<int> segments, int num_segments) {
  const Vec& x = value(v);
  if (x.size() != segments.size()) {
    throw DimensionError("segment_max: segment list length mismatch");
  }
  Node n;
  n.op = OpKind::kSegmentMax;
  n.shape = Shape{num_segments};
  n.in = {v.id};
  n.needs_grad = node(v).needs_grad;
  n.value.assign(num_segments, -std::numeric_limits<double>::infinity());
  std::vector<int> arg(num_segments, -1);
  for (size_t i = 0; i < x.size(); ++i) {
    const int s = segments[i];
    if (arg[s] < 0 || x[i] > n.value[s]) {
      n.value[s] = x[i];
      arg[s] = static_cast<int>(i);
    }
  }
  for (int s = 0; s < num_segments; ++s) {
    if (arg[s] < 0) {
      throw InputError("segment_max: segment " + std::to_string(s) +
                       " received no values");
    }
  }
  n.idx = std::move(segments);
  n.idx.insert(n.idx.end(), arg.begin(), arg.end());
  n.i0 = num_segments;
  return {this, push(std::move(n))};
}

namespace {
struct ConvDims {
  int h, w, c, kh, kw, kc, f, pad, oh, ow;
};

ConvDims conv_dims(const Shape& in, const Shape& k, int stride) {
  if (in.rank() != 3 || k.rank() != 4) {
    throw DimensionError("conv2d: input must be HxWxC and kernel khxkwxCxF");
  }
  ConvDims d;
  d.h = in[0];
  d.w = in[1];
  d.c = in[2];
  d.kh = k[0];
  d.kw = k[1];
  d.kc = k[2];
  d.f = k[3];
  if (d.kh % 2 == 0 || d.kw % 2 == 0) {
    throw ConfigError("conv2d: kernel size must be odd, got " + k.str());
  }
  if (d.kc != d.c) {
    throw DimensionError("conv2d: channel mismatch, input " + in.str() +
                         " kernel " + k.str());
  }
  if (stride < 1) throw ConfigError("conv2d: stride must be >= 1");
  d.pad = (d.kh - 1) / 2;
  d.oh = (d.h + 2 * d.pad - d.kh) / stride + 1;
  d.ow = (d.w + 2 * d.pad - d.kw) / stride + 1;
  return d;
}
}  // namespace

Var Tape::conv2d(Var input, Var kernel, int stride) {
  return conv2d(input, kernel, Var{}, stride);
}

Var Tape::conv2d(Var input, Var kernel, Var bias, int stride) {
  const ConvDims d = conv_dims(shape(input), shape(kernel), stride);
  if (bias.valid() && shape(bias).numel() != d.f) {
    throw DimensionError("conv2d: bias length must equal filter count");
  }
  Node n;
  n.op = OpKind::kConv2d;
  n.shape = Shape{d.oh, d.ow, d.f};
  n.in = {input.id, kernel.id};
  if (bias.valid()) n.in.push_back(bias.id);
  n.needs_grad = node(input).needs_grad || node(kernel).needs_grad ||
                 (bias.valid() && node(bias).needs_grad);
  n.i0 = stride;
  n.value.assign(static_cast<size_t>(d.oh) * d.ow * d.f, 0.0);
  const double* X = value(input).data();
  const double* K = value(kernel).data();
  double* Y = n.value.data();
  if (bias.valid()) {
    const Vec& b = value(bias);
    for (int oy = 0; oy < d.oh; ++oy) {
      for (int ox = 0; ox < d.ow; ++ox) {
        double* yrow = Y + (static_cast<size_t>(oy) * d.ow + ox) * d.f;
        for (int f = 0; f < d.f; ++f) yrow[f] = b[f];
      }
    }
  }
  for (int oy = 0; oy < d.oh; ++oy) {
    for (int ox = 0; ox < d.ow; ++ox) {
      double* yrow = Y + (static_cast<size_t>(oy) * d.ow + ox) * d.f;
      for (int ky = 0; ky < d.kh; ++ky) {
        const int iy = oy * stride + ky - d.pad;
        if (iy < 0 || iy >= d.h) continue;
        for (int kx = 0; kx < d.kw; ++kx) {
          const int ix = ox * stride + kx - d.pad;
          if (ix < 0 || ix >= d.w) continue;
          const double* xrow = X + (static_cast<size_t>(iy) * d.w + ix) * d.c;
          const double* krow =
              K + (static_cast<size_t>(ky) * d.kw + kx) * d.c * d.f;
          for (int c = 0; c < d.c; ++c) {
            const double xv = xrow[c];
            if (xv == 0.0) continue;
            const double* kf = krow + static_cast<size_t>(c) * d.f;
            for (int f = 0; f < d.f; ++f) yrow[f] += xv * kf[f];
          }
        }
      }
    }
  }
  return {this, push(std::move(n))};
}

Var Tape::conv_transpose2d(Var input, Var kernel, Var bias, int stride) {
  const Shape& si = shape(input);
  const Shape& sk = shape(kernel);
  if (si.rank() != 3 || sk.rank() != 4) {
    throw DimensionError("conv_transpose2d: input HxWxC, kernel khxkwxCxF");
  }
  const int h = si[0], w = si[1], c = si[2];
  const int kh = sk[0], kw = sk[1], kc = sk[2], f = sk[3];
  if (kc != c) {
    throw DimensionError("conv_transpose2d: channel mismatch " + si.str() +
                         " vs " + sk.str());
  }
  if ((kh - stride) % 2 != 0 || kh < stride || kw != kh) {
    throw ConfigError("conv_transpose2d: kernel " + sk.str() +
                      " incompatible with stride " + std::to_string(stride));
  }
  const int pad = (kh - stride) / 2;
  const int oh = h * stride, ow = w * stride;
  if (bias.valid() && shape(bias).numel() != f) {
    throw DimensionError("conv_transpose2d: bias length must equal filters");
  }
  Node n;
  n.op = OpKind::kConvTranspose2d;
  n.shape = Shape{oh, ow, f};
  n.in = {input.id, kernel.id};
  if (bias.valid()) n.in.push_back(bias.id);
  n.needs_grad = node(input).needs_grad || node(kernel).needs_grad ||
                 (bias.valid() && node(bias).needs_grad);
  n.i0 = stride;
  n.i1 = pad;
  n.value.assign(static_cast<size_t>(oh) * ow * f, 0.0);
  if (bias.valid()) {
    const Vec& b = value(bias);
    for (int i = 0; i < oh * ow; ++i) {
      for (int j = 0; j < f; ++j) n.value[static_cast<size_t>(i) * f + j] = b[j];
    }
  }
  const double* X = value(input).data();
  const double* K = value(kernel).data();
  double* Y = n.value.data();
  for (int iy = 0; iy < h; ++iy) {
    for (int ix = 0; ix < w; ++ix) {
      const double* xrow = X + (static_cast<size_t>(iy) * w + ix) * c;
      for (int ky = 0; ky < kh; ++ky) {
        const int oy = iy * stride + ky - pad;
        if (oy < 0 || oy >= oh) continue;
        for (int kx = 0; kx < kw; ++kx) {
          const int ox = ix * stride + kx - pad;
          if (ox < 0 || ox >= ow) continue;
          double* yrow = Y + (static_cast<size_t>(oy) * ow + ox) * f;
          const double* krow =
              K + (static_cast<size_t>(ky) * kw + kx) * c * f;
          for (int ci = 0; ci < c; ++ci) {
            const double xv = xrow[ci];
            const double* kf = krow + static_cast<size_t>(ci) * f;
            for (int fi = 0; fi < f; ++fi) yrow[fi] += xv * kf[fi];
          }
        }
      }
    }
  }
  return {this, push(std::move(n))};
}

Var Tape::dynamic_relation(Var params, Var pairs, int a1, int a2) {
  const Shape& sp = shape(params);
  const Shape& su = shape(pairs);
  if (sp.rank() != 2 || su.rank() != 2 || sp[0] != su[0]) {
    throw DimensionError("dynamic_relation: params " + sp.str() + " pairs " +
                         su.str());
  }
  const int rows = sp[0], hp = sp[1], u = su[1];
  const int need = u * a1 + a1 * a2 + a2;
  if (hp < need) {
    throw ConfigError("dynamic_relation: parameter rows of length " +
                      std::to_string(hp) + " cannot hold " +
                      std::to_string(need) + " weights");
  }
  Node n;
  n.op = OpKind::kDynamicRelation;
  n.shape = Shape{rows};
  n.in = {params.id, pairs.id};
  n.i0 = a1;
  n.i1 = a2;
  n.needs_grad = node(params).needs_grad || node(pairs).needs_grad;
  n.value.assign(rows, 0.0);
  n.aux.assign(static_cast<size_t>(rows) * (a1 + a2), 0.0);
  const double* P = value(params).data();
  const double* U = value(pairs).data();
  for (int p = 0; p < rows; ++p) {
    const double* w = P + static_cast<size_t>(p) * hp;
    const double* up = U + static_cast<size_t>(p) * u;
    double* z1 = n.aux.data() + static_cast<size_t>(p) * (a1 + a2);
    double* z2 = z1 + a1;
    const double* w1 = w;
    const double* w2 = w + u * a1;
    const double* w3 = w2 + a1 * a2;
    for (int i = 0; i < a1; ++i) {
      double acc = 0.0;
      const double* row = w1 + static_cast<size_t>(i) * u;
      for (int j = 0; j < u; ++j) acc += row[j] * up[j];
      z1[i] = std::tanh(acc);
    }
    for (int i = 0; i < a2; ++i) {
      double acc = 0.0;
      const double* row = w2 + static_cast<size_t>(i) * a1;
      for (int j = 0; j < a1; ++j) acc += row[j] * z1[j];
      z2[i] = std::tanh(acc);
    }
    double r = 0.0;
    for (int i = 0; i < a2; ++i) r += w3[i] * z2[i];
    n.value[p] = r;
  }
  return {this, push(std::move(n))};
}

Var Tape::ramp_combine(Var beta, int m, int n_cols) {
  if (shape(beta).numel() != 3) {
    throw DimensionError("ramp_combine: beta must have 3 entries");
  }
  if (m < 2 || n_cols < 2) {
    throw ConfigError("ramp_combine: map must be at least 2x2");
  }
  Node n;
  n.op = OpKind::kRampCombine;
  n.shape = Shape{m, n_cols};
  n.in = {beta.id};
  n.i0 = m;
  n.i1 = n_cols;
  n.needs_grad = node(beta).needs_grad;
  const Vec& b = value(beta);
  n.value.resize(static_cast<size_t>(m) * n_cols);
  for (int i = 0; i < m; ++i) {
    const double g2 = static_cast<double>(i) / (m - 1);
    for (int j = 0; j < n_cols; ++j) {
      const double g1 = static_cast<double>(j) / (n_cols - 1);
      n.value[static_cast<size_t>(i) * n_cols + j] =
          b[0] * g1 + b[1] * g2 + b[2];
    }
  }
  return {this, push(std::move(n))};
}

Var Tape::stack_channels(Var a, Var b) {
  check_same_shape("stack_channels", shape(a), shape(b));
  const Shape& s = shape(a);
  if (s.rank() != 2) throw DimensionError("stack_channels: rank must be 2");
  Node n;
  n.op = OpKind::kStackChannels;
  n.shape = Shape{s[0], s[1], 2};
  n.in = {a.id, b.id};
  n.needs_grad = node(a).needs_grad || node(b).needs_grad;
  const Vec& va = value(a);
  const Vec& vb = value(b);
  n.value.resize(va.size() * 2);
  for (size_t i = 0; i < va.size(); ++i) {
    n.value[2 * i] = va[i];
    n.value[2 * i + 1] = vb[i];
  }
  return {this, push(std::move(n))};
}

void Tape::zero_grad() {
  for (Node& n : nodes_) n.grad.clear();
}

void Tape::backward(Var loss) {
  if (loss.tape != this) throw InputError("backward: loss from another tape");
  if (shape(loss).numel() != 1) {
    throw DimensionError("backward: loss must be scalar, got " +
                         shape(loss).str());
  }
  grad_buffer(loss.id)[0] = 1.0;
  for (int id = loss.id; id >= 0; --id) {
    const Node& n = nodes_[id];
    if (!n.needs_grad || n.grad.empty()) continue;
    backward_node(id);
  }
}

void Tape::backward_node(int id) {
  Node& n = nodes_[id];
  const Vec& g = n.grad;
  auto want = [&](int input) { return nodes_[n.in[input]].needs_grad; };
  switch (n.op) {
    case OpKind::kLeaf:
    case OpKind::kParam:
      break;
    case OpKind::kAdd: {
      for (int s = 0; s < 2; ++s) {
        if (!want(s)) continue;
        Vec& gi = grad_buffer(n.in[s]);
        for (size_t i = 0; i < g.size(); ++i) gi[i] += g[i];
      }
      break;
    }
    case OpKind::kSub: {
      if (want(0)) {
        Vec& ga = grad_buffer(n.in[0]);
        for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
      }
      if (want(1)) {
        Vec& gb = grad_buffer(n.in[1]);
        for (size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
      }
      break;
    }
    case OpKind::kMul: {
      const Vec& va = nodes_[n.in[0]].value;
      const Vec& vb = nodes_[n.in[1]].value;
      if (want(0)) {
        Vec& ga = grad_buffer(n.in[0]);
        for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * vb[i];
      }
      if (want(1)) {
        Vec& gb = grad_buffer(n.in[1]);
        for (size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * va[i];
      }
      break;
    }
    case OpKind::kScale: {
      if (want(0)) {
        Vec& ga = grad_buffer(n.in[0]);
        for (size_t i = 0; i < g.size(); ++i) ga[i] += n.x0 * g[i];
      }
      break;
    }
    case OpKind::kAddRowVec: {
      const int rows = n.shape[0], cols = n.shape[1];
      if (want(0)) {
        Vec& gm = grad_buffer(n.in[0]);
        for (size_t i = 0; i < g.size(); ++i) gm[i] += g[i];
      }
      if (want(1)) {
        Vec& gr = grad_buffer(n.in[1]);
        for (int i = 0; i < rows; ++i) {
          for (int j = 0; j < cols; ++j) gr[j] += g[i * cols + j];
        }
      }
      break;
    }
    case OpKind::kMatMul: {
      const Node& na = nodes_[n.in[0]];
      const Node& nb = nodes_[n.in[1]];
      const int p = na.shape[0], q = na.shape[1], r = nb.shape[1];
      if (want(0)) {
        Vec& ga = grad_buffer(n.in[0]);
        const double* B = nb.value.data();
        for (int i = 0; i < p; ++i) {
          const double* grow = g.data() + static_cast<size_t>(i) * r;
          double* garow = ga.data() + static_cast<size_t>(i) * q;
          for (int k = 0; k < q; ++k) {
            const double* brow = B + static_cast<size_t>(k) * r;
            double acc = 0.0;
            for (int j = 0; j < r; ++j) acc += grow[j] * brow[j];
            garow[k] += acc;
          }
        }
      }
      if (want(1)) {
        Vec& gb = grad_buffer(n.in[1]);
        const double* A = na.value.data();
        for (int i = 0; i < p; ++i) {
          const double* arow = A + static_cast<size_t>(i) * q;
          const double* grow = g.data() + static_cast<size_t>(i) * r;
          for (int k = 0; k < q; ++k) {
            const double aik = arow[k];
            if (aik == 0.0) continue;
            double* gbrow = gb.data() + static_cast<size_t>(k) * r;
            for (int j = 0; j < r; ++j) gbrow[j] += aik * grow[j];
          }
        }
      }
      break;
    }
    case OpKind::kTranspose: {
      if (want(0)) {
        Vec& ga = grad_buffer(n.in[0]);
        const int q = n.shape[0], p = n.shape[1];
        for (int j = 0; j < q; ++j) {
          for (int i = 0; i < p; ++i) ga[i * q + j] += g[j * p + i];
        }
      }
      break;
    }
    case OpKind::kTanh: {
      if (want(0)) {
        Vec& ga = grad_buffer(n.in[0]);
        for (size_t i = 0; i < g.size(); ++i) {
          ga[i] += g[i] * (1.0 - n.value[i] * n.value[i]);
        }
      }
      break;
    }
    case OpKind::kSigmoid: {
      if (want(0)) {
        Vec& ga = grad_buffer(n.in[0]);
        for (size_t i = 0; i < g.size(); ++i) {
          ga[i] += g[i] * n.value[i] * (1.0 - n.value[i]);
        }
      }
      break;
    }
    case OpKind::kRelu: {
      if (want(0)) {
        Vec& ga = grad_buffer(n.in[0]);
        const Vec& x = nodes_[n.in[0]].value;
        for (size_t i = 0; i < g.size(); ++i) {
          if (x[i] > 0.0) ga[i] += g[i];
        }
      }
      break;
    }
    case OpKind::kSoftmax:
    case OpKind::kRowSoftmax: {
      if (want(0)) {
        Vec& ga = grad_buffer(n.in[0]);
        const int cols = n.op == OpKind::kSoftmax ? n.shape.numel() : n.shape[1];
        const int rows = static_cast<int>(g.size()) / cols;
        for (int r = 0; r < rows; ++r) {
          const double* y = n.value.data() + static_cast<size_t>(r) * cols;
          const double* gy = g.data() + static_cast<size_t>(r) * cols;
          double dot = 0.0;
          for (int i = 0; i < cols; ++i) dot += gy[i] * y[i];
          double* gx = ga.data() + static_cast<size_t>(r) * cols;
          for (int i = 0; i < cols; ++i) gx[i] += y[i] * (gy[i] - dot);
        }
      }
      break;
    }
    case OpKind::kLogSoftmax: {
      if (want(0)) {
        Vec& ga = grad_buffer(n.in[0]);
        double s = 0.0;
        for (double x : g) s += x;
        for (size_t i = 0; i < g.size(); ++i) {
          ga[i] += g[i] - std::exp(n.value[i]) * s;
        }
      }
      break;
    }
    case OpKind::kSum: {
      if (want(0)) {
        Vec& ga = grad_buffer(n.in[0]);
        for (double& x : ga) x += g[0];
      }
      break;
    }
    case OpKind::kMean: {
      if (want(0)) {
        Vec& ga = grad_buffer(n.in[0]);
        const double s = g[0] / static_cast<double>(ga.size());
        for (double& x : ga) x += s;
      }
      break;
    }
    case OpKind::kReshape: {
      if (want(0)) {
        Vec& ga = grad_buffer(n.in[0]);
        for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
      }
      break;
    }
    case OpKind::kSlice: {
      if (want(0)) {
        Vec& ga = grad_buffer(n.in[0]);
        for (size_t i = 0; i < g.size(); ++i) ga[n.i0 + i] += g[i];
      }
      break;
    }
    case OpKind::kConcat: {
      size_t off = 0;
      for (size_t s = 0; s < n.in.size(); ++s) {
        const size_t len = nodes_[n.in[s]].value.size();
        if (nodes_[n.in[s]].needs_grad) {
          Vec& gi = grad_buffer(n.in[s]);
          for (size_t i = 0; i < len; ++i) gi[i] += g[off + i];
        }
        off += len;
      }
      break;
    }
    case OpKind::kConcatCols: {
      const int rows = n.shape[0], cols = n.shape[1];
      int col_off = 0;
      for (size_t s = 0; s < n.in.size(); ++s) {
        const int c = n.idx[s];
        if (nodes_[n.in[s]].needs_grad) {
          Vec& gi = grad_buffer(n.in[s]);
          for (int i = 0; i < rows; ++i) {
            for (int j = 0; j < c; ++j) {
              gi[i * c + j] += g[static_cast<size_t>(i) * cols + col_off + j];
            }
          }
        }
        col_off += c;
      }
      break;
    }
    case OpKind::kGatherRows: {
      if (want(0)) {
        Vec& ga = grad_buffer(n.in[0]);
        const int c = n.shape[1];
        for (size_t i = 0; i < n.idx.size(); ++i) {
          double* dst = ga.data() + static_cast<size_t>(n.idx[i]) * c;
          const double* src = g.data() + i * c;
          for (int j = 0; j < c; ++j) dst[j] += src[j];
        }
      }
      break;
    }
    case OpKind::kPick: {
      if (want(0)) grad_buffer(n.in[0])[n.i0] += g[0];
      break;
    }
    case OpKind::kMaskedMax: {
      if (want(0)) grad_buffer(n.in[0])[n.i0] += g[0];
      break;
    }
    case OpKind::kSegmentMax: {
      if (want(0)) {
        Vec& ga = grad_buffer(n.in[0]);
        const int s = n.i0;
        const int* arg = n.idx.data() + (n.idx.size() - s);
        for (int i = 0; i < s; ++i) ga[arg[i]] += g[i];
      }
      break;
    }
    case OpKind::kConv2d: {
      const Node& ni = nodes_[n.in[0]];
      const Node& nk = nodes_[n.in[1]];
      const int h = ni.shape[0], w = ni.shape[1], c = ni.shape[2];
      const int kh = nk.shape[0], kw = nk.shape[1], f = nk.shape[3];
      const int stride = n.i0, pad = (kh - 1) / 2;
      const int oh = n.shape[0], ow = n.shape[1];
      const double* X = ni.value.data();
      const double* K = nk.value.data();
      Vec* gx = want(0) ? &grad_buffer(n.in[0]) : nullptr;
      Vec* gk = want(1) ? &grad_buffer(n.in[1]) : nullptr;
      for (int oy = 0; oy < oh; ++oy) {
        for (int ox = 0; ox < ow; ++ox) {
          const double* grow = g.data() + (static_cast<size_t>(oy) * ow + ox) * f;
          for (int ky = 0; ky < kh; ++ky) {
            const int iy = oy * stride + ky - pad;
            if (iy < 0 || iy >= h) continue;
            for (int kx = 0; kx < kw; ++kx) {
              const int ix = ox * stride + kx - pad;
              if (ix < 0 || ix >= w) continue;
              const size_t xoff = (static_cast<size_t>(iy) * w + ix) * c;
              const size_t koff = (static_cast<size_t>(ky) * kw + kx) * c * f;
              for (int ci = 0; ci < c; ++ci) {
                double accx = 0.0;
                const double xv = X[xoff + ci];
                for (int fi = 0; fi < f; ++fi) {
                  const double gv = grow[fi];
                  if (gk) (*gk)[koff + ci * f + fi] += xv * gv;
                  accx += K[koff + ci * f + fi] * gv;
                }
                if (gx) (*gx)[xoff + ci] += accx;
              }
            }
          }
        }
      }
      if (n.in.size() == 3 && nodes_[n.in[2]].needs_grad) {
        Vec& gb = grad_buffer(n.in[2]);
        for (int i = 0; i < oh * ow; ++i) {
          for (int fi = 0; fi < f; ++fi) {
            gb[fi] += g[static_cast<size_t>(i) * f + fi];
          }
        }
      }
      break;
    }
    case OpKind::kConvTranspose2d: {
      const Node& ni = nodes_[n.in[0]];
      const Node& nk = nodes_[n.in[1]];
      const int h = ni.shape[0], w = ni.shape[1], c = ni.shape[2];
      const int kh = nk.shape[0], kw = nk.shape[1], f = nk.shape[3];
      const int stride = n.i0, pad = n.i1;
      const int oh = n.shape[0], ow = n.shape[1];
      const double* X = ni.value.data();
      const double* K = nk.value.data();
      Vec* gx = want(0) ? &grad_buffer(n.in[0]) : nullptr;
      Vec* gk = want(1) ? &grad_buffer(n.in[1]) : nullptr;
      for (int iy = 0; iy < h; ++iy) {
        for (int ix = 0; ix < w; ++ix) {
          const size_t xoff = (static_cast<size_t>(iy) * w + ix) * c;
          for (int ky = 0; ky < kh; ++ky) {
            const int oy = iy * stride + ky - pad;
            if (oy < 0 || oy >= oh) continue;
            for (int kx = 0; kx < kw; ++kx) {
              const int ox = ix * stride + kx - pad;
              if (ox < 0 || ox >= ow) continue;
              const double* grow =
                  g.data() + (static_cast<size_t>(oy) * ow + ox) * f;
              const size_t koff = (static_cast<size_t>(ky) * kw + kx) * c * f;
              for (int ci = 0; ci < c; ++ci) {
                double accx = 0.0;
                const double xv = X[xoff + ci];
                for (int fi = 0; fi < f; ++fi) {
                  const double gv = grow[fi];
                  if (gk) (*gk)[koff + ci * f + fi] += xv * gv;
                  accx += K[koff + ci * f + fi] * gv;
                }
                if (gx) (*gx)[xoff + ci] += accx;
              }
            }
          }
        }
      }
      if (n.in.size() == 3 && nodes_[n.in[2]].needs_grad) {
        Vec& gb = grad_buffer(n.in[2]);
        for (int i = 0; i < oh * ow; ++i) {
          for (int fi = 0; fi < f; ++fi) {
            gb[fi] += g[static_cast<size_t>(i) * f + fi];
          }
        }
      }
      break;
    }
    case OpKind::kDynamicRelation: {
      const Node& np = nodes_[n.in[0]];
      const Node& nu = nodes_[n.in[1]];
      const int rows = np.shape[0], hp = np.shape[1], u = nu.shape[1];
      const int a1 = n.i0, a2 = n.i1;
      const double* P = np.value.data();
      const double* U = nu.value.data();
      Vec* gp = want(0) ? &grad_buffer(n.in[0]) : nullptr;
      Vec* gu = want(1) ? &grad_buffer(n.in[1]) : nullptr;
      std::vector<double> gz1(a1), gz2(a2), gpre1(a1), gpre2(a2);
      for (int p = 0; p < rows; ++p) {
        const double gr = g[p];
        if (gr == 0.0) continue;
        const double* wts = P + static_cast<size_t>(p) * hp;
        const double* up = U + static_cast<size_t>(p) * u;
        const double* z1 = n.aux.data() + static_cast<size_t>(p) * (a1 + a2);
        const double* z2 = z1 + a1;
        const double* w1 = wts;
        const double* w2 = wts + u * a1;
        const double* w3 = w2 + a1 * a2;
        double* gw = gp ? gp->data() + static_cast<size_t>(p) * hp : nullptr;
        for (int i = 0; i < a2; ++i) {
          gz2[i] = gr * w3[i];
          gpre2[i] = gz2[i] * (1.0 - z2[i] * z2[i]);
          if (gw) gw[u * a1 + a1 * a2 + i] += gr * z2[i];
        }
        std::fill(gz1.begin(), gz1.end(), 0.0);
        for (int i = 0; i < a2; ++i) {
          const double* row = w2 + static_cast<size_t>(i) * a1;
          const double gp2 = gpre2[i];
          if (gw) {
            double* grow = gw + u * a1 + static_cast<size_t>(i) * a1;
            for (int j = 0; j < a1; ++j) grow[j] += gp2 * z1[j];
          }
          for (int j = 0; j < a1; ++j) gz1[j] += row[j] * gp2;
        }
        for (int i = 0; i < a1; ++i) {
          gpre1[i] = gz1[i] * (1.0 - z1[i] * z1[i]);
        }
        for (int i = 0; i < a1; ++i) {
          const double gp1 = gpre1[i];
          if (gp1 == 0.0) continue;
          const double* row = w1 + static_cast<size_t>(i) * u;
          if (gw) {
            double* grow = gw + static_cast<size_t>(i) * u;
            for (int j = 0; j < u; ++j) grow[j] += gp1 * up[j];
          }
          if (gu) {
            double* gurow = gu->data() + static_cast<size_t>(p) * u;
            for (int j = 0; j < u; ++j) gurow[j] += row[j] * gp1;
          }
        }
      }
      break;
    }
    case OpKind::kRampCombine: {
      if (want(0)) {
        Vec& gb = grad_buffer(n.in[0]);
        const int m = n.i0, nc = n.i1;
        for (int i = 0; i < m; ++i) {
          const double g2 = static_cast<double>(i) / (m - 1);
          for (int j = 0; j < nc; ++j) {
            const double g1 = static_cast<double>(j) / (nc - 1);
            const double gv = g[static_cast<size_t>(i) * nc + j];
            gb[0] += gv * g1;
            gb[1] += gv * g2;
            gb[2] += gv;
          }
        }
      }
      break;
    }
    case OpKind::kStackChannels: {
      if (want(0)) {
        Vec& ga = grad_buffer(n.in[0]);
        for (size_t i = 0; i < ga.size(); ++i) ga[i] += g[2 * i];
      }
      if (nodes_[n.in[1]].needs_grad) {
        Vec& gb = grad_buffer(n.in[1]);
        for (size_t i = 0; i < gb.size(); ++i) gb[i] += g[2 * i + 1];
      }
      break;
    }
  }
}

void Tape::accumulate_param_grads(ParamStore& store) const {
  for (const Node& n : nodes_) {
    if (n.param_id < 0 || n.grad.empty()) continue;
    ParamTensor& t = store[n.param_id];
    if (t.grad.empty()) t.grad.assign(t.data.size(), 0.0);
    for (size_t i = 0; i < n.grad.size(); ++i) t.grad[i] += n.grad[i];
  }
}

void Tape::accumulate_param_grads_flat(Vec& flat,
                                       const ParamStore& store) const {
  if (flat.empty()) flat.assign(store.total_parameters(), 0.0);
  std::vector<size_t> offsets(store.size() + 1, 0);
  for (int i = 0; i < store.size(); ++i) {
    offsets[i + 1] = offsets[i] + store[i].data.size();
  }
  for (const Node& n : nodes_) {
    if (n.param_id < 0 || n.grad.empty()) continue;
    double* dst = flat.data() + offsets[n.param_id];
    for (size_t i = 0; i < n.grad.size(); ++i) dst[i] += n.grad[i];
  }
}

}  // namespace groundnet
