#include "dfree/ad/tape.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "dfree/ad/params.hpp"
#include "dfree/errors.hpp"

namespace dfree::ad {

namespace {

std::string shape_str(const Matrix& m) {
  std::ostringstream os;
  os << m.rows() << "x" << m.cols();
  return os.str();
}

void require(bool ok, const char* op, const Matrix& a, const Matrix& b) {
  if (!ok) throw ShapeMismatch(std::string(op) + ": incompatible shapes " + shape_str(a) + " and " + shape_str(b));
}

Tape& tape_of(Var a) { return *a.tape; }

Tape& tape_of(Var a, Var b) {
  if (a.tape != b.tape) throw ShapeMismatch("operands live on different tapes");
  return *a.tape;
}

}  // namespace

const Matrix& Var::value() const { return tape->value(*this); }

Var Tape::constant(Matrix value) {
  nodes_.push_back(Node{std::move(value), nullptr, nullptr, {}, {}});
  return {this, static_cast<int>(nodes_.size()) - 1};
}

Var Tape::param(ParamStore& store, const std::string& name) {
  Param& p = store.at(name);
  if (auto it = param_nodes_.find(&p); it != param_nodes_.end()) return {this, it->second};
  nodes_.push_back(Node{{}, &p.value, &p, {}, {}});
  const int id = static_cast<int>(nodes_.size()) - 1;
  param_nodes_.emplace(&p, id);
  return {this, id};
}

const Matrix& Tape::value(Var v) const {
  const Node& n = nodes_[static_cast<std::size_t>(v.id)];
  return n.ref ? *n.ref : n.value;
}

double Tape::scalar(Var v) const {
  const Matrix& m = value(v);
  if (m.size() != 1) throw ShapeMismatch("scalar() on a " + shape_str(m) + " node");
  return m(0, 0);
}

Matrix Tape::grad(Var v) const {
  const Node& n = nodes_[static_cast<std::size_t>(v.id)];
  if (n.grad.size() == 0) return Matrix::Zero(value(v).rows(), value(v).cols());
  return n.grad;
}

Var Tape::push(Matrix value, Backward backward) {
  nodes_.push_back(Node{std::move(value), nullptr, nullptr, {}, requires_grad_ ? std::move(backward) : Backward{}});
  return {this, static_cast<int>(nodes_.size()) - 1};
}

Matrix& Tape::grad_acc(int id) {
  Node& n = nodes_[static_cast<std::size_t>(id)];
  if (n.grad.size() == 0) {
    const Matrix& v = n.ref ? *n.ref : n.value;
    n.grad = Matrix::Zero(v.rows(), v.cols());
  }
  return n.grad;
}

void Tape::backward(Var loss) {
  if (!requires_grad_) throw ShapeMismatch("backward() on a tape built without gradients");
  if (value(loss).size() != 1) throw ShapeMismatch("backward() target must be 1x1");
  for (auto& n : nodes_) n.grad.resize(0, 0);
  grad_acc(loss.id)(0, 0) = 1.0;
  for (int i = loss.id; i >= 0; --i) {
    Node& n = nodes_[static_cast<std::size_t>(i)];
    if (n.grad.size() == 0) continue;
    if (n.backward) n.backward(*this, i);
    if (n.param) {
      if (n.param->grad.size() == 0) n.param->grad = Matrix::Zero(n.grad.rows(), n.grad.cols());
      n.param->grad += n.grad;
    }
  }
}

// ---- primitives ------------------------------------------------------------

Var matmul(Var a, Var b) {
  Tape& t = tape_of(a, b);
  const Matrix& av = a.value();
  const Matrix& bv = b.value();
  require(av.cols() == bv.rows(), "matmul", av, bv);
  Matrix out = av * bv;
  return t.push(std::move(out), [a, b](Tape& t, int self) {
    const Matrix& g = t.grad_acc(self);
    t.grad_acc(a.id).noalias() += g * t.value(b).transpose();
    t.grad_acc(b.id).noalias() += t.value(a).transpose() * g;
  });
}

Var add(Var a, Var b) {
  Tape& t = tape_of(a, b);
  const Matrix& av = a.value();
  const Matrix& bv = b.value();
  if (av.rows() == bv.rows() && av.cols() == bv.cols()) {
    return t.push(av + bv, [a, b](Tape& t, int self) {
      const Matrix& g = t.grad_acc(self);
      t.grad_acc(a.id) += g;
      t.grad_acc(b.id) += g;
    });
  }
  require(bv.rows() == 1 && bv.cols() == av.cols(), "add", av, bv);
  Matrix out = av.rowwise() + bv.row(0);
  return t.push(std::move(out), [a, b](Tape& t, int self) {
    const Matrix& g = t.grad_acc(self);
    t.grad_acc(a.id) += g;
    t.grad_acc(b.id) += g.colwise().sum();
  });
}

Var sub(Var a, Var b) {
  Tape& t = tape_of(a, b);
  const Matrix& av = a.value();
  const Matrix& bv = b.value();
  require(av.rows() == bv.rows() && av.cols() == bv.cols(), "sub", av, bv);
  return t.push(av - bv, [a, b](Tape& t, int self) {
    const Matrix& g = t.grad_acc(self);
    t.grad_acc(a.id) += g;
    t.grad_acc(b.id) -= g;
  });
}

Var mul(Var a, Var b) {
  Tape& t = tape_of(a, b);
  const Matrix& av = a.value();
  const Matrix& bv = b.value();
  require(av.rows() == bv.rows() && av.cols() == bv.cols(), "mul", av, bv);
  return t.push(av.cwiseProduct(bv), [a, b](Tape& t, int self) {
    const Matrix& g = t.grad_acc(self);
    t.grad_acc(a.id) += g.cwiseProduct(t.value(b));
    t.grad_acc(b.id) += g.cwiseProduct(t.value(a));
  });
}

Var scale(Var a, double s) {
  Tape& t = tape_of(a);
  return t.push(a.value() * s, [a, s](Tape& t, int self) { t.grad_acc(a.id) += t.grad_acc(self) * s; });
}

Var add_scalar(Var a, double s) {
  Tape& t = tape_of(a);
  Matrix out = a.value().array() + s;
  return t.push(std::move(out), [a](Tape& t, int self) { t.grad_acc(a.id) += t.grad_acc(self); });
}

Var scale_rows(Var a, const std::vector<double>& factors) {
  Tape& t = tape_of(a);
  const Matrix& av = a.value();
  if (static_cast<Eigen::Index>(factors.size()) != av.rows())
    throw ShapeMismatch("scale_rows: " + std::to_string(factors.size()) + " factors for " + shape_str(av));
  Eigen::Map<const Eigen::VectorXd> f(factors.data(), static_cast<Eigen::Index>(factors.size()));
  Matrix out = f.asDiagonal() * av;
  Eigen::VectorXd fv = f;
  return t.push(std::move(out), [a, fv](Tape& t, int self) {
    t.grad_acc(a.id) += fv.asDiagonal() * t.grad_acc(self);
  });
}

Var concat_cols(const std::vector<Var>& parts) {
  if (parts.empty()) throw ShapeMismatch("concat_cols of nothing");
  Tape& t = *parts.front().tape;
  const Eigen::Index rows = parts.front().rows();
  Eigen::Index cols = 0;
  for (const Var& p : parts) {
    if (p.tape != &t) throw ShapeMismatch("operands live on different tapes");
    require(p.rows() == rows, "concat_cols", parts.front().value(), p.value());
    cols += p.cols();
  }
  Matrix out(rows, cols);
  Eigen::Index at = 0;
  for (const Var& p : parts) {
    out.middleCols(at, p.cols()) = p.value();
    at += p.cols();
  }
  return t.push(std::move(out), [parts](Tape& t, int self) {
    const Matrix& g = t.grad_acc(self);
    Eigen::Index at = 0;
    for (const Var& p : parts) {
      const Eigen::Index c = t.value(p).cols();
      t.grad_acc(p.id) += g.middleCols(at, c);
      at += c;
    }
  });
}

Var concat_rows(const std::vector<Var>& parts) {
  if (parts.empty()) throw ShapeMismatch("concat_rows of nothing");
  Tape& t = *parts.front().tape;
  const Eigen::Index cols = parts.front().cols();
  Eigen::Index rows = 0;
  for (const Var& p : parts) {
    if (p.tape != &t) throw ShapeMismatch("operands live on different tapes");
    require(p.cols() == cols, "concat_rows", parts.front().value(), p.value());
    rows += p.rows();
  }
  Matrix out(rows, cols);
  Eigen::Index at = 0;
  for (const Var& p : parts) {
    out.middleRows(at, p.rows()) = p.value();
    at += p.rows();
  }
  return t.push(std::move(out), [parts](Tape& t, int self) {
    const Matrix& g = t.grad_acc(self);
    Eigen::Index at = 0;
    for (const Var& p : parts) {
      const Eigen::Index r = t.value(p).rows();
      t.grad_acc(p.id) += g.middleRows(at, r);
      at += r;
    }
  });
}

Var slice_rows(Var a, Eigen::Index begin, Eigen::Index count) {
  Tape& t = tape_of(a);
  const Matrix& av = a.value();
  if (begin < 0 || count < 0 || begin + count > av.rows())
    throw ShapeMismatch("slice_rows out of range on " + shape_str(av));
  Matrix out = av.middleRows(begin, count);
  return t.push(std::move(out), [a, begin, count](Tape& t, int self) {
    t.grad_acc(a.id).middleRows(begin, count) += t.grad_acc(self);
  });
}

Var slice_cols(Var a, Eigen::Index begin, Eigen::Index count) {
  Tape& t = tape_of(a);
  const Matrix& av = a.value();
  if (begin < 0 || count < 0 || begin + count > av.cols())
    throw ShapeMismatch("slice_cols out of range on " + shape_str(av));
  Matrix out = av.middleCols(begin, count);
  return t.push(std::move(out), [a, begin, count](Tape& t, int self) {
    t.grad_acc(a.id).middleCols(begin, count) += t.grad_acc(self);
  });
}

Var embedding_lookup(Var table, const std::vector<int>& indices) {
  Tape& t = tape_of(table);
  const Matrix& tv = table.value();
  Matrix out(static_cast<Eigen::Index>(indices.size()), tv.cols());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] < 0 || indices[i] >= tv.rows())
      throw ShapeMismatch("embedding index " + std::to_string(indices[i]) + " outside table " + shape_str(tv));
    out.row(static_cast<Eigen::Index>(i)) = tv.row(indices[i]);
  }
  return t.push(std::move(out), [table, indices](Tape& t, int self) {
    const Matrix& g = t.grad_acc(self);
    Matrix& gt = t.grad_acc(table.id);
    for (std::size_t i = 0; i < indices.size(); ++i) gt.row(indices[i]) += g.row(static_cast<Eigen::Index>(i));
  });
}

Var tanh(Var a) {
  Tape& t = tape_of(a);
  Matrix out = a.value().array().tanh();
  return t.push(std::move(out), [a](Tape& t, int self) {
    const Matrix& y = t.value({&t, self});
    t.grad_acc(a.id).array() += t.grad_acc(self).array() * (1.0 - y.array().square());
  });
}

Var sigmoid(Var a) {
  Tape& t = tape_of(a);
  Matrix out = (1.0 + (-a.value().array()).exp()).inverse();
  return t.push(std::move(out), [a](Tape& t, int self) {
    const Matrix& y = t.value({&t, self});
    t.grad_acc(a.id).array() += t.grad_acc(self).array() * y.array() * (1.0 - y.array());
  });
}

Var relu(Var a) {
  Tape& t = tape_of(a);
  Matrix out = a.value().cwiseMax(0.0);
  return t.push(std::move(out), [a](Tape& t, int self) {
    const Matrix& x = t.value(a);
    t.grad_acc(a.id).array() += (x.array() > 0.0).select(t.grad_acc(self).array(), 0.0);
  });
}

Var exp(Var a) {
  Tape& t = tape_of(a);
  Matrix out = a.value().array().exp();
  return t.push(std::move(out), [a](Tape& t, int self) {
    t.grad_acc(a.id).array() += t.grad_acc(self).array() * t.value({&t, self}).array();
  });
}

Var clamp(Var a, double lo, double hi) {
  Tape& t = tape_of(a);
  Matrix out = a.value().cwiseMax(lo).cwiseMin(hi);
  return t.push(std::move(out), [a, lo, hi](Tape& t, int self) {
    const Matrix& x = t.value(a);
    t.grad_acc(a.id).array() += (x.array() >= lo && x.array() <= hi).select(t.grad_acc(self).array(), 0.0);
  });
}

Var minimum(Var a, Var b) {
  Tape& t = tape_of(a, b);
  const Matrix& av = a.value();
  const Matrix& bv = b.value();
  require(av.rows() == bv.rows() && av.cols() == bv.cols(), "minimum", av, bv);
  return t.push(av.cwiseMin(bv), [a, b](Tape& t, int self) {
    const Matrix& g = t.grad_acc(self);
    const auto take_a = t.value(a).array() <= t.value(b).array();
    t.grad_acc(a.id).array() += take_a.select(g.array(), 0.0);
    t.grad_acc(b.id).array() += take_a.select(0.0, g.array());
  });
}

Var softmax(Var a) {
  Tape& t = tape_of(a);
  const Matrix& x = a.value();
  Matrix out(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const double m = x.row(i).maxCoeff();
    out.row(i) = (x.row(i).array() - m).exp();
    out.row(i) /= out.row(i).sum();
  }
  return t.push(std::move(out), [a](Tape& t, int self) {
    const Matrix& y = t.value({&t, self});
    const Matrix& g = t.grad_acc(self);
    const Eigen::VectorXd dot = (g.array() * y.array()).rowwise().sum();
    t.grad_acc(a.id).array() += y.array() * (g.colwise() - dot).array();
  });
}

Var log_softmax(Var a) {
  Tape& t = tape_of(a);
  const Matrix& x = a.value();
  Matrix out(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const double m = x.row(i).maxCoeff();
    const double lse = m + std::log((x.row(i).array() - m).exp().sum());
    out.row(i) = x.row(i).array() - lse;
  }
  return t.push(std::move(out), [a](Tape& t, int self) {
    const Matrix& y = t.value({&t, self});
    const Matrix& g = t.grad_acc(self);
    const Eigen::VectorXd gsum = g.rowwise().sum();
    t.grad_acc(a.id).array() += g.array() - y.array().exp() * gsum.replicate(1, y.cols()).array();
  });
}

Var gather_cols(Var a, const std::vector<int>& indices) {
  Tape& t = tape_of(a);
  const Matrix& x = a.value();
  if (static_cast<Eigen::Index>(indices.size()) != x.rows())
    throw ShapeMismatch("gather_cols: " + std::to_string(indices.size()) + " indices for " + shape_str(x));
  Matrix out(x.rows(), 1);
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const int c = indices[static_cast<std::size_t>(i)];
    if (c < 0 || c >= x.cols()) throw ShapeMismatch("gather_cols index out of range");
    out(i, 0) = x(i, c);
  }
  return t.push(std::move(out), [a, indices](Tape& t, int self) {
    const Matrix& g = t.grad_acc(self);
    Matrix& ga = t.grad_acc(a.id);
    for (Eigen::Index i = 0; i < g.rows(); ++i) ga(i, indices[static_cast<std::size_t>(i)]) += g(i, 0);
  });
}

Var sum(Var a) {
  Tape& t = tape_of(a);
  Matrix out(1, 1);
  out(0, 0) = a.value().sum();
  return t.push(std::move(out), [a](Tape& t, int self) { t.grad_acc(a.id).array() += t.grad_acc(self)(0, 0); });
}

Var mean(Var a) {
  Tape& t = tape_of(a);
  const double n = static_cast<double>(a.value().size());
  Matrix out(1, 1);
  out(0, 0) = a.value().sum() / n;
  return t.push(std::move(out), [a, n](Tape& t, int self) { t.grad_acc(a.id).array() += t.grad_acc(self)(0, 0) / n; });
}

Var weighted_mean(Var a, const Matrix& weights) {
  Tape& t = tape_of(a);
  const Matrix& x = a.value();
  require(x.rows() == weights.rows() && x.cols() == weights.cols(), "weighted_mean", x, weights);
  const double wsum = weights.sum();
  Matrix w = wsum > 0.0 ? Matrix(weights / wsum) : Matrix(Matrix::Zero(weights.rows(), weights.cols()));
  Matrix out(1, 1);
  out(0, 0) = x.cwiseProduct(w).sum();
  return t.push(std::move(out), [a, w](Tape& t, int self) { t.grad_acc(a.id) += w * t.grad_acc(self)(0, 0); });
}

Var gru_cell(Var gx, Var h, Var w_h, Var b_h) {
  Tape& t = tape_of(gx, h);
  const Matrix& gxv = gx.value();
  const Matrix& hv = h.value();
  const Matrix& whv = w_h.value();
  const Matrix& bhv = b_h.value();
  const Eigen::Index n = hv.rows();
  const Eigen::Index H = hv.cols();
  require(gxv.rows() == n && gxv.cols() == 3 * H, "gru_cell(gx, h)", gxv, hv);
  require(whv.rows() == H && whv.cols() == 3 * H, "gru_cell(h, W_h)", hv, whv);
  require(bhv.rows() == 1 && bhv.cols() == 3 * H, "gru_cell(W_h, b_h)", whv, bhv);

  Matrix gh = hv * whv;
  gh.rowwise() += bhv.row(0);
  // cache: [r | z | c | gh_c] so the backward pass needs no recomputation
  Matrix cache(n, 4 * H);
  auto r = cache.middleCols(0, H);
  auto z = cache.middleCols(H, H);
  auto c = cache.middleCols(2 * H, H);
  r = (1.0 + (-(gxv.middleCols(0, H) + gh.middleCols(0, H)).array()).exp()).inverse();
  z = (1.0 + (-(gxv.middleCols(H, H) + gh.middleCols(H, H)).array()).exp()).inverse();
  c = (gxv.middleCols(2 * H, H).array() + r.array() * gh.middleCols(2 * H, H).array()).tanh();
  cache.middleCols(3 * H, H) = gh.middleCols(2 * H, H);
  Matrix out = (1.0 - z.array()) * c.array() + z.array() * hv.array();

  return t.push(std::move(out), [gx, h, w_h, b_h, cache = std::move(cache), H](Tape& t, int self) {
    const Matrix& g = t.grad_acc(self);
    const auto r = cache.middleCols(0, H).array();
    const auto z = cache.middleCols(H, H).array();
    const auto c = cache.middleCols(2 * H, H).array();
    const auto ghc = cache.middleCols(3 * H, H).array();
    const auto hv = t.value(h).array();
    const auto ga = g.array();

    Matrix dpre(g.rows(), 3 * H);  // d wrt gate pre-activations (shared by gx and gh)
    const auto dc_pre = (ga * (1.0 - z) * (1.0 - c.square())).eval();
    dpre.middleCols(2 * H, H) = dc_pre.matrix();
    dpre.middleCols(H, H) = (ga * (hv - c) * z * (1.0 - z)).matrix();
    dpre.middleCols(0, H) = (dc_pre * ghc * r * (1.0 - r)).matrix();

    Matrix dgh = dpre;
    dgh.middleCols(2 * H, H) = (dc_pre * r).matrix();

    t.grad_acc(gx.id) += dpre;
    Matrix& gh_ = t.grad_acc(h.id);
    gh_.array() += ga * z;
    gh_.noalias() += dgh * t.value(w_h).transpose();
    t.grad_acc(w_h.id).noalias() += t.value(h).transpose() * dgh;
    t.grad_acc(b_h.id) += dgh.colwise().sum();
  });
}

Var gru_cell(Var x, Var h, Var w_i, Var b_i, Var w_h, Var b_h) {
  return gru_cell(add(matmul(x, w_i), b_i), h, w_h, b_h);
}

Var focal_loss(Var p, const std::vector<double>& labels, double gamma, double alpha) {
  Tape& t = tape_of(p);
  const Matrix& pv = p.value();
  if (static_cast<Eigen::Index>(labels.size()) != pv.size())
    throw ShapeMismatch("focal_loss: " + std::to_string(labels.size()) + " labels for " + shape_str(pv));
  constexpr double lo = 1e-7;
  constexpr double hi = 1.0 - 1e-7;
  Matrix out(pv.rows(), pv.cols());
  Matrix dout(pv.rows(), pv.cols());
  for (Eigen::Index i = 0; i < pv.size(); ++i) {
    const double raw = pv.data()[i];
    const double q = std::clamp(raw, lo, hi);
    const bool inside = raw >= lo && raw <= hi;
    if (labels[static_cast<std::size_t>(i)] > 0.5) {
      const double w = std::pow(1.0 - q, gamma);
      out.data()[i] = -alpha * w * std::log(q);
      // d/dq [-a (1-q)^g ln q] = a g (1-q)^(g-1) ln q - a (1-q)^g / q
      const double dw = gamma == 0.0 ? 0.0 : gamma * std::pow(1.0 - q, gamma - 1.0);
      dout.data()[i] = inside ? alpha * dw * std::log(q) - alpha * w / q : 0.0;
    } else {
      const double w = std::pow(q, gamma);
      out.data()[i] = -(1.0 - alpha) * w * std::log(1.0 - q);
      // d/dq [-(1-a) q^g ln(1-q)] = -(1-a) g q^(g-1) ln(1-q) + (1-a) q^g / (1-q)
      const double dw = gamma == 0.0 ? 0.0 : gamma * std::pow(q, gamma - 1.0);
      dout.data()[i] = inside ? -(1.0 - alpha) * dw * std::log(1.0 - q) + (1.0 - alpha) * w / (1.0 - q) : 0.0;
    }
  }
  return t.push(std::move(out), [p, dout = std::move(dout)](Tape& t, int self) {
    t.grad_acc(p.id).array() += t.grad_acc(self).array() * dout.array();
  });
}

}  // namespace dfree::ad
