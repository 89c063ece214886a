#include "hmgrl/autodiff.hpp"

#include <algorithm>
#include <cmath>

namespace hmgrl {

const Tensor& Var::value() const { return graph_->value(id_); }

double Var::item() const {
  const Tensor& v = value();
  if (v.size() != 1) throw std::logic_error("item() on non-scalar node " + shape_string(v.shape()));
  return v[0];
}

Graph::Graph(const ModelParams* params, bool track_gradients)
    : params_(params), track_(track_gradients) {
  nodes_.reserve(256);
}

Var Graph::push_leaf(std::string op, Tensor value, bool requires_grad) {
  if (value.rank() != 2) {
    const std::size_t r = value.rows();
    const std::size_t c = value.cols();
    value = value.reshaped({r, c});
  }
  if (!value.all_finite()) throw NumericalError(op, "leaf holds a non-finite element");
  nodes_.push_back({std::move(op), std::move(value), {}, requires_grad && track_, false, {}});
  return {this, nodes_.size() - 1};
}

Var Graph::constant(Tensor value) { return push_leaf("constant", std::move(value), false); }

Var Graph::variable(Tensor value) { return push_leaf("variable", std::move(value), true); }

Var Graph::param(std::string_view name) {
  if (params_ == nullptr) throw std::logic_error("graph has no parameter set");
  const std::size_t index = params_->index_of(name);
  if (auto it = param_nodes_.find(index); it != param_nodes_.end()) return {this, it->second};
  Var v = push_leaf("param:" + std::string(name), (*params_)[index].value, true);
  param_nodes_.emplace(index, v.id());
  return v;
}

Var Graph::record(std::string_view op, Tensor value, std::initializer_list<Var> parents,
                  BackwardFn fn) {
  bool needs = false;
  for (const Var& p : parents) needs = needs || nodes_[p.id()].requires_grad;
  if (!value.all_finite()) throw NumericalError(std::string(op), "output " + shape_string(value.shape()));
  nodes_.push_back({std::string(op), std::move(value), {}, needs, false, needs ? std::move(fn) : BackwardFn{}});
  return {this, nodes_.size() - 1};
}

Var Graph::record(std::string_view op, Tensor value, const std::vector<Var>& parents,
                  BackwardFn fn) {
  bool needs = false;
  for (const Var& p : parents) needs = needs || nodes_[p.id()].requires_grad;
  if (!value.all_finite()) throw NumericalError(std::string(op), "output " + shape_string(value.shape()));
  nodes_.push_back({std::string(op), std::move(value), {}, needs, false, needs ? std::move(fn) : BackwardFn{}});
  return {this, nodes_.size() - 1};
}

Tensor& Graph::grad_buffer(std::size_t id) {
  Node& n = nodes_[id];
  if (!n.has_grad) {
    n.grad = Tensor(n.value.shape());
    n.has_grad = true;
  }
  return n.grad;
}

Tensor Graph::grad(Var v) const {
  const Node& n = nodes_[v.id()];
  return n.has_grad ? n.grad : Tensor(n.value.shape());
}

void Graph::backward(Var loss) {
  if (!track_) throw std::logic_error("backward() on a graph built without gradient tracking");
  if (loss.value().size() != 1) throw std::logic_error("backward() target must be a scalar");
  for (auto& n : nodes_) {
    n.has_grad = false;
    n.grad = Tensor();
  }
  grad_buffer(loss.id())[0] = 1.0;
  for (std::size_t i = loss.id() + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.has_grad || !n.backward) continue;
    n.backward(*this, n.grad);
  }
  for (std::size_t i = 0; i <= loss.id(); ++i) {
    if (nodes_[i].has_grad && !nodes_[i].grad.all_finite()) {
      throw NumericalError(nodes_[i].op, "gradient");
    }
  }
}

Gradients Graph::parameter_gradients() const {
  Gradients out;
  if (params_ == nullptr) return out;
  out.reserve(params_->size());
  for (std::size_t i = 0; i < params_->size(); ++i) {
    auto it = param_nodes_.find(i);
    if (it != param_nodes_.end() && nodes_[it->second].has_grad) {
      out.push_back(nodes_[it->second].grad.reshaped((*params_)[i].value.shape()));
    } else {
      out.emplace_back((*params_)[i].value.shape());
    }
  }
  return out;
}

void accumulate_product(Tensor& out, const Tensor& a, bool transpose_a, const Tensor& b,
                        bool transpose_b) {
  const std::size_t m = transpose_a ? a.cols() : a.rows();
  const std::size_t k = transpose_a ? a.rows() : a.cols();
  const std::size_t kb = transpose_b ? b.cols() : b.rows();
  const std::size_t n = transpose_b ? b.rows() : b.cols();
  if (k != kb || out.rows() != m || out.cols() != n) {
    throw std::invalid_argument("matmul shape mismatch: " + shape_string(a.shape()) +
                                (transpose_a ? "^T" : "") + " x " + shape_string(b.shape()) +
                                (transpose_b ? "^T" : ""));
  }
  const double* pa = a.data().data();
  const double* pb = b.data().data();
  double* po = out.data().data();
  const std::size_t lda = a.cols();
  const std::size_t ldb = b.cols();
  if (!transpose_a && !transpose_b) {
    for (std::size_t i = 0; i < m; ++i) {
      double* orow = po + i * n;
      for (std::size_t p = 0; p < k; ++p) {
        const double aip = pa[i * lda + p];
        if (aip == 0.0) continue;
        const double* brow = pb + p * ldb;
        for (std::size_t j = 0; j < n; ++j) orow[j] += aip * brow[j];
      }
    }
  } else if (!transpose_a && transpose_b) {
    for (std::size_t i = 0; i < m; ++i) {
      const double* arow = pa + i * lda;
      for (std::size_t j = 0; j < n; ++j) {
        const double* brow = pb + j * ldb;
        double acc = 0.0;
        for (std::size_t p = 0; p < k; ++p) acc += arow[p] * brow[p];
        po[i * n + j] += acc;
      }
    }
  } else if (transpose_a && !transpose_b) {
    for (std::size_t p = 0; p < k; ++p) {
      const double* arow = pa + p * lda;
      const double* brow = pb + p * ldb;
      for (std::size_t i = 0; i < m; ++i) {
        const double api = arow[i];
        if (api == 0.0) continue;
        double* orow = po + i * n;
        for (std::size_t j = 0; j < n; ++j) orow[j] += api * brow[j];
      }
    }
  } else {
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        double acc = 0.0;
        for (std::size_t p = 0; p < k; ++p) acc += pa[p * lda + i] * pb[j * ldb + p];
        po[i * n + j] += acc;
      }
  }
}

namespace ops {

namespace {

void require_same_graph(Var a, Var b) {
  if (&a.graph() != &b.graph()) throw std::logic_error("operands belong to different graphs");
}

void require_same_shape(std::string_view op, const Tensor& a, const Tensor& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw std::invalid_argument(std::string(op) + ": shape mismatch " + shape_string(a.shape()) +
                                " vs " + shape_string(b.shape()));
  }
}

template <typename F, typename D>
Var unary(std::string_view op, Var a, F f, D dfdx) {
  const Tensor& x = a.value();
  Tensor y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = f(x[i]);
  const std::size_t ia = a.id();
  return a.graph().record(op, std::move(y), {a}, [ia, dfdx](Graph& g, const Tensor& go) {
    const Tensor& xv = g.value(ia);
    Tensor& ga = g.grad_buffer(ia);
    for (std::size_t i = 0; i < xv.size(); ++i) ga[i] += go[i] * dfdx(xv[i]);
  });
}

}  // namespace

Var matmul(Var a, Var b) {
  require_same_graph(a, b);
  Tensor out = Tensor::matrix(a.rows(), b.cols());
  accumulate_product(out, a.value(), false, b.value(), false);
  const std::size_t ia = a.id(), ib = b.id();
  return a.graph().record("matmul", std::move(out), {a, b}, [ia, ib](Graph& g, const Tensor& go) {
    if (g.requires_grad(ia)) accumulate_product(g.grad_buffer(ia), go, false, g.value(ib), true);
    if (g.requires_grad(ib)) accumulate_product(g.grad_buffer(ib), g.value(ia), true, go, false);
  });
}

Var matmul_nt(Var a, Var b) {
  require_same_graph(a, b);
  Tensor out = Tensor::matrix(a.rows(), b.rows());
  accumulate_product(out, a.value(), false, b.value(), true);
  const std::size_t ia = a.id(), ib = b.id();
  return a.graph().record("matmul_nt", std::move(out), {a, b}, [ia, ib](Graph& g, const Tensor& go) {
    if (g.requires_grad(ia)) accumulate_product(g.grad_buffer(ia), go, false, g.value(ib), false);
    if (g.requires_grad(ib)) accumulate_product(g.grad_buffer(ib), go, true, g.value(ia), false);
  });
}

Var transpose(Var a) {
  const Tensor& x = a.value();
  Tensor y = Tensor::matrix(x.cols(), x.rows());
  for (std::size_t i = 0; i < x.rows(); ++i)
    for (std::size_t j = 0; j < x.cols(); ++j) y(j, i) = x(i, j);
  const std::size_t ia = a.id();
  return a.graph().record("transpose", std::move(y), {a}, [ia](Graph& g, const Tensor& go) {
    Tensor& ga = g.grad_buffer(ia);
    for (std::size_t i = 0; i < ga.rows(); ++i)
      for (std::size_t j = 0; j < ga.cols(); ++j) ga(i, j) += go(j, i);
  });
}

namespace {

enum class Broadcast { kNone, kRow, kScalar };

Broadcast broadcast_kind(std::string_view op, const Tensor& a, const Tensor& b) {
  if (a.rows() == b.rows() && a.cols() == b.cols()) return Broadcast::kNone;
  if (b.rows() == 1 && b.cols() == a.cols()) return Broadcast::kRow;
  if (b.size() == 1) return Broadcast::kScalar;
  throw std::invalid_argument(std::string(op) + ": cannot broadcast " + shape_string(b.shape()) +
                              " onto " + shape_string(a.shape()));
}

Var add_signed(std::string_view op, Var a, Var b, double sign) {
  require_same_graph(a, b);
  const Tensor& x = a.value();
  const Tensor& z = b.value();
  const Broadcast kind = broadcast_kind(op, x, z);
  Tensor y = x;
  const std::size_t cols = x.cols();
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double bv = kind == Broadcast::kNone ? z[i] : kind == Broadcast::kRow ? z[i % cols] : z[0];
    y[i] += sign * bv;
  }
  const std::size_t ia = a.id(), ib = b.id();
  return a.graph().record(op, std::move(y), {a, b}, [ia, ib, kind, sign, cols](Graph& g, const Tensor& go) {
    if (g.requires_grad(ia)) {
      Tensor& ga = g.grad_buffer(ia);
      for (std::size_t i = 0; i < go.size(); ++i) ga[i] += go[i];
    }
    if (g.requires_grad(ib)) {
      Tensor& gb = g.grad_buffer(ib);
      for (std::size_t i = 0; i < go.size(); ++i) {
        const std::size_t j = kind == Broadcast::kNone ? i : kind == Broadcast::kRow ? i % cols : 0;
        gb[j] += sign * go[i];
      }
    }
  });
}

}  // namespace

Var add(Var a, Var b) { return add_signed("add", a, b, 1.0); }
Var sub(Var a, Var b) { return add_signed("sub", a, b, -1.0); }

Var mul(Var a, Var b) {
  require_same_graph(a, b);
  require_same_shape("mul", a.value(), b.value());
  const Tensor& x = a.value();
  const Tensor& z = b.value();
  Tensor y(x.shape());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = x[i] * z[i];
  const std::size_t ia = a.id(), ib = b.id();
  return a.graph().record("mul", std::move(y), {a, b}, [ia, ib](Graph& g, const Tensor& go) {
    if (g.requires_grad(ia)) {
      Tensor& ga = g.grad_buffer(ia);
      const Tensor& zv = g.value(ib);
      for (std::size_t i = 0; i < go.size(); ++i) ga[i] += go[i] * zv[i];
    }
    if (g.requires_grad(ib)) {
      Tensor& gb = g.grad_buffer(ib);
      const Tensor& xv = g.value(ia);
      for (std::size_t i = 0; i < go.size(); ++i) gb[i] += go[i] * xv[i];
    }
  });
}

Var scale(Var a, double factor) {
  return unary("scale", a, [factor](double x) { return factor * x; },
               [factor](double) { return factor; });
}

Var add_scalar(Var a, double offset) {
  return unary("add_scalar", a, [offset](double x) { return x + offset; }, [](double) { return 1.0; });
}

Var neg(Var a) { return scale(a, -1.0); }

Var concat_cols(const std::vector<Var>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat_cols: no parts");
  const std::size_t rows = parts.front().rows();
  std::size_t cols = 0;
  for (const Var& p : parts) {
    if (p.rows() != rows) throw std::invalid_argument("concat_cols: row count mismatch");
    cols += p.cols();
  }
  Tensor y = Tensor::matrix(rows, cols);
  std::vector<std::size_t> ids, offsets;
  std::size_t off = 0;
  for (const Var& p : parts) {
    const Tensor& v = p.value();
    for (std::size_t r = 0; r < rows; ++r)
      std::copy(v.row_span(r).begin(), v.row_span(r).end(), y.row_span(r).begin() + off);
    ids.push_back(p.id());
    offsets.push_back(off);
    off += v.cols();
  }
  return parts.front().graph().record("concat_cols", std::move(y), parts,
                                      [ids, offsets](Graph& g, const Tensor& go) {
    for (std::size_t k = 0; k < ids.size(); ++k) {
      if (!g.requires_grad(ids[k])) continue;
      Tensor& gp = g.grad_buffer(ids[k]);
      for (std::size_t r = 0; r < gp.rows(); ++r)
        for (std::size_t c = 0; c < gp.cols(); ++c) gp(r, c) += go(r, offsets[k] + c);
    }
  });
}

Var concat_rows(const std::vector<Var>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat_rows: no parts");
  const std::size_t cols = parts.front().cols();
  std::size_t rows = 0;
  for (const Var& p : parts) {
    if (p.cols() != cols) throw std::invalid_argument("concat_rows: column count mismatch");
    rows += p.rows();
  }
  std::vector<double> values;
  values.reserve(rows * cols);
  std::vector<std::size_t> ids, offsets;
  for (const Var& p : parts) {
    offsets.push_back(values.size());
    ids.push_back(p.id());
    values.insert(values.end(), p.value().values().begin(), p.value().values().end());
  }
  return parts.front().graph().record("concat_rows", Tensor::matrix(rows, cols, std::move(values)), parts,
                                      [ids, offsets](Graph& g, const Tensor& go) {
    for (std::size_t k = 0; k < ids.size(); ++k) {
      if (!g.requires_grad(ids[k])) continue;
      Tensor& gp = g.grad_buffer(ids[k]);
      for (std::size_t i = 0; i < gp.size(); ++i) gp[i] += go[offsets[k] + i];
    }
  });
}

Var slice_cols(Var a, std::size_t start, std::size_t count) {
  const Tensor& x = a.value();
  if (start + count > x.cols() || count == 0) throw std::out_of_range("slice_cols: range out of bounds");
  Tensor y = Tensor::matrix(x.rows(), count);
  for (std::size_t r = 0; r < x.rows(); ++r)
    for (std::size_t c = 0; c < count; ++c) y(r, c) = x(r, start + c);
  const std::size_t ia = a.id();
  return a.graph().record("slice_cols", std::move(y), {a}, [ia, start, count](Graph& g, const Tensor& go) {
    Tensor& ga = g.grad_buffer(ia);
    for (std::size_t r = 0; r < ga.rows(); ++r)
      for (std::size_t c = 0; c < count; ++c) ga(r, start + c) += go(r, c);
  });
}

Var slice_rows(Var a, std::size_t start, std::size_t count) {
  std::vector<std::size_t> rows(count);
  for (std::size_t i = 0; i < count; ++i) rows[i] = start + i;
  return select_rows(a, rows);
}

Var select_rows(Var a, const std::vector<std::size_t>& rows) {
  const Tensor& x = a.value();
  if (rows.empty()) throw std::invalid_argument("select_rows: empty selection");
  Tensor y = Tensor::matrix(rows.size(), x.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= x.rows()) throw std::out_of_range("select_rows: row index out of range");
    std::copy(x.row_span(rows[i]).begin(), x.row_span(rows[i]).end(), y.row_span(i).begin());
  }
  const std::size_t ia = a.id();
  return a.graph().record("select_rows", std::move(y), {a}, [ia, rows](Graph& g, const Tensor& go) {
    Tensor& ga = g.grad_buffer(ia);
    for (std::size_t i = 0; i < rows.size(); ++i)
      for (std::size_t c = 0; c < ga.cols(); ++c) ga(rows[i], c) += go(i, c);
  });
}

Var sum(Var a) {
  double total = 0.0;
  for (double v : a.value().data()) total += v;
  const std::size_t ia = a.id();
  return a.graph().record("sum", Tensor::scalar(total), {a}, [ia](Graph& g, const Tensor& go) {
    Tensor& ga = g.grad_buffer(ia);
    for (double& v : ga.data()) v += go[0];
  });
}

Var sum_rows(Var a) {
  const Tensor& x = a.value();
  Tensor y = Tensor::matrix(1, x.cols());
  for (std::size_t r = 0; r < x.rows(); ++r)
    for (std::size_t c = 0; c < x.cols(); ++c) y[c] += x(r, c);
  const std::size_t ia = a.id();
  return a.graph().record("sum_rows", std::move(y), {a}, [ia](Graph& g, const Tensor& go) {
    Tensor& ga = g.grad_buffer(ia);
    for (std::size_t r = 0; r < ga.rows(); ++r)
      for (std::size_t c = 0; c < ga.cols(); ++c) ga(r, c) += go[c];
  });
}

Var mean_rows(Var a) {
  if (a.rows() == 0) throw std::invalid_argument("mean_rows: zero rows");
  return scale(sum_rows(a), 1.0 / static_cast<double>(a.rows()));
}

Var square(Var a) {
  return unary("square", a, [](double x) { return x * x; }, [](double x) { return 2.0 * x; });
}

Var exp(Var a) {
  return unary("exp", a, [](double x) { return std::exp(x); }, [](double x) { return std::exp(x); });
}

Var log(Var a) {
  return unary("log", a, [](double x) { return std::log(x); }, [](double x) { return 1.0 / x; });
}

Var softplus(Var a) {
  return unary(
      "softplus", a, [](double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); },
      [](double x) {
        return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
      });
}

Var tanh(Var a) {
  return unary("tanh", a, [](double x) { return std::tanh(x); },
               [](double x) {
                 const double t = std::tanh(x);
                 return 1.0 - t * t;
               });
}

Var relu(Var a) {
  return unary("relu", a, [](double x) { return x > 0.0 ? x : 0.0; },
               [](double x) { return x > 0.0 ? 1.0 : 0.0; });
}

Var softmax_rows(Var a) {
  const Tensor& x = a.value();
  Tensor y(x.shape());
  for (std::size_t r = 0; r < x.rows(); ++r) {
    const auto row = x.row_span(r);
    const double mx = *std::max_element(row.begin(), row.end());
    double z = 0.0;
    for (std::size_t c = 0; c < row.size(); ++c) z += (y(r, c) = std::exp(row[c] - mx));
    for (std::size_t c = 0; c < row.size(); ++c) y(r, c) /= z;
  }
  const std::size_t ia = a.id();
  Graph& g = a.graph();
  const std::size_t io = g.node_count();
  return g.record("softmax_rows", std::move(y), {a}, [ia, io](Graph& gr, const Tensor& go) {
    const Tensor& yv = gr.value(io);
    Tensor& ga = gr.grad_buffer(ia);
    for (std::size_t r = 0; r < yv.rows(); ++r) {
      double dot = 0.0;
      for (std::size_t c = 0; c < yv.cols(); ++c) dot += go(r, c) * yv(r, c);
      for (std::size_t c = 0; c < yv.cols(); ++c) ga(r, c) += yv(r, c) * (go(r, c) - dot);
    }
  });
}

Var log_softmax_rows(Var a) {
  const Tensor& x = a.value();
  Tensor y(x.shape());
  for (std::size_t r = 0; r < x.rows(); ++r) {
    const auto row = x.row_span(r);
    const double mx = *std::max_element(row.begin(), row.end());
    double z = 0.0;
    for (double v : row) z += std::exp(v - mx);
    const double lse = mx + std::log(z);
    for (std::size_t c = 0; c < row.size(); ++c) y(r, c) = row[c] - lse;
  }
  const std::size_t ia = a.id();
  Graph& g = a.graph();
  const std::size_t io = g.node_count();
  return g.record("log_softmax_rows", std::move(y), {a}, [ia, io](Graph& gr, const Tensor& go) {
    const Tensor& yv = gr.value(io);
    Tensor& ga = gr.grad_buffer(ia);
    for (std::size_t r = 0; r < yv.rows(); ++r) {
      double total = 0.0;
      for (std::size_t c = 0; c < yv.cols(); ++c) total += go(r, c);
      for (std::size_t c = 0; c < yv.cols(); ++c) ga(r, c) += go(r, c) - std::exp(yv(r, c)) * total;
    }
  });
}

Var diag(Var a) {
  const Tensor& x = a.value();
  if (x.rows() != x.cols()) throw std::invalid_argument("diag: matrix is not square");
  Tensor y = Tensor::matrix(1, x.rows());
  for (std::size_t i = 0; i < x.rows(); ++i) y[i] = x(i, i);
  const std::size_t ia = a.id();
  return a.graph().record("diag", std::move(y), {a}, [ia](Graph& g, const Tensor& go) {
    Tensor& ga = g.grad_buffer(ia);
    for (std::size_t i = 0; i < ga.rows(); ++i) ga(i, i) += go[i];
  });
}

Var pick(Var a, const std::vector<std::size_t>& index) {
  const Tensor& x = a.value();
  if (index.size() != x.rows()) throw std::invalid_argument("pick: one index per row required");
  Tensor y = Tensor::matrix(x.rows(), 1);
  for (std::size_t r = 0; r < x.rows(); ++r) {
    if (index[r] >= x.cols()) throw std::out_of_range("pick: column index out of range");
    y[r] = x(r, index[r]);
  }
  const std::size_t ia = a.id();
  return a.graph().record("pick", std::move(y), {a}, [ia, index](Graph& g, const Tensor& go) {
    Tensor& ga = g.grad_buffer(ia);
    for (std::size_t r = 0; r < index.size(); ++r) ga(r, index[r]) += go[r];
  });
}

}  // namespace ops
}  // namespace hmgrl
