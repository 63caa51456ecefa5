#include "voxtr/core/ops.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

#include "voxtr/core/conv.hpp"

namespace voxtr::ag {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Map = Eigen::Map<RowMat>;
using CMap = Eigen::Map<const RowMat>;

thread_local int g_no_grad_depth = 0;

Map map2(Tensor& t, long rows, long cols) { return Map(t.data(), rows, cols); }
CMap cmap2(const Tensor& t, long rows, long cols) { return CMap(t.data(), rows, cols); }

// Builds a node; drops the backward machinery when no input needs it or a
// NoGradGuard is active.
Var make_node(const char* op, Tensor value, std::vector<Var> inputs,
              std::function<void(Node&)> backward_fn) {
  auto n = std::make_shared<Node>();
  n->op = op;
  n->value = std::move(value);
  if (!NoGradGuard::active() && any_requires_grad(inputs)) {
    n->requires_grad = true;
    n->inputs = std::move(inputs);
    n->backward_fn = std::move(backward_fn);
  }
  return n;
}

void check_same_shape(const char* op, const Var& a, const Var& b) {
  if (!a->value.same_shape(b->value)) {
    throw std::invalid_argument(std::string(op) + ": shape mismatch " + shape_str(a->value.shape()) +
                                " vs " + shape_str(b->value.shape()));
  }
}

}  // namespace

NoGradGuard::NoGradGuard() { ++g_no_grad_depth; }
NoGradGuard::~NoGradGuard() { --g_no_grad_depth; }
bool NoGradGuard::active() { return g_no_grad_depth > 0; }

Var add(const Var& a, const Var& b) {
  check_same_shape("add", a, b);
  Tensor out = a->value;
  for (long i = 0; i < out.numel(); ++i) out[i] += b->value[i];
  return make_node("add", std::move(out), {a, b}, [](Node& n) {
    if (n.inputs[0]->requires_grad) n.inputs[0]->accumulate_grad(n.grad);
    if (n.inputs[1]->requires_grad) n.inputs[1]->accumulate_grad(n.grad);
  });
}

Var sub(const Var& a, const Var& b) {
  check_same_shape("sub", a, b);
  Tensor out = a->value;
  for (long i = 0; i < out.numel(); ++i) out[i] -= b->value[i];
  return make_node("sub", std::move(out), {a, b}, [](Node& n) {
    if (n.inputs[0]->requires_grad) n.inputs[0]->accumulate_grad(n.grad);
    if (n.inputs[1]->requires_grad) {
      Tensor g = n.grad;
      for (long i = 0; i < g.numel(); ++i) g[i] = -g[i];
      n.inputs[1]->accumulate_grad(g);
    }
  });
}

Var mul(const Var& a, const Var& b) {
  check_same_shape("mul", a, b);
  Tensor out = a->value;
  for (long i = 0; i < out.numel(); ++i) out[i] *= b->value[i];
  return make_node("mul", std::move(out), {a, b}, [](Node& n) {
    const Tensor& av = n.inputs[0]->value;
    const Tensor& bv = n.inputs[1]->value;
    if (n.inputs[0]->requires_grad) {
      Tensor g = n.grad;
      for (long i = 0; i < g.numel(); ++i) g[i] *= bv[i];
      n.inputs[0]->accumulate_grad(g);
    }
    if (n.inputs[1]->requires_grad) {
      Tensor g = n.grad;
      for (long i = 0; i < g.numel(); ++i) g[i] *= av[i];
      n.inputs[1]->accumulate_grad(g);
    }
  });
}

Var scale(const Var& a, double s) {
  Tensor out = a->value;
  for (long i = 0; i < out.numel(); ++i) out[i] *= s;
  return make_node("scale", std::move(out), {a}, [s](Node& n) {
    Tensor g = n.grad;
    for (long i = 0; i < g.numel(); ++i) g[i] *= s;
    n.inputs[0]->accumulate_grad(g);
  });
}

Var add_scalar(const Var& a, double s) {
  Tensor out = a->value;
  for (long i = 0; i < out.numel(); ++i) out[i] += s;
  return make_node("add_scalar", std::move(out), {a},
                   [](Node& n) { n.inputs[0]->accumulate_grad(n.grad); });
}

Var relu(const Var& x) {
  Tensor out = x->value;
  for (long i = 0; i < out.numel(); ++i) out[i] = out[i] > 0.0 ? out[i] : 0.0;
  return make_node("relu", std::move(out), {x}, [](Node& n) {
    const Tensor& xv = n.inputs[0]->value;
    Tensor g = n.grad;
    for (long i = 0; i < g.numel(); ++i) {
      if (xv[i] <= 0.0) g[i] = 0.0;
    }
    n.inputs[0]->accumulate_grad(g);
  });
}

Var gelu(const Var& x) {
  // Exact erf form.
  Tensor out = x->value;
  for (long i = 0; i < out.numel(); ++i) {
    const double v = out[i];
    out[i] = 0.5 * v * (1.0 + std::erf(v / std::numbers::sqrt2));
  }
  return make_node("gelu", std::move(out), {x}, [](Node& n) {
    const Tensor& xv = n.inputs[0]->value;
    Tensor g = n.grad;
    const double inv_sqrt2pi = 1.0 / std::sqrt(2.0 * std::numbers::pi);
    for (long i = 0; i < g.numel(); ++i) {
      const double v = xv[i];
      const double cdf = 0.5 * (1.0 + std::erf(v / std::numbers::sqrt2));
      const double pdf = inv_sqrt2pi * std::exp(-0.5 * v * v);
      g[i] *= cdf + v * pdf;
    }
    n.inputs[0]->accumulate_grad(g);
  });
}

Var sigmoid(const Var& x) {
  Tensor out = x->value;
  for (long i = 0; i < out.numel(); ++i) out[i] = 1.0 / (1.0 + std::exp(-out[i]));
  return make_node("sigmoid", std::move(out), {x}, [](Node& n) {
    const Tensor& y = n.value;
    Tensor g = n.grad;
    for (long i = 0; i < g.numel(); ++i) g[i] *= y[i] * (1.0 - y[i]);
    n.inputs[0]->accumulate_grad(g);
  });
}

Var reshape(const Var& x, Shape shape) {
  Tensor out = x->value.reshaped(std::move(shape));
  return make_node("reshape", std::move(out), {x}, [](Node& n) {
    n.inputs[0]->accumulate_grad(n.grad.reshaped(n.inputs[0]->value.shape()));
  });
}

Var detach(const Var& x) { return constant(x->value); }

Var matmul(const Var& a, const Var& b) {
  const long m = a->value.dim(0), k = a->value.dim(1);
  const long k2 = b->value.dim(0), n = b->value.dim(1);
  if (k != k2) throw std::invalid_argument("matmul: inner dims " + std::to_string(k) + " vs " + std::to_string(k2));
  Tensor out({m, n});
  map2(out, m, n).noalias() = cmap2(a->value, m, k) * cmap2(b->value, k2, n);
  return make_node("matmul", std::move(out), {a, b}, [m, k, n](Node& nd) {
    CMap g(nd.grad.data(), m, n);
    if (nd.inputs[0]->requires_grad) {
      Tensor ga({m, k});
      map2(ga, m, k).noalias() = g * cmap2(nd.inputs[1]->value, k, n).transpose();
      nd.inputs[0]->accumulate_grad(ga);
    }
    if (nd.inputs[1]->requires_grad) {
      Tensor gb({k, n});
      map2(gb, k, n).noalias() = cmap2(nd.inputs[0]->value, m, k).transpose() * g;
      nd.inputs[1]->accumulate_grad(gb);
    }
  });
}

Var linear(const Var& x, const Var& w, const Var& b) {
  const long t = x->value.dim(0), in = x->value.dim(1);
  const long out_dim = w->value.dim(0), in2 = w->value.dim(1);
  if (in != in2) {
    throw std::invalid_argument("linear: input width " + std::to_string(in) + " vs weight " + std::to_string(in2));
  }
  if (b && b->value.numel() != out_dim) throw std::invalid_argument("linear: bias size mismatch");
  Tensor out({t, out_dim});
  map2(out, t, out_dim).noalias() = cmap2(x->value, t, in) * cmap2(w->value, out_dim, in).transpose();
  if (b) {
    double* op = out.data();
    const double* bp = b->value.data();
    for (long r = 0; r < t; ++r) {
      for (long c = 0; c < out_dim; ++c) op[r * out_dim + c] += bp[c];
    }
  }
  std::vector<Var> inputs = b ? std::vector<Var>{x, w, b} : std::vector<Var>{x, w};
  return make_node("linear", std::move(out), std::move(inputs), [t, in, out_dim](Node& nd) {
    CMap g(nd.grad.data(), t, out_dim);
    if (nd.inputs[0]->requires_grad) {
      Tensor gx({t, in});
      map2(gx, t, in).noalias() = g * cmap2(nd.inputs[1]->value, out_dim, in);
      nd.inputs[0]->accumulate_grad(gx);
    }
    if (nd.inputs[1]->requires_grad) {
      Tensor gw({out_dim, in});
      map2(gw, out_dim, in).noalias() = g.transpose() * cmap2(nd.inputs[0]->value, t, in);
      nd.inputs[1]->accumulate_grad(gw);
    }
    if (nd.inputs.size() > 2 && nd.inputs[2]->requires_grad) {
      Tensor gb({out_dim});
      Eigen::Map<Eigen::VectorXd>(gb.data(), out_dim) = g.colwise().sum();
      nd.inputs[2]->accumulate_grad(gb);
    }
  });
}

Var add_rowvec(const Var& m, const Var& v) {
  const long t = m->value.dim(0), d = m->value.dim(1);
  if (v->value.numel() != d) throw std::invalid_argument("add_rowvec: width mismatch");
  Tensor out = m->value;
  double* op = out.data();
  const double* vp = v->value.data();
  for (long r = 0; r < t; ++r) {
    for (long c = 0; c < d; ++c) op[r * d + c] += vp[c];
  }
  return make_node("add_rowvec", std::move(out), {m, v}, [t, d](Node& nd) {
    if (nd.inputs[0]->requires_grad) nd.inputs[0]->accumulate_grad(nd.grad);
    if (nd.inputs[1]->requires_grad) {
      Tensor gv({d});
      const double* g = nd.grad.data();
      for (long r = 0; r < t; ++r) {
        for (long c = 0; c < d; ++c) gv[c] += g[r * d + c];
      }
      nd.inputs[1]->accumulate_grad(gv);
    }
  });
}

Var layer_norm(const Var& x, const Var& gamma, const Var& beta, double eps) {
  const long t = x->value.dim(0), d = x->value.dim(1);
  if (gamma->value.numel() != d || beta->value.numel() != d) {
    throw std::invalid_argument("layer_norm: affine size mismatch");
  }
  Tensor out({t, d});
  Tensor xhat({t, d});
  Tensor inv_std({t});
  const double* xp = x->value.data();
  const double* gp = gamma->value.data();
  const double* bp = beta->value.data();
  for (long r = 0; r < t; ++r) {
    const double* row = xp + r * d;
    double mean = 0.0;
    for (long c = 0; c < d; ++c) mean += row[c];
    mean /= static_cast<double>(d);
    double var = 0.0;
    for (long c = 0; c < d; ++c) {
      const double dv = row[c] - mean;
      var += dv * dv;
    }
    var /= static_cast<double>(d);
    const double is = 1.0 / std::sqrt(var + eps);
    inv_std[r] = is;
    for (long c = 0; c < d; ++c) {
      const double xh = (row[c] - mean) * is;
      xhat[r * d + c] = xh;
      out[r * d + c] = gp[c] * xh + bp[c];
    }
  }
  auto node = make_node("layer_norm", std::move(out), {x, gamma, beta}, [t, d](Node& nd) {
    const Tensor& xhat_s = nd.saved[0];
    const Tensor& inv_std_s = nd.saved[1];
    const double* g = nd.grad.data();
    const double* gm = nd.inputs[1]->value.data();
    if (nd.inputs[0]->requires_grad) {
      Tensor gx({t, d});
      for (long r = 0; r < t; ++r) {
        double sum_dxhat = 0.0, sum_dxhat_xhat = 0.0;
        for (long c = 0; c < d; ++c) {
          const double dxh = g[r * d + c] * gm[c];
          sum_dxhat += dxh;
          sum_dxhat_xhat += dxh * xhat_s[r * d + c];
        }
        const double inv_d = 1.0 / static_cast<double>(d);
        for (long c = 0; c < d; ++c) {
          const double dxh = g[r * d + c] * gm[c];
          gx[r * d + c] = inv_std_s[r] * (dxh - inv_d * sum_dxhat - xhat_s[r * d + c] * inv_d * sum_dxhat_xhat);
        }
      }
      nd.inputs[0]->accumulate_grad(gx);
    }
    if (nd.inputs[1]->requires_grad) {
      Tensor gg({d});
      for (long r = 0; r < t; ++r) {
        for (long c = 0; c < d; ++c) gg[c] += g[r * d + c] * xhat_s[r * d + c];
      }
      nd.inputs[1]->accumulate_grad(gg);
    }
    if (nd.inputs[2]->requires_grad) {
      Tensor gb({d});
      for (long r = 0; r < t; ++r) {
        for (long c = 0; c < d; ++c) gb[c] += g[r * d + c];
      }
      nd.inputs[2]->accumulate_grad(gb);
    }
  });
  if (node->requires_grad) {
    node->saved.push_back(std::move(xhat));
    node->saved.push_back(std::move(inv_std));
  }
  return node;
}

Var attention(const Var& q, const Var& k, const Var& v, int heads, bool causal) {
  const long tq = q->value.dim(0), d = q->value.dim(1);
  const long tk = k->value.dim(0);
  if (k->value.dim(1) != d || v->value.dim(1) != d || v->value.dim(0) != tk) {
    throw std::invalid_argument("attention: q/k/v shape mismatch");
  }
  if (d % heads != 0) throw std::invalid_argument("attention: dim not divisible by heads");
  if (causal && tq != tk) throw std::invalid_argument("attention: causal mask needs square scores");
  const long hd = d / heads;
  const double sc = 1.0 / std::sqrt(static_cast<double>(hd));

  Tensor out({tq, d});
  Tensor probs({static_cast<long>(heads), tq, tk});
  CMap qm = cmap2(q->value, tq, d);
  CMap km = cmap2(k->value, tk, d);
  CMap vm = cmap2(v->value, tk, d);
  Map om = map2(out, tq, d);
  for (int h = 0; h < heads; ++h) {
    const long off = static_cast<long>(h) * hd;
    RowMat s = sc * (qm.middleCols(off, hd) * km.middleCols(off, hd).transpose());
    if (causal) {
      for (long i = 0; i < tq; ++i) {
        for (long j = i + 1; j < tk; ++j) s(i, j) = -std::numeric_limits<double>::infinity();
      }
    }
    Map pm(probs.data() + static_cast<long>(h) * tq * tk, tq, tk);
    for (long i = 0; i < tq; ++i) {
      const double mx = s.row(i).maxCoeff();
      double z = 0.0;
      for (long j = 0; j < tk; ++j) {
        const double e = std::exp(s(i, j) - mx);
        pm(i, j) = e;
        z += e;
      }
      pm.row(i) /= z;
    }
    om.middleCols(off, hd).noalias() = pm * vm.middleCols(off, hd);
  }

  auto node = make_node("attention", std::move(out), {q, k, v}, [tq, tk, d, hd, heads, sc](Node& nd) {
    const Tensor& probs_s = nd.saved[0];
    CMap g(nd.grad.data(), tq, d);
    CMap qm2(nd.inputs[0]->value.data(), tq, d);
    CMap km2(nd.inputs[1]->value.data(), tk, d);
    CMap vm2(nd.inputs[2]->value.data(), tk, d);
    Tensor gq({tq, d}), gk({tk, d}), gv({tk, d});
    Map gqm = map2(gq, tq, d);
    Map gkm = map2(gk, tk, d);
    Map gvm = map2(gv, tk, d);
    for (int h = 0; h < heads; ++h) {
      const long off = static_cast<long>(h) * hd;
      CMap pm(probs_s.data() + static_cast<long>(h) * tq * tk, tq, tk);
      RowMat d_out = g.middleCols(off, hd);
      gvm.middleCols(off, hd).noalias() = pm.transpose() * d_out;
      RowMat dp = d_out * vm2.middleCols(off, hd).transpose();  // [tq, tk]
      // softmax backward; masked entries have p == 0 and drop out.
      RowMat ds(tq, tk);
      for (long i = 0; i < tq; ++i) {
        const double dot = (dp.row(i).array() * pm.row(i).array()).sum();
        ds.row(i) = pm.row(i).array() * (dp.row(i).array() - dot);
      }
      gqm.middleCols(off, hd).noalias() = sc * (ds * km2.middleCols(off, hd));
      gkm.middleCols(off, hd).noalias() = sc * (ds.transpose() * qm2.middleCols(off, hd));
    }
    if (nd.inputs[0]->requires_grad) nd.inputs[0]->accumulate_grad(gq);
    if (nd.inputs[1]->requires_grad) nd.inputs[1]->accumulate_grad(gk);
    if (nd.inputs[2]->requires_grad) nd.inputs[2]->accumulate_grad(gv);
  });
  if (node->requires_grad) node->saved.push_back(std::move(probs));
  return node;
}

Var sum_sq(const Var& x) {
  double s = 0.0;
  for (long i = 0; i < x->value.numel(); ++i) s += x->value[i] * x->value[i];
  return make_node("sum_sq", Tensor::scalar(s), {x}, [](Node& n) {
    const double g = n.grad[0];
    Tensor gx = n.inputs[0]->value;
    for (long i = 0; i < gx.numel(); ++i) gx[i] *= 2.0 * g;
    n.inputs[0]->accumulate_grad(gx);
  });
}

Var mean_all(const Var& x) {
  const long n = x->value.numel();
  double s = 0.0;
  for (long i = 0; i < n; ++i) s += x->value[i];
  return make_node("mean_all", Tensor::scalar(s / static_cast<double>(n)), {x}, [n](Node& nd) {
    const double g = nd.grad[0] / static_cast<double>(n);
    Tensor gx = Tensor::full(nd.inputs[0]->value.shape(), g);
    nd.inputs[0]->accumulate_grad(gx);
  });
}

Var mean_stack(const std::vector<Var>& xs) {
  if (xs.empty()) throw std::invalid_argument("mean_stack: empty list");
  for (const auto& x : xs) {
    if (!x->value.same_shape(xs[0]->value)) throw std::invalid_argument("mean_stack: shape mismatch");
  }
  const double inv = 1.0 / static_cast<double>(xs.size());
  Tensor out = Tensor::zeros(xs[0]->value.shape());
  for (const auto& x : xs) {
    for (long i = 0; i < out.numel(); ++i) out[i] += x->value[i];
  }
  for (long i = 0; i < out.numel(); ++i) out[i] *= inv;
  return make_node("mean_stack", std::move(out), xs, [inv](Node& n) {
    Tensor g = n.grad;
    for (long i = 0; i < g.numel(); ++i) g[i] *= inv;
    for (auto& in : n.inputs) {
      if (in->requires_grad) in->accumulate_grad(g);
    }
  });
}

Var embedding(const Var& table, const std::vector<long>& ids) {
  const long k = table->value.dim(0), d = table->value.dim(1);
  Tensor out({static_cast<long>(ids.size()), d});
  for (size_t i = 0; i < ids.size(); ++i) {
    const long id = ids[i];
    if (id < 0 || id >= k) throw std::invalid_argument("embedding: id out of range");
    std::copy_n(table->value.data() + id * d, d, out.data() + static_cast<long>(i) * d);
  }
  auto node = make_node("embedding", std::move(out), {table}, [d](Node& n) {
    const std::vector<long>& ids_s = n.saved_ids[0];
    Tensor gt = Tensor::zeros(n.inputs[0]->value.shape());
    for (size_t i = 0; i < ids_s.size(); ++i) {
      const double* g = n.grad.data() + static_cast<long>(i) * d;
      double* dst = gt.data() + ids_s[i] * d;
      for (long c = 0; c < d; ++c) dst[c] += g[c];
    }
    n.inputs[0]->accumulate_grad(gt);
  });
  if (node->requires_grad) node->saved_ids.push_back(ids);
  return node;
}

Var gather_flat(const Var& x, std::vector<long> idx) {
  Tensor out({static_cast<long>(idx.size())});
  for (size_t i = 0; i < idx.size(); ++i) out[static_cast<long>(i)] = x->value[idx[i]];
  auto node = make_node("gather_flat", std::move(out), {x}, [](Node& n) {
    const std::vector<long>& idx_s = n.saved_ids[0];
    Tensor gx = Tensor::zeros(n.inputs[0]->value.shape());
    for (size_t i = 0; i < idx_s.size(); ++i) gx[idx_s[i]] += n.grad[static_cast<long>(i)];
    n.inputs[0]->accumulate_grad(gx);
  });
  if (node->requires_grad) node->saved_ids.push_back(std::move(idx));
  return node;
}

Var softmax_xent_mean(const Var& logits, const std::vector<long>& targets) {
  const long t = logits->value.dim(0), k = logits->value.dim(1);
  if (static_cast<long>(targets.size()) != t) throw std::invalid_argument("softmax_xent_mean: target count");
  Tensor probs({t, k});
  double loss = 0.0;
  for (long r = 0; r < t; ++r) {
    const double* row = logits->value.data() + r * k;
    if (targets[r] < 0 || targets[r] >= k) throw std::invalid_argument("softmax_xent_mean: target out of range");
    double mx = row[0];
    for (long c = 1; c < k; ++c) mx = std::max(mx, row[c]);
    double z = 0.0;
    for (long c = 0; c < k; ++c) {
      const double e = std::exp(row[c] - mx);
      probs[r * k + c] = e;
      z += e;
    }
    for (long c = 0; c < k; ++c) probs[r * k + c] /= z;
    loss -= std::log(std::max(probs[r * k + targets[r]], 1e-300));
  }
  loss /= static_cast<double>(t);
  auto node = make_node("softmax_xent_mean", Tensor::scalar(loss), {logits}, [t, k](Node& n) {
    const Tensor& probs_s = n.saved[0];
    const std::vector<long>& tg = n.saved_ids[0];
    const double g = n.grad[0] / static_cast<double>(t);
    Tensor gx({t, k});
    for (long r = 0; r < t; ++r) {
      for (long c = 0; c < k; ++c) gx[r * k + c] = g * probs_s[r * k + c];
      gx[r * k + tg[r]] -= g;
    }
    n.inputs[0]->accumulate_grad(gx);
  });
  if (node->requires_grad) {
    node->saved.push_back(std::move(probs));
    node->saved_ids.push_back(targets);
  }
  return node;
}

Var rows_to_cube(const Var& x, long m) {
  const long rows = x->value.dim(0), d = x->value.dim(1);
  if (rows != m * m * m) throw std::invalid_argument("rows_to_cube: row count != m^3");
  Tensor out({d, m, m, m});
  for (long r = 0; r < rows; ++r) {
    for (long c = 0; c < d; ++c) out[c * rows + r] = x->value[r * d + c];
  }
  return make_node("rows_to_cube", std::move(out), {x}, [rows, d](Node& n) {
    Tensor gx({rows, d});
    for (long r = 0; r < rows; ++r) {
      for (long c = 0; c < d; ++c) gx[r * d + c] = n.grad[c * rows + r];
    }
    n.inputs[0]->accumulate_grad(gx);
  });
}

namespace {

// Shared conv3d/conv2d plumbing; dims = 3 or 2.
Var conv_nd(const Var& x, const Var& w, const Var& b, int k, int s, int p, int dims) {
  const long ci = x->value.dim(0);
  const long co = w->value.dim(0);
  const long kelems = dims == 3 ? static_cast<long>(k) * k * k : static_cast<long>(k) * k;
  if (w->value.dim(1) != ci) throw std::invalid_argument("conv: channel mismatch");
  Shape out_shape{co};
  long cells = 1;
  for (int i = 1; i <= dims; ++i) {
    const long o = conv_out_side(x->value.dim(i), k, s, p);
    out_shape.push_back(o);
    cells *= o;
  }
  Tensor cols;
  if (dims == 3) {
    im2col_3d(x->value, k, s, p, cols);
  } else {
    im2col_2d(x->value, k, s, p, cols);
  }
  Tensor out(out_shape);
  map2(out, co, cells).noalias() = cmap2(w->value, co, ci * kelems) * cmap2(cols, ci * kelems, cells);
  if (b) {
    if (b->value.numel() != co) throw std::invalid_argument("conv: bias size mismatch");
    for (long c = 0; c < co; ++c) {
      double* row = out.data() + c * cells;
      const double bc = b->value[c];
      for (long i = 0; i < cells; ++i) row[i] += bc;
    }
  }
  std::vector<Var> inputs = b ? std::vector<Var>{x, w, b} : std::vector<Var>{x, w};
  return make_node(dims == 3 ? "conv3d" : "conv2d", std::move(out), std::move(inputs),
                   [k, s, p, dims, ci, co, kelems, cells](Node& n) {
    CMap g(n.grad.data(), co, cells);
    if (n.inputs[0]->requires_grad) {
      Tensor cols_g({ci * kelems, cells});
      map2(cols_g, ci * kelems, cells).noalias() =
          cmap2(n.inputs[1]->value, co, ci * kelems).transpose() * g;
      Tensor gx;
      if (dims == 3) {
        col2im_3d(cols_g, n.inputs[0]->value.shape(), k, s, p, gx);
      } else {
        col2im_2d(cols_g, n.inputs[0]->value.shape(), k, s, p, gx);
      }
      n.inputs[0]->accumulate_grad(gx);
    }
    if (n.inputs[1]->requires_grad) {
      // im2col is recomputed here instead of stashed; keeps big activations
      // out of the graph.
      Tensor cols_x;
      if (dims == 3) {
        im2col_3d(n.inputs[0]->value, k, s, p, cols_x);
      } else {
        im2col_2d(n.inputs[0]->value, k, s, p, cols_x);
      }
      Tensor gw(n.inputs[1]->value.shape());
      map2(gw, co, ci * kelems).noalias() = g * cmap2(cols_x, ci * kelems, cells).transpose();
      n.inputs[1]->accumulate_grad(gw);
    }
    if (n.inputs.size() > 2 && n.inputs[2]->requires_grad) {
      Tensor gb({co});
      for (long c = 0; c < co; ++c) gb[c] = g.row(c).sum();
      n.inputs[2]->accumulate_grad(gb);
    }
  });
}

}  // namespace

Var conv3d(const Var& x, const Var& w, const Var& b, int k, int s, int p) {
  return conv_nd(x, w, b, k, s, p, 3);
}

Var conv2d(const Var& x, const Var& w, const Var& b, int k, int s, int p) {
  return conv_nd(x, w, b, k, s, p, 2);
}

Var conv_transpose3d(const Var& x, const Var& w, const Var& b, int k, int s, int p) {
  const long ci = x->value.dim(0);
  if (w->value.dim(0) != ci) throw std::invalid_argument("conv_transpose3d: channel mismatch");
  const long co = w->value.dim(1);
  const long kelems = static_cast<long>(k) * k * k;
  const long in_cells = x->value.dim(1) * x->value.dim(2) * x->value.dim(3);
  Shape out_shape{co, convt_out_side(x->value.dim(1), k, s, p), convt_out_side(x->value.dim(2), k, s, p),
                  convt_out_side(x->value.dim(3), k, s, p)};
  if (b && b->value.numel() != co) throw std::invalid_argument("conv_transpose3d: bias size mismatch");

  Tensor cols({co * kelems, in_cells});
  map2(cols, co * kelems, in_cells).noalias() =
      cmap2(w->value, ci, co * kelems).transpose() * cmap2(x->value, ci, in_cells);
  Tensor out;
  col2im_3d(cols, out_shape, k, s, p, out);
  const long out_cells = out_shape[1] * out_shape[2] * out_shape[3];
  if (b) {
    for (long c = 0; c < co; ++c) {
      double* row = out.data() + c * out_cells;
      const double bc = b->value[c];
      for (long i = 0; i < out_cells; ++i) row[i] += bc;
    }
  }
  std::vector<Var> inputs = b ? std::vector<Var>{x, w, b} : std::vector<Var>{x, w};
  return make_node("conv_transpose3d", std::move(out), std::move(inputs),
                   [k, s, p, ci, co, kelems, in_cells, out_cells](Node& n) {
    Tensor cols_g;
    im2col_3d(n.grad, k, s, p, cols_g);  // [co*k^3, in_cells]
    if (n.inputs[0]->requires_grad) {
      Tensor gx(n.inputs[0]->value.shape());
      map2(gx, ci, in_cells).noalias() =
          cmap2(n.inputs[1]->value, ci, co * kelems) * cmap2(cols_g, co * kelems, in_cells);
      n.inputs[0]->accumulate_grad(gx);
    }
    if (n.inputs[1]->requires_grad) {
      Tensor gw(n.inputs[1]->value.shape());
      map2(gw, ci, co * kelems).noalias() =
          cmap2(n.inputs[0]->value, ci, in_cells) * cmap2(cols_g, co * kelems, in_cells).transpose();
      n.inputs[1]->accumulate_grad(gw);
    }
    if (n.inputs.size() > 2 && n.inputs[2]->requires_grad) {
      Tensor gb({co});
      const double* g = n.grad.data();
      for (long c = 0; c < co; ++c) {
        double s2 = 0.0;
        for (long i = 0; i < out_cells; ++i) s2 += g[c * out_cells + i];
        gb[c] = s2;
      }
      n.inputs[2]->accumulate_grad(gb);
    }
  });
}

Var maxpool2d(const Var& x, int k, int s, int p) {
  const long c = x->value.dim(0), h = x->value.dim(1), w = x->value.dim(2);
  const long oh = conv_out_side(h, k, s, p), ow = conv_out_side(w, k, s, p);
  Tensor out({c, oh, ow});
  std::vector<long> argmax(static_cast<size_t>(c * oh * ow));
  const double* xp = x->value.data();
  for (long ch = 0; ch < c; ++ch) {
    const double* chan = xp + ch * h * w;
    for (long i = 0; i < oh; ++i) {
      for (long j = 0; j < ow; ++j) {
        double best = -std::numeric_limits<double>::infinity();
        long best_idx = -1;
        for (int ki = 0; ki < k; ++ki) {
          const long y = i * s - p + ki;
          if (y < 0 || y >= h) continue;
          for (int kj = 0; kj < k; ++kj) {
            const long xcol = j * s - p + kj;
            if (xcol < 0 || xcol >= w) continue;
            const double v = chan[y * w + xcol];
            if (v > best) {
              best = v;
              best_idx = ch * h * w + y * w + xcol;
            }
          }
        }
        out[(ch * oh + i) * ow + j] = best;
        argmax[static_cast<size_t>((ch * oh + i) * ow + j)] = best_idx;
      }
    }
  }
  auto node = make_node("maxpool2d", std::move(out), {x}, [](Node& n) {
    const std::vector<long>& am = n.saved_ids[0];
    Tensor gx = Tensor::zeros(n.inputs[0]->value.shape());
    for (size_t i = 0; i < am.size(); ++i) {
      if (am[i] >= 0) gx[am[i]] += n.grad[static_cast<long>(i)];
    }
    n.inputs[0]->accumulate_grad(gx);
  });
  if (node->requires_grad) node->saved_ids.push_back(std::move(argmax));
  return node;
}

Var frozen_bn2d(const Var& x, const Var& gamma, const Var& beta, const Tensor& mean,
                const Tensor& var, double eps) {
  const long c = x->value.dim(0), h = x->value.dim(1), w = x->value.dim(2);
  if (gamma->value.numel() != c || beta->value.numel() != c || mean.numel() != c || var.numel() != c) {
    throw std::invalid_argument("frozen_bn2d: channel size mismatch");
  }
  Tensor out({c, h, w});
  Tensor inv_std({c});
  for (long ch = 0; ch < c; ++ch) inv_std[ch] = 1.0 / std::sqrt(var[ch] + eps);
  const long hw = h * w;
  for (long ch = 0; ch < c; ++ch) {
    const double a = gamma->value[ch] * inv_std[ch];
    const double sh = beta->value[ch] - a * mean[ch];
    const double* src = x->value.data() + ch * hw;
    double* dst = out.data() + ch * hw;
    for (long i = 0; i < hw; ++i) dst[i] = a * src[i] + sh;
  }
  auto node = make_node("frozen_bn2d", std::move(out), {x, gamma, beta}, [c, hw](Node& n) {
    const Tensor& inv_std_s = n.saved[0];
    const Tensor& mean_s = n.saved[1];
    const double* g = n.grad.data();
    if (n.inputs[0]->requires_grad) {
      Tensor gx(n.inputs[0]->value.shape());
      for (long ch = 0; ch < c; ++ch) {
        const double a = n.inputs[1]->value[ch] * inv_std_s[ch];
        for (long i = 0; i < hw; ++i) gx[ch * hw + i] = a * g[ch * hw + i];
      }
      n.inputs[0]->accumulate_grad(gx);
    }
    if (n.inputs[1]->requires_grad) {
      Tensor gg({c});
      const double* xv = n.inputs[0]->value.data();
      for (long ch = 0; ch < c; ++ch) {
        double s2 = 0.0;
        for (long i = 0; i < hw; ++i) s2 += g[ch * hw + i] * (xv[ch * hw + i] - mean_s[ch]) * inv_std_s[ch];
        gg[ch] = s2;
      }
      n.inputs[1]->accumulate_grad(gg);
    }
    if (n.inputs[2]->requires_grad) {
      Tensor gb({c});
      for (long ch = 0; ch < c; ++ch) {
        double s2 = 0.0;
        for (long i = 0; i < hw; ++i) s2 += g[ch * hw + i];
        gb[ch] = s2;
      }
      n.inputs[2]->accumulate_grad(gb);
    }
  });
  if (node->requires_grad) {
    node->saved.push_back(std::move(inv_std));
    node->saved.push_back(mean);
  }
  return node;
}

}  // namespace voxtr::ag
