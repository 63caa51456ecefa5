#include "voxtr/loss/losses.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "voxtr/core/ops.hpp"

namespace voxtr {

namespace {

// Ascending-sorted accumulation: equal multisets of terms produce identical
// doubles, so the losses are exactly invariant under voxel permutations.
double sorted_sum(std::vector<double>& buf) {
  std::sort(buf.begin(), buf.end());
  double s = 0.0;
  for (double v : buf) s += v;
  return s;
}

struct DiceParts {
  double n1, d1_raw, n2, d2_raw;
};

DiceParts dice_parts(const double* p, const double* y, long n) {
  std::vector<double> py(static_cast<size_t>(n)), psum(static_cast<size_t>(n));
  std::vector<double> qy(static_cast<size_t>(n)), qsum(static_cast<size_t>(n));
  for (long i = 0; i < n; ++i) {
    py[static_cast<size_t>(i)] = p[i] * y[i];
    psum[static_cast<size_t>(i)] = p[i] + y[i];
    qy[static_cast<size_t>(i)] = (1.0 - p[i]) * (1.0 - y[i]);
    qsum[static_cast<size_t>(i)] = 2.0 - p[i] - y[i];
  }
  return {sorted_sum(py), sorted_sum(psum), sorted_sum(qy), sorted_sum(qsum)};
}

double dice_value(const DiceParts& parts, double eps) {
  const double d1 = std::max(parts.d1_raw, eps);
  const double d2 = std::max(parts.d2_raw, eps);
  return 1.0 - parts.n1 / d1 - parts.n2 / d2;
}

double ce_value(const double* p, const double* y, long n, double eps) {
  std::vector<double> terms(static_cast<size_t>(n));
  for (long i = 0; i < n; ++i) {
    const double ph = std::clamp(p[i], eps, 1.0 - eps);
    terms[static_cast<size_t>(i)] = -(y[i] * std::log(ph) + (1.0 - y[i]) * std::log1p(-ph));
  }
  return sorted_sum(terms) / static_cast<double>(n);
}

void check_eps(double eps) {
  if (!(eps > 0.0)) throw std::invalid_argument("loss epsilon must be positive");
}

std::vector<double> grid_as_doubles(const VoxelGrid& y) {
  std::vector<double> out(y.occupancy().size());
  for (size_t i = 0; i < out.size(); ++i) out[i] = y.occupancy()[i];
  return out;
}

void check_resolutions(const VoxelField& p, const VoxelGrid& y) {
  if (p.resolution() != y.resolution()) {
    throw std::invalid_argument("loss needs equal resolutions, got " +
                                std::to_string(p.resolution()) + " and " +
                                std::to_string(y.resolution()));
  }
}

}  // namespace

double dice_loss(const VoxelField& p, const VoxelGrid& y, double epsilon) {
  check_resolutions(p, y);
  check_eps(epsilon);
  const std::vector<double> yd = grid_as_doubles(y);
  return dice_value(dice_parts(p.values().data(), yd.data(), p.num_cells()), epsilon);
}

double ce_loss(const VoxelField& p, const VoxelGrid& y, double epsilon) {
  check_resolutions(p, y);
  check_eps(epsilon);
  const std::vector<double> yd = grid_as_doubles(y);
  return ce_value(p.values().data(), yd.data(), p.num_cells(), epsilon);
}

namespace ag {

Var dice_loss(const Var& p, const Tensor& y, double epsilon) {
  check_eps(epsilon);
  const long n = p->value.numel();
  if (y.numel() != n) throw std::invalid_argument("dice_loss: element count mismatch");
  DiceParts parts = dice_parts(p->value.data(), y.data(), n);
  const double loss = dice_value(parts, epsilon);

  auto node = std::make_shared<Node>();
  node->op = "dice_loss";
  node->value = Tensor::scalar(loss);
  if (!NoGradGuard::active() && p->requires_grad) {
    node->requires_grad = true;
    node->inputs = {p};
    Tensor y_saved(Shape{n}, std::vector<double>(y.data(), y.data() + n));
    node->saved.push_back(std::move(y_saved));
    node->backward_fn = [parts, epsilon, n](Node& nd) {
      const Tensor& ys = nd.saved[0];
      const double d1 = std::max(parts.d1_raw, epsilon);
      const double d2 = std::max(parts.d2_raw, epsilon);
      const double c1 = parts.d1_raw > epsilon ? 1.0 : 0.0;  // clamp pass-through
      const double c2 = parts.d2_raw > epsilon ? 1.0 : 0.0;
      const double g = nd.grad[0];
      Tensor gp(nd.inputs[0]->value.shape());
      for (long i = 0; i < n; ++i) {
        const double yn = ys[i];
        gp[i] = g * (-(yn * d1 - parts.n1 * c1) / (d1 * d1) +
                     ((1.0 - yn) * d2 - parts.n2 * c2) / (d2 * d2));
      }
      nd.inputs[0]->accumulate_grad(gp);
    };
  }
  return node;
}

Var ce_loss(const Var& p, const Tensor& y, double epsilon) {
  check_eps(epsilon);
  const long n = p->value.numel();
  if (y.numel() != n) throw std::invalid_argument("ce_loss: element count mismatch");
  const double loss = ce_value(p->value.data(), y.data(), n, epsilon);

  auto node = std::make_shared<Node>();
  node->op = "ce_loss";
  node->value = Tensor::scalar(loss);
  if (!NoGradGuard::active() && p->requires_grad) {
    node->requires_grad = true;
    node->inputs = {p};
    Tensor y_saved(Shape{n}, std::vector<double>(y.data(), y.data() + n));
    node->saved.push_back(std::move(y_saved));
    node->backward_fn = [epsilon, n](Node& nd) {
      const Tensor& ys = nd.saved[0];
      const Tensor& pv = nd.inputs[0]->value;
      const double g = nd.grad[0] / static_cast<double>(n);
      Tensor gp(pv.shape());
      for (long i = 0; i < n; ++i) {
        if (pv[i] < epsilon || pv[i] > 1.0 - epsilon) continue;  // clamped: flat
        const double ph = pv[i];
        gp[i] = g * (-(ys[i] / ph) + (1.0 - ys[i]) / (1.0 - ph));
      }
      nd.inputs[0]->accumulate_grad(gp);
    };
  }
  return node;
}

}  // namespace ag
}  // namespace voxtr
