#ifndef VOXTR_LOSS_LOSSES_HPP_
#define VOXTR_LOSS_LOSSES_HPP_

#include "voxtr/core/autodiff.hpp"
#include "voxtr/voxel/voxel_grid.hpp"

namespace voxtr {

enum class LossKind { kDice, kCrossEntropy };

struct LossConfig {
  LossKind kind = LossKind::kDice;
  double epsilon = 1e-6;  // denominator / log-argument guard, must be > 0
};

// Two-sided Dice loss over occupancy probabilities p and binary targets y:
//   1 - sum(p*y) / sum(p+y) - sum((1-p)(1-y)) / sum(2-p-y)
// Each denominator is guarded below by epsilon, so the all-empty and
// all-full corner cases stay finite while every regular input evaluates
// exactly. Per-voxel terms are summed in sorted order, which makes the loss
// bit-for-bit invariant under any voxel permutation applied to p and y
// together. Value lies in [0, 1]; 0 iff p == y with binary y.
double dice_loss(const VoxelField& p, const VoxelGrid& y, double epsilon = 1e-6);

// Mean binary cross-entropy, -[y log p + (1-y) log(1-p)], with p clamped
// into [epsilon, 1-epsilon] before the logs. Same sorted summation.
double ce_loss(const VoxelField& p, const VoxelGrid& y, double epsilon = 1e-6);

namespace ag {

// Graph-building forms for training. p is any-shaped probabilities in
// [0,1]; y holds binary targets of the same element count.
Var dice_loss(const Var& p, const Tensor& y, double epsilon = 1e-6);
Var ce_loss(const Var& p, const Tensor& y, double epsilon = 1e-6);

}  // namespace ag

}  // namespace voxtr

#endif  // VOXTR_LOSS_LOSSES_HPP_
