#pragma once

#include <vector>

#include <Eigen/Dense>

#include "uopf/grid.hpp"

namespace uopf {

/// Cumulative per-network vector lengths of the elastic model: network k
/// reads `inputs[k]` = 2 x (load buses) values and writes `outputs[k]` =
/// 2 x (buses) values. Both sequences must be strictly increasing.
struct SlotMaps {
  std::vector<int> inputs;
  std::vector<int> outputs;

  int size() const { return static_cast<int>(inputs.size()); }

  /// Width of block k (the increment over network k-1).
  int input_block(int k) const { return inputs[k] - (k == 0 ? 0 : inputs[k - 1]); }
  int output_block(int k) const { return outputs[k] - (k == 0 ? 0 : outputs[k - 1]); }

  /// Throws InvalidSlotMap unless lengths are even, positive and increasing.
  void validate() const;

  bool operator==(const SlotMaps&) const = default;
};

SlotMaps slot_maps_for(const std::vector<NetworkCase>& cases);

/// Physical vectors are ordered [P; Q] over load slots and [vm; va] over bus
/// slots. The model's packed order groups them by block: for each block j,
/// the P then Q (or vm then va) entries of the slots that block adds.
/// `packed[i] = physical[perm[i]]`.
std::vector<int> packed_order(const std::vector<int>& cumulative, int k);

Eigen::VectorXd pack(const std::vector<int>& perm, const Eigen::VectorXd& physical);
Eigen::VectorXd unpack(const std::vector<int>& perm, const Eigen::VectorXd& packed);

}  // namespace uopf
