#include "uopf/layout.hpp"

#include <string>

#include "uopf/error.hpp"

namespace uopf {

void SlotMaps::validate() const {
  if (inputs.empty() || inputs.size() != outputs.size())
    throw Error(ErrorCode::InvalidSlotMap, "need one input and one output length per network");
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    const bool even = inputs[k] % 2 == 0 && outputs[k] % 2 == 0;
    const bool grows = k == 0 ? inputs[0] > 0 && outputs[0] > 0
                              : inputs[k] > inputs[k - 1] && outputs[k] > outputs[k - 1];
    if (!even || !grows)
      throw Error(ErrorCode::InvalidSlotMap, "network " + std::to_string(k) + ": lengths " +
                                                 std::to_string(inputs[k]) + "/" + std::to_string(outputs[k]) +
                                                 " must be even and strictly increasing");
  }
}

SlotMaps slot_maps_for(const std::vector<NetworkCase>& cases) {
  SlotMaps m;
  for (const auto& c : cases) {
    m.inputs.push_back(2 * static_cast<int>(c.load_buses().size()));
    m.outputs.push_back(2 * c.num_buses());
  }
  m.validate();
  return m;
}

std::vector<int> packed_order(const std::vector<int>& cumulative, int k) {
  const int half = cumulative[k] / 2;
  std::vector<int> perm;
  perm.reserve(cumulative[k]);
  int begin = 0;
  for (int j = 0; j <= k; ++j) {
    const int end = cumulative[j] / 2;
    for (int s = begin; s < end; ++s) perm.push_back(s);
    for (int s = begin; s < end; ++s) perm.push_back(half + s);
    begin = end;
  }
  return perm;
}

Eigen::VectorXd pack(const std::vector<int>& perm, const Eigen::VectorXd& physical) {
  if (physical.size() != static_cast<Eigen::Index>(perm.size()))
    throw Error(ErrorCode::LengthMismatch, "vector of length " + std::to_string(physical.size()) +
                                               ", layout expects " + std::to_string(perm.size()));
  Eigen::VectorXd out(physical.size());
  for (std::size_t i = 0; i < perm.size(); ++i) out[i] = physical[perm[i]];
  return out;
}

Eigen::VectorXd unpack(const std::vector<int>& perm, const Eigen::VectorXd& packed) {
  if (packed.size() != static_cast<Eigen::Index>(perm.size()))
    throw Error(ErrorCode::LengthMismatch, "vector of length " + std::to_string(packed.size()) +
                                               ", layout expects " + std::to_string(perm.size()));
  Eigen::VectorXd out(packed.size());
  for (std::size_t i = 0; i < perm.size(); ++i) out[perm[i]] = packed[i];
  return out;
}

}  // namespace uopf
