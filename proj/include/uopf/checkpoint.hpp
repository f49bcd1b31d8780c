#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "uopf/dataset.hpp"
#include "uopf/neuralnet.hpp"

namespace uopf {

/// Everything needed to run or resume a trained model.
struct Checkpoint {
  ElasticDnn<double> dnn;
  Scaler scaler;
  std::vector<std::string> networks;  // case names, one per network
  std::uint64_t init_seed = 0;
  TrainConfig train;
  std::string precision = "f64";  // arithmetic used while training
  std::optional<TrainState<double>> state;  // Adam moments and history, for resuming
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Binary layout: 8-byte magic "UOPFCKPT", u32 version, u64 header length,
/// JSON header (dims, names, scaler, config, history), then every parameter
/// block column-major as little-endian f64 (Adam m and v blocks follow when
/// saved with state), then a u64 FNV-1a checksum of the payload.
void save_checkpoint(const Checkpoint& ckpt, const std::string& path);

/// Throws CorruptFile on truncation or checksum failure, VersionMismatch on
/// an unknown format version.
Checkpoint load_checkpoint(const std::string& path);

/// Bytes taken by the parameter payload at the given precision.
inline std::int64_t payload_bytes(std::int64_t params, int bytes_per_value) { return params * bytes_per_value; }

}  // namespace uopf
