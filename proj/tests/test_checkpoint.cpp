#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "test_util.hpp"
#include "uopf/checkpoint.hpp"
#include "uopf/error.hpp"

using namespace uopf;
using uopf::test::read_file;

namespace fs = std::filesystem;

namespace {

std::string scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "uopf_test_checkpoint";
  fs::create_directories(dir);
  return (dir / name).string();
}

void write_bytes(const std::string& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << bytes;
}

Checkpoint sample_checkpoint(bool with_state) {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Checkpoint c;
  c.dnn = init_elastic_dnn<double>(SlotMaps{{4, 6}, {6, 10}}, {5, 3}, 77);
  c.networks = {"small", "large"};
  c.init_seed = 77;
  c.train.alpha = 2e-3;
  c.train.batch_size = 7;
  c.train.epochs = 12;
  c.train.gamma = 1.5;
  c.train.lr_halving_period = 4;
  c.train.seed = 99;
  c.train.schedule = Interleave::sequential;
  c.precision = "f32";
  for (int k = 0; k < 2; ++k) {
    const int in = k ? 6 : 4, out = k ? 10 : 6;
    Scaler::Range ri{Eigen::VectorXd::Random(in), Eigen::VectorXd::Random(in)};
    Scaler::Range ro{Eigen::VectorXd::Random(out), Eigen::VectorXd::Random(out)};
    c.scaler.inputs.push_back(ri);
    c.scaler.outputs.push_back(ro);
  }
  if (with_state) {
    TrainState<double> s;
    s.adam = AdamState<double>::zeros_like(c.dnn);
    for (std::size_t b = 0; b < s.adam.m.size(); ++b) {
      for (Eigen::Index i = 0; i < s.adam.m[b].size(); ++i) {
        s.adam.m[b].data()[i] = u(rng);
        s.adam.v[b].data()[i] = std::abs(u(rng)) * 1e-3;
      }
      s.adam.steps[b] = static_cast<std::int64_t>(b * 3);
    }
    s.epochs_done = 2;
    s.history = {{0, 2e-3, {0.5, 0.25}, {0.6, std::nan("")}}, {1, 2e-3, {0.125, 0.1}, {0.2, 0.3}}};
    c.state = s;
  }
  return c;
}

void expect_same(const Checkpoint& a, const Checkpoint& b) {
  EXPECT_TRUE(a.dnn.slots == b.dnn.slots);
  EXPECT_EQ(a.dnn.hidden, b.dnn.hidden);
  ASSERT_EQ(a.dnn.blocks.size(), b.dnn.blocks.size());
  for (std::size_t i = 0; i < a.dnn.blocks.size(); ++i) EXPECT_EQ(a.dnn.blocks[i], b.dnn.blocks[i]) << i;
  EXPECT_EQ(a.networks, b.networks);
  EXPECT_EQ(a.init_seed, b.init_seed);
  EXPECT_EQ(a.train.alpha, b.train.alpha);
  EXPECT_EQ(a.train.batch_size, b.train.batch_size);
  EXPECT_EQ(a.train.epochs, b.train.epochs);
  EXPECT_EQ(a.train.gamma, b.train.gamma);
  EXPECT_EQ(a.train.lr_halving_period, b.train.lr_halving_period);
  EXPECT_EQ(a.train.seed, b.train.seed);
  EXPECT_EQ(a.train.schedule, b.train.schedule);
  EXPECT_EQ(a.precision, b.precision);
  ASSERT_EQ(a.scaler.size(), b.scaler.size());
  for (int k = 0; k < a.scaler.size(); ++k) {
    EXPECT_EQ(a.scaler.inputs[k].lo, b.scaler.inputs[k].lo);
    EXPECT_EQ(a.scaler.inputs[k].hi, b.scaler.inputs[k].hi);
    EXPECT_EQ(a.scaler.outputs[k].lo, b.scaler.outputs[k].lo);
    EXPECT_EQ(a.scaler.outputs[k].hi, b.scaler.outputs[k].hi);
  }
  ASSERT_EQ(a.state.has_value(), b.state.has_value());
  if (!a.state) return;
  const auto &sa = *a.state, &sb = *b.state;
  EXPECT_EQ(sa.epochs_done, sb.epochs_done);
  EXPECT_EQ(sa.adam.steps, sb.adam.steps);
  for (std::size_t i = 0; i < sa.adam.m.size(); ++i) {
    EXPECT_EQ(sa.adam.m[i], sb.adam.m[i]);
    EXPECT_EQ(sa.adam.v[i], sb.adam.v[i]);
  }
  ASSERT_EQ(sa.history.size(), sb.history.size());
  for (std::size_t e = 0; e < sa.history.size(); ++e) {
    EXPECT_EQ(sa.history[e].epoch, sb.history[e].epoch);
    EXPECT_EQ(sa.history[e].lr, sb.history[e].lr);
    EXPECT_EQ(sa.history[e].train_loss, sb.history[e].train_loss);
    ASSERT_EQ(sa.history[e].test_loss.size(), sb.history[e].test_loss.size());
    for (std::size_t k = 0; k < sa.history[e].test_loss.size(); ++k) {
      const double x = sa.history[e].test_loss[k], y = sb.history[e].test_loss[k];
      EXPECT_TRUE(x == y || (std::isnan(x) && std::isnan(y)));
    }
  }
}

ErrorCode load_error(const std::string& path) {
  try {
    load_checkpoint(path);
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "loaded a damaged checkpoint";
  return ErrorCode::Io;
}

}  // namespace

TEST(Checkpoint, RoundTripWithoutState) {
  const auto c = sample_checkpoint(false);
  const auto path = scratch("plain.ckpt");
  save_checkpoint(c, path);
  expect_same(c, load_checkpoint(path));
}

TEST(Checkpoint, RoundTripWithState) {
  const auto c = sample_checkpoint(true);
  const auto path = scratch("state.ckpt");
  save_checkpoint(c, path);
  const auto back = load_checkpoint(path);
  expect_same(c, back);

  // Saving what was loaded reproduces the file byte for byte.
  const auto again = scratch("state_again.ckpt");
  save_checkpoint(back, again);
  EXPECT_EQ(read_file(path), read_file(again));
}

TEST(Checkpoint, FileStartsWithMagicAndVersion) {
  const auto path = scratch("magic.ckpt");
  save_checkpoint(sample_checkpoint(false), path);
  const auto bytes = read_file(path);
  ASSERT_GT(bytes.size(), 20u);
  EXPECT_EQ(bytes.substr(0, 8), "UOPFCKPT");
  EXPECT_EQ(static_cast<unsigned char>(bytes[8]), kCheckpointVersion);
  EXPECT_EQ(bytes.substr(9, 3), std::string(3, '\0'));
}

TEST(Checkpoint, TruncationIsDetected) {
  const auto path = scratch("full.ckpt");
  save_checkpoint(sample_checkpoint(true), path);
  const auto bytes = read_file(path);
  const auto cut = scratch("cut.ckpt");
  for (std::size_t keep : {std::size_t{0}, std::size_t{5}, std::size_t{15}, std::size_t{40}, bytes.size() / 2,
                           bytes.size() - 9, bytes.size() - 1}) {
    write_bytes(cut, bytes.substr(0, keep));
    EXPECT_EQ(load_error(cut), ErrorCode::CorruptFile) << "kept " << keep << " bytes";
  }
  write_bytes(cut, bytes + "x");
  EXPECT_EQ(load_error(cut), ErrorCode::CorruptFile);
}

TEST(Checkpoint, FlippedPayloadByteFailsTheChecksum) {
  const auto path = scratch("flip.ckpt");
  save_checkpoint(sample_checkpoint(true), path);
  auto bytes = read_file(path);
  const auto bad = scratch("flipped.ckpt");
  for (std::size_t from_end : {9u, 100u, 400u}) {
    auto copy = bytes;
    copy[copy.size() - from_end] ^= 0x10;
    write_bytes(bad, copy);
    EXPECT_EQ(load_error(bad), ErrorCode::CorruptFile);
  }
  auto magic = bytes;
  magic[0] = 'X';
  write_bytes(bad, magic);
  EXPECT_EQ(load_error(bad), ErrorCode::CorruptFile);
}

TEST(Checkpoint, UnknownVersionIsRejected) {
  const auto path = scratch("version.ckpt");
  save_checkpoint(sample_checkpoint(false), path);
  auto bytes = read_file(path);
  bytes[8] = static_cast<char>(kCheckpointVersion + 1);
  write_bytes(path, bytes);
  EXPECT_EQ(load_error(path), ErrorCode::VersionMismatch);
}

TEST(Checkpoint, MissingFileIsAnIoError) {
  EXPECT_EQ(load_error(scratch("does_not_exist.ckpt")), ErrorCode::Io);
}
