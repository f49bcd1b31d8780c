#include "uopf/checkpoint.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>

#include <json.hpp>

#include "uopf/error.hpp"

namespace uopf {

namespace {

using json = nlohmann::ordered_json;

constexpr char kMagic[8] = {'U', 'O', 'P', 'F', 'C', 'K', 'P', 'T'};

class Writer {
 public:
  void u32(std::uint32_t v) { put(v, 4); }
  void u64(std::uint64_t v) { put(v, 8); }
  void f64(double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    put(bits, 8);
  }
  void bytes(const std::string& s) { buf_ += s; }
  const std::string& data() const { return buf_; }

 private:
  void put(std::uint64_t v, int n) {
    for (int i = 0; i < n; ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  }
  std::string buf_;
};

class Reader {
 public:
  Reader(const std::string& data, std::string path) : data_(data), path_(std::move(path)) {}

  std::uint64_t uint(int n) {
    need(n);
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(data_[pos_ + i])) << (8 * i);
    pos_ += n;
    return v;
  }
  double f64() {
    const std::uint64_t bits = uint(8);
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
  }
  std::string bytes(std::size_t n) {
    need(n);
    std::string s = data_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  std::size_t pos() const { return pos_; }
  std::size_t size() const { return data_.size(); }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > data_.size()) throw Error(ErrorCode::CorruptFile, path_ + ": truncated");
  }
  const std::string& data_;
  std::string path_;
  std::size_t pos_ = 0;
};

std::uint64_t fnv1a(const std::string& data, std::size_t begin, std::size_t end) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::size_t i = begin; i < end; ++i) {
    h ^= static_cast<unsigned char>(data[i]);
    h *= 0x100000001b3ULL;
  }
  return h;
}

json vec(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Eigen::VectorXd vec_from(const json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

json losses(const std::vector<double>& v) {
  json a = json::array();
  for (double x : v) a.push_back(std::isnan(x) ? json(nullptr) : json(x));
  return a;
}

std::vector<double> losses_from(const json& a) {
  std::vector<double> v;
  for (const auto& x : a) v.push_back(x.is_null() ? std::numeric_limits<double>::quiet_NaN() : x.get<double>());
  return v;
}

const char* interleave_name(Interleave i) { return i == Interleave::round_robin ? "round_robin" : "sequential"; }

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  const auto& d = ckpt.dnn;
  json h;
  h["format"] = "uopf-checkpoint";
  h["slots"] = {{"inputs", d.slots.inputs}, {"outputs", d.slots.outputs}};
  h["hidden"] = d.hidden;
  h["networks"] = ckpt.networks;
  h["init_seed"] = ckpt.init_seed;
  h["precision"] = ckpt.precision;
  h["train"] = {{"alpha", ckpt.train.alpha},
                {"batch_size", ckpt.train.batch_size},
                {"epochs", ckpt.train.epochs},
                {"gamma", ckpt.train.gamma},
                {"lr_halving_period", ckpt.train.lr_halving_period},
                {"seed", ckpt.train.seed},
                {"schedule", interleave_name(ckpt.train.schedule)}};
  json sc = json::array();
  for (int k = 0; k < ckpt.scaler.size(); ++k)
    sc.push_back({{"input_lo", vec(ckpt.scaler.inputs[k].lo)},
                  {"input_hi", vec(ckpt.scaler.inputs[k].hi)},
                  {"output_lo", vec(ckpt.scaler.outputs[k].lo)},
                  {"output_hi", vec(ckpt.scaler.outputs[k].hi)}});
  h["scaler"] = sc;
  json shapes = json::array();
  for (const auto& b : d.blocks) shapes.push_back({b.rows(), b.cols()});
  h["blocks"] = shapes;
  if (ckpt.state) {
    const auto& s = *ckpt.state;
    h["state"] = {{"epochs_done", s.epochs_done},
                  {"beta1", s.adam.beta1},
                  {"beta2", s.adam.beta2},
                  {"eps", s.adam.eps},
                  {"steps", s.adam.steps}};
    json hist = json::array();
    for (const auto& r : s.history)
      hist.push_back({{"epoch", r.epoch}, {"lr", r.lr}, {"train_loss", losses(r.train_loss)},
                      {"test_loss", losses(r.test_loss)}});
    h["state"]["history"] = hist;
  }

  Writer w;
  w.bytes(std::string(kMagic, 8));
  w.u32(kCheckpointVersion);
  const std::string header = h.dump();
  w.u64(header.size());
  w.bytes(header);
  const std::size_t payload_begin = w.data().size();
  auto put_blocks = [&w](const std::vector<Mat<double>>& blocks) {
    for (const auto& b : blocks)
      for (Eigen::Index i = 0; i < b.size(); ++i) w.f64(b.data()[i]);
  };
  put_blocks(d.blocks);
  if (ckpt.state) {
    put_blocks(ckpt.state->adam.m);
    put_blocks(ckpt.state->adam.v);
  }
  w.u64(fnv1a(w.data(), payload_begin, w.data().size()));

  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path);
  out.write(w.data().data(), static_cast<std::streamsize>(w.data().size()));
  if (!out) throw Error(ErrorCode::Io, "write failed for " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path);
  const std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  Reader r(data, path);
  if (r.bytes(8) != std::string(kMagic, 8)) throw Error(ErrorCode::CorruptFile, path + ": not a checkpoint");
  const auto version = r.uint(4);
  if (version != kCheckpointVersion)
    throw Error(ErrorCode::VersionMismatch,
                path + ": format version " + std::to_string(version) + ", expected " + std::to_string(kCheckpointVersion));
  const auto header_len = r.uint(8);
  if (header_len > r.size()) throw Error(ErrorCode::CorruptFile, path + ": truncated");
  Checkpoint c;
  json h;
  try {
    h = json::parse(r.bytes(header_len));
    c.dnn.slots.inputs = h.at("slots").at("inputs").get<std::vector<int>>();
    c.dnn.slots.outputs = h.at("slots").at("outputs").get<std::vector<int>>();
    c.dnn.hidden = h.at("hidden").get<std::vector<int>>();
    c.networks = h.at("networks").get<std::vector<std::string>>();
    c.init_seed = h.at("init_seed").get<std::uint64_t>();
    c.precision = h.at("precision").get<std::string>();
    const auto& t = h.at("train");
    c.train.alpha = t.at("alpha").get<double>();
    c.train.batch_size = t.at("batch_size").get<int>();
    c.train.epochs = t.at("epochs").get<int>();
    c.train.gamma = t.at("gamma").get<double>();
    c.train.lr_halving_period = t.at("lr_halving_period").get<int>();
    c.train.seed = t.at("seed").get<std::uint64_t>();
    c.train.schedule = t.at("schedule") == "sequential" ? Interleave::sequential : Interleave::round_robin;
    for (const auto& s : h.at("scaler")) {
      c.scaler.inputs.push_back({vec_from(s.at("input_lo")), vec_from(s.at("input_hi"))});
      c.scaler.outputs.push_back({vec_from(s.at("output_lo")), vec_from(s.at("output_hi"))});
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::CorruptFile, path + ": bad header: " + e.what());
  }
  try {
    c.dnn.slots.validate();
  } catch (const Error& e) {
    throw Error(ErrorCode::CorruptFile, path + ": " + e.what());
  }

  const std::size_t payload_begin = r.pos();
  std::vector<std::pair<Eigen::Index, Eigen::Index>> shapes;
  for (const auto& s : h.at("blocks")) shapes.emplace_back(s.at(0).get<Eigen::Index>(), s.at(1).get<Eigen::Index>());
  auto get_blocks = [&]() {
    std::vector<Mat<double>> blocks;
    for (const auto& [rows, cols] : shapes) {
      if (rows < 0 || cols < 0 || static_cast<std::size_t>(rows * cols) * 8 > r.size())
        throw Error(ErrorCode::CorruptFile, path + ": bad block shape");
      Mat<double> b(rows, cols);
      for (Eigen::Index i = 0; i < b.size(); ++i) b.data()[i] = r.f64();
      blocks.push_back(std::move(b));
    }
    return blocks;
  };
  c.dnn.blocks = get_blocks();
  const auto reference = init_elastic_dnn<double>(c.dnn.slots, c.dnn.hidden, 0);
  if (reference.blocks.size() != c.dnn.blocks.size())
    throw Error(ErrorCode::CorruptFile, path + ": block count does not match dims");
  for (std::size_t i = 0; i < reference.blocks.size(); ++i)
    if (reference.blocks[i].rows() != c.dnn.blocks[i].rows() || reference.blocks[i].cols() != c.dnn.blocks[i].cols())
      throw Error(ErrorCode::CorruptFile, path + ": block " + std::to_string(i) + " shape does not match dims");

  if (h.contains("state")) {
    const auto& s = h.at("state");
    TrainState<double> st;
    st.epochs_done = s.at("epochs_done").get<int>();
    st.adam.beta1 = s.at("beta1").get<double>();
    st.adam.beta2 = s.at("beta2").get<double>();
    st.adam.eps = s.at("eps").get<double>();
    st.adam.steps = s.at("steps").get<std::vector<std::int64_t>>();
    for (const auto& e : s.at("history")) {
      EpochRecord rec;
      rec.epoch = e.at("epoch").get<int>();
      rec.lr = e.at("lr").get<double>();
      rec.train_loss = losses_from(e.at("train_loss"));
      rec.test_loss = losses_from(e.at("test_loss"));
      st.history.push_back(std::move(rec));
    }
    st.adam.m = get_blocks();
    st.adam.v = get_blocks();
    c.state = std::move(st);
  }
  const std::size_t payload_end = r.pos();
  const auto checksum = r.uint(8);
  if (r.pos() != r.size()) throw Error(ErrorCode::CorruptFile, path + ": trailing bytes");
  if (checksum != fnv1a(data, payload_begin, payload_end))
    throw Error(ErrorCode::CorruptFile, path + ": checksum mismatch");
  return c;
}

}  // namespace uopf
