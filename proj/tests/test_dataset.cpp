#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <set>

#include <json.hpp>

#include "test_util.hpp"
#include "uopf/dataset.hpp"
#include "uopf/error.hpp"
#include "uopf/layout.hpp"

using namespace uopf;
using uopf::test::load;
using uopf::test::read_file;

namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("uopf_test_dataset_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

void expect_same_sample(const NetworkCase& c, const LoadSample& a, const LoadSample& b) {
  EXPECT_EQ(a.network_id, b.network_id);
  EXPECT_EQ(a.loads_p, b.loads_p);
  EXPECT_EQ(a.loads_q, b.loads_q);
  ASSERT_EQ(a.label.has_value(), b.label.has_value());
  if (!a.label) return;
  EXPECT_EQ(sample_target(c, *a.label), sample_target(c, *b.label));
  EXPECT_EQ(a.label->pg, b.label->pg);
  EXPECT_EQ(a.label->qg, b.label->qg);
  EXPECT_EQ(a.label->objective, b.label->objective);
}

}  // namespace

TEST(Layout, PackedOrderMatchesHandBuiltExample) {
  // Network 0 has 2 load buses, network 1 adds a third.
  // Physical [P0 P1 P2 Q0 Q1 Q2]; packed [P0 P1 Q0 Q1 | P2 Q2].
  EXPECT_EQ(packed_order({4, 6}, 1), (std::vector<int>{0, 1, 3, 4, 2, 5}));
  EXPECT_EQ(packed_order({4, 6}, 0), (std::vector<int>{0, 1, 2, 3}));
  // Three blocks of one, two and one slots.
  EXPECT_EQ(packed_order({2, 6, 8}, 2), (std::vector<int>{0, 4, 1, 2, 5, 6, 3, 7}));
}

TEST(Layout, PackUnpackRoundTrip) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<int> cumulative;
    int total = 0;
    const int blocks = 1 + static_cast<int>(rng() % 4);
    for (int b = 0; b < blocks; ++b) cumulative.push_back(total += 2 * (1 + static_cast<int>(rng() % 5)));
    const int k = static_cast<int>(rng() % blocks);
    const auto perm = packed_order(cumulative, k);
    ASSERT_EQ(static_cast<int>(perm.size()), cumulative[k]);
    std::set<int> seen(perm.begin(), perm.end());
    EXPECT_EQ(static_cast<int>(seen.size()), cumulative[k]);
    const Eigen::VectorXd x = Eigen::VectorXd::Random(cumulative[k]);
    EXPECT_EQ(unpack(perm, pack(perm, x)), x);
  }
  EXPECT_THROW(pack({0, 1}, Eigen::VectorXd::Zero(3)), Error);
}

TEST(Layout, SlotMapValidation) {
  EXPECT_NO_THROW((SlotMaps{{6, 22}, {18, 28}}.validate()));
  for (const auto& bad : {SlotMaps{{6, 6}, {18, 28}}, SlotMaps{{5, 22}, {18, 28}}, SlotMaps{{6}, {18, 28}},
                          SlotMaps{{}, {}}, SlotMaps{{0}, {2}}}) {
    try {
      bad.validate();
      ADD_FAILURE() << "accepted an invalid slot map";
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::InvalidSlotMap);
    }
  }
}

TEST(Layout, SlotMapsOfIeeeCases) {
  const auto s = slot_maps_for({load("case9"), load("case14"), load("case30")});
  EXPECT_EQ(s.inputs, (std::vector<int>{6, 22, 40}));
  EXPECT_EQ(s.outputs, (std::vector<int>{18, 28, 60}));
}

TEST(Sampling, FactorsStayInRangeAndKeepPowerFactor) {
  const auto c = load("case14");
  const auto lb = c.load_buses();
  const auto samples = sample_uniform_loads(c, {0.9, 1.1}, 2000, 5);
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(lb.size()));
  for (const auto& s : samples) {
    for (std::size_t i = 0; i < lb.size(); ++i) {
      const auto& bus = c.buses[lb[i]];
      const double base = bus.pd != 0.0 ? bus.pd : bus.qd;
      const double f = (bus.pd != 0.0 ? s.loads_p[i] : s.loads_q[i]) * c.base_mva / base;
      EXPECT_GE(f, 0.9);
      EXPECT_LE(f, 1.1);
      EXPECT_NEAR(s.loads_p[i] * c.base_mva, f * bus.pd, 1e-9);
      EXPECT_NEAR(s.loads_q[i] * c.base_mva, f * bus.qd, 1e-9);
      mean[static_cast<Eigen::Index>(i)] += f / 2000.0;
    }
  }
  // standard error of a U(0.9, 1.1) mean over 2000 draws is about 1.3e-3
  for (Eigen::Index i = 0; i < mean.size(); ++i) EXPECT_NEAR(mean[i], 1.0, 6e-3);
}

TEST(Sampling, SeedDeterminesSamples) {
  const auto c = load("case9");
  const auto a = sample_uniform_loads(c, {0.9, 1.1}, 20, 7);
  const auto b = sample_uniform_loads(c, {0.9, 1.1}, 20, 7);
  const auto other = sample_uniform_loads(c, {0.9, 1.1}, 20, 8);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].loads_p, b[i].loads_p);
    EXPECT_EQ(a[i].loads_q, b[i].loads_q);
  }
  EXPECT_NE(a[0].loads_p, other[0].loads_p);
}

TEST(Generate, SplitCountsAndDisjointness) {
  const auto c9 = load("case9"), c14 = load("case14");
  const auto d = generate_dataset({c9, c14}, 50, 0.8, 3);
  ASSERT_EQ(d.networks.size(), 2u);
  for (const auto& nd : d.networks) {
    EXPECT_EQ(nd.attempted, 50);
    EXPECT_EQ(nd.dropped, 0);
    EXPECT_EQ(nd.train.size(), 40u);
    EXPECT_EQ(nd.test.size(), 10u);
    std::set<std::vector<double>> train_keys;
    for (const auto& s : nd.train) train_keys.insert(std::vector<double>(s.loads_p.begin(), s.loads_p.end()));
    for (const auto& s : nd.test) EXPECT_EQ(train_keys.count(std::vector<double>(s.loads_p.begin(), s.loads_p.end())), 0u);
  }
  EXPECT_EQ(d.networks[1].train[0].network_id, 1);
}

TEST(Generate, DeterministicAcrossThreadCounts) {
  const auto c = load("case14");
  GenerateOptions one, three;
  three.jobs = 3;
  const auto a = generate_dataset({c}, 24, 0.75, 9, {}, one);
  const auto b = generate_dataset({c}, 24, 0.75, 9, {}, three);
  ASSERT_EQ(a.networks[0].train.size(), b.networks[0].train.size());
  for (std::size_t i = 0; i < a.networks[0].train.size(); ++i)
    expect_same_sample(c, a.networks[0].train[i], b.networks[0].train[i]);
  for (std::size_t i = 0; i < a.networks[0].test.size(); ++i)
    expect_same_sample(c, a.networks[0].test[i], b.networks[0].test[i]);
}

TEST(Generate, ScaledTrainingTargetsLieInsideUnitInterval) {
  const auto c = load("case14");
  const auto d = generate_dataset({c}, 40, 0.8, 4);
  const int n = c.num_buses();
  for (const auto& s : d.networks[0].train) {
    const auto u = apply_scaler(d.scaler, 0, Scaler::Kind::input, sample_input(s));
    EXPECT_GE(u.minCoeff(), 0.0);
    EXPECT_LE(u.maxCoeff(), 1.0);
    const auto y = apply_scaler(d.scaler, 0, Scaler::Kind::output, sample_target(c, *s.label));
    for (int i = 0; i < 2 * n; ++i) {
      const auto& r = d.scaler.outputs[0];
      if (r.hi[i] - r.lo[i] <= 1e-3 + 1e-12) continue;  // widened constant slot
      // 10% margins on each side leave [1/12, 11/12]
      EXPECT_GE(y[i], 1.0 / 12.0 - 1e-9);
      EXPECT_LE(y[i], 11.0 / 12.0 + 1e-9);
    }
  }
}

TEST(Generate, LimitScalingUsesBusVoltageLimits) {
  const auto c = load("case9");
  GenerateOptions o;
  o.vm_scaling = VmScaling::limits;
  const auto d = generate_dataset({c}, 10, 0.8, 4, {}, o);
  for (int s = 0; s < c.num_buses(); ++s) {
    EXPECT_EQ(d.scaler.outputs[0].lo[s], c.buses[c.slot_order[s]].vmin);
    EXPECT_EQ(d.scaler.outputs[0].hi[s], c.buses[c.slot_order[s]].vmax);
  }
}

TEST(Generate, TooManyOracleFailuresIsAnError) {
  // 400 MW against a 300 MW generator cannot be served.
  const auto c = uopf::test::two_bus_case(0.01, 0.05, 400.0, 10.0);
  try {
    generate_dataset({c}, 5, 0.8, 1);
    FAIL() << "expected TooFewLabeled";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::TooFewLabeled);
  }
  GenerateOptions lenient;
  lenient.max_failure_fraction = 1.0;
  const auto d = generate_dataset({c}, 5, 0.8, 1, {}, lenient);
  EXPECT_EQ(d.networks[0].dropped, 5);
  EXPECT_TRUE(d.networks[0].train.empty());
}

TEST(Scaler, RoundTripAndUnfittedDimensions) {
  Scaler s;
  s.inputs.push_back({Eigen::Vector3d(0.0, -1.0, 2.0), Eigen::Vector3d(1.0, 1.0, 6.0)});
  s.outputs.push_back({Eigen::Vector2d(0.9, -0.5), Eigen::Vector2d(1.1, 0.5)});
  const Eigen::Vector3d x(0.25, 0.0, 5.0);
  const Eigen::VectorXd u = apply_scaler(s, 0, Scaler::Kind::input, x);
  EXPECT_NEAR(u[0], 0.25, 1e-15);
  EXPECT_NEAR(u[1], 0.5, 1e-15);
  EXPECT_NEAR(u[2], 0.75, 1e-15);
  EXPECT_LT((invert_scaler(s, 0, Scaler::Kind::input, u) - x).norm(), 1e-14);

  std::mt19937_64 rng(2);
  for (int i = 0; i < 100; ++i) {
    const Eigen::Vector2d y = Eigen::Vector2d::Random();
    EXPECT_LT((invert_scaler(s, 0, Scaler::Kind::output, apply_scaler(s, 0, Scaler::Kind::output, y)) - y).norm(),
              1e-14);
  }
  for (auto call : {std::function<void()>([&] { apply_scaler(s, 1, Scaler::Kind::input, x); }),
                    std::function<void()>([&] { apply_scaler(s, 0, Scaler::Kind::input, Eigen::Vector2d::Zero()); }),
                    std::function<void()>([&] { invert_scaler(s, 0, Scaler::Kind::output, x); })}) {
    try {
      call();
      ADD_FAILURE() << "expected UnfittedDimension";
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::UnfittedDimension);
    }
  }
}

TEST(Profile, SwingAndShape) {
  for (double v : daily_profile(0.0, 50)) EXPECT_EQ(v, 1.0);
  const auto s = daily_profile(0.54, 288);
  ASSERT_EQ(s.size(), 288u);
  const auto [mn, mx] = std::minmax_element(s.begin(), s.end());
  EXPECT_NEAR(*mx - *mn, 0.54, 1e-12);
  EXPECT_NEAR(*mn, 0.73, 1e-12);
  EXPECT_NEAR(*mx, 1.27, 1e-12);
  int peaks = 0;
  for (int t = 0; t < 288; ++t) {
    const double prev = s[(t + 287) % 288], next = s[(t + 1) % 288];
    peaks += s[t] > prev && s[t] > next;
  }
  EXPECT_EQ(peaks, 2);
  EXPECT_EQ(daily_profile(0.54, 288), s);
  EXPECT_THROW(daily_profile(1.0, 10), Error);
}

TEST(Tracking, SegmentsFollowTheExpandingNetworks) {
  const auto base = load("case14");
  std::vector<NetworkCase> cases;
  for (int t : {8, 10, 12, 14}) cases.push_back(derive_subnetwork(base, t));
  const auto profile = daily_profile(0.2, 288);
  const auto d = generate_tracking_dataset(cases, profile, 0, 5);
  ASSERT_TRUE(d.schedule);
  const auto& sched = *d.schedule;
  ASSERT_EQ(sched.slots(), 288);
  for (int t = 0; t < 288; ++t) {
    EXPECT_EQ(sched.network[t], t / 72);
    EXPECT_EQ(sched.scale[t], profile[t]);
  }
  for (int k = 0; k < 4; ++k) {
    EXPECT_TRUE(d.networks[k].train.empty());
    EXPECT_EQ(d.networks[k].test.size(), 72u);
    for (const auto& s : d.networks[k].test)
      EXPECT_EQ(s.loads_p.size(), static_cast<Eigen::Index>(cases[k].load_buses().size()));
  }
  // the trajectory holds the exact scaled base loads
  const int t = 100;
  const auto& s = d.networks[1].test[sched.test_index[t]];
  const auto lb = cases[1].load_buses();
  for (std::size_t i = 0; i < lb.size(); ++i)
    EXPECT_NEAR(s.loads_p[i], profile[t] * cases[1].buses[lb[i]].pd / cases[1].base_mva, 1e-15);
}

TEST(Tracking, JitteredTrainingSamplesAroundEachSlot) {
  const auto c = load("case9");
  const auto d = generate_tracking_dataset({c}, {0.8, 1.0}, 3, 2);
  EXPECT_EQ(d.networks[0].train.size(), 6u);
  EXPECT_EQ(d.networks[0].test.size(), 2u);
  const auto lb = c.load_buses();
  for (int i = 0; i < 3; ++i) {
    const double f = d.networks[0].train[i].loads_p[0] * c.base_mva / c.buses[lb[0]].pd;
    EXPECT_GE(f, 0.8 * 0.9 - 1e-12);
    EXPECT_LE(f, 0.8 * 1.1 + 1e-12);
  }
}

TEST(Tracking, SingleSlotWithoutTrainingSamples) {
  const auto d = generate_tracking_dataset({load("case9")}, {1.0}, 0, 1);
  EXPECT_EQ(d.networks[0].test.size(), 1u);
  EXPECT_EQ(d.schedule->test_index, std::vector<int>{0});
}

TEST(Tracking, NetworksMustGrow) {
  const auto c = load("case9");
  EXPECT_THROW(generate_tracking_dataset({c, c}, {1.0, 1.0}, 0, 1), Error);
}

TEST(Files, WriteReadRoundTrip) {
  const auto c9 = load("case9"), c14 = load("case14");
  auto d = generate_dataset({c9, c14}, 12, 0.75, 6);
  d.provenance.generated_at = "2026-01-01T00:00:00Z";
  const auto dir = scratch_dir("roundtrip");
  write_dataset(d, dir.string());
  for (const char* f : {"case9.m", "case9.train.jsonl", "case9.test.jsonl", "case14.m", "case14.train.jsonl",
                        "case14.test.jsonl", "manifest.json"})
    EXPECT_TRUE(fs::exists(dir / f)) << f;
  EXPECT_FALSE(fs::exists(dir / "schedule.csv"));

  const auto back = read_dataset(dir.string());
  ASSERT_EQ(back.cases.size(), 2u);
  EXPECT_EQ(back.cases[0], c9);
  EXPECT_EQ(back.cases[1], c14);
  for (int k = 0; k < 2; ++k) {
    ASSERT_EQ(back.networks[k].train.size(), d.networks[k].train.size());
    ASSERT_EQ(back.networks[k].test.size(), d.networks[k].test.size());
    for (std::size_t i = 0; i < d.networks[k].train.size(); ++i)
      expect_same_sample(d.cases[k], d.networks[k].train[i], back.networks[k].train[i]);
    for (std::size_t i = 0; i < d.networks[k].test.size(); ++i)
      expect_same_sample(d.cases[k], d.networks[k].test[i], back.networks[k].test[i]);
    EXPECT_EQ(back.scaler.inputs[k].lo, d.scaler.inputs[k].lo);
    EXPECT_EQ(back.scaler.outputs[k].hi, d.scaler.outputs[k].hi);
    EXPECT_EQ(back.networks[k].attempted, d.networks[k].attempted);
  }
  EXPECT_EQ(back.provenance.seed, 6u);
  EXPECT_EQ(back.provenance.generated_at, "2026-01-01T00:00:00Z");
  EXPECT_FALSE(back.schedule);
}

TEST(Files, TrackingScheduleRoundTrip) {
  const auto base = load("case14");
  const auto d = generate_tracking_dataset({derive_subnetwork(base, 12), base}, daily_profile(0.2, 6), 1, 3);
  const auto dir = scratch_dir("tracking");
  write_dataset(d, dir.string());
  const auto csv = read_file((dir / "schedule.csv").string());
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "slot,network_id,scale,test_index");
  const auto back = read_dataset(dir.string());
  ASSERT_TRUE(back.schedule);
  EXPECT_EQ(back.schedule->network, d.schedule->network);
  EXPECT_EQ(back.schedule->scale, d.schedule->scale);
  EXPECT_EQ(back.schedule->test_index, d.schedule->test_index);
}

TEST(Files, WithoutProvenanceOutputIsByteStable) {
  const auto c = load("case9");
  const auto a = generate_dataset({c}, 8, 0.75, 2);
  const auto b = generate_dataset({c}, 8, 0.75, 2);
  const auto da = scratch_dir("stable_a"), db = scratch_dir("stable_b");
  write_dataset(a, da.string(), false);
  write_dataset(b, db.string(), false);
  for (const auto& entry : fs::directory_iterator(da))
    EXPECT_EQ(read_file(entry.path().string()), read_file((db / entry.path().filename()).string()))
        << entry.path().filename();
  const auto manifest = nlohmann::json::parse(read_file((da / "manifest.json").string()));
  EXPECT_FALSE(manifest["provenance"].contains("generated_at"));
  const auto line = read_file((da / "case9.train.jsonl").string());
  EXPECT_EQ(nlohmann::json::parse(line.substr(0, line.find('\n')))["solve_time"], 0.0);
}

TEST(Files, CorruptAndMismatchedManifests) {
  const auto dir = scratch_dir("corrupt");
  write_dataset(generate_dataset({load("case9")}, 4, 0.5, 1), dir.string());
  const auto manifest_path = (dir / "manifest.json").string();
  auto manifest = nlohmann::json::parse(read_file(manifest_path));

  manifest["version"] = 99;
  std::ofstream(manifest_path) << manifest.dump();
  try {
    read_dataset(dir.string());
    FAIL() << "expected VersionMismatch";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::VersionMismatch);
  }

  std::ofstream(manifest_path) << "{\"format\": \"uopf-dataset\", \"version\": ";
  try {
    read_dataset(dir.string());
    FAIL() << "expected CorruptFile";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::CorruptFile);
  }
}
