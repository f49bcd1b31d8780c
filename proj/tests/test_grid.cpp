#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "test_util.hpp"
#include "uopf/error.hpp"
#include "uopf/grid.hpp"

using namespace uopf;
using uopf::test::load;

namespace {

std::vector<int> slot_ids(const NetworkCase& c) {
  std::vector<int> ids;
  for (int s : c.slot_order) ids.push_back(c.buses[s].id);
  return ids;
}

std::vector<int> load_slot_ids(const NetworkCase& c) {
  std::vector<int> ids;
  for (int b : c.load_buses()) ids.push_back(c.buses[b].id);
  return ids;
}

bool is_prefix(const std::vector<int>& a, const std::vector<int>& b) {
  return a.size() <= b.size() && std::equal(a.begin(), a.end(), b.begin());
}

ErrorCode code_of(const std::string& text) {
  try {
    parse_case(text);
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected parse failure";
  return ErrorCode::Io;
}

const char* kTwoBus = R"(
mpc.baseMVA = 100;
mpc.bus = [
  1 3 0 0 0 0 1 1 0 230 1 1.1 0.9;
  2 1 50 10 0 0 1 1 0 230 1 1.1 0.9;
];
mpc.gen = [
  1 0 0 300 -300 1 100 1 300 0;
];
mpc.branch = [
  1 2 0 0.1 0 0 0 0 0 0 1 -360 360;
];
mpc.gencost = [
  2 0 0 3 0.01 40 0;
];
)";

std::string replace(std::string s, const std::string& from, const std::string& to) {
  s.replace(s.find(from), from.size(), to);
  return s;
}

}  // namespace

TEST(ParseCase, TwoBusEchoesFields) {
  const auto c = parse_case(kTwoBus, "two");
  EXPECT_EQ(c.base_mva, 100.0);
  ASSERT_EQ(c.num_buses(), 2);
  EXPECT_EQ(c.buses[1].pd, 50.0);
  EXPECT_EQ(c.buses[0].kind, BusKind::slack);
  EXPECT_EQ(c.buses[1].kind, BusKind::pq);
  EXPECT_DOUBLE_EQ(c.pd_pu()[1], 0.5);
  EXPECT_EQ(c.generators[0].cost, (QuadraticCost{0.01, 40, 0}));
}

TEST(ParseCase, Errors) {
  EXPECT_EQ(code_of(replace(kTwoBus, "  1 0 0 300", "  99 0 0 300")), ErrorCode::DanglingReference);
  EXPECT_EQ(code_of(replace(kTwoBus, "mpc.gencost", "mpc.costs")), ErrorCode::MissingTable);
  EXPECT_EQ(code_of(replace(kTwoBus, "mpc.baseMVA = 100;", "")), ErrorCode::MissingTable);
  EXPECT_EQ(code_of(replace(kTwoBus, "2 1 50 10", "2 3 50 10")), ErrorCode::MultipleSlack);
  EXPECT_EQ(code_of(replace(kTwoBus, "1 3 0 0", "1 2 0 0")), ErrorCode::NoSlack);
  EXPECT_EQ(code_of(replace(kTwoBus, "1 2 0 0.1", "1 2 0 0")), ErrorCode::ZeroImpedanceBranch);
  EXPECT_EQ(code_of(replace(kTwoBus, "2 0 0 3 0.01 40 0", "2 0 0 4 1 0.01 40 0")), ErrorCode::MalformedRow);
}

TEST(ParseCase, MalformedRowReportsLine) {
  try {
    parse_case(replace(kTwoBus, "2 1 50 10 0 0 1 1 0 230 1 1.1 0.9", "2 1 50 10 0 0 1"));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::MalformedRow);
    EXPECT_NE(std::string(e.what()).find("line 5"), std::string::npos) << e.what();
  }
}

TEST(ParseCase, ExtraColumnsWarnAndDisconnectedFails) {
  std::vector<std::string> warnings;
  parse_case(replace(kTwoBus, "1 0 0 300 -300 1 100 1 300 0;", "1 0 0 300 -300 1 100 1 300 0 0 0;"), "w",
             &warnings);
  ASSERT_FALSE(warnings.empty());
  EXPECT_NE(warnings[0].find("mpc.gen"), std::string::npos);

  EXPECT_EQ(code_of(replace(kTwoBus, "1 2 0 0.1 0 0 0 0 0 0 1", "1 2 0 0.1 0 0 0 0 0 0 0")),
            ErrorCode::Disconnected);
}

TEST(ParseCase, Ieee57InputSlots) {
  const auto c = load("case57");
  EXPECT_EQ(c.num_buses(), 57);
  EXPECT_EQ(c.load_buses().size(), 42u);
  EXPECT_EQ(2 * c.load_buses().size(), 84u);
}

TEST(ParseCase, RoundTripThroughCanonicalText) {
  for (const char* name : {"case9", "case14", "case30", "case57", "case118", "case300"}) {
    const auto c = load(name);
    EXPECT_EQ(parse_case(write_case(c), c.name), c) << name;
  }
  const auto derived = derive_subnetwork(load("case30"), 22);
  EXPECT_EQ(parse_case(write_case(derived), derived.name), derived);
}

TEST(Admittance, NoBranchesIsZero) {
  NetworkCase c = uopf::test::two_bus_case(0, 0.1, 0, 0);
  c.buses.pop_back();
  c.branches.clear();
  c.slot_order = {0};
  const auto y = build_admittance(c);
  ASSERT_EQ(y.dim(), 1);
  EXPECT_EQ(y.y(0, 0), Complex(0, 0));
}

TEST(Admittance, SingleBranchHandValues) {
  const auto c = uopf::test::two_bus_case(0.0, 0.1, 0, 0);
  const auto y = build_admittance(c).y;
  // y = 1 / (0.1j) = -10j
  EXPECT_NEAR(std::abs(y(0, 0) - Complex(0, -10)), 0.0, 1e-12);
  EXPECT_NEAR(std::abs(y(0, 1) - Complex(0, 10)), 0.0, 1e-12);
  EXPECT_NEAR(std::abs(y(1, 0) - Complex(0, 10)), 0.0, 1e-12);
  EXPECT_NEAR(std::abs(y(1, 1) - Complex(0, -10)), 0.0, 1e-12);
}

TEST(Admittance, OffNominalTap) {
  auto c = uopf::test::two_bus_case(0.0, 0.1, 0, 0);
  c.branches[0].tap = 2.0;
  const auto y = build_admittance(c).y;
  EXPECT_NEAR(std::abs(y(0, 0) - Complex(0, -2.5)), 0.0, 1e-12);
  EXPECT_NEAR(std::abs(y(0, 1) - Complex(0, 5)), 0.0, 1e-12);
  EXPECT_NEAR(std::abs(y(1, 0) - Complex(0, 5)), 0.0, 1e-12);
  EXPECT_NEAR(std::abs(y(1, 1) - Complex(0, -10)), 0.0, 1e-12);
}

TEST(Admittance, ZeroImpedanceRejected) {
  auto c = uopf::test::two_bus_case(0.0, 0.1, 0, 0);
  c.branches[0].x = 0.0;
  try {
    build_admittance(c);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ZeroImpedanceBranch);
  }
}

TEST(AdmittanceProperty, SymmetricWithoutShifters) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 30; ++trial) {
    const auto c = uopf::test::random_case(rng, 3 + trial % 12);
    const auto y = build_admittance(c).y;
    for (int i = 0; i < y.rows(); ++i)
      for (int j = 0; j < y.cols(); ++j) ASSERT_EQ(y(i, j), y(j, i)) << "trial " << trial;
  }
}

TEST(AdmittanceProperty, RowSumEqualsShuntWithoutCharging) {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 30; ++trial) {
    auto c = uopf::test::random_case(rng, 3 + trial % 12);
    for (auto& br : c.branches) br.b = 0.0;
    const auto y = build_admittance(c).y;
    for (int i = 0; i < c.num_buses(); ++i) {
      const Complex shunt = Complex(c.buses[i].gs, c.buses[i].bs) / c.base_mva;
      ASSERT_NEAR(std::abs(y.row(i).sum() - shunt), 0.0, 1e-11);
    }
  }
}

TEST(DeriveSubnetwork, FullTargetKeepsNetwork) {
  const auto c = load("case30");
  const auto d = derive_subnetwork(c, c.num_buses());
  EXPECT_EQ(d.name, c.name);
  EXPECT_EQ(d.buses, c.buses);
  EXPECT_EQ(d.generators, c.generators);
  EXPECT_EQ(d.branches, c.branches);
  EXPECT_EQ(derive_subnetwork(d, d.num_buses()), d);
}

TEST(DeriveSubnetwork, Ieee118To73HasLoadSlotPrefix) {
  const auto c = load("case118");
  const auto full = derive_subnetwork(c, 118);
  const auto small = derive_subnetwork(c, 73);
  EXPECT_EQ(small.num_buses(), 73);
  EXPECT_NO_THROW(validate_case(small));
  EXPECT_TRUE(is_prefix(load_slot_ids(small), load_slot_ids(full)));
  EXPECT_LT(load_slot_ids(small).size(), load_slot_ids(full).size());
  // buses keep their relative table order
  std::vector<int> ids;
  for (const auto& b : small.buses) ids.push_back(b.id);
  EXPECT_TRUE(std::is_sorted(ids.begin(), ids.end()));
}

TEST(DeriveSubnetwork, MonotoneAndIdempotent) {
  const auto c = load("case30");
  const std::vector<int> targets = {18, 20, 24, 27, 30};
  for (std::size_t a = 0; a < targets.size(); ++a) {
    const auto da = derive_subnetwork(c, targets[a]);
    EXPECT_EQ(derive_subnetwork(c, targets[a]), da);
    EXPECT_EQ(derive_subnetwork(da, targets[a]).slot_order, da.slot_order);
    for (std::size_t b = a; b < targets.size(); ++b) {
      const auto db = derive_subnetwork(c, targets[b]);
      EXPECT_TRUE(is_prefix(slot_ids(da), slot_ids(db))) << targets[a] << " vs " << targets[b];
    }
  }
}

TEST(DeriveSubnetwork, CannotReachTarget) {
  const auto c = uopf::test::two_bus_case(0, 0.1, 50, 0);
  try {
    derive_subnetwork(c, 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::CannotReachTarget);
  }
  // case9 has 3 generator buses; the other 6 can go only while the rest stays connected
  try {
    derive_subnetwork(load("case9"), 2);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::CannotReachTarget);
  }
}
