#include "uopf/grid.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <numbers>
#include <optional>
#include <queue>
#include <sstream>

#include <json.hpp>

#include "uopf/error.hpp"

namespace uopf {

namespace {

struct Row {
  int line = 0;
  std::vector<double> values;
};

struct Table {
  int line = 0;
  std::vector<Row> rows;
};

std::string strip_comments(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  bool in_comment = false;
  bool in_string = false;
  for (char ch : text) {
    if (ch == '\n') {
      in_comment = false;
      in_string = false;
      out.push_back(ch);
      continue;
    }
    if (in_comment) continue;
    if (ch == '\'') in_string = !in_string;
    if (ch == '%' && !in_string) {
      in_comment = true;
      continue;
    }
    out.push_back(ch);
  }
  return out;
}

int line_of(const std::string& text, std::size_t pos) {
  return 1 + static_cast<int>(std::count(text.begin(), text.begin() + pos, '\n'));
}

std::optional<double> parse_number(std::string_view tok) {
  if (!tok.empty() && tok.front() == '+') tok.remove_prefix(1);
  if (tok == "Inf" || tok == "inf") return std::numeric_limits<double>::infinity();
  if (tok == "-Inf" || tok == "-inf") return -std::numeric_limits<double>::infinity();
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || ptr != tok.data() + tok.size()) return std::nullopt;
  return v;
}

/// Locates `mpc.<name>` followed by `=`; returns the position after `=`.
std::optional<std::size_t> find_assignment(const std::string& text, std::string_view name) {
  const std::string key = "mpc." + std::string(name);
  std::size_t pos = 0;
  while ((pos = text.find(key, pos)) != std::string::npos) {
    std::size_t p = pos + key.size();
    // reject prefixes such as mpc.busnames when looking for mpc.bus
    if (p < text.size() && (std::isalnum(static_cast<unsigned char>(text[p])) || text[p] == '_')) {
      pos = p;
      continue;
    }
    while (p < text.size() && std::isspace(static_cast<unsigned char>(text[p]))) ++p;
    if (p < text.size() && text[p] == '=') return p + 1;
    pos = p;
  }
  return std::nullopt;
}

std::optional<Table> find_table(const std::string& text, std::string_view name) {
  auto eq = find_assignment(text, name);
  if (!eq) return std::nullopt;
  std::size_t open = text.find('[', *eq);
  if (open == std::string::npos) {
    throw Error(ErrorCode::MalformedRow, "table mpc." + std::string(name) +
                                             " has no '[' (line " +
                                             std::to_string(line_of(text, *eq)) + ")");
  }
  std::size_t close = text.find(']', open);
  if (close == std::string::npos) {
    throw Error(ErrorCode::MalformedRow, "table mpc." + std::string(name) +
                                             " is not closed (line " +
                                             std::to_string(line_of(text, open)) + ")");
  }
  Table table;
  table.line = line_of(text, open);
  int line = table.line;
  Row current{line, {}};
  std::size_t i = open + 1;
  auto flush = [&] {
    if (!current.values.empty()) table.rows.push_back(std::move(current));
    current = Row{line, {}};
  };
  while (i < close) {
    char ch = text[i];
    if (ch == '\n') {
      flush();
      ++line;
      current.line = line;
      ++i;
    } else if (ch == ';') {
      flush();
      ++i;
    } else if (std::isspace(static_cast<unsigned char>(ch)) || ch == ',') {
      ++i;
    } else {
      std::size_t j = i;
      while (j < close && !std::isspace(static_cast<unsigned char>(text[j])) && text[j] != ';' &&
             text[j] != ',')
        ++j;
      std::string_view tok(text.data() + i, j - i);
      auto v = parse_number(tok);
      if (!v) {
        throw Error(ErrorCode::MalformedRow, "mpc." + std::string(name) + " line " +
                                                 std::to_string(line) + ": bad number '" +
                                                 std::string(tok) + "'");
      }
      if (current.values.empty()) current.line = line;
      current.values.push_back(*v);
      i = j;
    }
  }
  flush();
  return table;
}

Table require_table(const std::string& text, std::string_view name) {
  auto t = find_table(text, name);
  if (!t) throw Error(ErrorCode::MissingTable, "mpc." + std::string(name) + " not found");
  return *t;
}

void check_columns(const Table& t, std::string_view name, std::size_t min_cols,
                   std::size_t max_cols, std::vector<std::string>* warnings) {
  bool warned = false;
  for (const auto& row : t.rows) {
    if (row.values.size() < min_cols) {
      throw Error(ErrorCode::MalformedRow,
                  "mpc." + std::string(name) + " line " + std::to_string(row.line) +
                      ": expected at least " + std::to_string(min_cols) + " columns, got " +
                      std::to_string(row.values.size()));
    }
    if (row.values.size() > max_cols && !warned && warnings) {
      warnings->push_back("mpc." + std::string(name) + ": columns beyond " +
                          std::to_string(max_cols) + " ignored");
      warned = true;
    }
  }
}

bool is_integer(double v) { return std::isfinite(v) && v == std::floor(v); }

bool connected(const NetworkCase& c, const std::vector<char>& alive) {
  const int n = c.num_buses();
  std::vector<std::vector<int>> adj(n);
  for (const auto& br : c.branches) {
    if (alive[br.from] && alive[br.to]) {
      adj[br.from].push_back(br.to);
      adj[br.to].push_back(br.from);
    }
  }
  int start = -1, alive_count = 0;
  for (int i = 0; i < n; ++i) {
    if (alive[i]) {
      ++alive_count;
      if (start < 0) start = i;
    }
  }
  if (alive_count == 0) return true;
  std::vector<char> seen(n, 0);
  std::queue<int> q;
  q.push(start);
  seen[start] = 1;
  int reached = 1;
  while (!q.empty()) {
    int u = q.front();
    q.pop();
    for (int v : adj[u]) {
      if (!seen[v]) {
        seen[v] = 1;
        ++reached;
        q.push(v);
      }
    }
  }
  return reached == alive_count;
}

std::string fmt_double(double v) {
  if (std::isinf(v)) return v > 0 ? "Inf" : "-Inf";
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  (void)ec;
  return std::string(buf, ptr);
}

}  // namespace

int NetworkCase::slack_bus() const {
  for (int i = 0; i < num_buses(); ++i)
    if (buses[i].kind == BusKind::slack) return i;
  return -1;
}

int NetworkCase::bus_index(int external_id) const {
  for (int i = 0; i < num_buses(); ++i)
    if (buses[i].id == external_id) return i;
  return -1;
}

std::vector<int> NetworkCase::load_buses() const {
  std::vector<int> out;
  for (int b : slot_order)
    if (buses[b].pd != 0.0 || buses[b].qd != 0.0) out.push_back(b);
  return out;
}

Eigen::VectorXd NetworkCase::pd_pu() const {
  Eigen::VectorXd v(num_buses());
  for (int i = 0; i < num_buses(); ++i) v[i] = buses[i].pd / base_mva;
  return v;
}

Eigen::VectorXd NetworkCase::qd_pu() const {
  Eigen::VectorXd v(num_buses());
  for (int i = 0; i < num_buses(); ++i) v[i] = buses[i].qd / base_mva;
  return v;
}

std::vector<std::vector<int>> NetworkCase::generators_at_bus() const {
  std::vector<std::vector<int>> out(num_buses());
  for (int g = 0; g < num_generators(); ++g) out[generators[g].bus].push_back(g);
  return out;
}

void validate_case(const NetworkCase& c) {
  const int n = c.num_buses();
  if (n == 0) throw Error(ErrorCode::InvalidCase, c.name + ": no buses");
  if (!(c.base_mva > 0.0)) throw Error(ErrorCode::InvalidCase, c.name + ": baseMVA must be > 0");
  int slacks = 0;
  for (const auto& b : c.buses) {
    if (!(b.vmin > 0.0) || b.vmin > b.vmax) {
      throw Error(ErrorCode::InvalidCase,
                  c.name + ": bus " + std::to_string(b.id) + " has invalid voltage limits");
    }
    if (b.kind == BusKind::slack) ++slacks;
  }
  if (slacks == 0) throw Error(ErrorCode::NoSlack, c.name + ": no reference bus");
  if (slacks > 1) {
    throw Error(ErrorCode::MultipleSlack,
                c.name + ": " + std::to_string(slacks) + " reference buses");
  }
  for (const auto& g : c.generators) {
    if (g.bus < 0 || g.bus >= n)
      throw Error(ErrorCode::DanglingReference, c.name + ": generator bus index out of range");
    if (g.pmin > g.pmax || g.qmin > g.qmax) {
      throw Error(ErrorCode::InvalidCase, c.name + ": generator at bus " +
                                              std::to_string(c.buses[g.bus].id) +
                                              " has inverted limits");
    }
  }
  for (const auto& br : c.branches) {
    if (br.from < 0 || br.from >= n || br.to < 0 || br.to >= n)
      throw Error(ErrorCode::DanglingReference, c.name + ": branch bus index out of range");
    if (br.from == br.to) {
      throw Error(ErrorCode::InvalidCase,
                  c.name + ": branch loops on bus " + std::to_string(c.buses[br.from].id));
    }
    if (br.r == 0.0 && br.x == 0.0) {
      throw Error(ErrorCode::ZeroImpedanceBranch,
                  c.name + ": branch " + std::to_string(c.buses[br.from].id) + "-" +
                      std::to_string(c.buses[br.to].id));
    }
  }
  bool has_slack_gen = false;
  for (const auto& g : c.generators) has_slack_gen |= (g.bus == c.slack_bus());
  if (!has_slack_gen) throw Error(ErrorCode::InvalidCase, c.name + ": no generator at reference bus");
  if (static_cast<int>(c.slot_order.size()) != n)
    throw Error(ErrorCode::InvalidCase, c.name + ": slot order length mismatch");
  std::vector<char> seen(n, 0);
  for (int s : c.slot_order) {
    if (s < 0 || s >= n || seen[s]) throw Error(ErrorCode::InvalidCase, c.name + ": slot order is not a permutation");
    seen[s] = 1;
  }
  if (!connected(c, std::vector<char>(n, 1)))
    throw Error(ErrorCode::Disconnected, c.name + ": bus graph is not connected");
}

NetworkCase parse_case(std::string_view raw, std::string name, std::vector<std::string>* warnings) {
  const std::string text = strip_comments(raw);
  NetworkCase c;
  c.name = std::move(name);

  auto base_pos = find_assignment(text, "baseMVA");
  if (!base_pos) throw Error(ErrorCode::MissingTable, "mpc.baseMVA not found");
  {
    std::size_t end = text.find(';', *base_pos);
    std::string tok = text.substr(*base_pos, end == std::string::npos ? std::string::npos : end - *base_pos);
    tok.erase(std::remove_if(tok.begin(), tok.end(), [](unsigned char ch) { return std::isspace(ch); }),
              tok.end());
    auto v = parse_number(tok);
    if (!v) {
      throw Error(ErrorCode::MalformedRow,
                  "mpc.baseMVA line " + std::to_string(line_of(text, *base_pos)) + ": '" + tok + "'");
    }
    c.base_mva = *v;
  }

  const Table bus_t = require_table(text, "bus");
  const Table gen_t = require_table(text, "gen");
  const Table branch_t = require_table(text, "branch");
  const Table cost_t = require_table(text, "gencost");
  check_columns(bus_t, "bus", 13, 13, warnings);
  check_columns(gen_t, "gen", 10, 10, warnings);
  check_columns(branch_t, "branch", 11, 13, warnings);
  check_columns(cost_t, "gencost", 4, 7, warnings);

  std::map<int, int> ext_to_int;
  for (const auto& row : bus_t.rows) {
    const auto& v = row.values;
    const std::string where = "mpc.bus line " + std::to_string(row.line);
    if (!is_integer(v[0])) throw Error(ErrorCode::MalformedRow, where + ": bus number not an integer");
    Bus b;
    b.id = static_cast<int>(v[0]);
    switch (static_cast<int>(v[1])) {
      case 1: b.kind = BusKind::pq; break;
      case 2: b.kind = BusKind::pv; break;
      case 3: b.kind = BusKind::slack; break;
      default:
        throw Error(ErrorCode::MalformedRow, where + ": unsupported bus type " + fmt_double(v[1]));
    }
    b.pd = v[2];
    b.qd = v[3];
    b.gs = v[4];
    b.bs = v[5];
    b.vm0 = v[7];
    b.va0 = v[8];
    b.base_kv = v[9];
    b.vmax = v[11];
    b.vmin = v[12];
    if (ext_to_int.contains(b.id)) throw Error(ErrorCode::MalformedRow, where + ": duplicate bus number");
    ext_to_int[b.id] = static_cast<int>(c.buses.size());
    c.buses.push_back(b);
  }

  auto lookup = [&](double ext, const std::string& where) {
    auto it = is_integer(ext) ? ext_to_int.find(static_cast<int>(ext)) : ext_to_int.end();
    if (it == ext_to_int.end())
      throw Error(ErrorCode::DanglingReference, where + ": unknown bus " + fmt_double(ext));
    return it->second;
  };

  if (cost_t.rows.size() < gen_t.rows.size()) {
    throw Error(ErrorCode::MalformedRow, "mpc.gencost has " + std::to_string(cost_t.rows.size()) +
                                             " rows for " + std::to_string(gen_t.rows.size()) +
                                             " generators");
  }
  if (cost_t.rows.size() > gen_t.rows.size() && warnings)
    warnings->push_back("mpc.gencost: rows beyond the generator count (reactive costs) ignored");

  for (std::size_t g = 0; g < gen_t.rows.size(); ++g) {
    const auto& row = gen_t.rows[g];
    const auto& v = row.values;
    const std::string where = "mpc.gen line " + std::to_string(row.line);
    Generator gen;
    gen.bus = lookup(v[0], where);
    gen.pg = v[1];
    gen.qg = v[2];
    gen.qmax = v[3];
    gen.qmin = v[4];
    gen.vg = v[5];
    gen.pmax = v[8];
    gen.pmin = v[9];

    const auto& crow = cost_t.rows[g];
    const auto& cv = crow.values;
    const std::string cwhere = "mpc.gencost line " + std::to_string(crow.line);
    if (cv[0] != 2.0) throw Error(ErrorCode::MalformedRow, cwhere + ": only polynomial (model 2) costs supported");
    if (!is_integer(cv[3]) || cv[3] < 0 || cv[3] > 3)
      throw Error(ErrorCode::MalformedRow, cwhere + ": polynomial degree above 2 not supported");
    const auto ncoef = static_cast<std::size_t>(cv[3]);
    if (cv.size() < 4 + ncoef) throw Error(ErrorCode::MalformedRow, cwhere + ": missing coefficients");
    double coef[3] = {0.0, 0.0, 0.0};  // c2, c1, c0
    for (std::size_t i = 0; i < ncoef; ++i) coef[3 - ncoef + i] = cv[4 + i];
    gen.cost = {coef[0], coef[1], coef[2]};

    if (v[7] <= 0.0) {
      if (warnings) warnings->push_back(where + ": out-of-service generator dropped");
      continue;
    }
    c.generators.push_back(gen);
  }

  for (const auto& row : branch_t.rows) {
    const auto& v = row.values;
    const std::string where = "mpc.branch line " + std::to_string(row.line);
    Branch br;
    br.from = lookup(v[0], where);
    br.to = lookup(v[1], where);
    br.r = v[2];
    br.x = v[3];
    br.b = v[4];
    br.smax = v[5];
    br.tap = v[8];
    br.shift = v[9];
    if (v[10] <= 0.0) {
      if (warnings) warnings->push_back(where + ": out-of-service branch dropped");
      continue;
    }
    c.branches.push_back(br);
  }

  // A PV bus with no in-service generator behaves as PQ.
  auto at_bus = c.generators_at_bus();
  for (int i = 0; i < c.num_buses(); ++i) {
    if (c.buses[i].kind == BusKind::pv && at_bus[i].empty()) {
      c.buses[i].kind = BusKind::pq;
      if (warnings)
        warnings->push_back("bus " + std::to_string(c.buses[i].id) + ": PV bus without generator treated as PQ");
    }
  }

  if (auto slots = find_table(text, "slot_order")) {
    for (const auto& row : slots->rows)
      for (double ext : row.values)
        c.slot_order.push_back(lookup(ext, "mpc.slot_order line " + std::to_string(row.line)));
  } else {
    c.slot_order.resize(c.buses.size());
    for (std::size_t i = 0; i < c.slot_order.size(); ++i) c.slot_order[i] = static_cast<int>(i);
  }

  validate_case(c);
  return c;
}

NetworkCase load_case_file(const std::string& path, std::vector<std::string>* warnings) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_case(ss.str(), std::filesystem::path(path).stem().string(), warnings);
}

std::string write_case(const NetworkCase& c) {
  std::ostringstream os;
  auto row = [&os](std::initializer_list<double> vals) {
    os << '\t';
    bool first = true;
    for (double v : vals) {
      if (!first) os << '\t';
      os << fmt_double(v);
      first = false;
    }
    os << ";\n";
  };
  os << "function mpc = " << c.name << "\n";
  os << "mpc.version = '2';\n";
  os << "mpc.baseMVA = " << fmt_double(c.base_mva) << ";\n\n";
  os << "%% bus data\n";
  os << "%\tbus_i\ttype\tPd\tQd\tGs\tBs\tarea\tVm\tVa\tbaseKV\tzone\tVmax\tVmin\n";
  os << "mpc.bus = [\n";
  for (const auto& b : c.buses) {
    const double type = b.kind == BusKind::slack ? 3 : b.kind == BusKind::pv ? 2 : 1;
    row({double(b.id), type, b.pd, b.qd, b.gs, b.bs, 1, b.vm0, b.va0, b.base_kv, 1, b.vmax, b.vmin});
  }
  os << "];\n\n%% generator data\n";
  os << "%\tbus\tPg\tQg\tQmax\tQmin\tVg\tmBase\tstatus\tPmax\tPmin\n";
  os << "mpc.gen = [\n";
  for (const auto& g : c.generators)
    row({double(c.buses[g.bus].id), g.pg, g.qg, g.qmax, g.qmin, g.vg, c.base_mva, 1, g.pmax, g.pmin});
  os << "];\n\n%% branch data\n";
  os << "%\tfbus\ttbus\tr\tx\tb\trateA\trateB\trateC\tratio\tangle\tstatus\tangmin\tangmax\n";
  os << "mpc.branch = [\n";
  for (const auto& br : c.branches) {
    row({double(c.buses[br.from].id), double(c.buses[br.to].id), br.r, br.x, br.b, br.smax, 0, 0,
         br.tap, br.shift, 1, -360, 360});
  }
  os << "];\n\n%% generator cost data\n";
  os << "mpc.gencost = [\n";
  for (const auto& g : c.generators) row({2, 0, 0, 3, g.cost.c2, g.cost.c1, g.cost.c0});
  os << "];\n\n%% elastic-layer slot order (external bus numbers)\n";
  os << "mpc.slot_order = [\n";
  for (int s : c.slot_order) row({double(c.buses[s].id)});
  os << "];\n";
  return os.str();
}

std::string dump_case_json(const NetworkCase& c) {
  using nlohmann::ordered_json;
  ordered_json j;
  j["name"] = c.name;
  j["base_mva"] = c.base_mva;
  ordered_json buses = ordered_json::array();
  for (const auto& b : c.buses) {
    buses.push_back({{"id", b.id},
                     {"kind", b.kind == BusKind::slack ? "slack" : b.kind == BusKind::pv ? "pv" : "pq"},
                     {"pd", b.pd},
                     {"qd", b.qd},
                     {"gs", b.gs},
                     {"bs", b.bs},
                     {"vmin", b.vmin},
                     {"vmax", b.vmax},
                     {"base_kv", b.base_kv}});
  }
  j["buses"] = buses;
  ordered_json gens = ordered_json::array();
  for (const auto& g : c.generators) {
    gens.push_back({{"bus", c.buses[g.bus].id},
                    {"pmin", g.pmin},
                    {"pmax", g.pmax},
                    {"qmin", g.qmin},
                    {"qmax", g.qmax},
                    {"vg", g.vg},
                    {"cost", {g.cost.c2, g.cost.c1, g.cost.c0}}});
  }
  j["generators"] = gens;
  ordered_json branches = ordered_json::array();
  for (const auto& br : c.branches) {
    branches.push_back({{"from", c.buses[br.from].id},
                        {"to", c.buses[br.to].id},
                        {"r", br.r},
                        {"x", br.x},
                        {"b", br.b},
                        {"tap", br.tap},
                        {"shift", br.shift},
                        {"smax", br.smax}});
  }
  j["branches"] = branches;
  ordered_json slots = ordered_json::array();
  for (int s : c.slot_order) slots.push_back(c.buses[s].id);
  j["slot_order"] = slots;
  return j.dump(2);
}

BranchAdmittance branch_admittance(const Branch& br) {
  if (br.r == 0.0 && br.x == 0.0)
    throw Error(ErrorCode::ZeroImpedanceBranch, "branch with r = x = 0");
  const Complex ys = 1.0 / Complex(br.r, br.x);
  const Complex charging(0.0, br.b / 2.0);
  const double tau = br.ratio();
  const Complex tap = std::polar(tau, br.shift * std::numbers::pi / 180.0);
  BranchAdmittance a;
  a.ff = (ys + charging) / (tau * tau);
  a.ft = -ys / std::conj(tap);
  a.tf = -ys / tap;
  a.tt = ys + charging;
  return a;
}

AdmittanceMatrix build_admittance(const NetworkCase& c) {
  const int n = c.num_buses();
  AdmittanceMatrix ym{Eigen::MatrixXcd::Zero(n, n)};
  for (const auto& br : c.branches) {
    const auto a = branch_admittance(br);
    ym.y(br.from, br.from) += a.ff;
    ym.y(br.from, br.to) += a.ft;
    ym.y(br.to, br.from) += a.tf;
    ym.y(br.to, br.to) += a.tt;
  }
  for (int i = 0; i < n; ++i) ym.y(i, i) += Complex(c.buses[i].gs, c.buses[i].bs) / c.base_mva;
  return ym;
}

namespace {

std::vector<int> removal_sequence(const NetworkCase& c) {
  const int n = c.num_buses();
  std::vector<char> has_gen(n, 0);
  for (const auto& g : c.generators) has_gen[g.bus] = 1;
  const int slack = c.slack_bus();
  std::vector<char> alive(n, 1);
  std::vector<int> seq;
  while (true) {
    bool found = false;
    for (int i = n - 1; i >= 0; --i) {
      if (!alive[i] || i == slack || has_gen[i]) continue;
      alive[i] = 0;
      if (connected(c, alive)) {
        seq.push_back(i);
        found = true;
        break;
      }
      alive[i] = 1;
    }
    if (!found) break;
  }
  return seq;
}

}  // namespace

NetworkCase derive_subnetwork(const NetworkCase& c, int target_buses) {
  const int n = c.num_buses();
  if (target_buses > n || target_buses < 2) {
    throw Error(ErrorCode::CannotReachTarget, c.name + ": target " + std::to_string(target_buses) +
                                                  " outside [2, " + std::to_string(n) + "]");
  }
  const std::vector<int> seq = removal_sequence(c);
  const int need = n - target_buses;
  if (need > static_cast<int>(seq.size())) {
    throw Error(ErrorCode::CannotReachTarget,
                c.name + ": at most " + std::to_string(seq.size()) +
                    " buses removable without disconnecting or dropping generators");
  }

  // rank[i]: position of original bus i in the family-wide slot order
  std::vector<char> removable(n, 0);
  for (int b : seq) removable[b] = 1;
  std::vector<int> family_order;
  for (int i = 0; i < n; ++i)
    if (!removable[i]) family_order.push_back(i);
  for (auto it = seq.rbegin(); it != seq.rend(); ++it) family_order.push_back(*it);

  std::vector<char> alive(n, 1);
  for (int k = 0; k < need; ++k) alive[seq[k]] = 0;
  std::vector<int> new_index(n, -1);

  NetworkCase out;
  out.name = need == 0 ? c.name : c.name + "_" + std::to_string(target_buses);
  out.base_mva = c.base_mva;
  for (int i = 0; i < n; ++i) {
    if (!alive[i]) continue;
    new_index[i] = out.num_buses();
    out.buses.push_back(c.buses[i]);
  }
  for (auto g : c.generators) {
    g.bus = new_index[g.bus];
    out.generators.push_back(g);
  }
  for (auto br : c.branches) {
    if (!alive[br.from] || !alive[br.to]) continue;
    br.from = new_index[br.from];
    br.to = new_index[br.to];
    out.branches.push_back(br);
  }
  for (int b : family_order)
    if (alive[b]) out.slot_order.push_back(new_index[b]);
  validate_case(out);
  return out;
}

}  // namespace uopf
