#include "canopi/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include <json.hpp>

#include "canopi/errors.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace canopi {

namespace {

json parse_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open file: " + path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ValidationError(path + ": " + e.what());
  }
}

double num(const json& j, const char* key, const std::string& where) {
  if (!j.contains(key))
    throw ValidationError(where + ": missing field '" + key + "'");
  if (!j[key].is_number())
    throw ValidationError(where + ": field '" + key + "' must be a number");
  return j[key].get<double>();
}

double num_or(const json& j, const char* key, double fallback) {
  return j.contains(key) ? j[key].get<double>() : fallback;
}

int integer(const json& j, const char* key, const std::string& where) {
  double v = num(j, key, where);
  return static_cast<int>(std::llround(v));
}

}  // namespace

void Instance::validate() const {
  net.validate();
  tech.validate(net, static_cast<int>(scenarios.size()));
  for (const auto& sc : scenarios) sc.validate(net);
}

Instance load_instance(const std::string& network_path,
                       const std::string& manifest_path) {
  Instance inst;
  json netj = parse_file(network_path);

  for (const auto& bj : netj.value("buses", json::array())) {
    Bus b;
    b.id = integer(bj, "id", network_path + " bus");
    b.is_slack = bj.value("slack", false);
    inst.net.buses.push_back(b);
  }
  std::sort(inst.net.buses.begin(), inst.net.buses.end(),
            [](const Bus& a, const Bus& b) { return a.id < b.id; });
  int slack = -1;
  for (const auto& b : inst.net.buses)
    if (b.is_slack) slack = b.id;
  if (slack < 0 && !inst.net.buses.empty()) {
    // no slack named in the file: first bus takes the role
    slack = inst.net.buses.front().id;
    inst.net.buses.front().is_slack = true;
  }
  inst.net.slack_bus = slack;

  for (const auto& bj : netj.value("branches", json::array())) {
    Branch br;
    std::string where = network_path + " branch";
    br.id = integer(bj, "id", where);
    where += " " + std::to_string(br.id);
    br.from_bus = integer(bj, "from", where);
    br.to_bus = integer(bj, "to", where);
    br.base_impedance = num(bj, "x0", where);
    br.base_capacity = num(bj, "w_br", where);
    br.expansion_limit = num(bj, "x_br_max", where);
    br.expansion_cost = num(bj, "c_br", where);
    inst.net.branches.push_back(br);
  }
  std::sort(inst.net.branches.begin(), inst.net.branches.end(),
            [](const Branch& a, const Branch& b) { return a.id < b.id; });

  for (const auto& hj : netj.value("hvdc", json::array())) {
    HvdcLine h;
    std::string where = network_path + " hvdc";
    h.id = integer(hj, "id", where);
    h.from_bus = integer(hj, "from", where);
    h.to_bus = integer(hj, "to", where);
    h.capacity = num(hj, "w_dc", where);
    inst.net.hvdc.push_back(h);
  }

  for (const auto& gj : netj.value("generators", json::array())) {
    std::string where = network_path + " generator";
    inst.net.generator_bus.push_back(integer(gj, "bus", where));
    inst.tech.gen_existing.push_back(num(gj, "w_g", where));
    inst.tech.gen_max_new.push_back(num(gj, "x_g_max", where));
    inst.tech.gen_invest_cost.push_back(num(gj, "c_inv", where));
    inst.tech.gen_ramp.push_back(num(gj, "ramp", where));
    inst.tech.gen_emission.push_back(num(gj, "emis", where));
  }
  for (const auto& sj : netj.value("storage", json::array())) {
    std::string where = network_path + " storage";
    inst.net.storage_bus.push_back(integer(sj, "bus", where));
    inst.tech.es_power_existing.push_back(num(sj, "w_p", where));
    inst.tech.es_energy_existing.push_back(num(sj, "w_e", where));
    inst.tech.es_power_max_new.push_back(num(sj, "x_p_max", where));
    inst.tech.es_energy_max_new.push_back(num(sj, "x_e_max", where));
    inst.tech.es_power_invest_cost.push_back(num(sj, "c_inv_p", where));
    inst.tech.es_energy_invest_cost.push_back(num(sj, "c_inv_e", where));
  }
  for (const auto& lj : netj.value("loads", json::array())) {
    inst.net.load_bus.push_back(integer(lj, "bus", network_path + " load"));
  }

  if (netj.contains("params")) {
    const json& p = netj["params"];
    inst.tech.storage_efficiency = num_or(p, "eta", 0.95);
    inst.tech.soc_boundary_ratio = num_or(p, "gamma_es", 0.5);
    inst.tech.reserve_margin = num_or(p, "gamma_d", 0.03);
    inst.tech.contingency_rating = num_or(p, "eta_c", 1.2);
    inst.tech.shed_cost = num_or(p, "c_sh", 10000.0);
    inst.tech.violation_cost = num_or(p, "c_vio", 2000.0);
    inst.tech.emission_budget = num_or(p, "x_em_max", kInf);
    if (p.contains("x_em_max_per_scenario"))
      for (const auto& v : p["x_em_max_per_scenario"])
        inst.tech.emission_max_per_scenario.push_back(v.get<double>());
  }

  // scenarios
  json man = parse_file(manifest_path);
  fs::path base = fs::path(manifest_path).parent_path();
  const int G = inst.net.num_generators(), D = inst.net.num_loads();
  for (const auto& sj : man.value("scenarios", json::array())) {
    Scenario sc;
    sc.id = integer(sj, "id", manifest_path);
    sc.weight = num_or(sj, "weight", 1.0);
    std::string file = sj.value("file", std::string());
    if (file.empty())
      throw ValidationError(manifest_path + ": scenario " +
                            std::to_string(sc.id) + " has no file");
    fs::path path = base / file;
    std::ifstream in(path);
    if (!in)
      throw ValidationError(manifest_path + ": scenario file not found: " +
                            path.string());
    std::string header;
    if (!std::getline(in, header))
      throw ValidationError(path.string() + ": empty scenario file");
    std::vector<std::vector<double>> rows;
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      std::vector<double> vals;
      std::stringstream ss(line);
      std::string cell;
      while (std::getline(ss, cell, ',')) vals.push_back(std::stod(cell));
      rows.push_back(std::move(vals));
    }
    const int T = static_cast<int>(rows.size());
    const size_t want = 1 + static_cast<size_t>(D) + 2 * G;
    for (const auto& r : rows)
      if (r.size() != want)
        throw ValidationError(path.string() + ": expected " +
                              std::to_string(want) + " columns, got " +
                              std::to_string(r.size()));
    sc.hours = T;
    sc.load.resize(T, D);
    sc.gen_avail.resize(T, G);
    sc.gen_cost.resize(T, G);
    for (int t = 0; t < T; ++t) {
      size_t c = 1;  // column 0 is the hour index
      for (int d = 0; d < D; ++d) sc.load(t, d) = rows[t][c++];
      for (int g = 0; g < G; ++g) sc.gen_avail(t, g) = rows[t][c++];
      for (int g = 0; g < G; ++g) sc.gen_cost(t, g) = rows[t][c++];
    }
    inst.scenarios.push_back(std::move(sc));
  }
  if (inst.tech.emission_max_per_scenario.empty() &&
      std::isfinite(inst.tech.emission_budget))
    inst.tech.emission_max_per_scenario.assign(inst.scenarios.size(),
                                               inst.tech.emission_budget);

  inst.validate();
  return inst;
}

void write_instance(const Instance& inst, const std::string& directory) {
  fs::create_directories(directory);
  json netj;
  for (const auto& b : inst.net.buses) {
    json bj{{"id", b.id}};
    if (b.is_slack) bj["slack"] = true;
    netj["buses"].push_back(bj);
  }
  for (const auto& br : inst.net.branches)
    netj["branches"].push_back({{"id", br.id},
                                {"from", br.from_bus},
                                {"to", br.to_bus},
                                {"x0", br.base_impedance},
                                {"w_br", br.base_capacity},
                                {"x_br_max", br.expansion_limit},
                                {"c_br", br.expansion_cost}});
  netj["hvdc"] = json::array();
  for (const auto& h : inst.net.hvdc)
    netj["hvdc"].push_back({{"id", h.id},
                            {"from", h.from_bus},
                            {"to", h.to_bus},
                            {"w_dc", h.capacity}});
  netj["generators"] = json::array();
  for (int g = 0; g < inst.net.num_generators(); ++g)
    netj["generators"].push_back({{"id", g},
                                  {"bus", inst.net.generator_bus[g]},
                                  {"w_g", inst.tech.gen_existing[g]},
                                  {"x_g_max", inst.tech.gen_max_new[g]},
                                  {"c_inv", inst.tech.gen_invest_cost[g]},
                                  {"ramp", inst.tech.gen_ramp[g]},
                                  {"emis", inst.tech.gen_emission[g]}});
  netj["storage"] = json::array();
  for (int s = 0; s < inst.net.num_storage(); ++s)
    netj["storage"].push_back(
        {{"id", s},
         {"bus", inst.net.storage_bus[s]},
         {"w_p", inst.tech.es_power_existing[s]},
         {"w_e", inst.tech.es_energy_existing[s]},
         {"x_p_max", inst.tech.es_power_max_new[s]},
         {"x_e_max", inst.tech.es_energy_max_new[s]},
         {"c_inv_p", inst.tech.es_power_invest_cost[s]},
         {"c_inv_e", inst.tech.es_energy_invest_cost[s]}});
  netj["loads"] = json::array();
  for (int d = 0; d < inst.net.num_loads(); ++d)
    netj["loads"].push_back({{"id", d}, {"bus", inst.net.load_bus[d]}});
  json params{{"eta", inst.tech.storage_efficiency},
              {"gamma_es", inst.tech.soc_boundary_ratio},
              {"gamma_d", inst.tech.reserve_margin},
              {"eta_c", inst.tech.contingency_rating},
              {"c_sh", inst.tech.shed_cost},
              {"c_vio", inst.tech.violation_cost}};
  if (std::isfinite(inst.tech.emission_budget)) {
    params["x_em_max"] = inst.tech.emission_budget;
    params["x_em_max_per_scenario"] = inst.tech.emission_max_per_scenario;
  }
  netj["params"] = params;
  {
    std::ofstream out(fs::path(directory) / "network.json");
    out << netj.dump(2) << "\n";
  }

  json man;
  for (const auto& sc : inst.scenarios) {
    std::string file = "scenario_" + std::to_string(sc.id) + ".csv";
    man["scenarios"].push_back(
        {{"id", sc.id}, {"weight", sc.weight}, {"file", file}});
    std::ofstream out(fs::path(directory) / file);
    out << "hour";
    for (int d = 0; d < inst.net.num_loads(); ++d) out << ",load_" << d;
    for (int g = 0; g < inst.net.num_generators(); ++g) out << ",avail_" << g;
    for (int g = 0; g < inst.net.num_generators(); ++g) out << ",cost_" << g;
    out << "\n";
    char buf[64];
    for (int t = 0; t < sc.hours; ++t) {
      out << t;
      auto put = [&](double v) {
        std::snprintf(buf, sizeof buf, ",%.17g", v);
        out << buf;
      };
      for (int d = 0; d < inst.net.num_loads(); ++d) put(sc.load(t, d));
      for (int g = 0; g < inst.net.num_generators(); ++g)
        put(sc.gen_avail(t, g));
      for (int g = 0; g < inst.net.num_generators(); ++g)
        put(sc.gen_cost(t, g));
      out << "\n";
    }
  }
  std::ofstream out(fs::path(directory) / "manifest.json");
  out << man.dump(2) << "\n";
}

Instance generate_test_instance(const GenSpec& spec) {
  if (spec.buses < 2) throw ValidationError("instance needs at least 2 buses");
  int min_branches = spec.buses - 1;
  int branches = std::max(spec.branches, min_branches);
  std::mt19937_64 rng(spec.seed);
  auto uni = [&](double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
  };

  Instance inst;
  const int n = spec.buses;
  for (int i = 0; i < n; ++i) inst.net.buses.push_back({i, i == 0});
  inst.net.slack_bus = 0;

  // random spanning tree, then chords between distinct unconnected pairs
  std::set<std::pair<int, int>> used;
  auto key = [](int a, int c) { return std::make_pair(std::min(a, c), std::max(a, c)); };
  int next_id = 0;
  auto add_branch = [&](int from, int to) {
    Branch br;
    br.id = next_id++;
    br.from_bus = from;
    br.to_bus = to;
    br.base_impedance = uni(0.01, 0.3);
    inst.net.branches.push_back(br);
    used.insert(key(from, to));
  };
  for (int v = 1; v < n; ++v)
    add_branch(static_cast<int>(rng() % v), v);
  int guard = 0;
  while (static_cast<int>(inst.net.branches.size()) < branches &&
         guard++ < 10000) {
    int a = static_cast<int>(rng() % n), c = static_cast<int>(rng() % n);
    if (a == c || used.count(key(a, c))) continue;
    add_branch(a, c);
  }

  // loads cluster on the high-index buses, generation on the low ones
  const int nd = std::max(2, n / 2);
  double peak_total = 0.0;
  std::vector<double> base_load(nd);
  for (int d = 0; d < nd; ++d) {
    inst.net.load_bus.push_back(n - 1 - d);
    base_load[d] = uni(120.0, 220.0);
    peak_total += base_load[d];
  }

  auto add_gen = [&](int bus, double wg, double xmax, double cinv, double ramp,
                     double emis) {
    inst.net.generator_bus.push_back(bus);
    inst.tech.gen_existing.push_back(wg);
    inst.tech.gen_max_new.push_back(xmax);
    inst.tech.gen_invest_cost.push_back(cinv);
    inst.tech.gen_ramp.push_back(ramp);
    inst.tech.gen_emission.push_back(emis);
  };
  add_gen(0, 0.9 * peak_total, 0.3 * peak_total, 110000.0, 0.4, 1.0);  // base
  add_gen(1 % n, 0.5 * peak_total, 0.3 * peak_total, 95000.0, 0.7, 0.9);
  int renewable_bus = 2 % n;
  add_gen(renewable_bus, 0.25 * peak_total, 1.5 * peak_total, 70000.0, 1.0,
          0.0);  // renewable
  add_gen(n - 1, 0.3 * peak_total, 0.5 * peak_total, 50000.0, 1.0, 0.6);  // peaker
  std::vector<double> gen_base_cost = {uni(18.0, 25.0), uni(40.0, 55.0), 1.0,
                                       uni(130.0, 170.0)};

  // storage next to the renewable site
  inst.net.storage_bus.push_back(renewable_bus);
  inst.tech.es_power_existing.push_back(0.0);
  inst.tech.es_energy_existing.push_back(0.0);
  inst.tech.es_power_max_new.push_back(0.4 * peak_total);
  inst.tech.es_energy_max_new.push_back(1.6 * peak_total);
  inst.tech.es_power_invest_cost.push_back(25000.0);
  inst.tech.es_energy_invest_cost.push_back(6000.0);

  for (auto& br : inst.net.branches) {
    br.base_capacity = uni(0.25, 0.45) * peak_total;
    br.expansion_limit = 3.0 * br.base_capacity;
    br.expansion_cost = uni(10000.0, 20000.0);
  }
  if (n >= 4) {
    HvdcLine h;
    h.id = 0;
    h.from_bus = 1;
    h.to_bus = n - 2;
    h.capacity = 0.1 * peak_total;
    inst.net.hvdc.push_back(h);
  }

  inst.tech.storage_efficiency = 0.92;
  inst.tech.soc_boundary_ratio = 0.5;
  inst.tech.reserve_margin = 0.05;
  inst.tech.contingency_rating = 1.2;
  inst.tech.shed_cost = 10000.0;
  inst.tech.violation_cost = 2000.0;

  const int T = spec.hours, G = 4, D = nd;
  double total_energy = 0.0;
  for (int w = 0; w < spec.scenarios; ++w) {
    Scenario sc;
    sc.id = w;
    sc.weight = 1.0;
    sc.hours = T;
    sc.load.resize(T, D);
    sc.gen_avail.resize(T, G);
    sc.gen_cost.resize(T, G);
    double load_scale = (w == 0) ? 1.0 : 1.0 + 0.25 * w;
    double renew_scale = (w == 0) ? 1.0 : std::max(0.25, 1.0 - 0.45 * w);
    for (int t = 0; t < T; ++t) {
      double shape = 0.75 + 0.25 * std::sin(M_PI * (t + 1.0) / (T + 1.0));
      for (int d = 0; d < D; ++d) {
        sc.load(t, d) = base_load[d] * shape * load_scale;
        total_energy += sc.load(t, d);
      }
      double solar = std::max(0.0, std::sin(M_PI * (t + 0.5) / T));
      for (int g = 0; g < G; ++g) {
        sc.gen_avail(t, g) = (g == 2) ? renew_scale * solar : 1.0;
        double fuel = (w == 0) ? 1.0 : 1.1;
        sc.gen_cost(t, g) = gen_base_cost[g] * ((g == 2) ? 1.0 : fuel);
      }
    }
    inst.scenarios.push_back(std::move(sc));
  }
  inst.tech.emission_budget = 0.75 * total_energy;
  inst.tech.emission_max_per_scenario.assign(spec.scenarios,
                                             inst.tech.emission_budget);
  inst.validate();
  return inst;
}

void RunConfig::apply_config_file(const std::string& path) {
  json j = parse_file(path);
  if (j.contains("solver")) {
    const json& s = j["solver"];
    solver.time_limit_s = num_or(s, "time_limit_s", solver.time_limit_s);
    solver.feas_tol = num_or(s, "feas_tol", solver.feas_tol);
    solver.opt_tol = num_or(s, "opt_tol", solver.opt_tol);
  }
  if (j.contains("epsilon")) epsilon = j["epsilon"].get<double>();
  if (j.contains("alpha")) alpha = j["alpha"].get<double>();
  if (j.contains("max_iters")) max_iterations = j["max_iters"].get<int>();
  if (j.contains("threads")) threads = j["threads"].get<int>();
  if (j.contains("battery_duration"))
    battery_duration = j["battery_duration"].get<double>();
  if (j.contains("minimal_basis")) minimal_basis = j["minimal_basis"].get<bool>();
}

BundleParams RunConfig::bundle_params() const {
  BundleParams p;
  p.epsilon = epsilon;
  p.alpha = alpha;
  p.max_iterations = max_iterations;
  p.threads = threads;
  p.solver = solver;
  return p;
}

RunReport make_report(const BundleResult& res, const PortfolioSpace& space,
                      const std::vector<Scenario>& scenarios, GridMode mode,
                      double violation_cost) {
  RunReport r;
  ModelOptions opt = ModelOptions::for_mode(mode);
  r.mode = to_string(mode);
  r.kvl_enabled = opt.kvl;
  r.contingencies_enabled = opt.contingencies;
  r.converged = res.converged;
  r.hit_iteration_cap = res.hit_iteration_cap;
  r.iterations = res.iterations;
  r.lower = res.lower;
  r.upper = res.upper;
  r.warning = res.warning;
  r.trajectory = res.trajectory;

  r.invest_cost = space.invest_cost.dot(res.x_star.flat());
  for (size_t w = 0; w < res.incumbent_oracles.size(); ++w) {
    const auto& o = res.incumbent_oracles[w];
    double wt = scenarios[w].weight;
    r.operating_cost += wt * o.costs.generation;
    r.shed_penalty += wt * o.costs.shed_penalty;
    r.violation_penalty += wt * (o.costs.violation_penalty + o.sigma_c);
    r.shed_gwh += wt * o.costs.shed_mwh / 1000.0;
    double sigma_mwh =
        violation_cost > 0.0 ? o.sigma_c / violation_cost : 0.0;
    r.violation_gwh += wt * (o.costs.violation_mwh + sigma_mwh) / 1000.0;
  }
  r.storage_gw = res.x_star.es_power.sum() / 1000.0;
  r.branch_gw = res.x_star.branch.sum() / 1000.0;
  return r;
}

std::string emit_report(const RunReport& report, const std::string& out_dir) {
  fs::create_directories(out_dir);
  json j{{"mode", report.mode},
         {"kvl_enabled", report.kvl_enabled},
         {"contingencies_enabled", report.contingencies_enabled},
         {"converged", report.converged},
         {"hit_iteration_cap", report.hit_iteration_cap},
         {"iterations", report.iterations},
         {"lower_bound", report.lower},
         {"upper_bound", report.upper},
         {"invest_cost", report.invest_cost},
         {"operating_cost", report.operating_cost},
         {"shed_penalty", report.shed_penalty},
         {"violation_penalty", report.violation_penalty},
         {"shed_gwh", report.shed_gwh},
         {"violation_gwh", report.violation_gwh},
         {"storage_gw", report.storage_gw},
         {"branch_gw", report.branch_gw},
         {"solve_seconds", report.solve_seconds}};
  if (!report.warning.empty()) j["warning"] = report.warning;
  {
    std::ofstream out(fs::path(out_dir) / "report.json");
    out << j.dump(2) << "\n";
  }
  {
    std::ofstream out(fs::path(out_dir) / "trajectory.jsonl");
    for (const auto& rec : report.trajectory) {
      json line{{"k", rec.k},
                {"lower", rec.lower},
                {"upper", rec.upper},
                {"gap", rec.gap},
                {"f_k", rec.f_k},
                {"theta_lev", rec.theta_lev},
                {"type", rec.type2 ? "II" : "I"},
                {"incumbent_updated", rec.incumbent_updated},
                {"j_sizes", rec.j_sizes},
                {"level_residual", rec.level_residual},
                {"oracle_seconds", rec.oracle_seconds},
                {"master_seconds", rec.master_seconds},
                {"center_seconds", rec.center_seconds}};
      out << line.dump() << "\n";
    }
  }
  std::ostringstream s;
  char buf[160];
  std::snprintf(buf, sizeof buf, "mode %s | kvl %s | contingencies %s\n",
                report.mode.c_str(), report.kvl_enabled ? "on" : "off",
                report.contingencies_enabled ? "on" : "off");
  s << buf;
  std::snprintf(buf, sizeof buf,
                "bounds: L %.6g  U %.6g  gap %.3g%%  iterations %d%s\n",
                report.lower, report.upper,
                100.0 * (report.upper - report.lower) /
                    std::max(std::fabs(report.upper), 1e-12),
                report.iterations, report.converged ? "" : " (not converged)");
  s << buf;
  std::snprintf(buf, sizeof buf,
                "cost: invest %.6g + operating %.6g + shed %.6g + violation "
                "%.6g = %.6g\n",
                report.invest_cost, report.operating_cost, report.shed_penalty,
                report.violation_penalty,
                report.invest_cost + report.operating_cost +
                    report.shed_penalty + report.violation_penalty);
  s << buf;
  std::snprintf(buf, sizeof buf,
                "Shed GWh %.4g | Viol. GWh %.4g | Storage GW %.4g | Branch GW "
                "%.4g\n",
                report.shed_gwh, report.violation_gwh, report.storage_gw,
                report.branch_gw);
  s << buf;
  std::ofstream out(fs::path(out_dir) / "summary.txt");
  out << s.str();
  return s.str();
}

void save_solution(const SavedSolution& sol, const std::string& path) {
  json j;
  j["mode"] = sol.mode;
  j["lower"] = sol.lower;
  j["upper"] = sol.upper;
  auto vec = [](const Eigen::VectorXd& v) {
    json a = json::array();
    for (int i = 0; i < v.size(); ++i) a.push_back(v[i]);
    return a;
  };
  j["portfolio"] = {{"gen", vec(sol.portfolio.gen)},
                    {"es_power", vec(sol.portfolio.es_power)},
                    {"es_energy", vec(sol.portfolio.es_energy)},
                    {"branch", vec(sol.portfolio.branch)},
                    {"emission", vec(sol.portfolio.emission)}};
  j["injections"] = json::array();
  for (const auto& inj : sol.injections) {
    json m = json::array();
    for (int t = 0; t < inj.rows(); ++t) {
      json row = json::array();
      for (int i = 0; i < inj.cols(); ++i) row.push_back(inj(t, i));
      m.push_back(row);
    }
    j["injections"].push_back(m);
  }
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write solution file: " + path);
  out << j.dump() << "\n";
}

SavedSolution load_solution(const std::string& path, const Instance& inst) {
  json j = parse_file(path);
  SavedSolution sol;
  sol.mode = j.value("mode", "scdc");
  sol.lower = num_or(j, "lower", 0.0);
  sol.upper = num_or(j, "upper", 0.0);
  auto vec = [&](const char* key) {
    if (!j["portfolio"].contains(key))
      throw ValidationError(path + ": portfolio missing '" + key + "'");
    const json& a = j["portfolio"][key];
    Eigen::VectorXd v(a.size());
    for (size_t i = 0; i < a.size(); ++i) v[static_cast<int>(i)] = a[i].get<double>();
    return v;
  };
  sol.portfolio.gen = vec("gen");
  sol.portfolio.es_power = vec("es_power");
  sol.portfolio.es_energy = vec("es_energy");
  sol.portfolio.branch = vec("branch");
  sol.portfolio.emission = vec("emission");
  if (sol.portfolio.gen.size() != inst.net.num_generators() ||
      sol.portfolio.branch.size() != inst.net.num_branches())
    throw ValidationError(path + ": portfolio does not match the instance");
  for (const auto& m : j.value("injections", json::array())) {
    Eigen::MatrixXd inj(m.size(), inst.net.num_buses());
    for (size_t t = 0; t < m.size(); ++t)
      for (int i = 0; i < inst.net.num_buses(); ++i)
        inj(static_cast<int>(t), i) = m[t][i].get<double>();
    sol.injections.push_back(std::move(inj));
  }
  return sol;
}

Evaluation evaluate_portfolio(const Instance& inst,
                              const InvestmentPortfolio& x,
                              const SolverConfig& cfg, bool minimal_basis) {
  ModelOptions opt = ModelOptions::for_mode(GridMode::scdc);
  opt.minimal_basis = minimal_basis;
  SubproblemContext ctx = make_context(inst.net, inst.tech, x.branch, opt, cfg);
  PortfolioSpace space =
      PortfolioSpace::build(inst.net, inst.tech, inst.scenarios);

  Evaluation ev;
  ev.invest = space.invest_cost.dot(x.flat());
  ev.total = ev.invest;
  for (size_t w = 0; w < inst.scenarios.size(); ++w) {
    const Scenario& sc = inst.scenarios[w];
    ContingencySet jfull = ctx.full_contingency_set(sc.hours);
    OracleResult r = oracle(ctx, x, sc, static_cast<int>(w), jfull, cfg);
    double wt = sc.weight;
    ev.total += wt * (r.theta + r.sigma_c);
    ev.operating += wt * r.costs.generation;
    ev.shed_penalty += wt * r.costs.shed_penalty;
    ev.violation_penalty += wt * (r.costs.violation_penalty + r.sigma_c);
    ev.shed_gwh += wt * r.costs.shed_mwh / 1000.0;
    ev.violation_gwh += wt * r.costs.violation_mwh / 1000.0;
  }
  return ev;
}

}  // namespace canopi
