#include "rav/scenario_io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace rav {

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

namespace {

std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

std::vector<double> parse_numbers(const std::string& s, std::size_t line) {
  std::vector<double> out;
  std::istringstream is(s);
  std::string tok;
  while (is >> tok) {
    try {
      std::size_t used = 0;
      const double v = std::stod(tok, &used);
      if (used != tok.size()) throw std::invalid_argument(tok);
      out.push_back(v);
    } catch (const std::exception&) {
      throw ParseError("expected a number, got '" + tok + "'", line);
    }
  }
  return out;
}

double parse_one_number(const std::string& s, std::size_t line) {
  const auto v = parse_numbers(s, line);
  if (v.size() != 1) throw ParseError("expected exactly one number", line);
  return v[0];
}

bool parse_bool(const std::string& s, std::size_t line) {
  if (s == "true" || s == "1") return true;
  if (s == "false" || s == "0") return false;
  throw ParseError("expected true/false, got '" + s + "'", line);
}

}  // namespace

Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open scenario file '" + path + "'", 0);

  Scenario sc;
  {
    // Scenario name defaults to the file stem.
    std::size_t slash = path.find_last_of("/\\");
    std::string base = slash == std::string::npos ? path : path.substr(slash + 1);
    std::size_t dot = base.find_last_of('.');
    sc.name = dot == std::string::npos ? base : base.substr(0, dot);
  }

  ScenarioParams& p = sc.params;
  p.obstacles.clear();
  std::vector<double> sigma_entries;
  bool sigma_auto = false;
  bool have_sigma_comm = false;

  // Track which keys appeared so defaults can be reported.
  bool seen_gamma4 = false, seen_d0 = false, seen_bounds = false, seen_schedule = false;
  bool seen_target = false, seen_gains = false, seen_comm = false, seen_fast = false;

  std::string section;
  std::string linebuf;
  std::size_t lineno = 0;
  while (std::getline(in, linebuf)) {
    ++lineno;
    std::string line = trim(linebuf);
    if (line.empty() || line[0] == '#') continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ParseError("malformed section header", lineno);
      section = line.substr(1, line.size() - 2);
      if (section != "agents" && section != "obstacles" && section != "target" &&
          section != "gains" && section != "comm" && section != "fast" &&
          section != "bounds" && section != "schedule")
        throw ParseError("unknown section [" + section + "]", lineno);
      if (section == "target") seen_target = true;
      if (section == "gains") seen_gains = true;
      if (section == "comm") seen_comm = true;
      if (section == "fast") seen_fast = true;
      if (section == "bounds") seen_bounds = true;
      if (section == "schedule") seen_schedule = true;
      continue;
    }
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos) throw ParseError("expected key = value", lineno);
    const std::string key = trim(line.substr(0, eq));
    const std::string val = trim(line.substr(eq + 1));
    if (section.empty()) throw ParseError("key outside any section", lineno);

    if (section == "agents") {
      if (key != "agent") throw ParseError("unknown key '" + key + "' in [agents]", lineno);
      const auto xs = parse_numbers(val, lineno);
      if (xs.empty()) throw ParseError("agent needs state components", lineno);
      sc.initial_states.push_back(Vec(xs));
    } else if (section == "obstacles") {
      if (key != "obstacle") throw ParseError("unknown key '" + key + "' in [obstacles]", lineno);
      const auto xs = parse_numbers(val, lineno);
      if (xs.size() < 2) throw ParseError("obstacle needs center components and radius", lineno);
      Obstacle o;
      o.center = Vec(std::vector<double>(xs.begin(), xs.end() - 1));
      o.radius = xs.back();
      p.obstacles.push_back(o);
    } else if (section == "target") {
      if (key == "sigma")
        sigma_entries = parse_numbers(val, lineno);
      else if (key == "epsilon")
        p.epsilon = parse_one_number(val, lineno);
      else
        throw ParseError("unknown key '" + key + "' in [target]", lineno);
    } else if (section == "gains") {
      if (key == "gamma1")
        p.gamma1 = parse_one_number(val, lineno);
      else if (key == "gamma2")
        p.gamma2 = parse_one_number(val, lineno);
      else if (key == "gamma3")
        p.gamma3 = parse_one_number(val, lineno);
      else if (key == "gamma4") {
        p.gamma4 = parse_one_number(val, lineno);
        seen_gamma4 = true;
      } else if (key == "chi")
        p.chi = parse_one_number(val, lineno);
      else
        throw ParseError("unknown key '" + key + "' in [gains]", lineno);
    } else if (section == "comm") {
      if (key == "d_c")
        p.comm.d_c = parse_one_number(val, lineno);
      else if (key == "eps_c")
        p.comm.eps_c = parse_one_number(val, lineno);
      else if (key == "sigma") {
        if (val == "auto") {
          sigma_auto = true;
        } else {
          p.comm.sigma = parse_one_number(val, lineno);
        }
        have_sigma_comm = true;
      } else if (key == "d0") {
        p.comm.d0 = parse_one_number(val, lineno);
        seen_d0 = true;
      } else
        throw ParseError("unknown key '" + key + "' in [comm]", lineno);
    } else if (section == "fast") {
      if (key == "tau")
        p.tau = parse_one_number(val, lineno);
      else if (key == "xi")
        p.xi = parse_one_number(val, lineno);
      else
        throw ParseError("unknown key '" + key + "' in [fast]", lineno);
    } else if (section == "bounds") {
      if (key == "c")
        p.c = parse_one_number(val, lineno);
      else
        throw ParseError("unknown key '" + key + "' in [bounds]", lineno);
    } else if (section == "schedule") {
      if (key == "dt_slow")
        sc.schedule.dt_slow = parse_one_number(val, lineno);
      else if (key == "substeps")
        sc.schedule.fast_substeps = static_cast<std::size_t>(parse_one_number(val, lineno));
      else if (key == "horizon")
        sc.schedule.horizon = parse_one_number(val, lineno);
      else if (key == "warm_start")
        sc.schedule.warm_start = parse_bool(val, lineno);
      else
        throw ParseError("unknown key '" + key + "' in [schedule]", lineno);
    }
  }

  if (sc.initial_states.empty()) throw ParseError("[agents] section is required", 0);
  p.num_agents = sc.initial_states.size();
  p.n = sc.initial_states[0].size();
  p.m = p.n;  // the shipped dynamics are single integrators
  for (const Vec& x : sc.initial_states)
    if (x.size() != p.n) throw ParseError("inconsistent agent state dimensions", 0);

  if (!seen_target || sigma_entries.empty())
    throw ParseError("[target] sigma is required", 0);
  if (sigma_entries.size() != p.n * p.n)
    throw ParseError("[target] sigma needs n*n row-major entries", 0);
  p.sigma = Mat(p.n, p.n);
  for (std::size_t i = 0; i < p.n; ++i)
    for (std::size_t j = 0; j < p.n; ++j) p.sigma(i, j) = sigma_entries[i * p.n + j];

  if (!seen_gains) sc.notices.push_back("[gains] missing; defaults used");
  if (!seen_comm) sc.notices.push_back("[comm] missing; defaults used");
  if (!seen_fast) sc.notices.push_back("[fast] missing; tau=0.002 xi=0.5 used");
  if (!seen_gamma4) sc.notices.push_back("gamma4 defaulted to 1");
  if (!seen_d0) sc.notices.push_back("d0 defaulted to 0.1");
  if (!seen_bounds) sc.notices.push_back("c defaulted to 2");
  if (!seen_schedule)
    sc.notices.push_back("[schedule] missing; dt_slow=0.01 substeps=20 horizon=300");
  if (have_sigma_comm && sigma_auto) {
    const double span = p.comm.d_c - p.comm.eps_c;
    p.comm.sigma = span * span * span * span / std::log(2.0);
  } else if (!have_sigma_comm) {
    const double span = p.comm.d_c - p.comm.eps_c;
    p.comm.sigma = span * span * span * span / std::log(2.0);
    sc.notices.push_back("comm sigma defaulted to (d_c-eps_c)^4/ln 2");
  }

  try {
    p.validate();
    sc.schedule.validate();
  } catch (const std::exception& e) {
    throw ParseError(e.what(), 0);
  }
  return sc;
}

Scenario builtin_paper_sec6() {
  Scenario sc;
  sc.name = "paper_sec6";
  sc.initial_states = {Vec{-2.1, -0.75}, Vec{-2.1, 0.75}, Vec{-2.0, 0.0}, Vec{-1.9, -0.5},
                       Vec{-1.9, 0.5}};
  ScenarioParams& p = sc.params;
  p.num_agents = 5;
  p.n = 2;
  p.m = 2;
  p.sigma = Mat(2, 2);
  p.sigma(0, 0) = 2.0;
  p.sigma(1, 1) = 0.25;
  p.epsilon = 0.5;
  p.gamma1 = 2.0;
  p.gamma2 = 2.0;
  p.gamma3 = 0.01;
  p.gamma4 = 1.0;
  p.chi = 0.1;
  p.comm.d_c = 0.9;
  p.comm.eps_c = 0.1;
  {
    const double span = p.comm.d_c - p.comm.eps_c;
    p.comm.sigma = span * span * span * span / std::log(2.0);
  }
  p.comm.d0 = 0.1;
  p.tau = 0.002;
  p.xi = 0.5;
  p.c = 2.0;
  const double obs[7][3] = {{-1.5, 0.6, 0.16}, {-1.1, 0.72, 0.22}, {-0.65, 1.0, 0.2},
                            {-1.25, 0.05, 0.1}, {-1.5, -0.6, 0.16}, {-1.1, -0.72, 0.22},
                            {-0.65, -1.0, 0.2}};
  for (const auto& o : obs) p.obstacles.push_back({Vec{o[0], o[1]}, o[2]});
  // The stiff fast flow needs dt_fast at or below tau/100 here (the task
  // row of Psi has norm ~8.4 at t0); horizon 600 leaves margin past the
  // observed entry time near t = 540.
  sc.schedule.dt_slow = 0.01;
  sc.schedule.fast_substeps = 500;
  sc.schedule.horizon = 600.0;
  sc.schedule.warm_start = true;
  return sc;
}

void write_scenario(const Scenario& sc, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot write scenario file '" + path + "'", 0);
  const ScenarioParams& p = sc.params;
  out << "# scenario " << sc.name << "\n";
  out << "[agents]\n";
  for (const Vec& x : sc.initial_states) {
    out << "agent =";
    for (std::size_t k = 0; k < x.size(); ++k) out << " " << format_double(x[k]);
    out << "\n";
  }
  out << "[obstacles]\n";
  for (const Obstacle& o : p.obstacles) {
    out << "obstacle =";
    for (std::size_t k = 0; k < o.center.size(); ++k) out << " " << format_double(o.center[k]);
    out << " " << format_double(o.radius) << "\n";
  }
  out << "[target]\n";
  out << "sigma =";
  for (std::size_t i = 0; i < p.sigma.rows(); ++i)
    for (std::size_t j = 0; j < p.sigma.cols(); ++j) out << " " << format_double(p.sigma(i, j));
  out << "\n";
  out << "epsilon = " << format_double(p.epsilon) << "\n";
  out << "[gains]\n";
  out << "gamma1 = " << format_double(p.gamma1) << "\n";
  out << "gamma2 = " << format_double(p.gamma2) << "\n";
  out << "gamma3 = " << format_double(p.gamma3) << "\n";
  out << "gamma4 = " << format_double(p.gamma4) << "\n";
  out << "chi = " << format_double(p.chi) << "\n";
  out << "[comm]\n";
  out << "d_c = " << format_double(p.comm.d_c) << "\n";
  out << "eps_c = " << format_double(p.comm.eps_c) << "\n";
  out << "sigma = " << format_double(p.comm.sigma) << "\n";
  out << "d0 = " << format_double(p.comm.d0) << "\n";
  out << "[fast]\n";
  out << "tau = " << format_double(p.tau) << "\n";
  out << "xi = " << format_double(p.xi) << "\n";
  out << "[bounds]\n";
  out << "c = " << format_double(p.c) << "\n";
  out << "[schedule]\n";
  out << "dt_slow = " << format_double(sc.schedule.dt_slow) << "\n";
  out << "substeps = " << sc.schedule.fast_substeps << "\n";
  out << "horizon = " << format_double(sc.schedule.horizon) << "\n";
  out << "warm_start = " << (sc.schedule.warm_start ? "true" : "false") << "\n";
}

void write_trajectory(const std::vector<TrajectoryRow>& rows, std::size_t n, std::size_t m,
                      const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot write trajectory file '" + path + "'", 0);
  out << "t,agent_id";
  for (std::size_t k = 0; k < n; ++k) out << ",x" << k + 1;
  for (std::size_t k = 0; k < m; ++k) out << ",u" << k + 1;
  out << "\n";
  for (const TrajectoryRow& r : rows) {
    out << format_double(r.t) << "," << r.agent;
    for (std::size_t k = 0; k < r.x.size(); ++k) out << "," << format_double(r.x[k]);
    for (std::size_t k = 0; k < r.u.size(); ++k) out << "," << format_double(r.u[k]);
    out << "\n";
  }
}

namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
  return out;
}

}  // namespace

std::vector<TrajectoryRow> read_trajectory(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open trajectory file '" + path + "'", 0);
  std::string line;
  if (!std::getline(in, line)) throw ParseError("empty trajectory file", 0);
  const auto header = split_csv(line);
  std::size_t n = 0, m = 0;
  for (const std::string& h : header) {
    if (h.size() > 1 && h[0] == 'x') ++n;
    if (h.size() > 1 && h[0] == 'u') ++m;
  }
  std::vector<TrajectoryRow> rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    const auto f = split_csv(line);
    if (f.size() != 2 + n + m) throw ParseError("bad trajectory row", lineno);
    TrajectoryRow r;
    r.t = std::stod(f[0]);
    r.agent = std::stoi(f[1]);
    r.x = Vec(n);
    r.u = Vec(m);
    for (std::size_t k = 0; k < n; ++k) r.x[k] = std::stod(f[2 + k]);
    for (std::size_t k = 0; k < m; ++k) r.u[k] = std::stod(f[2 + n + k]);
    rows.push_back(std::move(r));
  }
  return rows;
}

void write_metrics(const std::vector<MetricsRow>& rows, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot write metrics file '" + path + "'", 0);
  out << "t,lambda2_binary,min_pair_dist,min_obs_clearance,V,max_target_residual,max_W\n";
  for (const MetricsRow& r : rows) {
    out << format_double(r.t) << "," << format_double(r.lambda2_binary) << ","
        << format_double(r.min_pair_dist) << "," << format_double(r.min_obs_clearance) << ","
        << format_double(r.v_total) << "," << format_double(r.max_target_residual) << ","
        << format_double(r.max_w) << "\n";
  }
}

std::vector<MetricsRow> read_metrics(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open metrics file '" + path + "'", 0);
  std::string line;
  if (!std::getline(in, line)) throw ParseError("empty metrics file", 0);
  std::vector<MetricsRow> rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    const auto f = split_csv(line);
    if (f.size() != 7) throw ParseError("bad metrics row", lineno);
    MetricsRow r;
    r.t = std::stod(f[0]);
    r.lambda2_binary = std::stod(f[1]);
    r.min_pair_dist = std::stod(f[2]);
    r.min_obs_clearance = std::stod(f[3]);
    r.v_total = std::stod(f[4]);
    r.max_target_residual = std::stod(f[5]);
    r.max_w = std::stod(f[6]);
    rows.push_back(r);
  }
  return rows;
}

std::string write_run_summary(const RunResult& result, const ScenarioParams& params,
                              const std::string& path) {
  std::ostringstream os;
  const char* status = "ok";
  switch (result.status) {
    case RunStatus::ok: status = "ok"; break;
    case RunStatus::violation: status = "violation"; break;
    case RunStatus::refused: status = "refused"; break;
    case RunStatus::infeasible: status = "infeasible"; break;
    case RunStatus::nonfinite: status = "nonfinite"; break;
  }
  os << "status: " << status << "\n";
  if (!result.message.empty()) os << "detail: " << result.message << "\n";
  for (const std::string& n : result.notes) os << "note: " << n << "\n";
  if (!result.metrics.empty()) {
    double min_pair = 1e300, min_clear = 1e300, min_l2 = 1e300;
    for (const MetricsRow& r : result.metrics) {
      min_pair = std::min(min_pair, r.min_pair_dist);
      min_clear = std::min(min_clear, r.min_obs_clearance);
      min_l2 = std::min(min_l2, r.lambda2_binary);
    }
    const MetricsRow& last = result.metrics.back();
    os << "final time: " << format_double(last.t) << "\n";
    os << "final max target residual: " << format_double(last.max_target_residual) << "\n";
    os << "min pair distance over run: " << format_double(min_pair) << "\n";
    os << "min obstacle clearance over run: " << format_double(min_clear) << "\n";
    os << "min binary lambda2 over run: " << format_double(min_l2) << "\n";
    os << "violations: " << (result.any_violation ? "yes" : "no") << "\n";
  }
  // Final per-agent residuals from the trajectory tail.
  if (!result.trajectory.empty()) {
    const double t_end = result.trajectory.back().t;
    os << "final target residuals:";
    for (auto it = result.trajectory.rbegin();
         it != result.trajectory.rend() && it->t == t_end; ++it) {
      const double resid = dot(it->x, params.sigma.matvec(it->x)) - 1.0;
      os << " agent" << it->agent << "=" << format_double(resid);
    }
    os << "\n";
  }
  const std::string text = os.str();
  if (!path.empty()) {
    std::ofstream out(path);
    if (!out) throw ParseError("cannot write summary file '" + path + "'", 0);
    out << text;
  }
  return text;
}

}  // namespace rav
