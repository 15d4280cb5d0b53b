#include "mlcav/scenario.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <mutex>
#include <numbers>
#include <set>
#include <sstream>
#include <thread>

#include "mlcav/potential.hpp"
#include "mlcav/spectra.hpp"

namespace mlcav {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::string join(const std::vector<std::string>& v) {
  std::string s;
  for (const auto& x : v) s += (s.empty() ? "" : "; ") + x;
  return s;
}

// Typed reads that record problems instead of throwing.
class Reader {
 public:
  Reader(const json& j, std::string path, std::vector<std::string>& errs) : j_(j), path_(std::move(path)), errs_(errs) {
    if (!j_.is_object()) errs_.push_back(where("") + "expected an object");
  }
  ~Reader() {
    if (!j_.is_object()) return;
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!seen_.count(it.key())) errs_.push_back(where(it.key()) + "unknown key");
  }

  const json* find(const std::string& k) {
    seen_.insert(k);
    if (!j_.is_object() || !j_.contains(k)) return nullptr;
    return &j_.at(k);
  }
  void fail(const std::string& k, const std::string& msg) { errs_.push_back(where(k) + msg); }
  std::string where(const std::string& k) const {
    const std::string p = path_.empty() ? k : (k.empty() ? path_ : path_ + "." + k);
    return p.empty() ? "" : p + ": ";
  }

  void number(const std::string& k, double& out) {
    if (auto v = find(k)) {
      if (v->is_number())
        out = v->get<double>();
      else
        fail(k, "expected a number");
    }
  }
  template <class I>
  void integer(const std::string& k, I& out) {
    if (auto v = find(k)) {
      if (v->is_number_integer())
        out = v->get<I>();
      else
        fail(k, "expected an integer");
    }
  }
  void boolean(const std::string& k, bool& out) {
    if (auto v = find(k)) {
      if (v->is_boolean())
        out = v->get<bool>();
      else
        fail(k, "expected true or false");
    }
  }
  void string(const std::string& k, std::string& out) {
    if (auto v = find(k)) {
      if (v->is_string())
        out = v->get<std::string>();
      else
        fail(k, "expected a string");
    }
  }
  void axis(const std::string& k, Axis& out) {
    if (auto v = find(k)) {
      if (!v->is_string()) return fail(k, "expected an axis name");
      try {
        out = axis_from_string(v->get<std::string>());
      } catch (const std::exception& e) {
        fail(k, e.what());
      }
    }
  }
  // A scalar is accepted as a one-element list.
  template <class T>
  void list(const std::string& k, std::vector<T>& out) {
    const json* v = find(k);
    if (!v) return;
    json arr = v->is_array() ? *v : json::array({*v});
    std::vector<T> tmp;
    for (const auto& x : arr) {
      bool ok;
      if constexpr (std::is_same_v<T, std::string>)
        ok = x.is_string();
      else if constexpr (std::is_integral_v<T>)
        ok = x.is_number_integer();
      else
        ok = x.is_number();
      if (!ok) return fail(k, "list element has the wrong type");
      tmp.push_back(x.get<T>());
    }
    out = std::move(tmp);
  }
  void amplitudes(const std::string& k, std::vector<cd>& out) {
    const json* v = find(k);
    if (!v) return;
    if (!v->is_array()) return fail(k, "expected a list of amplitudes");
    std::vector<cd> tmp;
    for (const auto& x : *v) {
      if (x.is_number())
        tmp.emplace_back(x.get<double>(), 0.0);
      else if (x.is_array() && x.size() == 2 && x[0].is_number() && x[1].is_number())
        tmp.emplace_back(x[0].get<double>(), x[1].get<double>());
      else
        return fail(k, "amplitude must be a number or [re, im]");
    }
    out = std::move(tmp);
  }

 private:
  const json& j_;
  std::string path_;
  std::vector<std::string>& errs_;
  std::set<std::string> seen_;
};

const json kEmpty = json::object();

const json& sub(Reader& r, const std::string& k) {
  const json* v = r.find(k);
  return v ? *v : kEmpty;
}

}  // namespace

ConfigError::ConfigError(std::vector<std::string> e) : std::runtime_error(join(e)), errors(std::move(e)) {}

ScenarioConfig config_from_json(const json& j) {
  ScenarioConfig c;
  std::vector<std::string> errs;
  {
    Reader r(j, "", errs);
    {
      Reader l(sub(r, "level"), "level", errs);
      l.number("Fg", c.Fg);
      l.number("Fe", c.Fe);
    }
    r.axis("axis", c.axis);
    r.list("N", c.N);
    r.string("method", c.method);
    {
      Reader s(sub(r, "initial"), "initial", errs);
      s.axis("axis", c.initial.axis);
      s.string("label", c.initial.label);
      s.amplitudes("amplitudes", c.initial.amplitudes);
    }
    {
      Reader s(sub(r, "drive"), "drive", errs);
      s.string("polarization", c.drive.polarization);
      s.list("theta0", c.drive.theta0);
      s.number("phase", c.drive.phase);
    }
    {
      Reader s(sub(r, "physics"), "physics", errs);
      s.number("Gamma", c.physics.Gamma);
      s.number("chi", c.physics.chi);
      s.number("delta_g", c.physics.delta_g);
      s.number("delta_e", c.physics.delta_e);
      s.list("jumps", c.physics.jumps);
      s.list("xi", c.physics.xi);
      s.number("lambda_L", c.physics.lambda_L);
      s.number("lambda_c", c.physics.lambda_c);
      s.integer("n_sites", c.physics.n_sites);
    }
    {
      Reader s(sub(r, "integration"), "integration", errs);
      s.number("t_max", c.integration.t_max);
      s.number("stride", c.integration.stride);
      s.number("rtol", c.integration.rtol);
      s.number("atol", c.integration.atol);
    }
    {
      Reader s(sub(r, "twa"), "twa", errs);
      s.integer("n_traj", c.twa.n_traj);
      s.integer("seed", c.twa.seed);
      s.integer("threads", c.twa.threads);
      s.integer("histogram_bins", c.twa.histogram_bins);
    }
    {
      Reader s(sub(r, "ed"), "ed", errs);
      s.integer("cap", c.ed.cap);
      s.boolean("steady_state", c.ed.steady_state);
      s.list("distributions", c.ed.distributions);
    }
    {
      Reader s(sub(r, "spectrum"), "spectrum", errs);
      s.boolean("split_NA", c.spectrum.split_NA);
      s.boolean("split_M", c.spectrum.split_M);
      s.number("dark_tol", c.spectrum.dark_tol);
      s.integer("cap", c.spectrum.cap);
    }
    {
      Reader s(sub(r, "potential"), "potential", errs);
      s.number("lo", c.potential.lo);
      s.number("hi", c.potential.hi);
      s.number("step", c.potential.step);
      s.string("orthogonal", c.potential.orthogonal);
      s.boolean("dark_search", c.potential.dark_search);
      s.integer("n_starts", c.potential.n_starts);
      s.integer("seed", c.potential.seed);
    }
    {
      Reader s(sub(r, "outputs"), "outputs", errs);
      s.string("dir", c.outputs.dir);
      s.string("prefix", c.outputs.prefix);
    }
    if (const json* g = r.find("grid")) {
      if (!g->is_object())
        r.fail("grid", "expected an object of key -> list");
      else {
        for (auto it = g->begin(); it != g->end(); ++it)
          if (!it->is_array() || it->empty()) errs.push_back("grid." + it.key() + ": expected a non-empty list");
        c.grid = *g;
      }
    }
    r.integer("sweep_threads", c.sweep_threads);
  }
  if (!errs.empty()) {
    for (auto& e : validate(c)) errs.push_back(std::move(e));
    throw ConfigError(errs);
  }
  return c;
}

json config_to_json(const ScenarioConfig& c) {
  json amps = json::array();
  for (const auto& a : c.initial.amplitudes) amps.push_back({a.real(), a.imag()});
  return {
      {"level", {{"Fg", c.Fg}, {"Fe", c.Fe}}},
      {"axis", to_string(c.axis)},
      {"N", c.N},
      {"method", c.method},
      {"initial", {{"axis", to_string(c.initial.axis)}, {"label", c.initial.label}, {"amplitudes", amps}}},
      {"drive", {{"polarization", c.drive.polarization}, {"theta0", c.drive.theta0}, {"phase", c.drive.phase}}},
      {"physics",
       {{"Gamma", c.physics.Gamma},
        {"chi", c.physics.chi},
        {"delta_g", c.physics.delta_g},
        {"delta_e", c.physics.delta_e},
        {"jumps", c.physics.jumps},
        {"xi", c.physics.xi},
        {"lambda_L", c.physics.lambda_L},
        {"lambda_c", c.physics.lambda_c},
        {"n_sites", c.physics.n_sites}}},
      {"integration",
       {{"t_max", c.integration.t_max},
        {"stride", c.integration.stride},
        {"rtol", c.integration.rtol},
        {"atol", c.integration.atol}}},
      {"twa",
       {{"n_traj", c.twa.n_traj},
        {"seed", c.twa.seed},
        {"threads", c.twa.threads},
        {"histogram_bins", c.twa.histogram_bins}}},
      {"ed", {{"cap", c.ed.cap}, {"steady_state", c.ed.steady_state}, {"distributions", c.ed.distributions}}},
      {"spectrum",
       {{"split_NA", c.spectrum.split_NA},
        {"split_M", c.spectrum.split_M},
        {"dark_tol", c.spectrum.dark_tol},
        {"cap", c.spectrum.cap}}},
      {"potential",
       {{"lo", c.potential.lo},
        {"hi", c.potential.hi},
        {"step", c.potential.step},
        {"orthogonal", c.potential.orthogonal},
        {"dark_search", c.potential.dark_search},
        {"n_starts", c.potential.n_starts},
        {"seed", c.potential.seed}}},
      {"outputs", {{"dir", c.outputs.dir}, {"prefix", c.outputs.prefix}}},
      {"grid", c.grid},
      {"sweep_threads", c.sweep_threads},
  };
}

ScenarioConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError({"cannot open config file " + path});
  json j;
  try {
    j = json::parse(in, nullptr, true, true);
  } catch (const json::parse_error& e) {
    throw ConfigError({std::string("config is not valid JSON: ") + e.what()});
  }
  return config_from_json(j);
}

namespace {

bool is_two_level(const LevelStructure& lv) { return lv.Fg.twice == 0 && lv.Fe.twice == 0; }

bool valid_polarization(const std::string& s) {
  try {
    Polarization::from_name(s);
    return true;
  } catch (const std::exception&) {
    return false;
  }
}

int level_index(const LevelStructure& lv, const std::string& label) {
  for (int a = 0; a < lv.ell(); ++a)
    if (lv.label(a) == label) return a;
  return -1;
}

bool homogeneous(const std::vector<double>& xi) {
  return std::all_of(xi.begin(), xi.end(), [](double x) { return x == 1.0; });
}

}  // namespace

std::vector<std::string> validate(const ScenarioConfig& c) {
  std::vector<std::string> e;
  std::optional<LevelStructure> lv;
  try {
    lv = c.level();
  } catch (const std::exception& ex) {
    e.push_back(std::string("level: ") + ex.what());
  }
  if (c.N.empty()) e.push_back("N: at least one atom number required");
  for (int n : c.N)
    if (n < 1) e.push_back("N: values must be >= 1");
  static const std::set<std::string> methods{"ed", "mf", "twa", "cumulant", "theta-ode"};
  if (!methods.count(c.method)) e.push_back("method: must be one of ed, mf, twa, cumulant, theta-ode");
  if (lv) {
    if (c.initial.amplitudes.empty()) {
      const int a = level_index(*lv, c.initial.label);
      if (a < 0) e.push_back("initial.label: no level named " + c.initial.label);
    } else {
      if (static_cast<int>(c.initial.amplitudes.size()) != lv->ell())
        e.push_back("initial.amplitudes: expected " + std::to_string(lv->ell()) + " entries");
      double nrm = 0;
      for (const auto& a : c.initial.amplitudes) nrm += std::norm(a);
      if (std::abs(nrm - 1.0) > 1e-8) e.push_back("initial.amplitudes: must be normalized");
    }
    if (lv->Fg.twice + lv->Fe.twice == 0 && lv->Fg.twice != lv->Fe.twice)
      e.push_back("level: unsupported structure");
  }
  if (!is_two_level(lv.value_or(LevelStructure(half(1), half(3))))) {
    if (!valid_polarization(c.drive.polarization)) e.push_back("drive.polarization: unknown " + c.drive.polarization);
    if (c.physics.jumps.empty()) e.push_back("physics.jumps: at least one cavity mode required");
    for (const auto& j : c.physics.jumps)
      if (!valid_polarization(j)) e.push_back("physics.jumps: unknown polarization " + j);
    if (!c.potential.orthogonal.empty() && !valid_polarization(c.potential.orthogonal))
      e.push_back("potential.orthogonal: unknown polarization " + c.potential.orthogonal);
  }
  if (c.drive.theta0.empty()) e.push_back("drive.theta0: at least one value required");
  if (!(c.physics.Gamma > 0)) e.push_back("physics.Gamma: must be positive");
  if (!(c.integration.t_max > 0)) e.push_back("integration.t_max: must be positive");
  if (!(c.integration.stride > 0)) e.push_back("integration.stride: must be positive");
  if (!(c.integration.rtol > 0) || !(c.integration.atol > 0)) e.push_back("integration: tolerances must be positive");
  if (c.twa.n_traj < 1) e.push_back("twa.n_traj: must be >= 1");
  if (c.twa.histogram_bins < 0) e.push_back("twa.histogram_bins: must be >= 0");
  if (c.physics.n_sites < 0) e.push_back("physics.n_sites: must be >= 0");
  if (c.physics.n_sites > 0 && !(c.physics.lambda_c > 0)) e.push_back("physics.lambda_c: must be positive");
  if (c.physics.n_sites > 0 && !c.physics.xi.empty())
    e.push_back("physics: give either xi or lattice parameters, not both");
  const auto xi = c.physics.n_sites > 0 || !c.physics.xi.empty() ? site_weights(c) : std::vector<double>{1.0};
  const bool inhom = !homogeneous(xi);
  if (c.method == "ed" && inhom) e.push_back("method ed: site weights must all be 1");
  if (c.method == "cumulant" && xi.size() > 1) e.push_back("method cumulant: site groups are not supported");
  if (c.method == "ed" && c.ed.steady_state && (c.physics.delta_g != 0 || c.physics.delta_e != 0))
    e.push_back("ed.steady_state: requires delta_g = delta_e = 0");
  if (c.method == "theta-ode" && (c.physics.delta_g != 0 || c.physics.delta_e != 0 || c.physics.chi != 0))
    e.push_back("method theta-ode: requires chi = delta_g = delta_e = 0");
  for (const auto& d : c.ed.distributions) {
    if (d == "excitation") continue;
    if (d.rfind("imbalance:", 0) == 0 && lv) {
      const auto rest = d.substr(10);
      const auto p = rest.find(':');
      if (p == std::string::npos || level_index(*lv, rest.substr(0, p)) < 0 ||
          level_index(*lv, rest.substr(p + 1)) < 0)
        e.push_back("ed.distributions: bad imbalance spec " + d);
      continue;
    }
    e.push_back("ed.distributions: unknown " + d);
  }
  if (!(c.potential.step > 0) || !(c.potential.hi > c.potential.lo)) e.push_back("potential: bad theta window");
  if (c.potential.n_starts < 1) e.push_back("potential.n_starts: must be >= 1");
  if (c.sweep_threads < 1) e.push_back("sweep_threads: must be >= 1");
  if (c.outputs.prefix.empty()) e.push_back("outputs.prefix: must not be empty");
  return e;
}

std::string config_hash(const ScenarioConfig& c) {
  // Thread counts do not change results.
  json j = config_to_json(c);
  j.erase("sweep_threads");
  j["twa"].erase("threads");
  const std::string s = j.dump();
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

json conventions() {
  return {{"phase", "Condon-Shortley"},
          {"ordering", "ground levels then excited, m ascending"},
          {"time", "N Gamma t"},
          {"theta0", "units of pi"},
          {"rates", "units of Gamma"}};
}

std::vector<double> site_weights(const ScenarioConfig& c) {
  if (!c.physics.xi.empty()) return c.physics.xi;
  if (c.physics.n_sites > 0) {
    std::vector<double> xi(c.physics.n_sites);
    const double r = c.physics.lambda_L / c.physics.lambda_c;
    for (int i = 0; i < c.physics.n_sites; ++i) xi[i] = std::cos(std::numbers::pi * r * i);
    return xi;
  }
  return {1.0};
}

CollectiveOperatorSpec make_polarization_op(const ScenarioConfig& c, const std::string& name) {
  const LevelStructure lv = c.level();
  if (is_two_level(lv)) return two_level_raising();
  return dipole_operator(lv, Polarization::from_name(name), c.axis);
}

GeneratorSpec make_generator(const ScenarioConfig& c) {
  GeneratorSpec g;
  g.level = c.level();
  g.axis = is_two_level(g.level) ? Axis::V : c.axis;
  g.Gamma = c.physics.Gamma;
  g.chi = c.physics.chi * c.physics.Gamma;
  if (is_two_level(g.level))
    g.jumps = {two_level_raising()};
  else
    for (const auto& j : c.physics.jumps) g.jumps.push_back(make_polarization_op(c, j));
  if (c.physics.delta_g != 0 || c.physics.delta_e != 0)
    g.h = c.physics.Gamma * zeeman_matrix(g.level, c.physics.delta_g, c.physics.delta_e, g.axis);
  return g;
}

CollectiveOperatorSpec make_drive(const ScenarioConfig& c) { return make_polarization_op(c, c.drive.polarization); }

VecC initial_state(const ScenarioConfig& c) {
  const LevelStructure lv = c.level();
  VecC p = VecC::Zero(lv.ell());
  if (c.initial.amplitudes.empty())
    p(level_index(lv, c.initial.label)) = 1.0;
  else
    for (int a = 0; a < lv.ell(); ++a) p(a) = c.initial.amplitudes[a];
  const Axis to = is_two_level(lv) ? Axis::V : c.axis;
  return is_two_level(lv) ? p : VecC(basis_change(lv, c.initial.axis, to) * p);
}

std::vector<double> time_grid(const ScenarioConfig& c) {
  const long n = std::lround(std::ceil(c.integration.t_max / c.integration.stride - 1e-9));
  std::vector<double> t;
  for (long i = 0; i <= n; ++i) t.push_back(std::min(c.integration.t_max, i * c.integration.stride));
  return t;
}

namespace {

SeriesRecord from_ed(const std::vector<EDObservables>& obs) {
  SeriesRecord r;
  r.method = "ed";
  for (const auto& o : obs) {
    r.t.push_back(o.t_scaled);
    r.n_e.push_back(o.n_e);
    r.pops.push_back(o.pops);
    for (const auto& [k, v] : o.I) r.I[k].push_back(v);
    r.trace.push_back(o.trace);
    r.min_eig.push_back(o.min_eig);
  }
  return r;
}

std::map<double, double> to_double_map(const std::map<int, double>& m) {
  std::map<double, double> d;
  for (const auto& [k, v] : m) d[k] = v;
  return d;
}

}  // namespace

RunOutput simulate(const ScenarioConfig& c, int N, double theta0) {
  const auto errs = validate(c);
  if (!errs.empty()) throw ConfigError(errs);
  const GeneratorSpec gen = make_generator(c);
  const auto drive = make_drive(c);
  const VecC psi0 = initial_state(c);
  const VecC psi = pulse_unitary(drive, theta0 * std::numbers::pi, c.drive.phase) * psi0;
  const auto tg = time_grid(c);
  const auto xi = site_weights(c);
  OdeOptions ode;
  ode.rtol = c.integration.rtol;
  ode.atol = c.integration.atol;
  RunOutput out;
  if (c.method == "ed") {
    EDOptions eo;
    eo.cap = c.ed.cap;
    EDState s = ed_product_state(gen, N, psi, eo);
    if (c.ed.steady_state) {
      s = steady_state(s, gen);
      EDObservables o = observables(s, gen);
      o.t_scaled = std::numeric_limits<double>::infinity();
      out.series = from_ed({o});
    } else {
      std::vector<EDObservables> obs;
      evolve(s, gen, tg, [&](const EDObservables& o) { obs.push_back(o); }, ode);
      out.series = from_ed(obs);
    }
    const auto& lv = gen.level;
    for (const auto& d : c.ed.distributions) {
      if (d == "excitation") {
        out.distributions.emplace_back("excitation", to_double_map(excitation_distribution(s)));
      } else {
        const auto rest = d.substr(10);
        const auto p = rest.find(':');
        const int a = level_index(lv, rest.substr(0, p)), b = level_index(lv, rest.substr(p + 1));
        auto safe = [](std::string x) {
          std::replace(x.begin(), x.end(), '/', 'h');  // g-1/2 -> g-1h2
          return x;
        };
        out.distributions.emplace_back("imbalance_" + safe(rest.substr(0, p)) + "_" + safe(rest.substr(p + 1)),
                                       to_double_map(imbalance_distribution(s, a, b)));
      }
    }
  } else if (c.method == "mf") {
    OneBodyState s = OneBodyState::product(psi, N, xi);
    out.series = mf_evolve(s, gen, tg, ode);
  } else if (c.method == "twa") {
    TWAOptions to;
    to.n_traj = c.twa.n_traj;
    to.seed = c.twa.seed;
    to.threads = c.twa.threads;
    to.ode.rtol = std::max(c.integration.rtol, 1e-7);
    to.ode.atol = std::max(c.integration.atol, 1e-9);
    out.series = twa_ensemble(psi, N, gen, tg, to, xi);
    if (c.twa.histogram_bins > 0) {
      const int nb = c.twa.histogram_bins;
      std::map<double, double> h;
      for (int b = 0; b < nb; ++b) h[(b + 0.5) / nb] = 0;
      for (double v : out.series.final_ne) {
        const int b = static_cast<int>(std::floor(v * nb));
        if (b < 0 || b >= nb) continue;
        h[(b + 0.5) / nb] += 1;
      }
      for (auto& [k, v] : h) v /= static_cast<double>(out.series.final_ne.size());
      out.distributions.emplace_back("final_ne", h);
    }
  } else if (c.method == "cumulant") {
    CumulantState s = CumulantState::product(psi, N);
    out.series = cumulant_evolve(s, gen, tg, ode);
  } else {
    std::vector<double> frac(xi.size(), 1.0 / static_cast<double>(xi.size()));
    const PotentialSpec pot = potential_from_state(psi0, drive).with_sites(xi, frac);
    const ThetaFlow f = theta_flow(pot, theta0 * std::numbers::pi, tg);
    out.series.t = f.t;
    out.series.n_e = f.n_e;
    out.series.method = "theta-ode";
  }
  return out;
}

namespace {

std::string fmt(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  std::ostringstream os;
  os << std::setprecision(12) << v;
  return os.str();
}

std::string manifest_line(const ScenarioConfig& c) {
  return "config_hash=" + config_hash(c) + " version=" + kVersion;
}

std::string cell_name(const ScenarioConfig& c, int N, double theta0) {
  std::ostringstream os;
  os << c.outputs.prefix << "_N" << N << "_theta" << std::setprecision(6) << theta0;
  return os.str();
}

std::ofstream open_out(const fs::path& p) {
  fs::create_directories(p.parent_path());
  std::ofstream os(p);
  if (!os) throw std::runtime_error("cannot write " + p.string());
  return os;
}

json manifest(const ScenarioConfig& c, const std::string& command, const std::vector<std::string>& files,
              double seconds) {
  return {{"command", command},
          {"config_hash", config_hash(c)},
          {"version", kVersion},
          {"conventions", conventions()},
          {"config", config_to_json(c)},
          {"files", files},
          {"wall_clock_s", seconds}};
}

void write_manifest(const ScenarioConfig& c, const json& m, const std::string& command) {
  auto os = open_out(fs::path(c.outputs.dir) / (c.outputs.prefix + "_" + command + "_manifest.json"));
  os << m.dump(2) << "\n";
}

void check(const ScenarioConfig& c) {
  const auto e = validate(c);
  if (!e.empty()) throw ConfigError(e);
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

void write_series_csv(std::ostream& os, const SeriesRecord& r, const LevelStructure& level, const std::string& m) {
  os << "# manifest: " << m << "\n";
  const bool full = !r.pops.empty();
  os << "t_scaled,n_e";
  if (full) {
    for (int a = 0; a < level.ell(); ++a) os << ",pop_" << level.label(a);
    for (const char* k : {"Pi", "Sigma", "L", "R"}) os << ",I_" << k;
    os << ",trace,min_eig";
  }
  os << ",method,n_traj,seed\n";
  for (std::size_t i = 0; i < r.t.size(); ++i) {
    os << fmt(r.t[i]) << "," << fmt(r.n_e[i]);
    if (full) {
      for (double p : r.pops[i]) os << "," << fmt(p);
      for (const char* k : {"Pi", "Sigma", "L", "R"}) {
        auto it = r.I.find(k);
        os << "," << (it == r.I.end() ? std::string("nan") : fmt(it->second[i]));
      }
      os << "," << fmt(r.trace[i]) << "," << fmt(r.min_eig[i]);
    }
    os << "," << r.method << "," << r.n_traj << "," << r.seed << "\n";
  }
}

void write_distribution_csv(std::ostream& os, const std::map<double, double>& d, const std::string& m) {
  os << "# manifest: " << m << "\n";
  os << "value,probability\n";
  for (const auto& [k, v] : d) os << fmt(k) << "," << fmt(v) << "\n";
}

json run(const ScenarioConfig& c) {
  check(c);
  const auto t0 = std::chrono::steady_clock::now();
  std::vector<std::string> files;
  const std::string m = manifest_line(c);
  for (int N : c.N)
    for (double th : c.drive.theta0) {
      const RunOutput out = simulate(c, N, th);
      const std::string base = cell_name(c, N, th);
      const fs::path p = fs::path(c.outputs.dir) / (base + ".csv");
      {
        auto os = open_out(p);
        write_series_csv(os, out.series, c.level(), m);
      }
      files.push_back(p.string());
      for (const auto& [name, d] : out.distributions) {
        const fs::path q = fs::path(c.outputs.dir) / (base + "_" + name + ".csv");
        auto os = open_out(q);
        write_distribution_csv(os, d, m);
        files.push_back(q.string());
      }
    }
  json man = manifest(c, "run", files, seconds_since(t0));
  write_manifest(c, man, "run");
  return man;
}

namespace {

void set_path(json& j, const std::string& dotted, const json& v) {
  json* cur = &j;
  std::size_t start = 0;
  for (;;) {
    const auto p = dotted.find('.', start);
    const std::string k = dotted.substr(start, p == std::string::npos ? std::string::npos : p - start);
    if (p == std::string::npos) {
      (*cur)[k] = v;
      return;
    }
    cur = &(*cur)[k];
    start = p + 1;
  }
}

std::vector<std::string> summary_rows(const ScenarioConfig& cc, long idx, const std::vector<json>& vals) {
  std::vector<std::string> rows;
  std::string prefix = std::to_string(idx);
  for (const auto& v : vals) prefix += "," + (v.is_string() ? v.get<std::string>() : v.dump());
  for (int N : cc.N)
    for (double th : cc.drive.theta0) {
      std::ostringstream row;
      row << prefix << "," << N << "," << fmt(th) << "," << cc.method << ",";
      try {
        const RunOutput out = simulate(cc, N, th);
        const auto& r = out.series;
        double rate = -1, tpk = 0, ton = std::numeric_limits<double>::quiet_NaN();
        for (std::size_t i = 1; i < r.t.size(); ++i) {
          const double d = -(r.n_e[i] - r.n_e[i - 1]) / (r.t[i] - r.t[i - 1]);
          if (d > rate) {
            rate = d;
            tpk = 0.5 * (r.t[i] + r.t[i - 1]);
          }
          if (std::isnan(ton) && r.n_e.front() - r.n_e[i] > 0.01) ton = r.t[i];
        }
        row << fmt(r.n_e.front()) << "," << fmt(r.n_e.back()) << "," << fmt(tpk) << "," << fmt(ton) << ",ok,";
      } catch (const ResourceError& e) {
        row << "nan,nan,nan,nan,resource,\"" << e.what() << "\"";
      } catch (const std::exception& e) {
        row << "nan,nan,nan,nan,error,\"" << e.what() << "\"";
      }
      rows.push_back(row.str());
    }
  return rows;
}

}  // namespace

json sweep(const ScenarioConfig& c) {
  check(c);
  const auto t0 = std::chrono::steady_clock::now();
  std::vector<std::string> keys;
  std::vector<json> axes;
  for (auto it = c.grid.begin(); it != c.grid.end(); ++it) {
    keys.push_back(it.key());
    axes.push_back(it.value());
  }
  std::vector<std::vector<json>> cells{{}};
  for (const auto& ax : axes) {
    std::vector<std::vector<json>> next;
    for (const auto& cell : cells)
      for (const auto& v : ax) {
        auto n = cell;
        n.push_back(v);
        next.push_back(std::move(n));
      }
    cells = std::move(next);
  }

  // Configs per cell; validation failures abort before any output.
  json base = config_to_json(c);
  base["grid"] = json::object();
  std::vector<ScenarioConfig> cfgs;
  std::vector<std::string> errs;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    json j = base;
    for (std::size_t k = 0; k < keys.size(); ++k) set_path(j, keys[k], cells[i][k]);
    try {
      ScenarioConfig cc = config_from_json(j);
      for (const auto& e : validate(cc)) errs.push_back("cell " + std::to_string(i) + ": " + e);
      cfgs.push_back(std::move(cc));
    } catch (const ConfigError& e) {
      for (const auto& x : e.errors) errs.push_back("cell " + std::to_string(i) + ": " + x);
    }
  }
  if (!errs.empty()) throw ConfigError(errs);

  const fs::path out = fs::path(c.outputs.dir) / (c.outputs.prefix + "_sweep.csv");
  const std::string m = manifest_line(c);
  std::string header = "cell";
  for (const auto& k : keys) header += "," + k;
  header += ",N,theta0,method,n_e_initial,n_e_final,t_peak,t_onset,status,message";

  // Resume: keep rows of cells that finished without error.
  std::map<long, std::vector<std::string>> done;
  if (fs::exists(out)) {
    std::ifstream in(out);
    std::string line;
    std::map<long, std::vector<std::string>> prev;
    std::set<long> bad;
    bool header_ok = false;
    while (std::getline(in, line)) {
      if (line.empty() || line[0] == '#') {
        if (line != "# manifest: " + m && !line.empty()) break;
        continue;
      }
      if (!header_ok) {
        header_ok = line == header;
        if (!header_ok) break;
        continue;
      }
      const long idx = std::stol(line.substr(0, line.find(',')));
      prev[idx].push_back(line);
      if (line.find(",ok,") == std::string::npos) bad.insert(idx);
    }
    if (header_ok)
      for (auto& [k, v] : prev)
        if (!bad.count(k) && k < static_cast<long>(cells.size())) done[k] = std::move(v);
  }

  std::vector<std::optional<std::vector<std::string>>> rows(cells.size());
  for (auto& [k, v] : done) rows[k] = v;
  std::mutex mu;
  std::size_t next = 0;
  long flushed = 0;
  auto os = open_out(out);
  os << "# manifest: " << m << "\n" << header << "\n";
  auto flush = [&]() {
    while (flushed < static_cast<long>(rows.size()) && rows[flushed]) {
      for (const auto& r : *rows[flushed]) os << r << "\n";
      ++flushed;
    }
    os.flush();
  };
  flush();
  long computed = 0;
  auto worker = [&]() {
    for (;;) {
      std::size_t i;
      {
        std::lock_guard<std::mutex> lk(mu);
        while (next < cells.size() && rows[next]) ++next;
        if (next >= cells.size()) return;
        i = next++;
      }
      auto r = summary_rows(cfgs[i], static_cast<long>(i), cells[i]);
      std::lock_guard<std::mutex> lk(mu);
      rows[i] = std::move(r);
      ++computed;
      flush();
    }
  };
  std::vector<std::thread> pool;
  for (int t = 1; t < c.sweep_threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  json man = manifest(c, "sweep", {out.string()}, seconds_since(t0));
  man["cells"] = cells.size();
  man["computed"] = computed;
  man["resumed"] = done.size();
  write_manifest(c, man, "sweep");
  return man;
}

json export_spectrum(const ScenarioConfig& c) {
  check(c);
  const auto t0 = std::chrono::steady_clock::now();
  const GeneratorSpec gen = make_generator(c);
  BlockOptions bo;
  bo.split_NA = c.spectrum.split_NA;
  bo.split_M = c.spectrum.split_M;
  bo.cap = c.spectrum.cap;
  std::vector<std::string> files;
  for (int N : c.N) {
    const auto blocks = effective_blocks(gen.jumps, N, bo);
    const auto recs = eigendecompose(blocks, c.spectrum.dark_tol);
    const fs::path p = fs::path(c.outputs.dir) / (c.outputs.prefix + "_spectrum_N" + std::to_string(N) + ".csv");
    auto os = open_out(p);
    write_spectrum_csv(os, gen.level, N, blocks, recs, manifest_line(c));
    files.push_back(p.string());
  }
  json man = manifest(c, "spectrum", files, seconds_since(t0));
  write_manifest(c, man, "spectrum");
  return man;
}

namespace {

std::string orthogonal_name(const ScenarioConfig& c) {
  if (!c.potential.orthogonal.empty()) return c.potential.orthogonal;
  static const std::map<std::string, std::string> pairs{{"R", "L"},  {"L", "R"},     {"V", "H"},
                                                        {"H", "V"},  {"Pi", "Sigma"}, {"Sigma", "Pi"}};
  auto it = pairs.find(c.drive.polarization);
  if (it == pairs.end()) throw ConfigError({"potential.orthogonal: required for drive " + c.drive.polarization});
  return it->second;
}

}  // namespace

json export_potential(const ScenarioConfig& c) {
  check(c);
  const auto t0 = std::chrono::steady_clock::now();
  const LevelStructure lv = c.level();
  const auto drive = make_drive(c);
  const VecC psi0 = initial_state(c);
  const auto xi = site_weights(c);
  const std::vector<double> frac(xi.size(), 1.0 / static_cast<double>(xi.size()));
  const PotentialSpec pot = potential_from_state(psi0, drive).with_sites(xi, frac);
  const bool has_orth = !is_two_level(lv);
  const auto orth = has_orth ? make_polarization_op(c, orthogonal_name(c)) : drive;
  const std::string m = manifest_line(c);
  std::vector<std::string> files;
  const double pi = std::numbers::pi;
  {
    const fs::path p = fs::path(c.outputs.dir) / (c.outputs.prefix + "_potential.csv");
    auto os = open_out(p);
    os << "# manifest: " << m << "\n";
    os << "theta,V,dV,d2V,U_curvature_at_theta0\n";
    const long n = std::lround((c.potential.hi - c.potential.lo) / c.potential.step);
    for (long i = 0; i <= n; ++i) {
      const double th = (c.potential.lo + i * c.potential.step) * pi;
      double u = std::numeric_limits<double>::quiet_NaN();
      if (has_orth) {
        const VecC p1 = pulse_unitary(drive, th) * psi0;
        try {
          u = orthogonal_curvature(p1, orth);
        } catch (const std::domain_error&) {
          u = rotation_curvature(p1, orth);
        }
      }
      os << fmt(th) << "," << fmt(pot.value(th)) << "," << fmt(pot.derivative(th, 1)) << ","
         << fmt(pot.derivative(th, 2)) << "," << fmt(u) << "\n";
    }
    files.push_back(p.string());
  }
  {
    json pts = json::array();
    for (const auto& s : find_stationary(pot, c.potential.lo * pi, c.potential.hi * pi)) {
      const DelayEstimate d = delay_time(pot, s.theta);
      pts.push_back({{"theta", s.theta},
                     {"theta_over_pi", s.theta / pi},
                     {"V", s.value},
                     {"order", s.order},
                     {"kind", to_string(s.kind)},
                     {"delay_n", d.n},
                     {"delay_scaling", d.logarithmic ? "log" : "power"}});
    }
    const fs::path p = fs::path(c.outputs.dir) / (c.outputs.prefix + "_stationary.json");
    auto os = open_out(p);
    os << json{{"manifest", m}, {"points", pts}}.dump(2) << "\n";
    files.push_back(p.string());
  }
  if (c.potential.dark_search && has_orth) {
    DarkSearchOptions o;
    o.n_starts = c.potential.n_starts;
    o.seed = c.potential.seed;
    const auto res = find_mf_dark_two_pol(lv, o);
    json sols = json::array();
    for (const auto& s : res.solutions) {
      json amps = json::array();
      for (long a = 0; a < s.psi.size(); ++a) amps.push_back({s.psi(a).real(), s.psi(a).imag()});
      sols.push_back({{"amplitudes_V", amps},
                      {"residual", s.residual},
                      {"curvature_pi", s.curvature_pi},
                      {"curvature_sigma", s.curvature_sigma},
                      {"tag", s.tag}});
    }
    const fs::path p = fs::path(c.outputs.dir) / (c.outputs.prefix + "_dark.json");
    auto os = open_out(p);
    os << json{{"manifest", m},
               {"n_starts", o.n_starts},
               {"converged", res.converged},
               {"failed", res.failed},
               {"solutions", sols}}
              .dump(2)
       << "\n";
    files.push_back(p.string());
  }
  json man = manifest(c, "potential", files, seconds_since(t0));
  write_manifest(c, man, "potential");
  return man;
}

}  // namespace mlcav
