#include "config.hpp"

#include <fstream>
#include <map>
#include <set>

#include "ubpod/control.hpp"
#include "ubpod/io.hpp"
#include "ubpod/snapshots.hpp"

namespace ubpod::cli {

namespace {

// Reads members of one JSON object and rejects whatever it did not consume.
class ObjectReader {
 public:
  ObjectReader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) {
      throw ValidationError("config: '" + path_ + "' must be an object");
    }
  }

  template <typename T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception& e) {
      throw ValidationError("config: '" + where(key) + "' has the wrong type (" +
                            e.what() + ")");
    }
  }

  const json* child(const char* key) {
    seen_.insert(key);
    return j_.contains(key) ? &j_.at(key) : nullptr;
  }

  std::string where(const std::string& key) const {
    return path_.empty() ? key : path_ + "." + key;
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!seen_.count(it.key())) {
        throw ValidationError("config: unknown key '" + where(it.key()) + "'");
      }
    }
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

void read_hopf(const json& j, HopfSpec& s) {
  ObjectReader r(j, "testbed.hopf");
  r.get("grid", s.grid);
  r.get("length", s.length);
  std::string boundary = to_string(s.boundary);
  r.get("boundary", boundary);
  s.boundary = parse_boundary(boundary);
  r.get("mu", s.mu);
  r.get("diffusion_u", s.diffusion_u);
  r.get("diffusion_v", s.diffusion_v);
  r.get("advection", s.advection);
  r.get("frequency", s.frequency);
  r.get("saturation", s.saturation);
  r.get("growth_center", s.growth_center);
  r.get("growth_width", s.growth_width);
  r.get("damping", s.damping);
  r.get("source_amplitude", s.source_amplitude);
  r.get("source_center", s.source_center);
  r.get("source_width", s.source_width);
  r.get("actuator_center", s.actuator_center);
  r.get("actuator_width", s.actuator_width);
  r.get("sensor_locations", s.sensor_locations);
  r.finish();
}

void read_lti(const json& j, RandomLtiSpec& s) {
  ObjectReader r(j, "testbed.random_lti");
  r.get("n", s.n);
  r.get("n_u", s.n_u);
  r.get("inputs", s.inputs);
  r.get("outputs", s.outputs);
  r.get("unstable_min", s.unstable_min);
  r.get("unstable_max", s.unstable_max);
  r.get("stable_min", s.stable_min);
  r.get("stable_max", s.stable_max);
  r.get("imag_min", s.imag_min);
  r.get("imag_max", s.imag_max);
  r.get("condition", s.condition);
  r.finish();
}

json hopf_json(const HopfSpec& s) {
  return {{"grid", s.grid},
          {"length", s.length},
          {"boundary", to_string(s.boundary)},
          {"mu", s.mu},
          {"diffusion_u", s.diffusion_u},
          {"diffusion_v", s.diffusion_v},
          {"advection", s.advection},
          {"frequency", s.frequency},
          {"saturation", s.saturation},
          {"growth_center", s.growth_center},
          {"growth_width", s.growth_width},
          {"damping", s.damping},
          {"source_amplitude", s.source_amplitude},
          {"source_center", s.source_center},
          {"source_width", s.source_width},
          {"actuator_center", s.actuator_center},
          {"actuator_width", s.actuator_width},
          {"sensor_locations", s.sensor_locations}};
}

json lti_json(const RandomLtiSpec& s) {
  return {{"n", s.n},
          {"n_u", s.n_u},
          {"inputs", s.inputs},
          {"outputs", s.outputs},
          {"unstable_min", s.unstable_min},
          {"unstable_max", s.unstable_max},
          {"stable_min", s.stable_min},
          {"stable_max", s.stable_max},
          {"imag_min", s.imag_min},
          {"imag_max", s.imag_max},
          {"condition", s.condition}};
}

void require(bool ok, const std::string& what) {
  if (!ok) throw ValidationError("config: " + what);
}

}  // namespace

void PipelineConfig::validate() const {
  require(testbed.kind == "hopf-pde" || testbed.kind == "random-lti",
          "testbed.kind must be hopf-pde or random-lti");
  if (testbed.kind == "hopf-pde") {
    testbed.hopf.validate();
  } else {
    testbed.lti.validate();
  }
  require(steady.dt > 0.0 && steady.steps >= 1, "steady.dt > 0 and steady.steps >= 1");
  require(steady.tol > 0.0 && steady.gmres_tol > 0.0, "steady tolerances must be > 0");
  require(steady.gmres_restart >= 1 && steady.max_newton >= 1,
          "steady iteration caps must be >= 1");
  require(eigs.k_max >= 1 && eigs.tol > 0.0 && eigs.dt > 0.0,
          "eigs.k_max >= 1, eigs.tol > 0, eigs.dt > 0");
  require(snapshots.dt > 0.0 && snapshots.n_snapshots >= 2 &&
              snapshots.spacing >= 1,
          "snapshots.dt > 0, n_snapshots >= 2, spacing >= 1");
  parse_quadrature(snapshots.quadrature);
  require(snapshots.m >= 0, "snapshots.m must be >= 0");
  require(rom.r >= 1 || rom.r == -1, "rom.r must be >= 1, or -1 for full rank");
  require(oracle.tol > 0.0 && oracle.hsv_floor >= 0.0 && oracle.hsv_floor < 1.0,
          "oracle.tol > 0 and 0 <= oracle.hsv_floor < 1");
  require(control.c > 0.0, "control.c must be > 0");
  for (int s : control.sensors) require(s >= 0, "control.sensors must be >= 0");
  require(control.noise_transient >= 0.0 && control.noise_window > 0.0,
          "control noise window must be positive");
  parse_feedback_mode(simulate.mode);
  require(simulate.plant == "nonlinear" || simulate.plant == "linear",
          "simulate.plant must be nonlinear or linear");
  require(!simulate.turn_on.empty(), "simulate.turn_on must not be empty");
  for (double t : simulate.turn_on) require(t >= 0.0, "simulate.turn_on must be >= 0");
  require(simulate.dt > 0.0 && simulate.horizon > 0.0 && simulate.record_every >= 1 &&
              simulate.transient >= 0.0,
          "simulate time options must be positive");
  require(bifurcation.mu_max > bifurcation.mu_min && bifurcation.step > 0.0,
          "bifurcation needs mu_min < mu_max and step > 0");
  require(bifurcation.cycle_transient >= 0.0 && bifurcation.cycle_window > 0.0,
          "bifurcation cycle options must be positive");
}

PipelineConfig parse_config(const json& doc) {
  PipelineConfig c;
  ObjectReader top(doc, "");
  top.get("seed", c.seed);
  if (const json* t = top.child("testbed")) {
    ObjectReader r(*t, "testbed");
    r.get("kind", c.testbed.kind);
    if (const json* h = r.child("hopf")) read_hopf(*h, c.testbed.hopf);
    if (const json* l = r.child("random_lti")) read_lti(*l, c.testbed.lti);
    r.finish();
  }
  if (const json* s = top.child("steady")) {
    ObjectReader r(*s, "steady");
    r.get("dt", c.steady.dt);
    r.get("steps", c.steady.steps);
    r.get("tol", c.steady.tol);
    r.get("gmres_tol", c.steady.gmres_tol);
    r.get("gmres_restart", c.steady.gmres_restart);
    r.get("max_newton", c.steady.max_newton);
    r.get("line_search", c.steady.line_search);
    r.finish();
  }
  if (const json* s = top.child("eigs")) {
    ObjectReader r(*s, "eigs");
    r.get("k_max", c.eigs.k_max);
    r.get("tol", c.eigs.tol);
    r.get("dt", c.eigs.dt);
    r.finish();
  }
  if (const json* s = top.child("snapshots")) {
    ObjectReader r(*s, "snapshots");
    r.get("dt", c.snapshots.dt);
    r.get("n_snapshots", c.snapshots.n_snapshots);
    r.get("spacing", c.snapshots.spacing);
    r.get("quadrature", c.snapshots.quadrature);
    r.get("m", c.snapshots.m);
    r.finish();
  }
  if (const json* s = top.child("rom")) {
    ObjectReader r(*s, "rom");
    r.get("r", c.rom.r);
    r.finish();
  }
  if (const json* s = top.child("oracle")) {
    ObjectReader r(*s, "oracle");
    r.get("tol", c.oracle.tol);
    r.get("hsv_floor", c.oracle.hsv_floor);
    r.finish();
  }
  if (const json* s = top.child("control")) {
    ObjectReader r(*s, "control");
    r.get("c", c.control.c);
    r.get("unstable_only", c.control.unstable_only);
    r.get("sensors", c.control.sensors);
    r.get("noise_transient", c.control.noise_transient);
    r.get("noise_window", c.control.noise_window);
    r.get("noise_perturbation", c.control.noise_perturbation);
    r.finish();
  }
  if (const json* s = top.child("simulate")) {
    ObjectReader r(*s, "simulate");
    r.get("mode", c.simulate.mode);
    r.get("plant", c.simulate.plant);
    r.get("turn_on", c.simulate.turn_on);
    r.get("dt", c.simulate.dt);
    r.get("horizon", c.simulate.horizon);
    r.get("record_every", c.simulate.record_every);
    r.get("transient", c.simulate.transient);
    r.finish();
  }
  if (const json* s = top.child("bifurcation")) {
    ObjectReader r(*s, "bifurcation");
    r.get("mu_min", c.bifurcation.mu_min);
    r.get("mu_max", c.bifurcation.mu_max);
    r.get("step", c.bifurcation.step);
    r.get("cycle_transient", c.bifurcation.cycle_transient);
    r.get("cycle_window", c.bifurcation.cycle_window);
    r.finish();
  }
  top.finish();
  c.testbed.hopf.seed = c.seed;
  c.testbed.lti.seed = c.seed;
  return c;
}

PipelineConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("config: cannot open " + path.string());
  json doc;
  try {
    doc = json::parse(in, nullptr, true, /*ignore_comments=*/true);
  } catch (const json::parse_error& e) {
    throw ValidationError("config: " + path.string() + ": " + e.what());
  }
  return parse_config(doc);
}

json to_json(const PipelineConfig& c) {
  json j;
  j["seed"] = c.seed;
  j["testbed"] = {{"kind", c.testbed.kind},
                  {"hopf", hopf_json(c.testbed.hopf)},
                  {"random_lti", lti_json(c.testbed.lti)}};
  j["steady"] = {{"dt", c.steady.dt},
                 {"steps", c.steady.steps},
                 {"tol", c.steady.tol},
                 {"gmres_tol", c.steady.gmres_tol},
                 {"gmres_restart", c.steady.gmres_restart},
                 {"max_newton", c.steady.max_newton},
                 {"line_search", c.steady.line_search}};
  j["eigs"] = {{"k_max", c.eigs.k_max}, {"tol", c.eigs.tol}, {"dt", c.eigs.dt}};
  j["snapshots"] = {{"dt", c.snapshots.dt},
                    {"n_snapshots", c.snapshots.n_snapshots},
                    {"spacing", c.snapshots.spacing},
                    {"quadrature", c.snapshots.quadrature},
                    {"m", c.snapshots.m}};
  j["rom"] = {{"r", c.rom.r}};
  j["oracle"] = {{"tol", c.oracle.tol}, {"hsv_floor", c.oracle.hsv_floor}};
  j["control"] = {{"c", c.control.c},
                  {"unstable_only", c.control.unstable_only},
                  {"sensors", c.control.sensors},
                  {"noise_transient", c.control.noise_transient},
                  {"noise_window", c.control.noise_window},
                  {"noise_perturbation", c.control.noise_perturbation}};
  j["simulate"] = {{"mode", c.simulate.mode},
                   {"plant", c.simulate.plant},
                   {"turn_on", c.simulate.turn_on},
                   {"dt", c.simulate.dt},
                   {"horizon", c.simulate.horizon},
                   {"record_every", c.simulate.record_every},
                   {"transient", c.simulate.transient}};
  j["bifurcation"] = {{"mu_min", c.bifurcation.mu_min},
                      {"mu_max", c.bifurcation.mu_max},
                      {"step", c.bifurcation.step},
                      {"cycle_transient", c.bifurcation.cycle_transient},
                      {"cycle_window", c.bifurcation.cycle_window}};
  return j;
}

std::vector<std::string> stage_sections(const std::string& stage) {
  static const std::map<std::string, std::vector<std::string>> sections{
      {"steady", {"seed", "testbed", "steady"}},
      {"eigs", {"seed", "testbed", "steady", "eigs"}},
      {"snapshots", {"seed", "testbed", "steady", "eigs", "snapshots"}},
      {"rom", {"seed", "testbed", "steady", "eigs", "snapshots", "rom"}},
      {"oracle-compare",
       {"seed", "testbed", "steady", "eigs", "snapshots", "oracle"}},
      {"lqr", {"seed", "testbed", "steady", "eigs", "snapshots", "rom", "control"}},
      {"lqg", {"seed", "testbed", "steady", "eigs", "snapshots", "rom", "control"}},
      {"simulate",
       {"seed", "testbed", "steady", "eigs", "snapshots", "rom", "control",
        "simulate"}},
      {"bifurcation", {"seed", "testbed", "steady", "bifurcation"}},
  };
  const auto it = sections.find(stage);
  if (it == sections.end()) throw ValidationError("unknown stage '" + stage + "'");
  return it->second;
}

std::uint64_t stage_config_hash(const PipelineConfig& cfg,
                                const std::string& stage) {
  const json full = to_json(cfg);
  json part = json::object();
  for (const auto& s : stage_sections(stage)) part[s] = full.at(s);
  return fnv1a(part.dump());
}

}  // namespace ubpod::cli
