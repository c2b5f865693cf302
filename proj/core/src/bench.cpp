#include "dem/bench.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "json.hpp"

namespace dem {

using nlohmann::json;

namespace {

const char* method_name(KernelMethod m) { return m == KernelMethod::Hybrid ? "hybrid" : "comparison"; }

KernelMethod method_from(const std::string& s) {
  if (s == "hybrid") return KernelMethod::Hybrid;
  if (s == "comparison") return KernelMethod::Comparison;
  throw InvalidSpec("unknown kernel method '" + s + "'");
}

void reject_unknown(const json& j, const json& known, const std::string& section) {
  if (!j.is_object()) throw InvalidSpec(section + " must be a JSON object");
  for (const auto& [key, value] : j.items())
    if (!known.contains(key)) throw InvalidSpec("unknown key '" + key + "' in " + section);
}

template <class T>
void read(const json& j, const char* key, T& out) {
  if (auto it = j.find(key); it != j.end()) out = it->get<T>();
}

json step_json(const StepConfig& c, bool with_workers) {
  json j{{"dt", c.dt},
         {"mode", to_string(c.mode)},
         {"convergence_rel_tol", c.convergence_rel_tol},
         {"max_picard_iterations", c.max_picard_iterations},
         {"theta_min", c.theta_min},
         {"theta_grow", c.theta_grow},
         {"theta_shrink", c.theta_shrink},
         {"surrogate_force_damping", c.surrogate_force_damping}};
  if (with_workers) j["workers"] = c.workers;
  return j;
}

json kernel_json(const KernelParams& k) {
  return {{"n_iterative", k.n_iterative},         {"c_factor", k.c_factor},
          {"alpha_iterative", k.alpha_iterative}, {"alpha_regulariser", k.alpha_regulariser},
          {"start_a", k.start_a},                 {"start_b", k.start_b},
          {"method", method_name(k.method)}};
}

json fit_json(const FitParams& f) {
  return {{"beta_size", f.beta_size},
          {"alpha_area", f.alpha_area},
          {"alpha_inside", f.alpha_inside},
          {"beta_normal", f.beta_normal},
          {"max_fit_iterations", f.max_fit_iterations},
          {"relative_tolerance", f.relative_tolerance},
          {"shrink", f.shrink},
          {"area_multipliers", f.area_multipliers},
          {"inside_multipliers", f.inside_multipliers}};
}

json config_json(const RunConfig& c, bool with_workers) {
  return {{"scene", json::parse(dump_scene_spec(c.scene))},
          {"step", step_json(c.step, with_workers)},
          {"kernel", kernel_json(c.step.kernel)},
          {"force", {{"k_s", c.step.force.k_s}}},
          {"fit", fit_json(c.fit)},
          {"n_steps", c.n_steps},
          {"seed", c.seed},
          {"validate_trees", c.validate_trees},
          {"validation_samples", c.validation_samples}};
}

RunConfig config_from(const json& j) {
  const RunConfig defaults;
  reject_unknown(j, config_json(defaults, true), "config");
  RunConfig c;
  if (auto it = j.find("scene"); it != j.end()) c.scene = parse_scene_spec(it->dump());
  if (auto it = j.find("step"); it != j.end()) {
    reject_unknown(*it, step_json(defaults.step, true), "step");
    auto& s = c.step;
    read(*it, "dt", s.dt);
    if (auto m = it->find("mode"); m != it->end()) s.mode = step_mode_from_string(m->get<std::string>());
    read(*it, "convergence_rel_tol", s.convergence_rel_tol);
    read(*it, "max_picard_iterations", s.max_picard_iterations);
    read(*it, "theta_min", s.theta_min);
    read(*it, "theta_grow", s.theta_grow);
    read(*it, "theta_shrink", s.theta_shrink);
    read(*it, "surrogate_force_damping", s.surrogate_force_damping);
    read(*it, "workers", s.workers);
  }
  if (auto it = j.find("kernel"); it != j.end()) {
    reject_unknown(*it, kernel_json(defaults.step.kernel), "kernel");
    auto& k = c.step.kernel;
    read(*it, "n_iterative", k.n_iterative);
    read(*it, "c_factor", k.c_factor);
    read(*it, "alpha_iterative", k.alpha_iterative);
    read(*it, "alpha_regulariser", k.alpha_regulariser);
    read(*it, "start_a", k.start_a);
    read(*it, "start_b", k.start_b);
    if (auto m = it->find("method"); m != it->end()) k.method = method_from(m->get<std::string>());
  }
  if (auto it = j.find("force"); it != j.end()) {
    reject_unknown(*it, json{{"k_s", 0}}, "force");
    read(*it, "k_s", c.step.force.k_s);
  }
  if (auto it = j.find("fit"); it != j.end()) {
    reject_unknown(*it, fit_json(defaults.fit), "fit");
    auto& f = c.fit;
    read(*it, "beta_size", f.beta_size);
    read(*it, "alpha_area", f.alpha_area);
    read(*it, "alpha_inside", f.alpha_inside);
    read(*it, "beta_normal", f.beta_normal);
    read(*it, "max_fit_iterations", f.max_fit_iterations);
    read(*it, "relative_tolerance", f.relative_tolerance);
    read(*it, "shrink", f.shrink);
    read(*it, "area_multipliers", f.area_multipliers);
    read(*it, "inside_multipliers", f.inside_multipliers);
  }
  read(j, "n_steps", c.n_steps);
  read(j, "seed", c.seed);
  read(j, "validate_trees", c.validate_trees);
  read(j, "validation_samples", c.validation_samples);
  c.validate();
  return c;
}

json counters_json(const KernelCounters& k) {
  return {{"iterative_invocations", k.iterative_invocations},
          {"comparison_invocations", k.comparison_invocations},
          {"fallback_invocations", k.fallback_invocations}};
}

KernelCounters counters_from(const json& j) {
  KernelCounters k;
  k.iterative_invocations = j.at("iterative_invocations").get<std::uint64_t>();
  k.comparison_invocations = j.at("comparison_invocations").get<std::uint64_t>();
  k.fallback_invocations = j.at("fallback_invocations").get<std::uint64_t>();
  return k;
}

void add_levels(std::vector<std::uint64_t>& into, const std::vector<std::uint64_t>& from) {
  if (into.size() < from.size()) into.resize(from.size(), 0);
  for (std::size_t l = 0; l < from.size(); ++l) into[l] += from[l];
}

Real rate(const KernelCounters& k) {
  return k.iterative_invocations ? Real(k.fallback_invocations) / Real(k.iterative_invocations) : Real(0);
}

bool implicit(StepMode m) {
  return m == StepMode::ImplicitSingle || m == StepMode::ImplicitSurrogateInPicard ||
         m == StepMode::ImplicitMultiscalePicard;
}

}  // namespace

void RunConfig::validate() const {
  if (n_steps < 1) throw InvalidSpec("n_steps must be >= 1");
  if (validation_samples < 0) throw InvalidSpec("validation_samples must be >= 0");
  scene.validate();
  step.validate();
  fit.validate();
}

RunConfig parse_run_config(const std::string& text) {
  try {
    return config_from(json::parse(text));
  } catch (const json::exception& e) {
    throw InvalidSpec(std::string("run config: ") + e.what());
  }
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_run_config(ss.str());
}

std::string apply_overrides(const std::string& text, const std::vector<std::string>& assignments) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw InvalidSpec(std::string("run config: ") + e.what());
  }
  for (const auto& a : assignments) {
    const auto eq = a.find('=');
    if (eq == std::string::npos || eq == 0) throw InvalidSpec("override '" + a + "' is not key=value");
    const std::string key = a.substr(0, eq);
    const std::string raw = a.substr(eq + 1);
    json value = json::parse(raw, nullptr, false);
    if (value.is_discarded()) value = raw;
    json* node = &doc;
    for (std::size_t start = 0;;) {
      if (!node->is_object() && !node->is_null())
        throw InvalidSpec("override '" + a + "' descends into a non-object");
      const auto dot = key.find('.', start);
      const std::string part = key.substr(start, dot - start);
      if (part.empty()) throw InvalidSpec("override '" + a + "' has an empty key");
      if (dot == std::string::npos) {
        (*node)[part] = std::move(value);
        break;
      }
      node = &(*node)[part];
      start = dot + 1;
    }
  }
  return doc.dump();
}

Real StepRecord::fallback_rate() const { return rate(counters); }

RunTotals totals_of(const std::vector<StepRecord>& steps, StepMode mode) {
  RunTotals t;
  for (const auto& s : steps) {
    t.counters += s.counters;
    add_levels(t.level_checks, s.level_checks);
    t.checks += s.checks();
    if (s.merged_contacts > 0) {
      t.contact_checks += s.checks();
      ++t.contact_steps;
    }
    t.picard_iterations += static_cast<std::uint64_t>(s.picard_iterations);
    t.merged_contacts += s.merged_contacts;
  }
  if (implicit(mode) && !steps.empty())
    t.mean_picard_iterations = Real(t.picard_iterations) / Real(steps.size());
  t.fallback_rate = rate(t.counters);
  return t;
}

RunReport run(const RunConfig& input, const StepObserver& observer) {
  const auto start = std::chrono::steady_clock::now();
  RunConfig config = input;
  config.scene.seed = config.seed;
  config.step.kernel.epsilon = config.scene.epsilon;
  config.validate();

  RunReport report;
  report.config = config;
  System system = build_scene(config.scene, config.fit);
  report.particles = system.particles.size();
  for (const auto& p : system.particles) report.triangles.push_back(p.shape->triangles.size());

  if (config.validate_trees) {
    std::set<const ParticleShape*> seen;
    for (const auto& p : system.particles) {
      if (!seen.insert(p.shape.get()).second) continue;
      const auto r = validate_conservative(p.shape->tree, p.shape->triangles, config.validation_samples);
      if (!r.pass) {
        report.ok = false;
        report.error = "surrogate tree failed validation at node " + std::to_string(r.worst_node);
        break;
      }
    }
  }

  for (int n = 0; report.ok && n < config.n_steps; ++n) {
    StepStats stats;
    try {
      stats = step(system, config.step);
    } catch (const PicardDiverged& e) {
      report.ok = false;
      report.failed_step = n;
      report.error = e.what();
      break;
    }
    StepRecord rec;
    rec.step = n;
    rec.time = system.time;
    rec.counters = stats.detection.counters;
    rec.level_checks = stats.detection.level_checks;
    rec.sweep_checks = stats.sweep_checks;
    rec.picard_iterations = stats.picard_iterations;
    rec.merged_contacts = stats.merged_contacts;
    rec.raw_contacts = stats.raw_contacts;
    rec.candidate_pairs = stats.candidate_pairs;
    rec.active_set_changes = stats.active_set_changes;
    if (observer) observer(system, rec);
    report.steps.push_back(std::move(rec));
  }
  report.totals = totals_of(report.steps, config.step.mode);
  report.wall_time_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

// ---------------------------------------------------------------------------
// serialisation

std::string report_to_json(const RunReport& r, bool include_wall_time) {
  json steps = json::array();
  for (const auto& s : r.steps) {
    steps.push_back({{"step", s.step},
                     {"time", s.time},
                     {"counters", counters_json(s.counters)},
                     {"checks", s.checks()},
                     {"fallback_rate", s.fallback_rate()},
                     {"level_checks", s.level_checks},
                     {"sweep_checks", s.sweep_checks},
                     {"picard_iterations", s.picard_iterations},
                     {"merged_contacts", s.merged_contacts},
                     {"raw_contacts", s.raw_contacts},
                     {"candidate_pairs", s.candidate_pairs},
                     {"active_set_changes", s.active_set_changes}});
  }
  const auto& t = r.totals;
  json doc{{"version", r.version},
           {"config", config_json(r.config, false)},
           {"particles", r.particles},
           {"triangles", r.triangles},
           {"ok", r.ok},
           {"failed_step", r.failed_step},
           {"error", r.error},
           {"totals",
            {{"counters", counters_json(t.counters)},
             {"level_checks", t.level_checks},
             {"checks", t.checks},
             {"contact_checks", t.contact_checks},
             {"contact_steps", t.contact_steps},
             {"picard_iterations", t.picard_iterations},
             {"mean_picard_iterations", t.mean_picard_iterations},
             {"merged_contacts", t.merged_contacts},
             {"fallback_rate", t.fallback_rate}}},
           {"steps", std::move(steps)}};
  if (include_wall_time) doc["wall_time_s"] = r.wall_time_s;
  return doc.dump(1) + "\n";
}

RunReport report_from_json(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw SchemaMismatch(std::string("report json: ") + e.what());
  }
  try {
    RunReport r;
    r.version = doc.at("version").get<int>();
    if (r.version != kReportVersion)
      throw SchemaMismatch("unsupported report version " + std::to_string(r.version));
    r.config = config_from(doc.at("config"));
    r.particles = doc.at("particles").get<std::size_t>();
    r.triangles = doc.at("triangles").get<std::vector<std::size_t>>();
    r.ok = doc.at("ok").get<bool>();
    r.failed_step = doc.at("failed_step").get<int>();
    r.error = doc.at("error").get<std::string>();
    for (const auto& js : doc.at("steps")) {
      StepRecord s;
      s.step = js.at("step").get<int>();
      s.time = js.at("time").get<Real>();
      s.counters = counters_from(js.at("counters"));
      s.level_checks = js.at("level_checks").get<std::vector<std::uint64_t>>();
      s.sweep_checks = js.at("sweep_checks").get<std::vector<std::uint64_t>>();
      s.picard_iterations = js.at("picard_iterations").get<int>();
      s.merged_contacts = js.at("merged_contacts").get<std::size_t>();
      s.raw_contacts = js.at("raw_contacts").get<std::size_t>();
      s.candidate_pairs = js.at("candidate_pairs").get<std::size_t>();
      s.active_set_changes = js.at("active_set_changes").get<std::size_t>();
      r.steps.push_back(std::move(s));
    }
    r.totals = totals_of(r.steps, r.config.step.mode);
    if (r.totals.checks != doc.at("totals").at("checks").get<std::uint64_t>())
      throw SchemaMismatch("report totals disagree with its steps");
    if (auto it = doc.find("wall_time_s"); it != doc.end()) r.wall_time_s = it->get<double>();
    return r;
  } catch (const json::exception& e) {
    throw SchemaMismatch(std::string("report json: ") + e.what());
  } catch (const InvalidSpec& e) {
    throw SchemaMismatch(std::string("report config: ") + e.what());
  }
}

std::string report_to_csv(const RunReport& r) {
  auto joined = [](const std::vector<std::uint64_t>& v) {
    std::string s;
    for (std::size_t k = 0; k < v.size(); ++k) s += (k ? ";" : "") + std::to_string(v[k]);
    return s;
  };
  std::ostringstream out;
  out.precision(17);
  out << "step,time,iterative,comparison,fallback,checks,fallback_rate,picard_iterations,"
         "merged_contacts,raw_contacts,candidate_pairs,active_set_changes,level_checks,sweep_checks\n";
  for (const auto& s : r.steps) {
    out << s.step << ',' << s.time << ',' << s.counters.iterative_invocations << ','
        << s.counters.comparison_invocations << ',' << s.counters.fallback_invocations << ','
        << s.checks() << ',' << s.fallback_rate() << ',' << s.picard_iterations << ','
        << s.merged_contacts << ',' << s.raw_contacts << ',' << s.candidate_pairs << ','
        << s.active_set_changes << ',' << joined(s.level_checks) << ',' << joined(s.sweep_checks)
        << '\n';
  }
  return out.str();
}

double ReportComparison::ratio(const std::string& name) const {
  for (const auto& [n, v] : ratios)
    if (n == name) return v;
  throw InvalidSpec("no ratio named '" + name + "'");
}

ReportComparison compare_reports(const RunReport& a, const RunReport& b) {
  if (a.version != b.version) throw SchemaMismatch("report versions differ");
  if (a.config.scene.kind != b.config.scene.kind) throw SchemaMismatch("scene kinds differ");
  auto q = [](double x, double y) {
    if (x == 0) return y == 0 ? 1.0 : std::numeric_limits<double>::quiet_NaN();
    return y / x;
  };
  const auto& ta = a.totals;
  const auto& tb = b.totals;
  ReportComparison c;
  c.ratios = {
      {"checks", q(double(ta.checks), double(tb.checks))},
      {"contact_checks", q(double(ta.contact_checks), double(tb.contact_checks))},
      {"iterative_invocations",
       q(double(ta.counters.iterative_invocations), double(tb.counters.iterative_invocations))},
      {"comparison_invocations",
       q(double(ta.counters.comparison_invocations), double(tb.counters.comparison_invocations))},
      {"fallback_invocations",
       q(double(ta.counters.fallback_invocations), double(tb.counters.fallback_invocations))},
      {"fallback_rate", q(ta.fallback_rate, tb.fallback_rate)},
      {"picard_iterations", q(double(ta.picard_iterations), double(tb.picard_iterations))},
      {"merged_contacts", q(double(ta.merged_contacts), double(tb.merged_contacts))},
      {"contact_steps", q(double(ta.contact_steps), double(tb.contact_steps))},
  };
  return c;
}

std::string comparison_to_json(const ReportComparison& c) {
  json j = json::object();
  for (const auto& [name, v] : c.ratios) j[name] = std::isnan(v) ? json(nullptr) : json(v);
  return j.dump(1) + "\n";
}

}  // namespace dem
