// Command-line front end. Each subcommand reads a flat JSON config, lets flags
// override it, and echoes the resolved config at the top of every output.
#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "whittaker/whittaker.hpp"

#ifndef WHITTAKER_VERSION
#define WHITTAKER_VERSION "dev"
#endif

using json = nlohmann::ordered_json;
using namespace whittaker;

namespace {

enum class Kind { integer, u64, real, text, reals };

struct Key {
  std::string name;
  Kind kind;
  json fallback;
  std::string help;
  bool required = false;  // otherwise a null fallback means "absent"
};

const char* kind_name(Kind k) {
  switch (k) {
    case Kind::integer: return "int";
    case Kind::u64: return "u64";
    case Kind::real: return "number";
    case Kind::text: return "string";
    case Kind::reals: return "number[]";
  }
  return "?";
}

using Schema = std::vector<Key>;

const Key kThreads{"threads", Kind::integer, 0, "worker threads (0: $WHITTAKER_THREADS, else all cores)"};
const Key kOut{"out", Kind::text, "-", "output file, - for stdout"};

std::map<std::string, Schema> schemas() {
  return {
      {"simulate",
       {{"n", Kind::integer, 1, "levels N"},
        {"gamma", Kind::real, 1.0, "scaling parameter"},
        {"seed", Kind::u64, 0, "noise seed"},
        {"replicate", Kind::u64, 0, "replicate index within the seed"},
        {"dt", Kind::real, 1e-3, "time step"},
        {"t_start", Kind::real, 0.0, "interval start"},
        {"t_end", Kind::real, 1.0, "interval end"},
        {"drifts", Kind::reals, json::array(), "per-level drifts a_n (empty: all zero)"},
        {"init", Kind::text, "", "initial configuration CSV (empty: all zero)"},
        {"scheme", Kind::text, "tamed-euler", "tamed-euler | exact-edge | reflected"},
        {"cap_exponent", Kind::real, kDefaultCapExponent, "drift cap is exp(gamma * cap_exponent)"},
        kOut}},
      {"rate",
       {{"bundle", Kind::text, nullptr, "bundle CSV", true},
        {"init", Kind::text, "", "initial configuration CSV (empty: first row of the bundle)"},
        {"eps", Kind::real, -1.0, "coincidence tolerance (negative: 2 sqrt(dt / gamma))"},
        {"gamma", Kind::real, 32.0, "gamma used for the default tolerance"},
        {"convention", Kind::text, "lemma", "lemma | theorem"},
        kOut}},
      {"reflect",
       {{"driver", Kind::text, nullptr, "driver path CSV (t,T_1_1)", true},
        {"barrier", Kind::text, nullptr, "barrier path CSV (t,T_1_1)", true},
        {"start", Kind::real, nullptr, "initial value (absent: driver's first value)"},
        {"side", Kind::text, "above", "above | below"},
        kOut}},
      {"slope",
       {{"phi", Kind::text, nullptr, "target bundle CSV; its grid is the simulation grid", true},
        {"init", Kind::text, "", "initial configuration CSV (empty: first row of phi)"},
        {"delta", Kind::real, 0.25, "tube radius"},
        {"gammas", Kind::reals, json::array({8.0, 16.0, 32.0, 64.0}), "scaling parameters"},
        {"samples", Kind::u64, 10000, "replicates per gamma"},
        {"seed", Kind::u64, 0, "noise seed"},
        {"cap_exponent", Kind::real, kDefaultCapExponent, "drift cap is exp(gamma * cap_exponent)"},
        kThreads,
        kOut}},
      {"interlace",
       {{"n", Kind::integer, 3, "levels N"},
        {"gammas", Kind::reals, json::array({16.0, 32.0, 64.0}), "scaling parameters"},
        {"samples", Kind::u64, 1000, "replicates per gamma"},
        {"seed", Kind::u64, 0, "noise seed"},
        {"dt", Kind::real, 1e-3, "time step"},
        {"init", Kind::text, "", "initial configuration CSV (empty: all zero)"},
        {"margin_scale", Kind::real, 1.0, "f = margin_scale / sqrt(gamma)"},
        {"cap_exponent", Kind::real, kDefaultCapExponent, "drift cap is exp(gamma * cap_exponent)"},
        kThreads,
        kOut}},
      {"equivalence",
       {{"gamma", Kind::real, 32.0, "scaling parameter"},
        {"eta", Kind::real, 0.5, "clearance below the upper barrier"},
        {"dt", Kind::real, 1e-4, "time step"},
        {"samples", Kind::u64, 1000, "coupled replicates"},
        {"seed", Kind::u64, 0, "noise seed"},
        kThreads,
        kOut}},
      {"optimize",
       {{"init", Kind::text, nullptr, "initial configuration CSV", true},
        {"terminal", Kind::text, nullptr, "terminal configuration CSV", true},
        {"steps", Kind::u64, 32, "grid steps on [0, 1]"},
        {"eps", Kind::real, 1e-9, "coincidence tolerance"},
        {"max_iterations", Kind::u64, 5000, "gradient iterations"},
        {"convention", Kind::text, "lemma", "lemma | theorem"},
        kOut}},
  };
}

std::string schema_help(const std::string& sub, const Schema& schema) {
  std::ostringstream os;
  os << "config keys for '" << sub << "' (JSON object; flags --<key> override):\n";
  for (const auto& k : schema) {
    os << "  " << k.name << " : " << kind_name(k.kind);
    if (k.required)
      os << " (required)";
    else
      os << " = " << k.fallback.dump();
    os << "  " << k.help << '\n';
  }
  return os.str();
}

// Checks that a JSON value has the key's type; integers are accepted where numbers are.
void check_type(const Key& k, const json& v) {
  if (v.is_null() && !k.required) return;
  bool ok = false;
  switch (k.kind) {
    case Kind::integer: ok = v.is_number_integer(); break;
    case Kind::u64: ok = v.is_number_unsigned() || (v.is_number_integer() && v.get<std::int64_t>() >= 0); break;
    case Kind::real: ok = v.is_number(); break;
    case Kind::text: ok = v.is_string(); break;
    case Kind::reals:
      ok = v.is_array();
      for (const auto& x : v) ok = ok && x.is_number();
      break;
  }
  if (!ok) throw ValidationError("key '" + k.name + "' must be " + kind_name(k.kind));
}

json parse_flag(const Key& k, const std::vector<std::string>& raw) {
  auto number = [&](const std::string& s) {
    try {
      std::size_t pos = 0;
      const double x = std::stod(s, &pos);
      if (pos != s.size()) throw std::invalid_argument(s);
      return x;
    } catch (const std::exception&) {
      throw ValidationError("--" + k.name + ": invalid number '" + s + "'");
    }
  };
  auto whole = [&](const std::string& s) -> long long {
    try {
      std::size_t pos = 0;
      const long long x = std::stoll(s, &pos);
      if (pos != s.size()) throw std::invalid_argument(s);
      return x;
    } catch (const std::exception&) {
      throw ValidationError("--" + k.name + ": invalid integer '" + s + "'");
    }
  };
  switch (k.kind) {
    case Kind::integer: return whole(raw.at(0));
    case Kind::u64: {
      const std::string& s = raw.at(0);
      if (s.empty() || s.find_first_not_of("0123456789") != std::string::npos)
        throw ValidationError("--" + k.name + ": invalid unsigned integer '" + s + "'");
      try {
        return std::stoull(s);
      } catch (const std::exception&) {
        throw ValidationError("--" + k.name + ": out of range '" + s + "'");
      }
    }
    case Kind::real: return number(raw.at(0));
    case Kind::text: return raw.at(0);
    case Kind::reals: {
      json a = json::array();
      for (const auto& s : raw)
        for (auto part : csv::split(s))
          if (!part.empty()) a.push_back(number(std::string(part)));
      return a;
    }
  }
  return nullptr;
}

std::pair<std::size_t, std::size_t> line_column(const std::string& text, std::size_t byte) {
  std::size_t line = 1, col = 1;
  for (std::size_t i = 0; i + 1 < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return {line, col};
}

json load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open config " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  const std::string text = ss.str();
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    const auto [line, col] = line_column(text, e.byte);
    throw ValidationError(path + ":" + std::to_string(line) + ":" + std::to_string(col) + ": malformed JSON (" +
                          e.what() + ")");
  }
}

json resolve(const Schema& schema, const std::string& config_path,
             const std::map<std::string, std::vector<std::string>>& flags) {
  json file = json::object();
  if (!config_path.empty()) {
    file = load_config(config_path);
    if (!file.is_object()) throw ValidationError("config must be a JSON object");
    for (const auto& [name, value] : file.items()) {
      auto it = std::find_if(schema.begin(), schema.end(), [&](const Key& k) { return k.name == name; });
      if (it == schema.end()) throw ValidationError("unknown config key '" + name + "'");
      check_type(*it, value);
    }
  }
  json out = json::object();
  for (const auto& k : schema) {
    if (auto f = flags.find(k.name); f != flags.end() && !f->second.empty())
      out[k.name] = parse_flag(k, f->second);
    else if (file.contains(k.name))
      out[k.name] = file[k.name];
    else if (!k.required)
      out[k.name] = k.fallback;
    else
      throw ValidationError("missing required key '" + k.name + "'");
  }
  return out;
}

// Output sink: a file, or stdout for "-".
struct Sink {
  std::unique_ptr<std::ofstream> file;
  std::ostream& os;
  explicit Sink(const std::string& path)
      : file(path == "-" ? nullptr : std::make_unique<std::ofstream>(path)), os(file ? *file : std::cout) {
    if (file && !*file) throw std::runtime_error("cannot open output " + path);
  }
};

std::vector<std::string> header(const json& cfg, std::uint64_t seed, std::uint64_t replicate) {
  return {"config=" + cfg.dump(), Seed{seed, replicate}.header()};
}

std::string fmt(double x) { return std::isfinite(x) ? csv::format_double(x) : (std::isnan(x) ? "nan" : (x > 0 ? "inf" : "-inf")); }

void comments(std::ostream& os, const std::vector<std::string>& lines) {
  for (const auto& l : lines) os << "# " << l << '\n';
}

TriangularConfiguration initial_or_zero(const std::string& path, int levels) {
  if (path.empty()) return TriangularConfiguration(levels);
  auto c = csv::read_configuration_file(path);
  if (c.levels() != levels) throw ValidationError("initial configuration has " + std::to_string(c.levels()) +
                                                  " levels, expected " + std::to_string(levels));
  return c;
}

int levels_of(const json& cfg) {
  const int n = cfg["n"].get<int>();
  if (n < 1) throw ValidationError("n must be at least 1");
  return n;
}

std::vector<double> reals(const json& v) { return v.get<std::vector<double>>(); }

void run_simulate(const json& cfg) {
  const int n = levels_of(cfg);
  ModelConfig mc = ModelConfig::make(initial_or_zero(cfg["init"], n), cfg["gamma"].get<double>(),
                                     cfg["cap_exponent"].get<double>());
  mc.drifts = reals(cfg["drifts"]);
  mc.check();
  if (!validate_initial(mc).ok()) throw ValidationError("initial configuration is not interlaced");
  const auto grid = TimeGrid::with_spacing(cfg["t_start"].get<double>(), cfg["t_end"].get<double>(),
                                           cfg["dt"].get<double>());
  const Seed seed{cfg["seed"].get<std::uint64_t>(), cfg["replicate"].get<std::uint64_t>()};
  const auto noise = sample_noise(seed, grid, n);
  const auto res = sde::simulate(mc, grid, noise, {sde::parse_scheme(cfg["scheme"].get<std::string>())});
  Sink out(cfg["out"]);
  csv::write_bundle(out.os, res.bundle, header(cfg, seed.seed, seed.replicate),
                    {"clamps=" + std::to_string(res.clamps)});
}

void run_rate(const json& cfg) {
  const auto bundle = csv::read_bundle_file(cfg["bundle"]);
  const std::string init = cfg["init"];
  const auto initial = init.empty() ? bundle.slice(0) : csv::read_configuration_file(init);
  double eps = cfg["eps"].get<double>();
  if (eps < 0.0) eps = rate::default_coincidence_eps(bundle.grid().dt(), cfg["gamma"].get<double>());
  const auto r = rate::total_rate(bundle, initial, eps, rate::parse_convention(cfg["convention"]));
  Sink out(cfg["out"]);
  comments(out.os, {"config=" + cfg.dump(), "eps=" + fmt(eps)});
  out.os << "particle,interior,upper,lower,interior_measure,upper_measure,lower_measure,both_measure,"
            "crossing_measure,total,reason\n";
  for (const auto& p : r.particles)
    out.os << csv::column_name(p.index) << ',' << fmt(p.interior_term) << ',' << fmt(p.upper_term) << ','
           << fmt(p.lower_term) << ',' << fmt(p.interior_measure) << ',' << fmt(p.upper_measure) << ','
           << fmt(p.lower_measure) << ',' << fmt(p.both_measure) << ',' << fmt(p.crossing_measure) << ','
           << fmt(p.total()) << ',' << rate::to_string(p.reason) << '\n';
  std::cout << "total=" << fmt(r.total) << " reason=" << rate::to_string(r.reason) << '\n';
}

void run_reflect(const json& cfg) {
  const auto d = csv::read_bundle_file(cfg["driver"]);
  const auto b = csv::read_bundle_file(cfg["barrier"]);
  if (d.levels() != 1 || b.levels() != 1) throw ValidationError("driver and barrier must be single paths");
  const double start = cfg["start"].is_null() ? d.path(0)[0] : cfg["start"].get<double>();
  const std::string side = cfg["side"];
  if (side != "above" && side != "below") throw ValidationError("side must be 'above' or 'below'");
  const auto r = side == "above" ? skorokhod::reflect_above(d.path(0), b.path(0), start)
                                 : skorokhod::reflect_below(d.path(0), b.path(0), start);
  Sink out(cfg["out"]);
  comments(out.os, {"config=" + cfg.dump()});
  out.os << "t,path,push\n";
  for (std::size_t i = 0; i < r.path.size(); ++i)
    out.os << fmt(d.grid().time(i)) << ',' << fmt(r.path[i]) << ',' << fmt(r.push[i]) << '\n';
}

void run_slope(const json& cfg) {
  const auto phi = csv::read_bundle_file(cfg["phi"]);
  const std::string init = cfg["init"];
  const auto initial = init.empty() ? phi.slice(0) : csv::read_configuration_file(init);
  if (initial.levels() != phi.levels()) throw ValidationError("initial configuration level mismatch");
  const std::uint64_t seed = cfg["seed"];
  const auto fit = mc::ldp_slope(ModelConfig::make(initial, 1.0), phi, cfg["delta"].get<double>(),
                                 reals(cfg["gammas"]), cfg["samples"].get<std::size_t>(), seed,
                                 static_cast<unsigned>(cfg["threads"].get<int>()), cfg["cap_exponent"].get<double>());
  Sink out(cfg["out"]);
  comments(out.os, header(cfg, seed, 0));
  out.os << "gamma,hits,samples,p_hat,wilson_lo,wilson_hi,minus_log_p,clamp_contamination\n";
  for (const auto& e : fit.estimates)
    out.os << fmt(e.gamma) << ',' << e.hits << ',' << e.n_samples << ',' << fmt(e.p_hat) << ',' << fmt(e.wilson.lo)
           << ',' << fmt(e.wilson.hi) << ',' << fmt(e.hits ? -std::log(e.p_hat) : std::nan("")) << ','
           << fmt(e.clamp_contamination) << '\n';
  comments(out.os, {"slope=" + fmt(fit.slope) + " predicted=" + fmt(fit.predicted)});
}

void run_interlace(const json& cfg) {
  const int n = levels_of(cfg);
  const auto grid = TimeGrid::with_spacing(0.0, 1.0, cfg["dt"].get<double>());
  const auto templ = ModelConfig::make(initial_or_zero(cfg["init"], n), 1.0);
  const std::uint64_t seed = cfg["seed"];
  const auto freq = mc::interlace_event_frequency(
      templ, grid, reals(cfg["gammas"]), cfg["samples"].get<std::size_t>(), seed,
      static_cast<unsigned>(cfg["threads"].get<int>()), cfg["margin_scale"].get<double>(),
      cfg["cap_exponent"].get<double>());
  Sink out(cfg["out"]);
  comments(out.os, header(cfg, seed, 0));
  out.os << "gamma,f,samples,a_violations,b_violations,c_violations,a_freq,a_wilson_hi,clamp_contamination\n";
  std::vector<double> xs, ys;
  for (const auto& f : freq) {
    out.os << fmt(f.gamma) << ',' << fmt(f.f) << ',' << f.n_samples << ',' << f.a_violations << ','
           << f.b_violations << ',' << f.c_violations << ',' << fmt(f.freq(f.a_violations)) << ','
           << fmt(f.ci(f.a_violations).hi) << ',' << fmt(f.clamp_contamination) << '\n';
    if (f.a_violations > 0) {
      xs.push_back(f.gamma);
      ys.push_back(-std::log(f.freq(f.a_violations)));
    }
  }
  // Decay of the A-violation frequency in gamma; no closed-form prediction exists.
  const double slope = xs.size() >= 2 ? mc::least_squares(xs, ys).first : std::nan("");
  comments(out.os, {"slope=" + fmt(slope) + " predicted=nan"});
}

void run_equivalence(const json& cfg) {
  const double gamma = cfg["gamma"], eta = cfg["eta"];
  const auto grid = TimeGrid::with_spacing(0.0, 1.0, cfg["dt"].get<double>());
  const std::uint64_t seed = cfg["seed"];
  const auto r = mc::equivalence_experiment(gamma, eta, grid, cfg["samples"].get<std::size_t>(), seed,
                                            static_cast<unsigned>(cfg["threads"].get<int>()));
  Sink out(cfg["out"]);
  comments(out.os, header(cfg, seed, 0));
  out.os << "samples,in_tube,violations,ordering_failures,budget,max_gap_in_tube\n";
  out.os << r.n_samples << ',' << r.in_tube << ',' << r.violations << ',' << r.ordering_failures << ','
         << fmt(r.budget) << ',' << fmt(r.max_gap_in_tube) << '\n';
  // Observed decay exponent of the gap against the budget's exponent eta/2.
  const double slope = r.max_gap_in_tube > 0.0 ? -std::log(r.max_gap_in_tube / grid.length()) / gamma
                                               : std::numeric_limits<double>::infinity();
  comments(out.os, {"slope=" + fmt(slope) + " predicted=" + fmt(eta / 2.0)});
}

void run_optimize(const json& cfg) {
  varopt::VariationalProblem prob;
  prob.initial = csv::read_configuration_file(cfg["init"]);
  prob.terminal = csv::read_configuration_file(cfg["terminal"]);
  prob.levels = prob.initial.levels();
  prob.grid = TimeGrid(0.0, 1.0, cfg["steps"].get<std::size_t>());
  prob.eps = cfg["eps"];
  prob.max_iterations = cfg["max_iterations"];
  prob.convention = rate::parse_convention(cfg["convention"]);
  const auto res = varopt::minimize_rate(prob);
  Sink out(cfg["out"]);
  csv::write_bundle(out.os, res.bundle, {"config=" + cfg.dump()},
                    {"rate=" + fmt(res.rate) + " baseline=" + fmt(res.baseline_rate) +
                     " iterations=" + std::to_string(res.report.iterations) +
                     " converged=" + (res.report.converged ? "1" : "0")});
  std::cout << "rate=" << fmt(res.rate) << " baseline=" << fmt(res.baseline_rate) << '\n';
}

const std::map<std::string, void (*)(const json&)> kRunners{
    {"simulate", run_simulate}, {"rate", run_rate},         {"reflect", run_reflect},
    {"slope", run_slope},       {"interlace", run_interlace}, {"equivalence", run_equivalence},
    {"optimize", run_optimize},
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Whittaker 2d growth model: simulation, rate functionals and Monte Carlo experiments"};
  app.require_subcommand(1);
  app.fallthrough();
  bool version = false;
  std::string config_path;
  std::vector<std::string> threads;
  app.add_flag("--version", version, "print version and build info");
  app.add_option("--config", config_path, "JSON config file");
  app.add_option("--threads", threads, "worker threads (fallback: $WHITTAKER_THREADS)")->expected(1);

  const auto all = schemas();
  std::map<std::string, std::map<std::string, std::vector<std::string>>> flags;
  std::map<std::string, CLI::App*> subs;
  for (const auto& [name, schema] : all) {
    auto* sub = app.add_subcommand(name, schema_help(name, schema));
    subs[name] = sub;
    for (const auto& k : schema) {
      if (k.name == "threads") continue;
      auto* opt = sub->add_option("--" + k.name, flags[name][k.name], k.help);
      if (k.kind != Kind::reals) opt->expected(1);
    }
  }

  // --version alone is a complete invocation.
  for (int i = 1; i < argc; ++i)
    if (std::string(argv[i]) == "--version") {
      std::cout << "whittaker " << WHITTAKER_VERSION << " (C++" << __cplusplus / 100 % 100 << ", "
#if defined(__clang__)
                << "clang " << __clang_version__
#elif defined(__GNUC__)
                << "gcc " << __VERSION__
#endif
#ifdef NDEBUG
                << ", release"
#else
                << ", debug"
#endif
                << ")\n";
      return 0;
    }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  std::string name;
  for (const auto& [n, sub] : subs)
    if (sub->parsed()) name = n;
  const auto& schema = all.at(name);
  try {
    auto& f = flags[name];
    if (!threads.empty()) f["threads"] = threads;
    const json cfg = resolve(schema, config_path, f);
    if (cfg.contains("threads") && cfg["threads"].get<int>() < 0) throw ValidationError("threads must be >= 0");
    kRunners.at(name)(cfg);
    return 0;
  } catch (const NonFiniteError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const DegenerateFitError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n\n" << schema_help(name, schema);
    return 1;
  } catch (const json::exception& e) {
    std::cerr << "error: " << e.what() << "\n\n" << schema_help(name, schema);
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
}
