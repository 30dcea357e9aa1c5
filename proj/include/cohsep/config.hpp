#pragma once

// Flat INI configuration for the command-line front end.
//
//   [scene]       d, sigma, theta, phi | chi, kappa, n_s
//   [statistics]  kind = fock | poisson | thermal | custom, h (custom only)
//   [basis]       kind = hg | di | di_continuum | bucket, m_max = auto | N,
//                 half_width, pixels
//   [montecarlo]  mu, trials, seed, mode = known_ns | unknown_ns | both,
//                 workers, relinearize
//   [sweep]       axis = d_over_sigma | chi | theta | phi | n_s,
//                 start, stop, points, spacing = linear | log
//   [figure]      id, title, quantity = m_eps | m_D | m_d
//   [plan:NAME], [curve:NAME]   overrides written as section.key = value
//
// Numeric values accept simple expressions: 3*pi/16, acos(-0.99), 1e4.
// Errors carry the file name, line and field.

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <cctype>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "cohsep/bases.hpp"
#include "cohsep/montecarlo.hpp"
#include "cohsep/optics.hpp"
#include "cohsep/statistics.hpp"

namespace cohsep::config {

class config_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Value expressions

namespace detail {

class ExprParser {
 public:
  explicit ExprParser(std::string_view text) : s_(text) {}

  double parse() {
    const double v = expr();
    skip_ws();
    if (pos_ != s_.size()) fail("unexpected '" + std::string(s_.substr(pos_)) + "'");
    return v;
  }

 private:
  [[noreturn]] void fail(const std::string& msg) const { throw config_error(msg); }

  void skip_ws() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
  }

  bool eat(char c) {
    skip_ws();
    if (pos_ < s_.size() && s_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  double expr() {
    double v = term();
    for (;;) {
      if (eat('+')) v += term();
      else if (eat('-')) v -= term();
      else return v;
    }
  }

  double term() {
    double v = unary();
    for (;;) {
      if (eat('*')) v *= unary();
      else if (eat('/')) v /= unary();
      else return v;
    }
  }

  double unary() {
    if (eat('-')) return -unary();
    if (eat('+')) return unary();
    return primary();
  }

  double primary() {
    skip_ws();
    if (eat('(')) {
      const double v = expr();
      if (!eat(')')) fail("missing ')'");
      return v;
    }
    if (pos_ < s_.size() && std::isalpha(static_cast<unsigned char>(s_[pos_]))) {
      const std::size_t start = pos_;
      while (pos_ < s_.size() && std::isalnum(static_cast<unsigned char>(s_[pos_]))) ++pos_;
      const std::string name(s_.substr(start, pos_ - start));
      if (name == "pi") return numeric::pi;
      if (name == "inf") return std::numeric_limits<double>::infinity();
      if (!eat('(')) fail("unknown name '" + name + "'");
      const double a = expr();
      if (!eat(')')) fail("missing ')'");
      if (name == "acos") return std::acos(a);
      if (name == "asin") return std::asin(a);
      if (name == "cos") return std::cos(a);
      if (name == "sin") return std::sin(a);
      if (name == "sqrt") return std::sqrt(a);
      fail("unknown function '" + name + "'");
    }
    const std::string rest(s_.substr(pos_));
    char* end = nullptr;
    const double v = std::strtod(rest.c_str(), &end);
    const std::size_t used = static_cast<std::size_t>(end - rest.c_str());
    if (used == 0) fail(pos_ < s_.size() ? "expected a number at '" + std::string(s_.substr(pos_)) + "'"
                                         : "expected a number");
    pos_ += used;
    return v;
  }

  std::string_view s_;
  std::size_t pos_ = 0;
};

inline std::string trim(std::string s) {
  const auto not_space = [](unsigned char c) { return !std::isspace(c); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
  s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
  return s;
}

inline std::string strip_comment(std::string s) {
  const auto pos = s.find_first_of(";#");
  if (pos != std::string::npos) s.erase(pos);
  return trim(std::move(s));
}

}  // namespace detail

inline double parse_number(std::string_view text) {
  const double v = detail::ExprParser(text).parse();
  if (std::isnan(v)) throw config_error("expression evaluates to nan");
  return v;
}

// ---------------------------------------------------------------------------
// Settings

/// Where a value came from, for diagnostics.
struct Origin {
  std::string file;
  int line = 0;
  std::string field;  // section.key

  std::string describe() const {
    std::ostringstream os;
    os << file;
    if (line > 0) os << ':' << line;
    if (!field.empty()) os << ": " << field;
    return os.str();
  }
};

enum class ModeChoice { known_ns, unknown_ns, both };
enum class Quantity { m_eps, m_D, m_d };
enum class SweepAxis { d_over_sigma, chi, theta, phi, n_s };

inline std::string quantity_name(Quantity q) {
  switch (q) {
    case Quantity::m_eps: return "m_eps";
    case Quantity::m_D: return "m_D";
    default: return "m_d";
  }
}

inline std::string axis_name(SweepAxis a) {
  switch (a) {
    case SweepAxis::d_over_sigma: return "d_over_sigma";
    case SweepAxis::chi: return "chi";
    case SweepAxis::theta: return "theta";
    case SweepAxis::phi: return "phi";
    default: return "n_s";
  }
}

struct SweepSpec {
  SweepAxis axis = SweepAxis::d_over_sigma;
  double start = 0.001;
  double stop = 6.0;
  int points = 300;
  bool log_spacing = false;

  std::vector<double> values() const {
    std::vector<double> v(static_cast<std::size_t>(points));
    for (int i = 0; i < points; ++i) {
      const double t = static_cast<double>(i) / (points - 1);
      v[static_cast<std::size_t>(i)] =
          log_spacing ? std::exp(std::log(start) + t * (std::log(stop) - std::log(start)))
                      : start + t * (stop - start);
    }
    v.back() = stop;
    return v;
  }
};

/// Raw, not yet validated parameters. Sections override fields one at a time;
/// `materialize` turns the result into domain objects.
struct Settings {
  double d = 1.0, sigma = 1.0, theta = numeric::pi / 4, phi = numeric::pi / 2, kappa = 1.0, n_s = 1.0;
  std::optional<double> chi;
  std::string stats_kind = "poisson";
  double custom_h = 0.0;
  std::string basis_kind = "hg";
  std::optional<int> m_max;
  double half_width = 0.0;
  int pixels = 257;
  std::int64_t mu = 10000, trials = 1000;
  std::uint64_t seed = 1;
  ModeChoice mode = ModeChoice::known_ns;
  unsigned workers = 1;
  int relinearize = 0;
  Quantity quantity = Quantity::m_d;
  std::string label;
  std::map<std::string, Origin> origins;  // field -> where it was last set
};

struct Materialized {
  SourceScene scene;
  SourceStatistics stats;
  MeasurementBasis basis;
  bool di_continuum = false;
};

struct NamedOverrides {
  std::string name;
  std::vector<std::pair<std::string, std::string>> entries;  // "section.key", value
  std::vector<Origin> origins;
};

struct FigureInfo {
  int id = 0;
  std::string title;
};

struct Config {
  std::string source;
  Settings base;
  std::optional<SweepSpec> sweep;
  std::optional<FigureInfo> figure;
  std::vector<NamedOverrides> plans;
  std::vector<NamedOverrides> curves;
};

namespace detail {

inline std::int64_t as_count(double v, const std::string& what) {
  if (!(v >= 1.0) || v != std::floor(v) || v > 9.0e15)
    throw config_error(what + " must be a positive integer");
  return static_cast<std::int64_t>(v);
}

inline void set_field(Settings& s, const std::string& section, const std::string& key,
                      const std::string& value, const Origin& where) {
  const std::string field = section + "." + key;
  auto num = [&] { return parse_number(value); };
  try {
    if (section == "scene") {
      if (key == "d") s.d = num();
      else if (key == "sigma") s.sigma = num();
      else if (key == "theta") s.theta = num();
      else if (key == "phi") { s.phi = num(); s.chi.reset(); }
      else if (key == "chi") s.chi = num();
      else if (key == "kappa") s.kappa = num();
      else if (key == "n_s") s.n_s = num();
      else throw config_error("unknown key");
    } else if (section == "statistics") {
      if (key == "kind") {
        if (value != "fock" && value != "poisson" && value != "thermal" && value != "custom")
          throw config_error("expected fock, poisson, thermal or custom, got '" + value + "'");
        s.stats_kind = value;
      } else if (key == "h") s.custom_h = num();
      else throw config_error("unknown key");
    } else if (section == "basis") {
      if (key == "kind") {
        if (value != "hg" && value != "di" && value != "di_continuum" && value != "bucket")
          throw config_error("expected hg, di, di_continuum or bucket, got '" + value + "'");
        s.basis_kind = value;
      } else if (key == "m_max") {
        if (value == "auto") s.m_max.reset();
        else s.m_max = static_cast<int>(as_count(num(), "m_max"));
      } else if (key == "half_width") s.half_width = num();
      else if (key == "pixels") s.pixels = static_cast<int>(as_count(num(), "pixels"));
      else throw config_error("unknown key");
    } else if (section == "montecarlo") {
      if (key == "mu") s.mu = as_count(num(), "mu");
      else if (key == "trials") s.trials = as_count(num(), "trials");
      else if (key == "seed") {
        std::size_t used = 0;
        if (value.empty() || !std::isdigit(static_cast<unsigned char>(value.front())))
          throw config_error("seed must be an unsigned integer");
        s.seed = std::stoull(value, &used);
        if (used != value.size()) throw config_error("seed must be an unsigned integer");
      } else if (key == "mode") {
        if (value == "known_ns") s.mode = ModeChoice::known_ns;
        else if (value == "unknown_ns") s.mode = ModeChoice::unknown_ns;
        else if (value == "both") s.mode = ModeChoice::both;
        else throw config_error("expected known_ns, unknown_ns or both, got '" + value + "'");
      } else if (key == "workers") s.workers = static_cast<unsigned>(as_count(num(), "workers"));
      else if (key == "relinearize") {
        const double v = num();
        if (!(v >= 0.0) || v != std::floor(v) || v > 100) throw config_error("relinearize must be in 0..100");
        s.relinearize = static_cast<int>(v);
      } else throw config_error("unknown key");
    } else if (section == "curve") {
      if (key == "label") s.label = value;
      else if (key == "quantity") {
        if (value == "m_eps") s.quantity = Quantity::m_eps;
        else if (value == "m_D") s.quantity = Quantity::m_D;
        else if (value == "m_d") s.quantity = Quantity::m_d;
        else throw config_error("expected m_eps, m_D or m_d, got '" + value + "'");
      } else throw config_error("unknown key");
    } else {
      throw config_error("unknown section");
    }
  } catch (const config_error& e) {
    throw config_error(Origin{where.file, where.line, field}.describe() + ": " + e.what());
  } catch (const std::logic_error&) {
    throw config_error(Origin{where.file, where.line, field}.describe() + ": invalid value '" +
                       value + "'");
  }
  Origin o = where;
  o.field = field;
  s.origins[field] = o;
}

inline std::string origin_of(const Settings& s, const std::string& field) {
  const auto it = s.origins.find(field);
  return it == s.origins.end() ? "default " + field : it->second.describe();
}

}  // namespace detail

/// Applies one override entry "section.key = value".
inline void apply(Settings& s, const std::string& dotted, const std::string& value, const Origin& where) {
  const auto dot = dotted.find('.');
  if (dot == std::string::npos)
    throw config_error(Origin{where.file, where.line, dotted}.describe() +
                       ": overrides must be written as section.key");
  detail::set_field(s, dotted.substr(0, dot), dotted.substr(dot + 1), value, where);
}

inline Settings with_overrides(const Settings& base, const NamedOverrides& o) {
  Settings s = base;
  for (std::size_t i = 0; i < o.entries.size(); ++i)
    apply(s, o.entries[i].first, o.entries[i].second, o.origins[i]);
  return s;
}

/// Builds the domain objects, attributing failures to the field responsible.
inline Materialized materialize(const Settings& s) {
  double phi = s.phi;
  if (s.chi) {
    const double amp = std::sin(2.0 * s.theta);
    if (!(amp > 0.0) || std::abs(*s.chi) > amp * (1.0 + 1e-12))
      throw config_error(detail::origin_of(s, "scene.chi") +
                         ": |chi| must not exceed sin(2 theta) = " + std::to_string(amp));
    phi = std::acos(std::clamp(*s.chi / amp, -1.0, 1.0));
  }
  auto scene_error = [&](const std::string& msg) -> config_error {
    for (const char* f : {"d", "sigma", "theta", "phi", "kappa", "n_s"})
      if (msg.starts_with(std::string("scene: ") + f + " "))
        return config_error(detail::origin_of(s, std::string("scene.") + f) + ": " + msg);
    return config_error("[scene]: " + msg);
  };
  std::optional<SourceScene> scene;
  try {
    scene = SourceScene::make(s.d, s.sigma, s.theta, phi, s.kappa, s.n_s);
  } catch (const domain_error& e) {
    throw scene_error(e.what());
  }

  SourceStatistics stats = Poisson{};
  if (s.stats_kind == "fock") {
    if (!is_integral_count(s.n_s))
      throw config_error(detail::origin_of(s, "scene.n_s") +
                         ": Fock statistics need an integral photon number");
    stats = Fock{};
  } else if (s.stats_kind == "thermal") {
    stats = Thermal{};
  } else if (s.stats_kind == "custom") {
    stats = CustomH{s.custom_h};
  }
  try {
    (void)h_param(stats, s.n_s);
  } catch (const domain_error& e) {
    throw config_error(detail::origin_of(s, "statistics.h") + ": " + e.what());
  }

  MeasurementBasis basis = HermiteGauss{s.m_max};
  bool continuum = false;
  if (s.basis_kind == "di" || s.basis_kind == "di_continuum") {
    if (s.half_width < 0.0)
      throw config_error(detail::origin_of(s, "basis.half_width") + ": must be >= 0 (0 selects the default)");
    basis = DirectImagingGrid{s.half_width, s.pixels};
    continuum = s.basis_kind == "di_continuum";
  } else if (s.basis_kind == "bucket") {
    basis = Bucket{};
  }
  return {*scene, stats, basis, continuum};
}

inline std::vector<ExperimentPlan> to_plans(const Settings& s, const std::string& name) {
  const auto m = materialize(s);
  if (m.di_continuum)
    throw config_error(detail::origin_of(s, "basis.kind") +
                       ": di_continuum has no photon-counting modes to simulate; use di");
  std::vector<ExperimentPlan> out;
  auto push = [&](EstimationMode mode) {
    ExperimentPlan p;
    p.name = name;
    p.scene = m.scene;
    p.stats = m.stats;
    p.basis = m.basis;
    p.mu = s.mu;
    p.trials = s.trials;
    p.seed = s.seed;
    p.mode = mode;
    p.relinearize = s.relinearize;
    out.push_back(std::move(p));
  };
  if (s.mode != ModeChoice::unknown_ns) push(EstimationMode::known_ns);
  if (s.mode != ModeChoice::known_ns) push(EstimationMode::unknown_ns);
  return out;
}

// ---------------------------------------------------------------------------
// Parsing

namespace detail {

/// (section, key) -> line, found by a plain scan; only used for diagnostics.
inline std::map<std::pair<std::string, std::string>, int> index_lines(const std::string& text) {
  std::map<std::pair<std::string, std::string>, int> out;
  std::istringstream is(text);
  std::string line, section;
  int n = 0;
  while (std::getline(is, line)) {
    ++n;
    const std::string t = trim(line);
    if (t.empty() || t[0] == ';' || t[0] == '#') continue;
    if (t.front() == '[' && t.back() == ']') {
      section = trim(t.substr(1, t.size() - 2));
      out[{section, ""}] = n;
      continue;
    }
    const auto eq = t.find('=');
    if (eq != std::string::npos) out.emplace(std::make_pair(section, trim(t.substr(0, eq))), n);
  }
  return out;
}

inline SweepSpec parse_sweep(const boost::property_tree::ptree& sec, const std::string& file,
                             const std::map<std::pair<std::string, std::string>, int>& lines) {
  SweepSpec sw;
  bool have_axis = false;
  for (const auto& [key, node] : sec) {
    const std::string value = strip_comment(node.data());
    const auto it = lines.find({"sweep", key});
    const Origin where{file, it == lines.end() ? 0 : it->second, "sweep." + key};
    try {
      if (key == "axis") {
        have_axis = true;
        if (value == "d_over_sigma") sw.axis = SweepAxis::d_over_sigma;
        else if (value == "chi") sw.axis = SweepAxis::chi;
        else if (value == "theta") sw.axis = SweepAxis::theta;
        else if (value == "phi") sw.axis = SweepAxis::phi;
        else if (value == "n_s") sw.axis = SweepAxis::n_s;
        else throw config_error("expected d_over_sigma, chi, theta, phi or n_s, got '" + value + "'");
      } else if (key == "start") sw.start = parse_number(value);
      else if (key == "stop") sw.stop = parse_number(value);
      else if (key == "points") {
        const double v = parse_number(value);
        if (!(v >= 2.0) || v != std::floor(v) || v > 1e6) throw config_error("points must be an integer >= 2");
        sw.points = static_cast<int>(v);
      } else if (key == "spacing") {
        if (value == "linear") sw.log_spacing = false;
        else if (value == "log") sw.log_spacing = true;
        else throw config_error("expected linear or log, got '" + value + "'");
      } else throw config_error("unknown key");
    } catch (const config_error& e) {
      throw config_error(where.describe() + ": " + e.what());
    }
  }
  const auto it = lines.find({"sweep", ""});
  const Origin where{file, it == lines.end() ? 0 : it->second, "sweep"};
  if (!have_axis) throw config_error(where.describe() + ": axis is required");
  if (!std::isfinite(sw.start) || !std::isfinite(sw.stop) || sw.start == sw.stop)
    throw config_error(where.describe() + ": start and stop must be finite and distinct");
  if (sw.log_spacing && !(sw.start > 0.0 && sw.stop > 0.0))
    throw config_error(where.describe() + ": log spacing needs positive start and stop");
  const double lo = std::min(sw.start, sw.stop), hi = std::max(sw.start, sw.stop);
  switch (sw.axis) {
    case SweepAxis::d_over_sigma:
      if (lo < 0.0) throw config_error(where.describe() + ": d_over_sigma must be >= 0");
      break;
    case SweepAxis::chi:
      if (lo < -1.0 || hi > 1.0) throw config_error(where.describe() + ": chi must lie in [-1, 1]");
      break;
    case SweepAxis::theta:
      if (lo < 0.0 || hi > numeric::pi / 4 + 1e-15)
        throw config_error(where.describe() + ": theta must lie in [0, pi/4]");
      break;
    case SweepAxis::n_s:
      if (!(lo > 0.0)) throw config_error(where.describe() + ": n_s must be positive");
      break;
    case SweepAxis::phi:
      break;
  }
  return sw;
}

}  // namespace detail

inline Config parse(const std::string& text, const std::string& file = "<config>") {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  {
    std::istringstream is(text);
    try {
      pt::ini_parser::read_ini(is, tree);
    } catch (const pt::ini_parser_error& e) {
      throw config_error(file + ":" + std::to_string(e.line()) + ": " + e.message());
    }
  }
  const auto lines = detail::index_lines(text);
  auto line_of = [&](const std::string& sec, const std::string& key) {
    const auto it = lines.find({sec, key});
    return it == lines.end() ? 0 : it->second;
  };

  Config cfg;
  cfg.source = file;
  for (const auto& [name, sec] : tree) {
    if (sec.empty() && !sec.data().empty())
      throw config_error(Origin{file, line_of("", name), name}.describe() +
                         ": key outside of any section");
    const auto colon = name.find(':');
    const std::string kind = name.substr(0, colon);
    if (colon != std::string::npos && (kind == "plan" || kind == "curve")) {
      NamedOverrides o;
      o.name = detail::trim(name.substr(colon + 1));
      if (o.name.empty())
        throw config_error(Origin{file, line_of(name, ""), name}.describe() + ": empty name");
      for (const auto& [key, node] : sec) {
        std::string dotted = key;
        if (kind == "curve" && (key == "label" || key == "quantity")) dotted = "curve." + key;
        o.entries.emplace_back(dotted, detail::strip_comment(node.data()));
        o.origins.push_back(Origin{file, line_of(name, key), name + "." + key});
      }
      Settings probe;
      for (std::size_t i = 0; i < o.entries.size(); ++i)
        apply(probe, o.entries[i].first, o.entries[i].second, o.origins[i]);
      (kind == "plan" ? cfg.plans : cfg.curves).push_back(std::move(o));
    } else if (name == "sweep") {
      cfg.sweep = detail::parse_sweep(sec, file, lines);
    } else if (name == "figure") {
      FigureInfo fig;
      for (const auto& [key, node] : sec) {
        const std::string value = detail::strip_comment(node.data());
        const Origin where{file, line_of(name, key), "figure." + key};
        if (key == "id") {
          try {
            fig.id = static_cast<int>(detail::as_count(parse_number(value), "id"));
          } catch (const config_error& e) {
            throw config_error(where.describe() + ": " + e.what());
          }
        } else if (key == "title") {
          fig.title = value;
        } else if (key == "quantity") {
          detail::set_field(cfg.base, "curve", "quantity", value, where);
        } else {
          throw config_error(where.describe() + ": unknown key");
        }
      }
      cfg.figure = fig;
    } else if (name == "scene" || name == "statistics" || name == "basis" || name == "montecarlo") {
      for (const auto& [key, node] : sec)
        detail::set_field(cfg.base, name, key, detail::strip_comment(node.data()),
                          Origin{file, line_of(name, key), ""});
    } else {
      throw config_error(Origin{file, line_of(name, ""), "[" + name + "]"}.describe() +
                         ": unknown section");
    }
  }
  // surface domain errors now rather than mid-run
  (void)materialize(cfg.base);
  for (const auto& o : cfg.plans) (void)materialize(with_overrides(cfg.base, o));
  for (const auto& o : cfg.curves) (void)materialize(with_overrides(cfg.base, o));
  return cfg;
}

inline Config load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw config_error(path + ": cannot open file");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str(), path);
}

}  // namespace cohsep::config
