#include "folilab/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <charconv>
#include <cmath>
#include <map>
#include <set>
#include <sstream>

#include "folilab/errors.hpp"
#include "folilab/io.hpp"

namespace folilab {

namespace {

namespace pt = boost::property_tree;

const std::map<std::string, std::set<std::string>>& known_keys() {
  static const std::map<std::string, std::set<std::string>> keys{
      {"model", {"name", "alpha", "R", "r"}},
      {"sim", {"dt", "T", "n_paths", "seed", "record_every", "burn_in", "track_logdet", "init", "x0"}},
      {"drift", {"kind", "c"}},
      {"grid", {"dims"}},
      {"tests", {"set"}},
      {"check", {"tolerance", "points", "h_first", "h_nested"}},
      {"measure", {"candidate", "particles", "t", "s", "seeds", "bump_width"}},
      {"output", {"dir"}},
  };
  return keys;
}

std::vector<std::string> words(const std::string& text) {
  std::istringstream in(text);
  std::vector<std::string> out;
  for (std::string w; in >> w;) out.push_back(w);
  return out;
}

int to_int(const std::string& key, const std::string& value) {
  const long long v = parse_integer(value);
  if (v < INT32_MIN || v > INT32_MAX) throw Error(ErrorKind::config, key + " out of range");
  return static_cast<int>(v);
}

std::uint64_t to_seed(const std::string& key, const std::string& value) {
  std::uint64_t v = 0;
  const auto [end, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
  if (value.empty() || ec != std::errc() || end != value.data() + value.size()) {
    throw Error(ErrorKind::config, key + " must be a non-negative 64-bit integer");
  }
  return v;
}

bool to_bool(const std::string& key, const std::string& value) {
  if (value == "true") return true;
  if (value == "false") return false;
  throw Error(ErrorKind::config, key + " must be true or false");
}

std::string join(const std::vector<std::string>& items) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) out += (i ? " " : "") + items[i];
  return out;
}

void apply(ExperimentConfig& c, const std::string& section, const std::string& key, const std::string& value) {
  const std::string name = section + "." + key;
  try {
    if (section == "model") {
      if (key == "name") {
        c.model_name = value;
      } else {
        c.params[key] = parse_double(value);
      }
    } else if (section == "sim") {
      if (key == "dt") c.sim.dt = parse_double(value);
      else if (key == "T") c.sim.T = parse_double(value);
      else if (key == "n_paths") c.sim.n_paths = to_int(name, value);
      else if (key == "seed") c.sim.seed = to_seed(name, value);
      else if (key == "record_every") c.sim.record_every = to_int(name, value);
      else if (key == "burn_in") c.burn_in = parse_double(value);
      else if (key == "track_logdet") c.sim.track_logdet = to_bool(name, value);
      else if (key == "init") {
        if (value == "uniform") c.sim.init = InitKind::uniform;
        else if (value == "point") c.sim.init = InitKind::point;
        else throw Error(ErrorKind::config, "init must be uniform or point");
      } else if (key == "x0") {
        const auto parts = words(value);
        if (parts.size() > static_cast<std::size_t>(kMaxChart)) throw Error(ErrorKind::config, "x0 too long");
        c.sim.x0.resize(static_cast<int>(parts.size()));
        for (std::size_t i = 0; i < parts.size(); ++i) c.sim.x0[static_cast<int>(i)] = parse_double(parts[i]);
      }
    } else if (section == "drift") {
      if (key == "kind") {
        if (value == "none") c.sim.drift.kind = DriftSpec::Kind::none;
        else if (value == "leaf_constant") c.sim.drift.kind = DriftSpec::Kind::leaf_constant;
        else throw Error(ErrorKind::config, "drift kind must be none or leaf_constant");
      } else if (key == "c") {
        c.sim.drift.c = parse_double(value);
      }
    } else if (section == "grid") {
      c.grid.clear();
      for (const auto& w : words(value)) c.grid.push_back(to_int(name, w));
    } else if (section == "tests") {
      c.test_set = value;
    } else if (section == "check") {
      if (key == "tolerance") c.check.tolerance = parse_double(value);
      else if (key == "points") c.check.points = to_int(name, value);
      else if (key == "h_first") c.check.h_first = parse_double(value);
      else if (key == "h_nested") c.check.h_nested = parse_double(value);
    } else if (section == "measure") {
      if (key == "candidate") {
        if (value == "lebesgue") c.measure.candidate = CandidateMeasure::lebesgue;
        else if (value == "bump") c.measure.candidate = CandidateMeasure::bump;
        else throw Error(ErrorKind::config, "candidate must be lebesgue or bump");
      } else if (key == "particles") {
        c.measure.particles = parse_integer(value);
      } else if (key == "t") {
        c.measure.t = parse_double(value);
      } else if (key == "s") {
        c.measure.s = parse_double(value);
      } else if (key == "seeds") {
        c.measure.seeds.clear();
        for (const auto& w : words(value)) c.measure.seeds.push_back(to_seed(name, w));
      } else if (key == "bump_width") {
        c.measure.bump_width = parse_double(value);
      }
    } else if (section == "output") {
      c.output_dir = value;
    }
  } catch (const Error& e) {
    throw Error(ErrorKind::config, name + ": " + e.what());
  }
}

bool same_vector(const ChartVector& a, const ChartVector& b) {
  return a.size() == b.size() && (a.size() == 0 || a == b);
}

}  // namespace

FoliatedModel ExperimentConfig::model() const {
  return make_model(model_name, params);
}

std::vector<int> ExperimentConfig::grid_dims() const {
  if (!grid.empty()) return grid;
  return std::vector<int>(model().chart_dim(), 32);
}

std::vector<std::uint64_t> ExperimentConfig::measure_seeds() const {
  if (!measure.seeds.empty()) return measure.seeds;
  return {sim.seed, sim.seed + 1, sim.seed + 2};
}

void ExperimentConfig::validate() const {
  const FoliatedModel m = model();
  try {
    sim.validate(m);
    DriftField(m, sim.drift);
    test_function_set(m, test_set);
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::invalid_params || e.kind() == ErrorKind::unsupported_drift) throw;
    throw Error(ErrorKind::config, e.what());
  }
  if (!(burn_in >= 0.0 && burn_in < 1.0)) throw Error(ErrorKind::config, "sim.burn_in must lie in [0, 1)");
  const std::vector<int> dims = grid_dims();
  if (static_cast<int>(dims.size()) != m.chart_dim()) {
    throw Error(ErrorKind::config, "grid.dims needs one size per chart coordinate");
  }
  for (int n : dims) {
    if (n < 1 || n > 4096) throw Error(ErrorKind::config, "grid sizes must lie in [1, 4096]");
  }
  if (!(check.tolerance > 0.0)) throw Error(ErrorKind::config, "check.tolerance must be positive");
  if (check.points < 1 || check.points > 1000000) throw Error(ErrorKind::config, "check.points out of range");
  if (!(check.h_first > 0.0) || !(check.h_nested > 0.0)) {
    throw Error(ErrorKind::config, "difference steps must be positive");
  }
  if (measure.particles < 1) throw Error(ErrorKind::config, "measure.particles must be positive");
  for (double v : {measure.t, measure.s}) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw Error(ErrorKind::config, "measure.t and measure.s must be >= 0");
    if (std::abs(std::llround(v / sim.dt) * sim.dt - v) > 1e-9 * std::max(1.0, v)) {
      throw Error(ErrorKind::config, "measure.t and measure.s must be multiples of sim.dt");
    }
  }
  if (!(measure.bump_width > 0.0)) throw Error(ErrorKind::config, "measure.bump_width must be positive");
  if (output_dir.empty()) throw Error(ErrorKind::config, "output.dir must not be empty");
}

ExperimentConfig parse_config(const std::string& text) {
  pt::ptree tree;
  try {
    std::istringstream in(text);
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw Error(ErrorKind::config, e.what());
  }
  ExperimentConfig c;
  const auto& keys = known_keys();
  for (const auto& [section, body] : tree) {
    const auto it = keys.find(section);
    if (it == keys.end() || !body.data().empty()) {
      throw Error(ErrorKind::config, "unknown section or top-level key '" + section + "'");
    }
    for (const auto& [key, node] : body) {
      if (!it->second.count(key)) throw Error(ErrorKind::config, "unknown key " + section + "." + key);
      apply(c, section, key, node.get_value<std::string>());
    }
  }
  return c;
}

ExperimentConfig load_config(const std::string& path) { return parse_config(read_file(path)); }

std::string serialize_config(const ExperimentConfig& c) {
  std::ostringstream out;
  out << "[model]\nname = " << c.model_name << '\n';
  for (const auto& [k, v] : c.params) out << k << " = " << format_double(v) << '\n';

  out << "\n[sim]\n";
  out << "dt = " << format_double(c.sim.dt) << '\n';
  out << "T = " << format_double(c.sim.T) << '\n';
  out << "n_paths = " << c.sim.n_paths << '\n';
  out << "seed = " << c.sim.seed << '\n';
  out << "record_every = " << c.sim.record_every << '\n';
  out << "burn_in = " << format_double(c.burn_in) << '\n';
  out << "track_logdet = " << (c.sim.track_logdet ? "true" : "false") << '\n';
  out << "init = " << (c.sim.init == InitKind::uniform ? "uniform" : "point") << '\n';
  if (c.sim.x0.size() > 0) {
    std::vector<std::string> xs;
    for (int i = 0; i < c.sim.x0.size(); ++i) xs.push_back(format_double(c.sim.x0[i]));
    out << "x0 = " << join(xs) << '\n';
  }

  out << "\n[drift]\nkind = " << (c.sim.drift.kind == DriftSpec::Kind::none ? "none" : "leaf_constant") << '\n';
  out << "c = " << format_double(c.sim.drift.c) << '\n';

  if (!c.grid.empty()) {
    std::vector<std::string> dims;
    for (int n : c.grid) dims.push_back(std::to_string(n));
    out << "\n[grid]\ndims = " << join(dims) << '\n';
  }

  out << "\n[tests]\nset = " << c.test_set << '\n';

  out << "\n[check]\n";
  out << "tolerance = " << format_double(c.check.tolerance) << '\n';
  out << "points = " << c.check.points << '\n';
  out << "h_first = " << format_double(c.check.h_first) << '\n';
  out << "h_nested = " << format_double(c.check.h_nested) << '\n';

  out << "\n[measure]\n";
  out << "candidate = " << (c.measure.candidate == CandidateMeasure::lebesgue ? "lebesgue" : "bump") << '\n';
  out << "particles = " << c.measure.particles << '\n';
  out << "t = " << format_double(c.measure.t) << '\n';
  out << "s = " << format_double(c.measure.s) << '\n';
  if (!c.measure.seeds.empty()) {
    std::vector<std::string> seeds;
    for (auto s : c.measure.seeds) seeds.push_back(std::to_string(s));
    out << "seeds = " << join(seeds) << '\n';
  }
  out << "bump_width = " << format_double(c.measure.bump_width) << '\n';

  out << "\n[output]\ndir = " << c.output_dir << '\n';
  return out.str();
}

bool operator==(const ExperimentConfig& a, const ExperimentConfig& b) {
  return a.model_name == b.model_name && a.params == b.params && a.sim.dt == b.sim.dt && a.sim.T == b.sim.T &&
         a.sim.n_paths == b.sim.n_paths && a.sim.seed == b.sim.seed && a.sim.drift == b.sim.drift &&
         a.sim.record_every == b.sim.record_every && a.sim.track_logdet == b.sim.track_logdet &&
         a.sim.init == b.sim.init && same_vector(a.sim.x0, b.sim.x0) && a.burn_in == b.burn_in && a.grid == b.grid &&
         a.test_set == b.test_set && a.check.tolerance == b.check.tolerance && a.check.points == b.check.points &&
         a.check.h_first == b.check.h_first && a.check.h_nested == b.check.h_nested &&
         a.measure.candidate == b.measure.candidate && a.measure.particles == b.measure.particles &&
         a.measure.t == b.measure.t && a.measure.s == b.measure.s && a.measure.seeds == b.measure.seeds &&
         a.measure.bump_width == b.measure.bump_width && a.output_dir == b.output_dir;
}

}  // namespace folilab
