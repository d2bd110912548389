#include "nvgd/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

namespace nvgd {

std::string_view to_string(ExperimentKind k) {
  switch (k) {
    case ExperimentKind::sanity_check: return "sanity-check";
    case ExperimentKind::funnel: return "funnel";
    case ExperimentKind::funnel_sweep: return "funnel-sweep";
    case ExperimentKind::covertype: return "covertype";
  }
  return "?";
}

ExperimentKind parse_experiment(std::string_view name) {
  for (auto k : {ExperimentKind::sanity_check, ExperimentKind::funnel, ExperimentKind::funnel_sweep,
                 ExperimentKind::covertype})
    if (to_string(k) == name) return k;
  throw std::invalid_argument("unknown experiment '" + std::string(name) +
                              "' (expected sanity-check, funnel, funnel-sweep or covertype)");
}

namespace {

std::string error_prefix(const std::string& file, std::size_t line, const std::string& key) {
  std::string out = file;
  if (line) out += (out.empty() ? "line " : ":") + std::to_string(line);
  if (!out.empty()) out += ": ";
  if (!key.empty()) out += key + ": ";
  return out;
}

}  // namespace

ConfigError::ConfigError(std::size_t line, const std::string& key, const std::string& detail,
                         const std::string& file)
    : std::runtime_error(error_prefix(file, line, key) + detail), line_(line), key_(key), detail_(detail) {}

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (item.empty()) throw std::invalid_argument("empty list element");
    out.push_back(item);
  }
  return out;
}

double to_real(const std::string& s) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v))
    throw std::invalid_argument("expected a number, got '" + s + "'");
  return v;
}

std::uint64_t to_uint(const std::string& s) {
  std::uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size())
    throw std::invalid_argument("expected a non-negative integer, got '" + s + "'");
  return v;
}

double positive(double v) {
  if (!(v > 0.0)) throw std::invalid_argument("must be positive");
  return v;
}

std::uint64_t at_least_one(std::uint64_t v) {
  if (v == 0) throw std::invalid_argument("must be at least 1");
  return v;
}

double open_fraction(double v) {
  if (!(v > 0.0 && v < 1.0)) throw std::invalid_argument("must lie strictly between 0 and 1");
  return v;
}

template <class T>
std::string join(const std::vector<T>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ", ";
    if constexpr (std::is_floating_point_v<T>)
      out += format_double(v[i]);
    else
      out += std::to_string(v[i]);
  }
  return out;
}

std::vector<std::uint64_t> to_seeds(const std::string& s) {
  std::vector<std::uint64_t> seeds;
  for (const auto& item : split_list(s)) {
    const auto dots = item.find("..");
    if (dots == std::string::npos) {
      seeds.push_back(to_uint(item));
      continue;
    }
    const auto lo = to_uint(trim(item.substr(0, dots))), hi = to_uint(trim(item.substr(dots + 2)));
    if (hi < lo) throw std::invalid_argument("empty seed range '" + item + "'");
    for (auto v = lo; v <= hi; ++v) seeds.push_back(v);
  }
  return seeds;
}

struct Field {
  std::string_view section;
  std::string_view key;
  std::function<void(ExperimentConfig&, const std::string&)> set;
  std::function<std::string(const ExperimentConfig&)> get;
};

const std::vector<Field>& schema() {
  using C = ExperimentConfig;
  using S = const std::string&;
  static const std::vector<Field> fields = {
      {"experiment", "name", [](C& c, S v) { c.experiment = parse_experiment(v); },
       [](const C& c) { return std::string(to_string(c.experiment)); }},
      {"experiment", "method", [](C& c, S v) { c.run.method = parse_method(v); },
       [](const C& c) { return std::string(to_string(c.run.method)); }},
      {"experiment", "seeds", [](C& c, S v) { c.seeds = to_seeds(v); },
       [](const C& c) { return join(c.seeds); }},
      {"experiment", "particles", [](C& c, S v) { c.run.particles = at_least_one(to_uint(v)); },
       [](const C& c) { return std::to_string(c.run.particles); }},
      {"experiment", "outer_steps", [](C& c, S v) { c.run.outer_steps = to_uint(v); },
       [](const C& c) { return std::to_string(c.run.outer_steps); }},
      {"experiment", "metric_every", [](C& c, S v) { c.run.metric_every = at_least_one(to_uint(v)); },
       [](const C& c) { return std::to_string(c.run.metric_every); }},
      {"experiment", "output_dir", [](C& c, S v) { c.output_dir = v; },
       [](const C& c) { return c.output_dir.string(); }},

      {"target", "dim", [](C& c, S v) { c.target.dim = at_least_one(to_uint(v)); },
       [](const C& c) { return std::to_string(c.target.dim); }},
      {"target", "scale_var", [](C& c, S v) { c.target.scale_var = positive(to_real(v)); },
       [](const C& c) { return format_double(c.target.scale_var); }},
      {"target", "dims",
       [](C& c, S v) {
         c.target.dims.clear();
         for (const auto& item : split_list(v)) {
           const auto d = to_uint(item);
           if (d < 2) throw std::invalid_argument("funnel dimensions must be at least 2");
           c.target.dims.push_back(d);
         }
       },
       [](const C& c) { return join(c.target.dims); }},
      {"target", "variance_lo", [](C& c, S v) { c.target.variance_lo = positive(to_real(v)); },
       [](const C& c) { return format_double(c.target.variance_lo); }},
      {"target", "variance_hi", [](C& c, S v) { c.target.variance_hi = positive(to_real(v)); },
       [](const C& c) { return format_double(c.target.variance_hi); }},
      {"target", "data_path", [](C& c, S v) { c.target.data_path = v; },
       [](const C& c) { return c.target.data_path.string(); }},
      {"target", "test_fraction", [](C& c, S v) { c.target.test_fraction = open_fraction(to_real(v)); },
       [](const C& c) { return format_double(c.target.test_fraction); }},
      {"target", "split_seed", [](C& c, S v) { c.target.split_seed = to_uint(v); },
       [](const C& c) { return std::to_string(c.target.split_seed); }},
      {"target", "train_rows", [](C& c, S v) { c.target.train_rows = to_uint(v); },
       [](const C& c) { return std::to_string(c.target.train_rows); }},
      {"target", "a0", [](C& c, S v) { c.target.a0 = positive(to_real(v)); },
       [](const C& c) { return format_double(c.target.a0); }},
      {"target", "b0", [](C& c, S v) { c.target.b0 = positive(to_real(v)); },
       [](const C& c) { return format_double(c.target.b0); }},
      {"target", "batch_size", [](C& c, S v) { c.target.batch_size = at_least_one(to_uint(v)); },
       [](const C& c) { return std::to_string(c.target.batch_size); }},

      {"nvgd", "step_size", [](C& c, S v) { c.run.nvgd.particle_step = positive(to_real(v)); },
       [](const C& c) { return format_double(c.run.nvgd.particle_step); }},
      {"nvgd", "learning_rate", [](C& c, S v) { c.run.nvgd.learning_rate = positive(to_real(v)); },
       [](const C& c) { return format_double(c.run.nvgd.learning_rate); }},
      {"nvgd", "inner_steps", [](C& c, S v) { c.run.nvgd.inner_steps = at_least_one(to_uint(v)); },
       [](const C& c) { return std::to_string(c.run.nvgd.inner_steps); }},
      {"nvgd", "validation_fraction",
       [](C& c, S v) { c.run.nvgd.validation_fraction = open_fraction(to_real(v)); },
       [](const C& c) { return format_double(c.run.nvgd.validation_fraction); }},
      {"nvgd", "patience", [](C& c, S v) { c.run.nvgd.patience = at_least_one(to_uint(v)); },
       [](const C& c) { return std::to_string(c.run.nvgd.patience); }},
      {"nvgd", "hidden",
       [](C& c, S v) {
         c.run.nvgd.hidden.clear();
         for (const auto& item : split_list(v)) c.run.nvgd.hidden.push_back(at_least_one(to_uint(item)));
       },
       [](const C& c) { return join(c.run.nvgd.hidden); }},
      {"nvgd", "activation", [](C& c, S v) { c.run.nvgd.activation = parse_activation(v); },
       [](const C& c) { return std::string(to_string(c.run.nvgd.activation)); }},
      {"nvgd", "optimizer", [](C& c, S v) { c.run.nvgd.optimizer = parse_optimizer(v); },
       [](const C& c) { return std::string(to_string(c.run.nvgd.optimizer)); }},
      {"nvgd", "divergence",
       [](C& c, S v) {
         if (v == "auto")
           c.run.nvgd.divergence.reset();
         else if (v == "exact")
           c.run.nvgd.divergence = DivergenceMode::exact;
         else if (v == "hutchinson")
           c.run.nvgd.divergence = DivergenceMode::hutchinson;
         else
           throw std::invalid_argument("expected auto, exact or hutchinson, got '" + v + "'");
       },
       [](const C& c) -> std::string {
         if (!c.run.nvgd.divergence) return "auto";
         return *c.run.nvgd.divergence == DivergenceMode::exact ? "exact" : "hutchinson";
       }},
      {"nvgd", "hutchinson_draws", [](C& c, S v) { c.run.nvgd.hutchinson_draws = at_least_one(to_uint(v)); },
       [](const C& c) { return std::to_string(c.run.nvgd.hutchinson_draws); }},

      {"svgd", "step_size", [](C& c, S v) { c.run.svgd.step_size = positive(to_real(v)); },
       [](const C& c) { return format_double(c.run.svgd.step_size); }},
      {"svgd", "bandwidth",
       [](C& c, S v) {
         if (v == "median") {
           c.run.svgd.bandwidth = BandwidthRule::median_heuristic;
         } else {
           c.run.svgd.bandwidth = BandwidthRule::fixed;
           c.run.svgd.fixed_bandwidth = positive(to_real(v));
         }
       },
       [](const C& c) {
         return c.run.svgd.bandwidth == BandwidthRule::median_heuristic ? std::string("median")
                                                                         : format_double(c.run.svgd.fixed_bandwidth);
       }},
      {"svgd", "optimizer", [](C& c, S v) { c.run.svgd.optimizer = parse_optimizer(v); },
       [](const C& c) { return std::string(to_string(c.run.svgd.optimizer)); }},

      {"ula", "step_size", [](C& c, S v) { c.run.ula.step_size = positive(to_real(v)); },
       [](const C& c) { return format_double(c.run.ula.step_size); }},
      {"ula", "thinning", [](C& c, S v) { c.run.ula.thinning = at_least_one(to_uint(v)); },
       [](const C& c) { return std::to_string(c.run.ula.thinning); }},

      {"diagnostics", "mmd_bandwidth", [](C& c, S v) { c.diagnostics.mmd_bandwidth = positive(to_real(v)); },
       [](const C& c) { return format_double(c.diagnostics.mmd_bandwidth); }},
      {"diagnostics", "reference_samples",
       [](C& c, S v) { c.diagnostics.reference_samples = at_least_one(to_uint(v)); },
       [](const C& c) { return std::to_string(c.diagnostics.reference_samples); }},
      {"diagnostics", "reference_seed", [](C& c, S v) { c.diagnostics.reference_seed = to_uint(v); },
       [](const C& c) { return std::to_string(c.diagnostics.reference_seed); }},
      {"diagnostics", "oracle_samples", [](C& c, S v) { c.diagnostics.oracle_samples = at_least_one(to_uint(v)); },
       [](const C& c) { return std::to_string(c.diagnostics.oracle_samples); }},
      {"diagnostics", "heldout_samples",
       [](C& c, S v) { c.diagnostics.heldout_samples = at_least_one(to_uint(v)); },
       [](const C& c) { return std::to_string(c.diagnostics.heldout_samples); }},

      {"tuning", "step_sizes",
       [](C& c, S v) {
         c.tuning.step_sizes.clear();
         if (v == "none") return;
         for (const auto& item : split_list(v)) c.tuning.step_sizes.push_back(positive(to_real(item)));
       },
       [](const C& c) { return c.tuning.step_sizes.empty() ? std::string("none") : join(c.tuning.step_sizes); }},
      {"tuning", "validation_fraction",
       [](C& c, S v) { c.tuning.validation_fraction = open_fraction(to_real(v)); },
       [](const C& c) { return format_double(c.tuning.validation_fraction); }},
  };
  return fields;
}

std::string normalized(std::string_view s) {
  std::string out;
  for (char ch : s)
    if (ch != '_' && ch != '-') out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
  return out;
}

std::size_t edit_distance(const std::string& a, const std::string& b) {
  std::vector<std::size_t> row(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) row[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    std::size_t diag = row[0];
    row[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t up = row[j];
      row[j] = std::min({row[j] + 1, row[j - 1] + 1, diag + (a[i - 1] == b[j - 1] ? 0 : 1)});
      diag = up;
    }
  }
  return row[b.size()];
}

bool known_section(std::string_view s) {
  return std::any_of(schema().begin(), schema().end(), [&](const Field& f) { return f.section == s; });
}

void validate_whole(const ExperimentConfig& c) {
  if (c.seeds.empty()) throw ConfigError(0, "experiment.seeds", "at least one seed is required");
  if (std::set<std::uint64_t>(c.seeds.begin(), c.seeds.end()).size() != c.seeds.size())
    throw ConfigError(0, "experiment.seeds", "seeds must be distinct");
  if (c.target.variance_lo > c.target.variance_hi)
    throw ConfigError(0, "target.variance_lo", "must not exceed target.variance_hi");
  if (c.experiment == ExperimentKind::funnel && c.target.dim < 2)
    throw ConfigError(0, "target.dim", "the funnel needs at least 2 dimensions");
  if (c.experiment == ExperimentKind::funnel_sweep && c.target.dims.empty())
    throw ConfigError(0, "target.dims", "list at least one dimension");
  if (c.experiment == ExperimentKind::sanity_check && c.run.method != Method::nvgd)
    throw ConfigError(0, "experiment.method", "sanity-check trains the NVGD witness; set method = nvgd");
  if (c.experiment == ExperimentKind::covertype && c.run.method == Method::ula_sequential)
    throw ConfigError(0, "experiment.method", "covertype supports nvgd, svgd and ula_parallel");
  if (c.experiment != ExperimentKind::covertype && !c.tuning.step_sizes.empty())
    throw ConfigError(0, "tuning.step_sizes", "step-size tuning is only implemented for covertype");
  try {
    c.run.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(0, "", e.what());
  }
}

}  // namespace

std::string suggest_key(std::string_view section, std::string_view key) {
  const std::string want = normalized(key);
  std::string best;
  std::size_t best_distance = std::max<std::size_t>(2, want.size() / 3) + 1;
  for (const auto& f : schema()) {
    if (f.section != section) continue;
    const std::size_t dist = edit_distance(want, normalized(f.key));
    if (dist < best_distance) {
      best_distance = dist;
      best = f.key;
    }
  }
  return best;
}

ExperimentConfig parse_config(std::istream& in) {
  ExperimentConfig cfg;
  std::string section;
  std::map<std::string, std::size_t> seen;  // "section.key" -> line
  bool has_name = false;
  std::string raw;
  std::size_t line = 0;
  while (std::getline(in, raw)) {
    ++line;
    std::string text = trim(raw);
    if (text.empty() || text[0] == '#' || text[0] == ';') continue;
    if (text.front() == '[') {
      if (text.back() != ']') throw ConfigError(line, "", "malformed section header '" + text + "'");
      section = trim(std::string_view(text).substr(1, text.size() - 2));
      if (!known_section(section)) throw ConfigError(line, "", "unknown section [" + section + "]");
      continue;
    }
    const auto eq = text.find('=');
    if (eq == std::string::npos) throw ConfigError(line, "", "expected 'key = value', got '" + text + "'");
    const std::string key = trim(std::string_view(text).substr(0, eq));
    std::string value = trim(std::string_view(text).substr(eq + 1));
    if (const auto hash = value.find(" #"); hash != std::string::npos) value = trim(value.substr(0, hash));
    if (section.empty()) throw ConfigError(line, key, "key outside of any section");
    const std::string qualified = section + "." + key;
    const auto it = std::find_if(schema().begin(), schema().end(),
                                 [&](const Field& f) { return f.section == section && f.key == key; });
    if (it == schema().end()) {
      const std::string hint = suggest_key(section, key);
      throw ConfigError(line, qualified,
                        "unknown key" + (hint.empty() ? std::string() : "; did you mean '" + hint + "'?"));
    }
    if (const auto prev = seen.find(qualified); prev != seen.end())
      throw ConfigError(line, qualified, "duplicate key (first set on line " + std::to_string(prev->second) + ")");
    seen[qualified] = line;
    if (value.empty()) throw ConfigError(line, qualified, "missing value");
    try {
      it->set(cfg, value);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(line, qualified, e.what());
    }
    if (qualified == "experiment.name") has_name = true;
  }
  if (!has_name) throw ConfigError(0, "experiment.name", "required key is missing");
  validate_whole(cfg);
  return cfg;
}

ExperimentConfig parse_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file " + path.string());
  try {
    return parse_config(in);
  } catch (const ConfigError& e) {
    throw ConfigError(e.line(), e.key(), e.detail(), path.string());
  }
}

std::vector<ResolvedEntry> resolved_entries(const ExperimentConfig& cfg) {
  std::vector<ResolvedEntry> out;
  for (const auto& f : schema()) out.push_back({std::string(f.section), std::string(f.key), f.get(cfg)});
  return out;
}

void write_resolved_config(std::ostream& out, const ExperimentConfig& cfg) {
  std::string section;
  for (const auto& e : resolved_entries(cfg)) {
    if (e.section != section) {
      if (!section.empty()) out << '\n';
      section = e.section;
      out << '[' << section << "]\n";
    }
    out << e.key << " = " << e.value << '\n';
  }
}

}  // namespace nvgd
