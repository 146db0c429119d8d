#include "markovpg/io.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "markovpg/errors.hpp"

namespace markovpg {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string location(const fs::path& file, std::size_t line) {
  return file.filename().string() + ":" + std::to_string(line);
}

double parse_double(const std::string& s, const std::string& where) {
  double v = 0.0;
  const char* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || ptr != end) throw ValidationError(where, "not a number: '" + s + "'");
  return v;
}

std::int64_t parse_int(const std::string& s, const std::string& where) {
  std::int64_t v = 0;
  const char* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || ptr != end) throw ValidationError(where, "not an integer timestamp: '" + s + "'");
  return v;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (quoted) {
      if (ch == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (ch == '"') {
        quoted = false;
      } else {
        cur += ch;
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      fields.push_back(std::move(cur));
      cur.clear();
    } else {
      cur += ch;
    }
  }
  fields.push_back(std::move(cur));
  return fields;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out += '"';
    out += ch;
  }
  return out + "\"";
}

std::ofstream open_out(const fs::path& path, std::ios::openmode mode = std::ios::out) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, mode);
  if (!out) throw ConfigError("cannot open " + path.string() + " for writing");
  return out;
}

template <typename T>
void write_le(std::ostream& out, T value) {
  static_assert(std::is_trivially_copyable_v<T>);
  unsigned char bytes[sizeof(T)];
  std::memcpy(bytes, &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  out.write(reinterpret_cast<const char*>(bytes), sizeof(T));
}

template <typename T>
T read_le(std::istream& in, const fs::path& path) {
  unsigned char bytes[sizeof(T)];
  if (!in.read(reinterpret_cast<char*>(bytes), sizeof(T))) throw ValidationError(path.string(), "truncated chain file");
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  T value;
  std::memcpy(&value, bytes, sizeof(T));
  return value;
}

constexpr char kChainMagic[8] = {'M', 'K', 'P', 'G', 'C', 'H', 'N', '1'};

std::size_t habitat_of_row(const FitData& data, Eigen::Index r) {
  const auto off = static_cast<Eigen::Index>(data.layout.habitat_offset());
  for (Eigen::Index h = 0; h < static_cast<Eigen::Index>(data.layout.n_habitats()); ++h)
    if (data.design(r, off + h) == 1.0) return static_cast<std::size_t>(h);
  throw ValidationError("design row " + std::to_string(r), "no habitat indicator set");
}

std::string individual_of_row(const FitData& data, std::size_t r) {
  for (const auto& seg : data.segments)
    if (r >= seg.first_row && r < seg.first_row + seg.length) return data.layout.individuals[seg.individual];
  throw DimensionError("row outside every segment");
}

}  // namespace

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

// ---------------------------------------------------------------- config

fs::path RunConfig::resolve(const fs::path& p) const { return p.is_absolute() ? p : base_dir / p; }

StateAlphabet RunConfig::alphabet() const {
  std::optional<std::size_t> ref;
  if (reference_state) {
    auto it = std::find(states.begin(), states.end(), *reference_state);
    if (it == states.end()) throw ConfigError("reference state '" + *reference_state + "' is not a declared state");
    ref = static_cast<std::size_t>(it - states.begin());
  }
  return StateAlphabet(states, ref);
}

RunConfig parse_config(std::string_view json_text, const fs::path& base_dir) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  if (j.contains("config") && j["config"].is_object()) j = j["config"];
  if (!j.is_object()) throw ConfigError("config must be a JSON object");

  static const std::set<std::string> known = {
      "states", "reference_state", "labels", "probabilities", "covariates", "imputations", "individuals",
      "habitats", "quantitative", "habitat_map", "diurnal", "solar_offset_seconds", "step_seconds",
      "gap_factor", "prior_variance", "sampler", "m_imputations", "gof_draws"};
  for (const auto& [key, _] : j.items())
    if (!known.contains(key)) throw ConfigError("unknown config key '" + key + "'");

  RunConfig c;
  c.base_dir = base_dir;
  try {
    c.states = j.at("states").get<std::vector<std::string>>();
    if (j.contains("reference_state")) c.reference_state = j["reference_state"].get<std::string>();
    for (auto [key, slot] : {std::pair{"labels", &c.labels}, std::pair{"probabilities", &c.probabilities},
                             std::pair{"covariates", &c.covariates}, std::pair{"imputations", &c.imputations}})
      if (j.contains(key) && !j[key].is_null()) *slot = fs::path(j[key].get<std::string>());
    c.individuals = j.value("individuals", std::vector<std::string>{});
    c.habitats = j.value("habitats", std::vector<std::string>{});
    c.quantitative = j.value("quantitative", std::vector<std::string>{});
    c.habitat_map = j.value("habitat_map", std::map<std::string, std::string>{});
    c.diurnal = j.value("diurnal", false);
    c.solar_offset_seconds = j.value("solar_offset_seconds", std::int64_t{0});
    c.step_seconds = j.value("step_seconds", std::int64_t{360});
    c.gap_factor = j.value("gap_factor", 1.5);
    c.priors.variance = j.value("prior_variance", 100.0);
    c.m_imputations = j.value("m_imputations", std::size_t{200});
    c.gof_draws = j.value("gof_draws", std::size_t{200});
    if (j.contains("sampler")) {
      const auto& s = j["sampler"];
      static const std::set<std::string> sampler_keys = {"iterations", "burn_in", "thin", "seed",
                                                         "chains", "threads", "random_init"};
      for (const auto& [key, _] : s.items())
        if (!sampler_keys.contains(key)) throw ConfigError("unknown sampler key '" + key + "'");
      c.sampler.iterations = s.value("iterations", c.sampler.iterations);
      c.sampler.burn_in = s.value("burn_in", c.sampler.burn_in);
      c.sampler.thin = s.value("thin", c.sampler.thin);
      c.sampler.seed = s.value("seed", c.sampler.seed);
      c.sampler.chains = s.value("chains", c.sampler.chains);
      c.sampler.threads = s.value("threads", c.sampler.threads);
      c.sampler.random_init = s.value("random_init", c.sampler.random_init);
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad config value: ") + e.what());
  }
  if (c.step_seconds <= 0) throw ConfigError("step_seconds must be positive");
  if (!(c.gap_factor >= 1.0)) throw ConfigError("gap_factor must be >= 1");
  if (!(c.priors.variance > 0.0)) throw ConfigError("prior_variance must be positive");
  if (c.m_imputations < 1) throw ConfigError("m_imputations must be >= 1");
  (void)c.alphabet();
  return c;
}

RunConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), fs::absolute(path).parent_path());
}

std::string config_to_json(const RunConfig& c, bool absolute_paths) {
  json j;
  j["states"] = c.states;
  if (c.reference_state) j["reference_state"] = *c.reference_state;
  for (auto [key, slot] : {std::pair{"labels", &c.labels}, std::pair{"probabilities", &c.probabilities},
                           std::pair{"covariates", &c.covariates}, std::pair{"imputations", &c.imputations}})
    if (*slot) j[key] = absolute_paths ? fs::absolute(c.resolve(**slot)).lexically_normal().string() : (*slot)->generic_string();
  if (!c.individuals.empty()) j["individuals"] = c.individuals;
  if (!c.habitats.empty()) j["habitats"] = c.habitats;
  if (!c.quantitative.empty()) j["quantitative"] = c.quantitative;
  if (!c.habitat_map.empty()) j["habitat_map"] = c.habitat_map;
  j["diurnal"] = c.diurnal;
  j["solar_offset_seconds"] = c.solar_offset_seconds;
  j["step_seconds"] = c.step_seconds;
  j["gap_factor"] = c.gap_factor;
  j["prior_variance"] = c.priors.variance;
  j["m_imputations"] = c.m_imputations;
  j["gof_draws"] = c.gof_draws;
  j["sampler"] = {{"iterations", c.sampler.iterations}, {"burn_in", c.sampler.burn_in},
                  {"thin", c.sampler.thin},             {"seed", c.sampler.seed},
                  {"chains", c.sampler.chains},         {"threads", c.sampler.threads},
                  {"random_init", c.sampler.random_init}};
  return j.dump(2);
}

// ---------------------------------------------------------------- csv

CsvTable read_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError(path.string(), "cannot open file");
  CsvTable t;
  std::string line;
  std::size_t lineno = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto fields = split_csv_line(line);
    if (!have_header) {
      t.header = std::move(fields);
      have_header = true;
      continue;
    }
    if (fields.size() != t.header.size())
      throw ValidationError(location(path, lineno), "expected " + std::to_string(t.header.size()) + " fields, got " +
                                                        std::to_string(fields.size()));
    t.rows.push_back(std::move(fields));
    t.lines.push_back(lineno);
  }
  if (!have_header) throw ValidationError(path.string(), "empty file");
  return t;
}

// ---------------------------------------------------------------- load_inputs

std::string ValidationReport::to_text() const {
  std::ostringstream os;
  os << "fixes: " << n_fixes << "\nsegments: " << n_segments << "\ntransitions: " << n_transitions << "\n";
  os << "fixes per individual:\n";
  for (const auto& [k, v] : fixes_per_individual) os << "  " << k << ": " << v << "\n";
  os << "habitat frequency:\n";
  for (const auto& [k, v] : habitat_frequency) os << "  " << k << ": " << v << "\n";
  os << "state frequency:\n";
  for (const auto& [k, v] : state_frequency) os << "  " << k << ": " << v << "\n";
  return os.str();
}

ModelInputs load_inputs(const RunConfig& config) {
  const StateAlphabet alphabet = config.alphabet();
  const std::size_t j = alphabet.size();
  if (!config.covariates) throw ConfigError("config: 'covariates' path is required");
  if (config.labels.has_value() == config.probabilities.has_value())
    throw ConfigError("config: exactly one of 'labels' or 'probabilities' is required");

  // Covariates.
  const fs::path cov_path = config.resolve(*config.covariates);
  const CsvTable cov = read_csv(cov_path);
  if (cov.header.size() < 3 || cov.header[0] != "individual_id" || cov.header[1] != "timestamp" ||
      cov.header[2] != "habitat")
    throw ValidationError(location(cov_path, 1), "header must start with individual_id,timestamp,habitat");
  std::vector<std::size_t> quant_cols;
  std::vector<std::string> quant_names;
  if (config.quantitative.empty()) {
    for (std::size_t c = 3; c < cov.header.size(); ++c) {
      quant_cols.push_back(c);
      quant_names.push_back(cov.header[c]);
    }
  } else {
    for (const auto& name : config.quantitative) {
      auto it = std::find(cov.header.begin(), cov.header.end(), name);
      if (it == cov.header.end() || it - cov.header.begin() < 3)
        throw ValidationError(location(cov_path, 1), "quantitative column '" + name + "' not found");
      quant_cols.push_back(static_cast<std::size_t>(it - cov.header.begin()));
      quant_names.push_back(name);
    }
  }

  struct CovRow {
    std::string habitat;
    std::vector<double> values;
    std::size_t line = 0;
    bool used = false;
  };
  std::map<std::pair<std::string, std::int64_t>, CovRow> cov_rows;
  for (std::size_t r = 0; r < cov.rows.size(); ++r) {
    const auto& f = cov.rows[r];
    const std::string where = location(cov_path, cov.lines[r]);
    CovRow row;
    row.line = cov.lines[r];
    row.habitat = f[2];
    if (auto m = config.habitat_map.find(row.habitat); m != config.habitat_map.end()) row.habitat = m->second;
    for (auto c : quant_cols) {
      row.values.push_back(parse_double(f[c], where));
      if (!std::isfinite(row.values.back())) throw ValidationError(where, "non-finite covariate value");
    }
    auto key = std::make_pair(f[0], parse_int(f[1], where));
    if (!cov_rows.emplace(key, std::move(row)).second) throw ValidationError(where, "duplicate covariate row");
  }

  // Fixes: labels or classification probabilities.
  struct Fix {
    std::int64_t timestamp = 0;
    std::size_t state = 0;
    Eigen::RowVectorXd probs;
    std::size_t line = 0;
  };
  std::map<std::string, std::vector<Fix>> fixes;
  const bool use_probs = config.probabilities.has_value();
  const fs::path fix_path = config.resolve(use_probs ? *config.probabilities : *config.labels);
  const CsvTable ft = read_csv(fix_path);
  if (ft.header.size() < 3 || ft.header[0] != "individual_id" || ft.header[1] != "timestamp")
    throw ValidationError(location(fix_path, 1), "header must start with individual_id,timestamp");
  std::vector<std::size_t> prob_col_state;
  if (use_probs) {
    if (ft.header.size() != 2 + j)
      throw ValidationError(location(fix_path, 1), "expected " + std::to_string(j) + " probability columns");
    bool by_name = true;
    for (std::size_t c = 2; c < ft.header.size(); ++c) {
      auto idx = alphabet.index_of(ft.header[c]);
      if (!idx) by_name = false;
      prob_col_state.push_back(idx.value_or(0));
    }
    if (!by_name || std::set<std::size_t>(prob_col_state.begin(), prob_col_state.end()).size() != j)
      for (std::size_t c = 0; c < j; ++c) prob_col_state[c] = c;  // positional p_1..p_J
  } else if (ft.header.size() != 3 || ft.header[2] != "state") {
    throw ValidationError(location(fix_path, 1), "labels header must be individual_id,timestamp,state");
  }
  for (std::size_t r = 0; r < ft.rows.size(); ++r) {
    const auto& f = ft.rows[r];
    const std::string where = location(fix_path, ft.lines[r]);
    Fix fix;
    fix.line = ft.lines[r];
    fix.timestamp = parse_int(f[1], where);
    if (use_probs) {
      fix.probs = Eigen::RowVectorXd::Zero(static_cast<Eigen::Index>(j));
      for (std::size_t c = 0; c < j; ++c)
        fix.probs[static_cast<Eigen::Index>(prob_col_state[c])] = parse_double(f[2 + c], where);
      const double sum = fix.probs.sum();
      if (!fix.probs.allFinite() || fix.probs.minCoeff() < 0.0 || fix.probs.maxCoeff() > 1.0)
        throw ValidationError(where, "probability outside [0, 1]");
      if (std::abs(sum - 1.0) > 1e-6)
        throw ValidationError(where, "probabilities sum to " + format_double(sum) + ", not 1");
    } else {
      auto idx = alphabet.index_of(f[2]);
      if (!idx) throw ValidationError(where, "unknown state label '" + f[2] + "'");
      fix.state = *idx;
    }
    fixes[f[0]].push_back(std::move(fix));
  }
  if (fixes.empty()) throw ValidationError(fix_path.string(), "no fixes");

  // Individuals and habitats.
  std::vector<std::string> individuals = config.individuals;
  if (individuals.empty()) {
    for (const auto& [id, _] : fixes) individuals.push_back(id);
  } else {
    for (const auto& [id, _] : fixes)
      if (std::find(individuals.begin(), individuals.end(), id) == individuals.end())
        throw ValidationError(fix_path.string(), "individual '" + id + "' is not in the configured individual list");
  }
  std::vector<std::string> habitats = config.habitats;
  if (habitats.empty()) {
    std::set<std::string> seen;
    for (const auto& [_, row] : cov_rows) seen.insert(row.habitat);
    habitats.assign(seen.begin(), seen.end());
  }

  ModelInputs in;
  FitData& data = in.data;
  data.alphabet = alphabet;
  data.layout.individuals = individuals;
  data.layout.habitats = habitats;
  data.layout.quantitative = quant_names;
  if (config.diurnal) {
    data.layout.quantitative.emplace_back("cos_time");
    data.layout.quantitative.emplace_back("sin_time");
  }

  // Align fixes to covariates, individual by individual.
  std::vector<std::size_t> row_habitat;
  std::vector<std::vector<double>> row_quant;
  std::vector<std::size_t> hab_counts(habitats.size(), 0);
  std::vector<std::size_t> state_counts(j, 0);
  for (std::size_t n = 0; n < individuals.size(); ++n) {
    auto it = fixes.find(individuals[n]);
    if (it == fixes.end()) continue;
    auto& list = it->second;
    std::stable_sort(list.begin(), list.end(), [](const Fix& a, const Fix& b) { return a.timestamp < b.timestamp; });
    for (std::size_t t = 1; t < list.size(); ++t)
      if (list[t].timestamp == list[t - 1].timestamp)
        throw ValidationError(location(fix_path, list[t].line), "duplicate timestamp for individual " + individuals[n]);
    const std::size_t first = data.timestamps.size();
    std::vector<std::int64_t> ts;
    ClassificationProbs cp;
    cp.individual_id = individuals[n];
    if (use_probs) cp.probs.resize(static_cast<Eigen::Index>(list.size()), static_cast<Eigen::Index>(j));
    for (std::size_t t = 0; t < list.size(); ++t) {
      const auto& fix = list[t];
      auto cit = cov_rows.find({individuals[n], fix.timestamp});
      if (cit == cov_rows.end())
        throw ValidationError(location(fix_path, fix.line), "no covariate row for individual " + individuals[n] +
                                                                " at timestamp " + std::to_string(fix.timestamp));
      cit->second.used = true;
      auto hit = std::find(habitats.begin(), habitats.end(), cit->second.habitat);
      if (hit == habitats.end())
        throw ValidationError(location(cov_path, cit->second.line), "unknown habitat '" + cit->second.habitat + "'");
      const auto h = static_cast<std::size_t>(hit - habitats.begin());
      ++hab_counts[h];
      row_habitat.push_back(h);
      row_quant.push_back(cit->second.values);
      ts.push_back(fix.timestamp);
      data.timestamps.push_back(fix.timestamp);
      if (use_probs) {
        cp.probs.row(static_cast<Eigen::Index>(t)) = fix.probs;
        Eigen::Index best = 0;
        for (Eigen::Index k = 1; k < fix.probs.size(); ++k)
          if (fix.probs[k] > fix.probs[best]) best = k;
        ++state_counts[static_cast<std::size_t>(best)];
      } else {
        data.labels.push_back(fix.state);
        ++state_counts[fix.state];
      }
    }
    for (const auto& [b, e] : split_on_gaps(ts, config.step_seconds, config.gap_factor))
      data.segments.push_back({n, first + b, e - b});
    if (use_probs) {
      cp.timestamps = ts;
      in.probabilities.push_back(std::move(cp));
    }
    in.report.fixes_per_individual.emplace_back(individuals[n], list.size());
  }
  for (const auto& [key, row] : cov_rows)
    if (!row.used)
      throw ValidationError(location(cov_path, row.line), "covariate row for individual " + key.first +
                                                              " at timestamp " + std::to_string(key.second) +
                                                              " has no matching fix");

  // Standardize the quantitative columns read from file.
  const std::size_t rows = data.timestamps.size();
  in.standardization.names = quant_names;
  for (std::size_t q = 0; q < quant_names.size(); ++q) {
    double mean = 0.0;
    for (const auto& v : row_quant) mean += v[q];
    mean /= static_cast<double>(rows);
    double ss = 0.0;
    for (const auto& v : row_quant) ss += (v[q] - mean) * (v[q] - mean);
    const double sd = rows > 1 ? std::sqrt(ss / static_cast<double>(rows - 1)) : 0.0;
    if (!(sd > 0.0))
      throw ValidationError(cov_path.filename().string(), "covariate column '" + quant_names[q] +
                                                              "' is constant and cannot be standardized (zero sd)");
    in.standardization.means.push_back(mean);
    in.standardization.sds.push_back(sd);
    for (auto& v : row_quant) v[q] = (v[q] - mean) / sd;
  }

  data.design.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(data.layout.width()));
  std::size_t r = 0;
  for (const auto& seg : data.segments) {
    for (std::size_t t = 0; t < seg.length; ++t, ++r) {
      std::vector<double> q = row_quant[r];
      if (config.diurnal) {
        const std::int64_t local = ((data.timestamps[r] + config.solar_offset_seconds) % 86400 + 86400) % 86400;
        const auto [c, s] = diurnal_pair(static_cast<double>(local));
        q.push_back(c);
        q.push_back(s);
      }
      data.design.row(static_cast<Eigen::Index>(r)) = data.layout.encode(seg.individual, row_habitat[r], q).transpose();
    }
  }
  data.validate();

  in.report.n_fixes = rows;
  in.report.n_segments = data.segments.size();
  in.report.n_transitions = data.n_transitions();
  for (std::size_t h = 0; h < habitats.size(); ++h) in.report.habitat_frequency.emplace_back(habitats[h], hab_counts[h]);
  for (std::size_t s = 0; s < j; ++s) in.report.state_frequency.emplace_back(alphabet.label(s), state_counts[s]);
  return in;
}

// ---------------------------------------------------------------- writers

void write_labels_csv(const fs::path& path, const FitData& data, std::span<const std::size_t> labels) {
  if (labels.size() != data.n_rows()) throw DimensionError("labels do not match design rows");
  auto out = open_out(path);
  out << "individual_id,timestamp,state\n";
  for (const auto& seg : data.segments)
    for (std::size_t r = seg.first_row; r < seg.first_row + seg.length; ++r)
      out << csv_field(data.layout.individuals[seg.individual]) << ',' << data.timestamps[r] << ','
          << csv_field(data.alphabet.label(labels[r])) << '\n';
}

void write_probabilities_csv(const fs::path& path, std::span<const ClassificationProbs> probs,
                             const StateAlphabet& alphabet) {
  auto out = open_out(path);
  out << "individual_id,timestamp";
  for (const auto& l : alphabet.labels()) out << ',' << csv_field(l);
  out << '\n';
  for (const auto& p : probs) {
    for (Eigen::Index r = 0; r < p.probs.rows(); ++r) {
      out << csv_field(p.individual_id) << ',' << p.timestamps[static_cast<std::size_t>(r)];
      for (Eigen::Index c = 0; c < p.probs.cols(); ++c) out << ',' << format_double(p.probs(r, c));
      out << '\n';
    }
  }
}

void write_covariates_csv(const fs::path& path, const FitData& data, std::span<const std::string> skip) {
  auto out = open_out(path);
  std::vector<std::size_t> cols;
  out << "individual_id,timestamp,habitat";
  for (std::size_t q = 0; q < data.layout.n_quantitative(); ++q) {
    const auto& name = data.layout.quantitative[q];
    if (std::find(skip.begin(), skip.end(), name) != skip.end()) continue;
    cols.push_back(data.layout.quantitative_offset() + q);
    out << ',' << csv_field(name);
  }
  out << '\n';
  for (const auto& seg : data.segments) {
    for (std::size_t r = seg.first_row; r < seg.first_row + seg.length; ++r) {
      const auto rr = static_cast<Eigen::Index>(r);
      out << csv_field(data.layout.individuals[seg.individual]) << ',' << data.timestamps[r] << ','
          << csv_field(data.layout.habitats.at(habitat_of_row(data, rr)));
      for (auto c : cols) out << ',' << format_double(data.design(rr, static_cast<Eigen::Index>(c)));
      out << '\n';
    }
  }
}

void write_imputations_csv(const fs::path& path, const ImputationSet& set, const FitData& data) {
  if (set.n_fixes() != data.n_rows()) throw DimensionError("imputation set does not match design rows");
  auto out = open_out(path);
  out << "individual_id,timestamp";
  for (std::size_t m = 0; m < set.size(); ++m) out << ",m" << (m + 1);
  out << '\n';
  for (std::size_t r = 0; r < data.n_rows(); ++r) {
    out << csv_field(individual_of_row(data, r)) << ',' << data.timestamps[r];
    for (const auto& d : set.datasets) out << ',' << csv_field(data.alphabet.label(d[r]));
    out << '\n';
  }
}

ImputationSet read_imputations_csv(const fs::path& path, const FitData& data) {
  const CsvTable t = read_csv(path);
  if (t.header.size() < 3 || t.header[0] != "individual_id" || t.header[1] != "timestamp")
    throw ValidationError(location(path, 1), "header must be individual_id,timestamp,m1..mM");
  const std::size_t m = t.header.size() - 2;
  if (t.rows.size() != data.n_rows())
    throw ValidationError(path.string(), "imputation file has " + std::to_string(t.rows.size()) +
                                             " fixes, data has " + std::to_string(data.n_rows()));
  std::map<std::pair<std::string, std::int64_t>, std::size_t> row_of;
  for (std::size_t r = 0; r < data.n_rows(); ++r) row_of[{individual_of_row(data, r), data.timestamps[r]}] = r;
  ImputationSet set;
  set.datasets.assign(m, std::vector<std::size_t>(data.n_rows()));
  std::vector<bool> seen(data.n_rows(), false);
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    const auto& f = t.rows[i];
    const std::string where = location(path, t.lines[i]);
    auto it = row_of.find({f[0], parse_int(f[1], where)});
    if (it == row_of.end()) throw ValidationError(where, "fix does not match any data row");
    if (seen[it->second]) throw ValidationError(where, "duplicate fix");
    seen[it->second] = true;
    for (std::size_t d = 0; d < m; ++d) {
      auto idx = data.alphabet.index_of(f[2 + d]);
      if (!idx) throw ValidationError(where, "unknown state label '" + f[2 + d] + "'");
      set.datasets[d][it->second] = *idx;
    }
  }
  set.offsets.push_back(0);
  for (std::size_t n = 0; n < data.layout.n_individuals(); ++n) {
    std::size_t count = 0;
    for (const auto& seg : data.segments)
      if (seg.individual == n) count += seg.length;
    set.individuals.push_back(data.layout.individuals[n]);
    set.offsets.push_back(set.offsets.back() + count);
  }
  return set;
}

// ---------------------------------------------------------------- chains

void write_chain_binary(const fs::path& path, const PosteriorChain& chain) {
  json meta;
  meta["format"] = "markovpg-chain";
  meta["version"] = 1;
  meta["states"] = chain.alphabet.labels();
  meta["reference"] = chain.alphabet.reference();
  meta["individuals"] = chain.layout.individuals;
  meta["habitats"] = chain.layout.habitats;
  meta["quantitative"] = chain.layout.quantitative;
  meta["chain_index"] = chain.chain_index;
  meta["seed"] = chain.seed;
  meta["n_draws"] = chain.n_draws();
  meta["n_parameters"] = chain.n_parameters();
  meta["parameters"] = chain.parameter_names();
  const std::string text = meta.dump();

  auto out = open_out(path, std::ios::out | std::ios::binary);
  out.write(kChainMagic, sizeof(kChainMagic));
  write_le<std::uint64_t>(out, text.size());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (std::size_t d = 0; d < chain.n_draws(); ++d)
    write_le<std::uint64_t>(out, d < chain.dataset_index.size() ? chain.dataset_index[d] : 0);
  for (Eigen::Index p = 0; p < chain.draws.cols(); ++p)
    for (Eigen::Index d = 0; d < chain.draws.rows(); ++d) write_le<double>(out, chain.draws(d, p));
  if (!out) throw ConfigError("failed writing " + path.string());
}

PosteriorChain read_chain_binary(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError(path.string(), "cannot open chain file");
  char magic[sizeof(kChainMagic)];
  if (!in.read(magic, sizeof(magic)) || std::memcmp(magic, kChainMagic, sizeof(magic)) != 0)
    throw ValidationError(path.string(), "not a markovpg chain file");
  const auto len = read_le<std::uint64_t>(in, path);
  std::string text(len, '\0');
  if (!in.read(text.data(), static_cast<std::streamsize>(len))) throw ValidationError(path.string(), "truncated header");
  PosteriorChain chain;
  std::size_t draws = 0, params = 0;
  try {
    const json meta = json::parse(text);
    chain.alphabet = StateAlphabet(meta.at("states").get<std::vector<std::string>>(), meta.at("reference").get<std::size_t>());
    chain.layout.individuals = meta.at("individuals").get<std::vector<std::string>>();
    chain.layout.habitats = meta.at("habitats").get<std::vector<std::string>>();
    chain.layout.quantitative = meta.at("quantitative").get<std::vector<std::string>>();
    chain.chain_index = meta.at("chain_index").get<std::size_t>();
    chain.seed = meta.at("seed").get<std::uint64_t>();
    draws = meta.at("n_draws").get<std::size_t>();
    params = meta.at("n_parameters").get<std::size_t>();
  } catch (const json::exception& e) {
    throw ValidationError(path.string(), std::string("bad chain header: ") + e.what());
  }
  const std::size_t j = chain.alphabet.size();
  if (params != j * (j - 1) * chain.layout.width() + j * (j - 1))
    throw ValidationError(path.string(), "parameter count does not match the declared layout");
  chain.dataset_index.resize(draws);
  for (auto& d : chain.dataset_index) d = read_le<std::uint64_t>(in, path);
  chain.draws.resize(static_cast<Eigen::Index>(draws), static_cast<Eigen::Index>(params));
  for (Eigen::Index p = 0; p < chain.draws.cols(); ++p)
    for (Eigen::Index d = 0; d < chain.draws.rows(); ++d) chain.draws(d, p) = read_le<double>(in, path);
  return chain;
}

void write_chain_csv(const fs::path& path, const PosteriorChain& chain) {
  auto out = open_out(path);
  out << "draw,dataset";
  for (const auto& n : chain.parameter_names()) out << ',' << csv_field(n);
  out << '\n';
  for (Eigen::Index d = 0; d < chain.draws.rows(); ++d) {
    out << d << ',' << (static_cast<std::size_t>(d) < chain.dataset_index.size() ? chain.dataset_index[static_cast<std::size_t>(d)] : 0);
    for (Eigen::Index p = 0; p < chain.draws.cols(); ++p) out << ',' << format_double(chain.draws(d, p));
    out << '\n';
  }
}

PosteriorChain read_chain_csv(const fs::path& path, const PosteriorChain& like) {
  const CsvTable t = read_csv(path);
  PosteriorChain chain;
  chain.alphabet = like.alphabet;
  chain.layout = like.layout;
  chain.chain_index = like.chain_index;
  chain.seed = like.seed;
  const auto names = chain.parameter_names();
  if (t.header.size() != names.size() + 2) throw ValidationError(location(path, 1), "column count does not match layout");
  for (std::size_t c = 0; c < names.size(); ++c)
    if (t.header[c + 2] != names[c]) throw ValidationError(location(path, 1), "unexpected column '" + t.header[c + 2] + "'");
  chain.draws.resize(static_cast<Eigen::Index>(t.rows.size()), static_cast<Eigen::Index>(names.size()));
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const std::string where = location(path, t.lines[r]);
    chain.dataset_index.push_back(static_cast<std::size_t>(parse_int(t.rows[r][1], where)));
    for (std::size_t c = 0; c < names.size(); ++c)
      chain.draws(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = parse_double(t.rows[r][c + 2], where);
  }
  return chain;
}

// ---------------------------------------------------------------- truth

void write_truth_csv(const fs::path& path, const CoefficientState& truth, const StateAlphabet& alphabet,
                     const DesignLayout& layout) {
  PosteriorChain naming;
  naming.alphabet = alphabet;
  naming.layout = layout;
  const auto names = naming.parameter_names();
  std::vector<double> flat(truth.n_parameters());
  truth.flatten(flat);
  auto out = open_out(path);
  out << "parameter,value\n";
  for (std::size_t p = 0; p < names.size(); ++p) out << csv_field(names[p]) << ',' << format_double(flat[p]) << '\n';
}

CoefficientState read_truth_csv(const fs::path& path, const StateAlphabet& alphabet, const DesignLayout& layout) {
  PosteriorChain naming;
  naming.alphabet = alphabet;
  naming.layout = layout;
  const auto names = naming.parameter_names();
  const CsvTable t = read_csv(path);
  if (t.header != std::vector<std::string>{"parameter", "value"})
    throw ValidationError(location(path, 1), "header must be parameter,value");
  std::map<std::string, double> values;
  for (std::size_t r = 0; r < t.rows.size(); ++r) values[t.rows[r][0]] = parse_double(t.rows[r][1], location(path, t.lines[r]));
  std::vector<double> flat;
  for (const auto& n : names) {
    auto it = values.find(n);
    if (it == values.end()) throw ValidationError(path.string(), "missing parameter '" + n + "'");
    flat.push_back(it->second);
  }
  return CoefficientState::unflatten(flat, alphabet.size(), layout.width());
}

// ---------------------------------------------------------------- summaries

namespace {
const char* block_name(DesignLayout::Block b) {
  switch (b) {
    case DesignLayout::Block::kIndividual: return "individual";
    case DesignLayout::Block::kHabitat: return "habitat";
    case DesignLayout::Block::kQuantitative: break;
  }
  return "quantitative";
}
}  // namespace

void write_summary_csv(const fs::path& path, std::span<const CoefficientSummary> rows, const StateAlphabet& alphabet) {
  auto out = open_out(path);
  out << "from,to,block,covariate,mean,lower95,upper95,or_mean,or_lower95,or_upper95,prop_or_gt1,significance\n";
  for (const auto& s : rows) {
    out << csv_field(alphabet.label(s.from_state)) << ',' << csv_field(alphabet.label(s.to_state)) << ','
        << block_name(s.block) << ',' << csv_field(s.covariate) << ',' << format_double(s.mean) << ','
        << format_double(s.lower) << ',' << format_double(s.upper) << ',' << format_double(s.or_mean) << ','
        << format_double(s.or_lower) << ',' << format_double(s.or_upper) << ',' << format_double(s.prop_or_gt1) << ','
        << (s.block == DesignLayout::Block::kQuantitative ? to_string(s.call) : "") << '\n';
  }
}

void write_interval_long_csv(const fs::path& path, std::span<const CoefficientSummary> rows,
                             const StateAlphabet& alphabet) {
  auto out = open_out(path);
  out << "from,to,block,covariate,scale,mean,lower,upper\n";
  for (const auto& s : rows) {
    const std::string prefix = csv_field(alphabet.label(s.from_state)) + ',' + csv_field(alphabet.label(s.to_state)) +
                               ',' + block_name(s.block) + ',' + csv_field(s.covariate) + ',';
    out << prefix << "coefficient," << format_double(s.mean) << ',' << format_double(s.lower) << ','
        << format_double(s.upper) << '\n';
    out << prefix << "odds_ratio," << format_double(s.or_mean) << ',' << format_double(s.or_lower) << ','
        << format_double(s.or_upper) << '\n';
  }
}

void write_pairwise_matrix_csv(const fs::path& path, const PairwiseMatrix& m, const DesignLayout& layout) {
  auto out = open_out(path);
  out << "habitat";
  for (const auto& h : layout.habitats) out << ',' << csv_field(h);
  out << '\n';
  for (Eigen::Index a = 0; a < m.proportion.rows(); ++a) {
    out << csv_field(layout.habitats[static_cast<std::size_t>(a)]);
    for (Eigen::Index b = 0; b < m.proportion.cols(); ++b) {
      out << ',';
      if (a != b) out << format_double(m.proportion(a, b));
    }
    out << '\n';
  }
}

}  // namespace markovpg
