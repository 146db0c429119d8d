#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "markovpg/gibbs.hpp"
#include "markovpg/imputation.hpp"
#include "markovpg/model.hpp"
#include "markovpg/summary.hpp"

namespace markovpg {

// Everything needed to reproduce a run. Relative paths resolve against
// base_dir (the directory of the config file). File schemas are documented
// in docs/formats.md.
struct RunConfig {
  std::filesystem::path base_dir = ".";
  std::vector<std::string> states;
  std::optional<std::string> reference_state;  // default: last state
  std::optional<std::filesystem::path> labels;
  std::optional<std::filesystem::path> probabilities;
  std::optional<std::filesystem::path> covariates;
  std::optional<std::filesystem::path> imputations;
  std::vector<std::string> individuals;   // optional explicit order; default sorted ids
  std::vector<std::string> habitats;      // optional explicit order; default sorted names
  std::vector<std::string> quantitative;  // optional column subset; default all extra columns
  std::map<std::string, std::string> habitat_map;  // raw habitat -> grouped habitat
  bool diurnal = false;                   // append cos/sin of local solar time
  std::int64_t solar_offset_seconds = 0;  // added to timestamps before taking time of day
  std::int64_t step_seconds = 360;
  double gap_factor = 1.5;
  PriorSpec priors;
  SamplerConfig sampler;
  std::size_t m_imputations = 200;
  std::size_t gof_draws = 200;

  std::filesystem::path resolve(const std::filesystem::path& p) const;
  StateAlphabet alphabet() const;
};

RunConfig parse_config(std::string_view json_text, const std::filesystem::path& base_dir);
// Accepts either a config file or a run manifest (which embeds the config).
RunConfig load_config(const std::filesystem::path& path);
// Paths are written resolved and absolute unless `absolute_paths` is false.
std::string config_to_json(const RunConfig& config, bool absolute_paths = true);

struct Standardization {
  std::vector<std::string> names;
  std::vector<double> means;
  std::vector<double> sds;
};

struct ValidationReport {
  std::size_t n_fixes = 0;
  std::size_t n_segments = 0;
  std::size_t n_transitions = 0;
  std::vector<std::pair<std::string, std::size_t>> fixes_per_individual;
  std::vector<std::pair<std::string, std::size_t>> habitat_frequency;
  std::vector<std::pair<std::string, std::size_t>> state_frequency;  // labels or argmax
  std::string to_text() const;
};

struct ModelInputs {
  FitData data;                                   // labels filled when a labels file is used
  std::vector<ClassificationProbs> probabilities;  // filled when a probabilities file is used
  Standardization standardization;
  ValidationReport report;
};

// Parses, aligns and validates the configured files. Throws ValidationError
// naming the file and row on misaligned timestamps, unknown labels,
// non-stochastic probability rows or constant covariate columns.
ModelInputs load_inputs(const RunConfig& config);

// Minimal CSV reader: header plus rows, with 1-based file line numbers.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::size_t> lines;
};
CsvTable read_csv(const std::filesystem::path& path);

void write_labels_csv(const std::filesystem::path& path, const FitData& data, std::span<const std::size_t> labels);
void write_probabilities_csv(const std::filesystem::path& path, std::span<const ClassificationProbs> probs,
                             const StateAlphabet& alphabet);
// Writes individual_id,timestamp,habitat plus every quantitative column not in `skip`.
void write_covariates_csv(const std::filesystem::path& path, const FitData& data,
                          std::span<const std::string> skip = {});
void write_imputations_csv(const std::filesystem::path& path, const ImputationSet& set, const FitData& data);
// Reads an imputation file and aligns it to data's rows.
ImputationSet read_imputations_csv(const std::filesystem::path& path, const FitData& data);

// Columnar binary chain export; see docs/formats.md.
void write_chain_binary(const std::filesystem::path& path, const PosteriorChain& chain);
PosteriorChain read_chain_binary(const std::filesystem::path& path);
void write_chain_csv(const std::filesystem::path& path, const PosteriorChain& chain);
PosteriorChain read_chain_csv(const std::filesystem::path& path, const PosteriorChain& like);

void write_truth_csv(const std::filesystem::path& path, const CoefficientState& truth, const StateAlphabet& alphabet,
                     const DesignLayout& layout);
CoefficientState read_truth_csv(const std::filesystem::path& path, const StateAlphabet& alphabet,
                                const DesignLayout& layout);

void write_summary_csv(const std::filesystem::path& path, std::span<const CoefficientSummary> rows,
                       const StateAlphabet& alphabet);
// Long-format interval table (one row per coefficient and scale) for plotting.
void write_interval_long_csv(const std::filesystem::path& path, std::span<const CoefficientSummary> rows,
                             const StateAlphabet& alphabet);
// Square matrix with blank diagonal.
void write_pairwise_matrix_csv(const std::filesystem::path& path, const PairwiseMatrix& m, const DesignLayout& layout);

std::string format_double(double v);

}  // namespace markovpg
