// Copyright 2026 The matnav Developers
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//   http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or
// implied. See the License for the specific language governing
// permissions and limitations under the License.

#pragma once

/// @file
/// Three-stage orchestration over a run directory:
///
///   {run}/config.json  state.json
///   {run}/stage1/  records.json bands.json criterion.json retrieved.json manifest.json
///   {run}/stage2/  debye_table.json fetch.json dataset.csv model.json eval.json skipped.json manifest.json
///   {run}/stage3/  candidates.json hull.json ranked_table.csv distribution.json report.json
///                  cif/{candidate}.cif manifest.json
///   {run}/cache/   database responses and derived tables
///
/// Nothing time-dependent is written, so equal configs give byte-equal
/// run directories.

#include <matnav/evidence.hpp>
#include <matnav/predictor.hpp>
#include <matnav/stability.hpp>
#include <matnav/structgen.hpp>

#include <json.hpp>

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace matnav {

inline constexpr const char* run_root_env = "MKNA_RUN_ROOT";

struct EvidenceParams {
    std::string corpus_dir = "corpus";
    std::size_t window = 500;
    std::size_t overlap = 100;
    std::size_t top_k = 100;
    std::size_t batch_size = 5;
    double granularity = 50;
    std::size_t min_records = 10;
};

struct DatabaseParams {
    std::string base_url;          ///< ignored when stub_db is set
    std::string stub_db;           ///< serve this JSON file in-process
    std::string api_key;           ///< empty: MKNA_DB_KEY
    std::string cache_dir;         ///< empty: {run}/cache
    std::vector<std::string> material_ids;
    long timeout_ms = 30000;
    int retry_budget = 3;
};

struct PredictorParams {
    std::string kind = "ridge"; ///< ridge, lookup or external
    double lambda = 1.0;
    bool cross_validate = false;
    double test_fraction = 0.2;
    bool include_literature = true;
    std::string table;                ///< lookup: CSV formula,theta_d_K
    std::vector<std::string> command; ///< external: argv
};

struct StabilityParams {
    double threshold = 0.05; ///< eV/atom, strict
    std::string references;
    std::string energies;
};

struct RunConfig {
    std::string query = "materials with high Debye temperature";
    std::uint64_t seed = 0;
    unsigned workers = 0;
    EvidenceParams evidence;
    DatabaseParams database;
    PredictorParams predictor;
    GenConfig generation; ///< seed and workers mirror the fields above
    std::vector<std::string> prototypes;
    StabilityParams stability;
    double bin_width = 100; ///< K
    std::string host = "127.0.0.1";
    int port = 8080;

    /// Relative paths resolve against this directory; not serialized.
    std::filesystem::path base_dir = ".";

    /// Throws Error(ConfigError).
    void validate() const;
    std::filesystem::path resolve(const std::string& p) const;
};

nlohmann::json run_config_to_json(const RunConfig& c);
/// Missing keys take defaults. Throws Error(ConfigError).
RunConfig run_config_from_json(const nlohmann::json& j, std::filesystem::path base_dir = ".");
RunConfig load_run_config(const std::filesystem::path& path);

// ------------------------------------------------------------------ run state

enum class StageStatus { pending, running, done, failed };
std::string to_string(StageStatus s);

struct StageState {
    StageStatus status = StageStatus::pending;
    std::vector<std::string> artifacts; ///< relative to the run directory
    nlohmann::json diagnostics = nlohmann::json::array();
};

struct RunState {
    std::string run_id;
    std::array<StageState, 3> stages;
    nlohmann::json criterion; ///< null until stage 1 is done
    std::map<std::string, std::size_t> counts;
    std::vector<std::string> log;

    const StageState& stage(int n) const { return stages.at(static_cast<std::size_t>(n - 1)); }
    StageState& stage(int n) { return stages.at(static_cast<std::size_t>(n - 1)); }
};

nlohmann::json run_state_to_json(const RunState& s);
RunState run_state_from_json(const nlohmann::json& j);

/// Creates the directory, config.json and a pending state.json.
/// Throws Error(ConfigError) if the directory holds a different config.
void init_run_dir(const std::filesystem::path& dir, const RunConfig& cfg, const std::string& run_id);
RunState load_run_state(const std::filesystem::path& dir);
void save_run_state(const std::filesystem::path& dir, const RunState& s);

/// Marks stage n running. Throws Error(AlreadyRunning) when any stage
/// of the run is running and Error(StageOrder) when stage n-1 is not
/// done, unless `force` (which is recorded in the log). Rejections are
/// logged too. Later stages are reset to pending.
RunState begin_stage(const std::filesystem::path& dir, int n, bool force = false);

/// Executes a stage that begin_stage marked running and records done or
/// failed with diagnostics; the error is rethrown after recording.
void complete_stage(const RunConfig& cfg, const std::filesystem::path& dir, int n);

inline void run_stage(const RunConfig& cfg, const std::filesystem::path& dir, int n, bool force = false) {
    begin_stage(dir, n, force);
    complete_stage(cfg, dir, n);
}

/// Display form, e.g. "Θ_D > 800 K" for the Debye temperature.
std::string criterion_label(const ScreeningCriterion& c);

/// Error payload recorded for a failed stage and returned by the service.
nlohmann::json error_to_json(const std::exception& e);

// --------------------------------------------------------- screening and plots

struct ScreenResult {
    std::vector<Candidate> stable; ///< ranked by predicted theta_D, descending
    std::vector<Candidate> rejected;
    std::vector<nlohmann::json> hull; ///< one record per candidate with an energy
    std::map<std::string, std::size_t> rejection_counts;
};

/// predict -> criterion -> formation energy -> strict e_hull filter ->
/// rank. Candidates the predictor has no value for (Error(NotFound)) are
/// rejected as "no_prediction"; other predictor errors propagate.
ScreenResult screen_candidates(std::vector<Candidate> candidates, Predictor& predictor,
                               const ScreeningCriterion& criterion, const EnergyProvider& energies,
                               const std::vector<ReferencePhase>& refs, double threshold, unsigned workers = 0);

/// Rank, id, formula, theta_d_K, e_hull_eV_per_atom.
std::string ranked_table_csv(const std::vector<Candidate>& stable);

struct SeriesSummary {
    std::size_t n = 0;
    std::vector<std::size_t> counts; ///< one per bin
    double bandwidth = 0;            ///< K
    std::vector<double> density;     ///< KDE at DistributionSummary::grid, 1/K
};

struct DistributionSummary {
    std::vector<double> edges; ///< shared, multiples of the bin width
    std::vector<double> grid;  ///< kde_points values from the first to the last edge
    std::map<std::string, SeriesSummary> series;
};

inline constexpr std::size_t kde_points = 256;

/// Bins are [e_i, e_i+1) except the last, which is closed. Gaussian
/// KDE with Silverman's bandwidth 0.9 min(sd, IQR/1.34) n^-1/5, falling
/// back to sd when the IQR is 0 and to bin_width / 4 for a constant
/// series. Throws Error(EmptySeries).
DistributionSummary summarize_distribution(const std::map<std::string, std::vector<double>>& series,
                                           double bin_width = 100);
nlohmann::json distribution_to_json(const DistributionSummary& d);

} // namespace matnav
