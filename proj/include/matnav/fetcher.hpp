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
/// Materials-database client with an on-disk response cache, and the
/// generate / execute / validate / repair loop for property tables.

#include <matnav/core.hpp>
#include <matnav/elasticity.hpp>
#include <matnav/error.hpp>

#include <json.hpp>

#include <atomic>
#include <chrono>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace matnav {

/// Name of the environment variable holding the database credential.
inline constexpr const char* db_key_env = "MKNA_DB_KEY";

struct DbConfig {
    std::string base_url;  ///< e.g. "https://api.example.org" or "http://127.0.0.1:8081"
    std::string api_key;   ///< empty: read MKNA_DB_KEY
    std::filesystem::path cache_dir;
    std::chrono::milliseconds timeout{30000};
};

/// Exactly one selector must be set.
struct StructureFilter {
    std::vector<std::string> ids;
    std::vector<std::string> elements; ///< materials made only of these elements
    std::string formula;               ///< reduced formula
};

struct DbEntry {
    std::string material_id;
    std::string formula;
    Structure structure;
    std::optional<double> formation_energy_per_atom;
};

struct ElasticEntry {
    std::string material_id;
    std::string formula;
    ElasticTensor tensor;
    Structure structure;
};

struct SkipRecord {
    std::string material_id;
    std::string reason;
};

struct ElasticityResult {
    std::vector<ElasticEntry> entries;
    std::vector<SkipRecord> skipped;
};

/// Structure from the database wire format:
/// {lattice: {matrix: 3x3}, sites: [{species: [{element, occu}], abc: [x,y,z]}]}.
/// Throws Error(DecodeError).
Structure structure_from_wire(const nlohmann::json& j, const std::string& id);
nlohmann::json structure_to_wire(const Structure& s);

/// 6x6 matrix from JSON, symmetrized. Throws Error(DecodeError).
ElasticTensor tensor_from_wire(const nlohmann::json& j);

class DbClient {
public:
    explicit DbClient(DbConfig config);

    /// Throws NetworkError, AuthError, DecodeError, or InvalidArgument
    /// for an empty filter.
    std::vector<DbEntry> get_structures(const StructureFilter& filter);

    /// Tensors are symmetrized on ingest; ids without elasticity or
    /// structure are reported in `skipped`.
    ElasticityResult get_elasticity(const std::vector<std::string>& ids);

    /// Cached GET returning the decoded JSON body.
    nlohmann::json get(const std::string& path, const std::map<std::string, std::string>& params);

    /// Requests that reached the network (cache misses).
    std::size_t network_calls() const noexcept { return network_calls_.load(); }

    const DbConfig& config() const noexcept { return config_; }

private:
    DbConfig config_;
    std::atomic<std::size_t> network_calls_{0};
};

/// Local HTTP server speaking the client's endpoints over a JSON file of
/// materials; used by tests and offline runs.
class StubDbServer {
public:
    /// `db` holds {"materials": [...]}; requests must carry `api_key`.
    StubDbServer(nlohmann::json db, std::string api_key, int port = 0);
    ~StubDbServer();
    StubDbServer(const StubDbServer&) = delete;
    StubDbServer& operator=(const StubDbServer&) = delete;

    int port() const noexcept;
    std::string base_url() const;
    std::size_t requests() const noexcept;
    /// Block until stop() is called from another thread.
    void wait();
    void stop();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

// ------------------------------------------------------------------ tables

struct PropertySpec {
    std::string name;
    std::string unit;
    double min = 0;
    double max = 0;
    std::vector<std::string> required_columns{"material_id", "formula", "value", "unit"};
};

/// Spec used for Debye-temperature tables.
PropertySpec debye_spec();

nlohmann::json spec_to_json(const PropertySpec& s);

struct PropertyRow {
    std::string material_id;
    std::string formula;
    double value = 0;

    bool operator==(const PropertyRow& o) const {
        return material_id == o.material_id && formula == o.formula &&
               (value == o.value || (value != value && o.value != o.value));
    }
};

struct PropertyTable {
    std::vector<std::string> columns;
    std::string unit;
    std::vector<PropertyRow> rows;

    bool operator==(const PropertyTable&) const = default;
};

nlohmann::json table_to_json(const PropertyTable& t);
/// Throws Error(DecodeError).
PropertyTable table_from_json(const nlohmann::json& j);

struct CheckResult {
    std::string name;
    bool passed = false;
    std::string diagnostic;
};

struct ValidationReport {
    bool passed = false;
    std::vector<CheckResult> checks; ///< non_empty, schema, finite, range, unit

    const CheckResult* check(std::string_view name) const;
    std::vector<std::string> failed() const;
};

ValidationReport validate_table(const PropertyTable& t, const PropertySpec& spec);

// ---------------------------------------------------------------- routines

struct RoutineStep {
    std::string op; ///< debye_temperature, select_field, scale, drop_nonfinite,
                    ///< drop_out_of_range, set_unit, sleep_ms, raise
    nlohmann::json args = nlohmann::json::object();
};

/// Declarative retrieval routine interpreted by RoutineRunner.
struct RoutineDescriptor {
    std::string endpoint; ///< "elasticity", "summary" or "literal"
    std::vector<std::string> ids;
    nlohmann::json literal_rows = nlohmann::json::array(); ///< [{material_id, formula, value}]
    std::string unit;
    std::vector<RoutineStep> steps;
};

nlohmann::json routine_to_json(const RoutineDescriptor& r);
RoutineDescriptor routine_from_json(const nlohmann::json& j);

struct Diagnostic {
    int attempt = 0;
    std::string kind; ///< "execution" or "validation"
    std::string message;
    std::vector<std::string> failed_checks;
};

nlohmann::json diagnostic_to_json(const Diagnostic& d);

class RoutineSource {
public:
    virtual ~RoutineSource() = default;
    /// Called once per attempt with every diagnostic gathered so far.
    virtual RoutineDescriptor produce(const PropertySpec& spec,
                                      const std::vector<Diagnostic>& prior) = 0;
    /// Distinguishes cache entries of sources that share a spec.
    virtual std::string cache_tag() const { return {}; }
};

/// Starts from an elasticity -> Debye routine and appends the filter
/// step matching each failed check of the previous attempt.
class TemplateRoutineSource final : public RoutineSource {
public:
    explicit TemplateRoutineSource(std::vector<std::string> ids);
    RoutineDescriptor produce(const PropertySpec& spec,
                              const std::vector<Diagnostic>& prior) override;
    std::string cache_tag() const override;

private:
    std::vector<std::string> ids_;
};

/// Replays a fixed list of routines, recording what it was shown.
class ScriptedRoutineSource final : public RoutineSource {
public:
    explicit ScriptedRoutineSource(std::vector<RoutineDescriptor> script, std::string tag = {});
    RoutineDescriptor produce(const PropertySpec& spec,
                              const std::vector<Diagnostic>& prior) override;
    std::string cache_tag() const override { return tag_; }

    /// Size of `prior` at each call.
    const std::vector<std::size_t>& seen() const noexcept { return seen_; }

private:
    std::vector<RoutineDescriptor> script_;
    std::string tag_;
    std::size_t next_ = 0;
    std::vector<std::size_t> seen_;
};

/// Executes routine descriptors; writes only below `scratch_dir`.
class RoutineRunner {
public:
    RoutineRunner(DbClient* client, std::filesystem::path scratch_dir);

    /// Throws Error(Timeout) past `deadline`, Error(ExternalProcess) for a
    /// failing step, or the client's errors.
    PropertyTable execute(const RoutineDescriptor& r,
                          std::chrono::steady_clock::time_point deadline, int attempt = 1);

    const std::filesystem::path& scratch_dir() const noexcept { return scratch_; }

private:
    DbClient* client_;
    std::filesystem::path scratch_;
};

struct RepairOptions {
    int budget = 3;
    std::chrono::milliseconds timeout{120000}; ///< per attempt
    std::filesystem::path cache_dir;           ///< empty: no caching
};

struct FetchResult {
    PropertyTable table;
    int attempts = 0;
    bool from_cache = false;
    std::vector<Diagnostic> diagnostics;
};

class BudgetExhaustedError : public Error {
public:
    BudgetExhaustedError(const std::string& message, std::vector<Diagnostic> diagnostics)
        : Error(ErrorKind::BudgetExhausted, message), diagnostics_(std::move(diagnostics)) {}
    const std::vector<Diagnostic>& diagnostics() const noexcept { return diagnostics_; }

private:
    std::vector<Diagnostic> diagnostics_;
};

/// Produce, execute and validate routines until one passes or the
/// budget runs out. Throws BudgetExhaustedError, Error(Timeout) or
/// Error(AuthError); other execution errors become diagnostics.
FetchResult fetch_with_repair(const PropertySpec& spec, RoutineSource& source, RoutineRunner& runner,
                              const RepairOptions& options = {});

/// Debye-temperature table for `ids` through the repair loop.
FetchResult derive_debye_table(DbClient& client, const std::vector<std::string>& ids,
                               const std::filesystem::path& scratch_dir,
                               const RepairOptions& options = {});

} // namespace matnav
