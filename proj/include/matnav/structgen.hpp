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
/// Candidate generation: supercell expansion, group-wise substitution,
/// Gaussian perturbation and validity filters.

#include <matnav/core.hpp>
#include <matnav/random.hpp>

#include <json.hpp>

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace matnav {

/// Sets of mutually interchangeable elements.
class SubstitutionRules {
public:
    SubstitutionRules() = default;
    /// Throws Error(InvalidArgument) when two groups share an element.
    explicit SubstitutionRules(std::vector<std::vector<Element>> groups);

    const std::vector<std::vector<Element>>& groups() const noexcept { return groups_; }
    /// nullptr for elements outside every group.
    const std::vector<Element>* group_of(Element e) const;

private:
    std::vector<std::vector<Element>> groups_;
};

/// Main groups 1, 2, 13, 14, 15, 16 and 17 without H and the
/// radioactive members.
SubstitutionRules default_substitution_rules();

nlohmann::json rules_to_json(const SubstitutionRules& r);
SubstitutionRules rules_from_json(const nlohmann::json& j);

struct GenConfig {
    std::array<int, 3> supercell{2, 2, 2};
    double p_sub = 0.15;
    double sigma = 0.03;           ///< Angstrom
    double min_dist_factor = 0.6;
    std::uint64_t seed = 0;
    std::size_t count = 100;       ///< generation attempts
    unsigned workers = 0;          ///< 0: hardware concurrency
    SubstitutionRules rules = default_substitution_rules();

    /// Throws Error(ConfigError).
    void validate() const;
};

nlohmann::json gen_config_to_json(const GenConfig& c);
GenConfig gen_config_from_json(const nlohmann::json& j);

enum class CandidateStatus { generated, predicted, validated, rejected };

std::string_view to_string(CandidateStatus s);

struct Operation {
    std::string op;
    nlohmann::json params = nlohmann::json::object();
};

struct Candidate {
    std::string id;
    Structure structure;
    std::string parent_id;
    std::vector<Operation> ops_log;
    std::optional<double> predicted_theta_d;
    std::optional<double> e_form;
    std::optional<double> e_hull;
    CandidateStatus status = CandidateStatus::generated;
    std::string rejection_reason;

    /// Moves forward along generated -> predicted -> validated, or to
    /// rejected from any live state. Throws Error(InvalidArgument) otherwise.
    void advance(CandidateStatus next, std::string reason = {});
};

nlohmann::json candidate_to_json(const Candidate& c);

Structure make_supercell(const Structure& s, std::array<int, 3> dims);

struct SubstitutionChange {
    std::size_t site;
    Element from;
    Element to;
};

/// Each site whose element has a group of two or more members is
/// replaced with probability p by a different member drawn uniformly.
Structure substitute(const Structure& s, const SubstitutionRules& rules, double p, CounterRng& rng,
                     std::vector<SubstitutionChange>* changes = nullptr);

/// Cartesian Gaussian displacement of every site; lattice untouched.
Structure perturb(const Structure& s, double sigma, CounterRng& rng);

/// Shortest distance between sites i and j (i == j: nearest self image).
double periodic_distance(const Structure& s, std::size_t i, std::size_t j);

/// Throws Error(MissingRadius).
bool min_distance_ok(const Structure& s, double factor);

using OxidationTable = std::map<Element, std::vector<int>>;

/// Throws Error(MissingOxidationStates) for elements absent from `table`.
bool charge_neutral_possible(const Composition& c, const OxidationTable& table);
/// Uses the embedded oxidation-state table.
bool charge_neutral_possible(const Composition& c);

/// Hex digest equal for structures related by site permutation or a
/// rigid translation.
std::string dedup_key(const Structure& s);

struct GenerationResult {
    std::vector<Candidate> accepted;
    std::vector<Candidate> rejected;
    std::map<std::string, std::size_t> rejection_counts;
};

/// Throws Error(NoPrototypes) or Error(ConfigError).
GenerationResult generate(const std::vector<Structure>& prototypes, const GenConfig& cfg);

/// Manifest listing accepted candidates and rejection statistics.
nlohmann::json generation_manifest(const GenerationResult& r);

} // namespace matnav
