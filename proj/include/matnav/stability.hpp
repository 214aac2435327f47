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
/// Energy above the lower convex envelope of reference formation
/// energies, via a dense two-phase simplex.

#include <matnav/core.hpp>
#include <matnav/structgen.hpp>

#include <Eigen/Dense>
#include <json.hpp>

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace matnav {

struct LpSolution {
    Eigen::VectorXd x;
    double objective = 0;
};

/// minimize c.x subject to A x = b, x >= 0 (two-phase simplex, Bland's
/// rule). Rows with negative b are negated. nullopt when infeasible;
/// Error(InvalidArgument) when unbounded.
std::optional<LpSolution> solve_lp(const Eigen::MatrixXd& A, const Eigen::VectorXd& b, const Eigen::VectorXd& c);

struct ReferencePhase {
    Composition composition; ///< reduced
    double e_form = 0;       ///< eV/atom
    std::string source;
};

std::string phase_label(const ReferencePhase& p);

struct HullPoint {
    double energy = 0;
    std::vector<std::pair<std::size_t, double>> weights; ///< (index into refs, lambda)
};

/// Lower-envelope energy at atom fractions `x`.
/// Throws Error(InfeasibleComposition) when no mixture of refs matches x.
HullPoint hull_point(const std::map<Element, double>& x, const std::vector<ReferencePhase>& refs);

inline double hull_energy_at(const std::map<Element, double>& x, const std::vector<ReferencePhase>& refs) {
    return hull_point(x, refs).energy;
}

struct HullResult {
    double e_hull = 0;      ///< >= 0
    double hull_energy = 0; ///< envelope of refs at the query composition
    std::vector<std::pair<ReferencePhase, double>> decomposition;
};

/// e_hull = max(0, e_form - hull_energy_at(c, refs)). A query below the
/// envelope is its own decomposition.
HullResult energy_above_hull(const Composition& c, double e_form, const std::vector<ReferencePhase>& refs);

nlohmann::json hull_result_to_json(const std::string& id, double e_form, const HullResult& r, bool stable);

struct StabilityPartition {
    std::vector<Candidate> stable;
    std::vector<Candidate> rejected;
};

/// Strict e_hull < threshold. Throws Error(MissingEnergy) for a
/// candidate without e_form.
StabilityPartition filter_stable(std::vector<Candidate> candidates, const std::vector<ReferencePhase>& refs,
                                 double threshold = 0.05, unsigned workers = 0);

/// CSV with header formula,e_form_eV_per_atom[,source].
/// Throws Error(IoError) or Error(SchemaViolation).
std::vector<ReferencePhase> load_reference_csv(const std::filesystem::path& path);

class EnergyProvider {
public:
    virtual ~EnergyProvider() = default;
    virtual std::optional<double> formation_energy(const Structure& s) const = 0;
    virtual std::string source() const = 0;
};

/// Formation energies keyed by reduced formula; the lowest value wins
/// for repeated formulas.
class TableEnergyProvider final : public EnergyProvider {
public:
    TableEnergyProvider(std::vector<ReferencePhase> phases, std::string source);
    std::optional<double> formation_energy(const Structure& s) const override;
    std::string source() const override { return source_; }
    std::size_t size() const noexcept { return table_.size(); }

private:
    std::map<std::string, double> table_;
    std::string source_;
};

/// Relaxed energies computed outside matnav, in the reference CSV format.
TableEnergyProvider file_energy_provider(const std::filesystem::path& csv);

} // namespace matnav
