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

#include <matnav/stability.hpp>
#include <matnav/error.hpp>
#include <matnav/hash.hpp>
#include <matnav/parallel.hpp>

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

namespace matnav {

namespace {

constexpr double pivot_eps = 1e-11;

struct Tableau {
    Eigen::MatrixXd t; // rows 0..m-1 constraints, row m reduced costs; last column rhs
    std::vector<Eigen::Index> basis;
    Eigen::Index m, cols;

    void pivot(Eigen::Index r, Eigen::Index c) {
        t.row(r) /= t(r, c);
        for (Eigen::Index i = 0; i <= m; ++i)
            if (i != r && t(i, c) != 0)
                t.row(i) -= t(i, c) * t.row(r);
        basis[r] = c;
    }

    /// Bland's rule over columns [0, allowed). Returns false if unbounded.
    bool run(Eigen::Index allowed) {
        const Eigen::Index rhs = cols;
        while (true) {
            Eigen::Index enter = -1;
            for (Eigen::Index j = 0; j < allowed; ++j)
                if (t(m, j) < -pivot_eps) {
                    enter = j;
                    break;
                }
            if (enter < 0)
                return true;
            Eigen::Index leave = -1;
            double best = 0;
            for (Eigen::Index i = 0; i < m; ++i) {
                if (t(i, enter) <= pivot_eps)
                    continue;
                const double ratio = t(i, rhs) / t(i, enter);
                if (leave < 0 || ratio < best - 1e-15 ||
                    (std::abs(ratio - best) <= 1e-15 && basis[i] < basis[leave])) {
                    leave = i;
                    best = ratio;
                }
            }
            if (leave < 0)
                return false;
            pivot(leave, enter);
        }
    }
};

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::stringstream in(line);
    for (std::string cell; std::getline(in, cell, ',');) {
        const auto a = cell.find_first_not_of(" \t\r");
        const auto b = cell.find_last_not_of(" \t\r");
        out.push_back(a == std::string::npos ? "" : cell.substr(a, b - a + 1));
    }
    return out;
}

double quantize_ev(double e) { return std::round(e * 1e9) / 1e9; }

} // namespace

std::optional<LpSolution> solve_lp(const Eigen::MatrixXd& A, const Eigen::VectorXd& b, const Eigen::VectorXd& c) {
    const Eigen::Index m = A.rows(), n = A.cols();
    if (b.size() != m || c.size() != n)
        throw Error(ErrorKind::InvalidArgument, "LP dimensions do not match");
    Tableau tab;
    tab.m = m;
    tab.cols = n + m;
    tab.t = Eigen::MatrixXd::Zero(m + 1, n + m + 1);
    for (Eigen::Index i = 0; i < m; ++i) {
        const double sign = b[i] < 0 ? -1.0 : 1.0;
        tab.t.block(i, 0, 1, n) = sign * A.row(i);
        tab.t(i, n + i) = 1;
        tab.t(i, n + m) = sign * b[i];
        tab.basis.push_back(n + i);
    }
    for (Eigen::Index i = 0; i < m; ++i) {
        tab.t.block(m, 0, 1, n) -= tab.t.block(i, 0, 1, n);
        tab.t(m, n + m) -= tab.t(i, n + m);
    }
    tab.run(n + m);
    const double scale = 1.0 + b.cwiseAbs().sum();
    if (-tab.t(m, n + m) > 1e-9 * scale)
        return std::nullopt;

    for (Eigen::Index i = 0; i < m; ++i) {
        if (tab.basis[i] < n)
            continue;
        for (Eigen::Index j = 0; j < n; ++j)
            if (std::abs(tab.t(i, j)) > 1e-9) {
                tab.pivot(i, j);
                break;
            }
    }

    tab.t.row(m).setZero();
    tab.t.block(m, 0, 1, n) = c.transpose();
    for (Eigen::Index i = 0; i < m; ++i)
        if (tab.basis[i] < n && c[tab.basis[i]] != 0)
            tab.t.row(m) -= c[tab.basis[i]] * tab.t.row(i);
    if (!tab.run(n))
        throw Error(ErrorKind::InvalidArgument, "linear program is unbounded");

    LpSolution sol;
    sol.x = Eigen::VectorXd::Zero(n);
    for (Eigen::Index i = 0; i < m; ++i)
        if (tab.basis[i] < n)
            sol.x[tab.basis[i]] = std::max(0.0, tab.t(i, n + m));
    sol.objective = c.dot(sol.x);
    return sol;
}

std::string phase_label(const ReferencePhase& p) { return format_formula(p.composition); }

HullPoint hull_point(const std::map<Element, double>& x, const std::vector<ReferencePhase>& refs) {
    std::vector<Element> elements;
    for (const auto& [e, f] : x)
        if (f > 1e-15)
            elements.push_back(e);
    if (elements.empty())
        throw Error(ErrorKind::InfeasibleComposition, "empty composition");
    const std::set<Element> allowed(elements.begin(), elements.end());

    std::vector<std::size_t> usable;
    for (std::size_t k = 0; k < refs.size(); ++k) {
        bool inside = true;
        for (Element e : refs[k].composition.elements())
            inside = inside && allowed.count(e);
        if (inside)
            usable.push_back(k);
    }
    const Eigen::Index m = static_cast<Eigen::Index>(elements.size());
    const Eigen::Index n = static_cast<Eigen::Index>(usable.size());
    Eigen::MatrixXd A(m, n);
    Eigen::VectorXd b(m), c(n);
    for (Eigen::Index j = 0; j < n; ++j) {
        const auto frac = atom_fractions(refs[usable[j]].composition);
        for (Eigen::Index i = 0; i < m; ++i) {
            auto it = frac.find(elements[i]);
            A(i, j) = it == frac.end() ? 0.0 : it->second;
        }
        c[j] = refs[usable[j]].e_form;
    }
    for (Eigen::Index i = 0; i < m; ++i)
        b[i] = x.at(elements[i]);

    auto sol = n > 0 ? solve_lp(A, b, c) : std::nullopt;
    if (!sol)
        throw Error(ErrorKind::InfeasibleComposition, "reference phases do not span the query composition");
    HullPoint out;
    out.energy = sol->objective;
    for (Eigen::Index j = 0; j < n; ++j)
        if (sol->x[j] > 1e-12)
            out.weights.push_back({usable[j], sol->x[j]});
    return out;
}

HullResult energy_above_hull(const Composition& c, double e_form, const std::vector<ReferencePhase>& refs) {
    if (!std::isfinite(e_form))
        throw Error(ErrorKind::InvalidArgument, "formation energy must be finite");
    const HullPoint hp = hull_point(atom_fractions(c), refs);
    HullResult r;
    r.hull_energy = hp.energy;
    if (e_form < hp.energy) {
        r.e_hull = 0;
        r.decomposition.push_back({{reduce_composition(c), e_form, "query"}, 1.0});
        return r;
    }
    r.e_hull = quantize_ev(e_form - hp.energy);
    for (const auto& [k, w] : hp.weights)
        r.decomposition.push_back({refs[k], w});
    return r;
}

nlohmann::json hull_result_to_json(const std::string& id, double e_form, const HullResult& r, bool stable) {
    nlohmann::json dec = nlohmann::json::array();
    for (const auto& [phase, w] : r.decomposition)
        dec.push_back({{"formula", phase_label(phase)}, {"e_form", phase.e_form}, {"weight", w}});
    return {{"id", id}, {"e_form", e_form}, {"e_hull", r.e_hull}, {"decomposition", dec}, {"stable", stable}};
}

StabilityPartition filter_stable(std::vector<Candidate> candidates, const std::vector<ReferencePhase>& refs,
                                 double threshold, unsigned workers) {
    for (const auto& c : candidates)
        if (!c.e_form)
            throw Error(ErrorKind::MissingEnergy, "candidate " + c.id + " has no formation energy");
    std::vector<double> e_hull(candidates.size());
    parallel_for(candidates.size(), workers, [&](std::size_t i) {
        e_hull[i] = energy_above_hull(candidates[i].structure.composition(), *candidates[i].e_form, refs).e_hull;
    });
    StabilityPartition out;
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        Candidate& c = candidates[i];
        c.e_hull = e_hull[i];
        if (e_hull[i] < threshold) {
            if (c.status == CandidateStatus::predicted)
                c.advance(CandidateStatus::validated);
            out.stable.push_back(std::move(c));
        } else {
            if (c.status != CandidateStatus::rejected)
                c.advance(CandidateStatus::rejected, "e_hull");
            out.rejected.push_back(std::move(c));
        }
    }
    return out;
}

std::vector<ReferencePhase> load_reference_csv(const std::filesystem::path& path) {
    std::istringstream in(read_file(path));
    std::string line;
    if (!std::getline(in, line))
        throw Error(ErrorKind::SchemaViolation, path.string() + ": empty file");
    const auto header = split_csv(line);
    auto col = [&](const std::string& name) -> std::ptrdiff_t {
        auto it = std::find(header.begin(), header.end(), name);
        return it == header.end() ? -1 : it - header.begin();
    };
    const auto fcol = col("formula"), ecol = col("e_form_eV_per_atom"), scol = col("source");
    if (fcol < 0 || ecol < 0)
        throw Error(ErrorKind::SchemaViolation, path.string() + ": header needs formula,e_form_eV_per_atom");
    std::vector<ReferencePhase> out;
    for (int lineno = 2; std::getline(in, line); ++lineno) {
        if (line.find_first_not_of(" \t\r") == std::string::npos)
            continue;
        const auto cells = split_csv(line);
        const auto where = path.string() + ":" + std::to_string(lineno);
        if (static_cast<std::ptrdiff_t>(cells.size()) <= std::max(fcol, ecol))
            throw Error(ErrorKind::SchemaViolation, where + ": missing columns");
        double e;
        try {
            std::size_t used = 0;
            e = std::stod(cells[ecol], &used);
            if (used != cells[ecol].size() || !std::isfinite(e))
                throw std::invalid_argument("trailing");
        } catch (const std::exception&) {
            throw Error(ErrorKind::SchemaViolation, where + ": bad energy '" + cells[ecol] + "'");
        }
        std::string source = scol >= 0 && scol < static_cast<std::ptrdiff_t>(cells.size()) ? cells[scol] : "";
        out.push_back({reduce_composition(parse_formula(cells[fcol])), e, source});
    }
    return out;
}

TableEnergyProvider::TableEnergyProvider(std::vector<ReferencePhase> phases, std::string source)
    : source_(std::move(source)) {
    for (const auto& p : phases) {
        const auto key = format_formula(p.composition);
        auto it = table_.find(key);
        if (it == table_.end() || p.e_form < it->second)
            table_[key] = p.e_form;
    }
}

std::optional<double> TableEnergyProvider::formation_energy(const Structure& s) const {
    auto it = table_.find(reduced_formula(s.composition()));
    if (it == table_.end())
        return std::nullopt;
    return it->second;
}

TableEnergyProvider file_energy_provider(const std::filesystem::path& csv) {
    return TableEnergyProvider(load_reference_csv(csv), "file:" + csv.filename().string());
}

} // namespace matnav
