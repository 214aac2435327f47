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

#include <matnav/structgen.hpp>
#include <matnav/elements.hpp>
#include <matnav/error.hpp>
#include <matnav/hash.hpp>
#include <matnav/parallel.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <set>

namespace matnav {

using nlohmann::json;

SubstitutionRules::SubstitutionRules(std::vector<std::vector<Element>> groups) : groups_(std::move(groups)) {
    std::set<Element> seen;
    for (const auto& g : groups_)
        for (Element e : g)
            if (!seen.insert(e).second)
                throw Error(ErrorKind::InvalidArgument,
                            "element " + std::string(e.symbol()) + " appears in two substitution groups");
}

const std::vector<Element>* SubstitutionRules::group_of(Element e) const {
    for (const auto& g : groups_)
        if (std::find(g.begin(), g.end(), e) != g.end())
            return &g;
    return nullptr;
}

SubstitutionRules default_substitution_rules() {
    static const std::vector<std::vector<const char*>> table = {
        {"Li", "Na", "K", "Rb", "Cs"},
        {"Be", "Mg", "Ca", "Sr", "Ba"},
        {"B", "Al", "Ga", "In", "Tl"},
        {"C", "Si", "Ge", "Sn", "Pb"},
        {"N", "P", "As", "Sb", "Bi"},
        {"O", "S", "Se", "Te"},
        {"F", "Cl", "Br", "I"},
    };
    std::vector<std::vector<Element>> groups;
    for (const auto& row : table) {
        groups.emplace_back();
        for (const char* s : row)
            groups.back().push_back(Element::from_symbol(s));
    }
    return SubstitutionRules(std::move(groups));
}

json rules_to_json(const SubstitutionRules& r) {
    json out = json::array();
    for (const auto& g : r.groups()) {
        json row = json::array();
        for (Element e : g)
            row.push_back(std::string(e.symbol()));
        out.push_back(row);
    }
    return out;
}

SubstitutionRules rules_from_json(const json& j) {
    if (!j.is_array())
        throw Error(ErrorKind::ConfigError, "substitution groups must be a list of lists");
    std::vector<std::vector<Element>> groups;
    for (const auto& row : j) {
        if (!row.is_array())
            throw Error(ErrorKind::ConfigError, "substitution groups must be a list of lists");
        groups.emplace_back();
        for (const auto& s : row)
            groups.back().push_back(Element::from_symbol(s.get<std::string>()));
    }
    return SubstitutionRules(std::move(groups));
}

void GenConfig::validate() const {
    for (int d : supercell)
        if (d < 1)
            throw Error(ErrorKind::ConfigError, "supercell dimensions must be >= 1");
    if (!(p_sub >= 0 && p_sub <= 1))
        throw Error(ErrorKind::ConfigError, "p_sub must lie in [0, 1]");
    if (!(sigma >= 0) || !std::isfinite(sigma))
        throw Error(ErrorKind::ConfigError, "sigma must be >= 0");
    if (!(min_dist_factor >= 0) || !std::isfinite(min_dist_factor))
        throw Error(ErrorKind::ConfigError, "min_dist_factor must be >= 0");
}

json gen_config_to_json(const GenConfig& c) {
    return {{"supercell", c.supercell}, {"p_sub", c.p_sub},     {"sigma", c.sigma},
            {"min_dist_factor", c.min_dist_factor},           {"seed", c.seed},
            {"count", c.count},         {"workers", c.workers}, {"groups", rules_to_json(c.rules)}};
}

GenConfig gen_config_from_json(const json& j) {
    GenConfig c;
    try {
        c.supercell = j.value("supercell", c.supercell);
        c.p_sub = j.value("p_sub", c.p_sub);
        c.sigma = j.value("sigma", c.sigma);
        c.min_dist_factor = j.value("min_dist_factor", c.min_dist_factor);
        c.seed = j.value("seed", c.seed);
        c.count = j.value("count", c.count);
        c.workers = j.value("workers", c.workers);
        if (j.contains("groups"))
            c.rules = rules_from_json(j["groups"]);
    } catch (const json::exception& e) {
        throw Error(ErrorKind::ConfigError, std::string("generation config: ") + e.what());
    }
    c.validate();
    return c;
}

std::string_view to_string(CandidateStatus s) {
    switch (s) {
    case CandidateStatus::generated: return "generated";
    case CandidateStatus::predicted: return "predicted";
    case CandidateStatus::validated: return "validated";
    case CandidateStatus::rejected: return "rejected";
    }
    return "unknown";
}

void Candidate::advance(CandidateStatus next, std::string reason) {
    const bool ok = (status != CandidateStatus::rejected && status != CandidateStatus::validated) &&
                    (next == CandidateStatus::rejected || static_cast<int>(next) == static_cast<int>(status) + 1);
    if (!ok)
        throw Error(ErrorKind::InvalidArgument, "candidate " + id + " cannot move from " +
                                                    std::string(to_string(status)) + " to " +
                                                    std::string(to_string(next)));
    status = next;
    if (next == CandidateStatus::rejected)
        rejection_reason = std::move(reason);
}

json candidate_to_json(const Candidate& c) {
    json ops = json::array();
    for (const auto& o : c.ops_log)
        ops.push_back({{"op", o.op}, {"params", o.params}});
    auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(); };
    json out = {{"id", c.id},
                {"formula", reduced_formula(c.structure.composition())},
                {"parent_id", c.parent_id},
                {"ops_log", ops},
                {"predicted_theta_d", opt(c.predicted_theta_d)},
                {"e_form", opt(c.e_form)},
                {"e_hull", opt(c.e_hull)},
                {"status", std::string(to_string(c.status))}};
    if (c.status == CandidateStatus::rejected)
        out["rejection_reason"] = c.rejection_reason;
    return out;
}

Structure make_supercell(const Structure& s, std::array<int, 3> dims) {
    for (int d : dims)
        if (d < 1)
            throw Error(ErrorKind::InvalidArgument, "supercell dimensions must be >= 1");
    Eigen::Matrix3d basis = s.lattice().matrix();
    for (int r = 0; r < 3; ++r)
        basis.row(r) *= dims[r];
    std::vector<Site> sites;
    sites.reserve(s.size() * dims[0] * dims[1] * dims[2]);
    for (int i = 0; i < dims[0]; ++i)
        for (int j = 0; j < dims[1]; ++j)
            for (int k = 0; k < dims[2]; ++k)
                for (const auto& site : s.sites())
                    sites.push_back({site.element, {(site.frac[0] + i) / dims[0], (site.frac[1] + j) / dims[1],
                                                    (site.frac[2] + k) / dims[2]}});
    return Structure(Lattice(basis), std::move(sites), s.id());
}

Structure substitute(const Structure& s, const SubstitutionRules& rules, double p, CounterRng& rng,
                     std::vector<SubstitutionChange>* changes) {
    std::vector<Site> sites = s.sites();
    for (std::size_t i = 0; i < sites.size(); ++i) {
        const auto* group = rules.group_of(sites[i].element);
        if (group == nullptr || group->size() < 2)
            continue;
        if (!(rng.uniform() < p))
            continue;
        std::vector<Element> options;
        for (Element e : *group)
            if (e != sites[i].element)
                options.push_back(e);
        const Element to = options[rng.below(options.size())];
        if (changes)
            changes->push_back({i, sites[i].element, to});
        sites[i].element = to;
    }
    return Structure(s.lattice(), std::move(sites), s.id());
}

Structure perturb(const Structure& s, double sigma, CounterRng& rng) {
    if (!(sigma >= 0))
        throw Error(ErrorKind::InvalidArgument, "sigma must be >= 0");
    if (sigma == 0)
        return s;
    std::vector<Site> sites = s.sites();
    for (auto& site : sites) {
        Eigen::Vector3d shift;
        for (int c = 0; c < 3; ++c)
            shift[c] = sigma * rng.normal();
        site.frac += s.lattice().to_fractional(shift);
    }
    return Structure(s.lattice(), std::move(sites), s.id());
}

double periodic_distance(const Structure& s, std::size_t i, std::size_t j) {
    Eigen::Vector3d d = s.sites()[j].frac - s.sites()[i].frac;
    for (int c = 0; c < 3; ++c)
        d[c] -= std::round(d[c]);
    double best = std::numeric_limits<double>::infinity();
    for (int a = -1; a <= 1; ++a)
        for (int b = -1; b <= 1; ++b)
            for (int c = -1; c <= 1; ++c) {
                if (i == j && a == 0 && b == 0 && c == 0)
                    continue;
                const Eigen::Vector3d img = d + Eigen::Vector3d(a, b, c);
                best = std::min(best, s.lattice().to_cartesian(img).norm());
            }
    return best;
}

bool min_distance_ok(const Structure& s, double factor) {
    std::vector<double> radius;
    for (const auto& site : s.sites())
        radius.push_back(covalent_radius(site.element));
    for (std::size_t i = 0; i < s.size(); ++i)
        for (std::size_t j = i; j < s.size(); ++j)
            if (periodic_distance(s, i, j) < factor * (radius[i] + radius[j]))
                return false;
    return true;
}

bool charge_neutral_possible(const Composition& c, const OxidationTable& table) {
    const Composition reduced = reduce_composition(c);
    if (reduced.size() == 1)
        return true;
    std::set<long long> sums{0};
    for (Element e : reduced.elements()) {
        auto it = table.find(e);
        if (it == table.end() || it->second.empty())
            throw Error(ErrorKind::MissingOxidationStates,
                        "no oxidation states for " + std::string(e.symbol()));
        const long long n = std::llround(reduced.count(e));
        std::set<long long> next;
        for (long long s : sums)
            for (int state : it->second)
                next.insert(s + n * state);
        sums = std::move(next);
    }
    return sums.count(0) > 0;
}

bool charge_neutral_possible(const Composition& c) {
    OxidationTable table;
    for (Element e : c.elements()) {
        auto states = oxidation_states(e);
        table[e] = std::vector<int>(states.begin(), states.end());
    }
    return charge_neutral_possible(c, table);
}

std::string dedup_key(const Structure& s) {
    auto q = [](double x) { return std::llround(x * 1000.0); };
    std::vector<std::string> pairs;
    pairs.reserve(s.size() * (s.size() + 1) / 2);
    char buf[64];
    for (std::size_t i = 0; i < s.size(); ++i)
        for (std::size_t j = i; j < s.size(); ++j) {
            std::string_view a = s.sites()[i].element.symbol(), b = s.sites()[j].element.symbol();
            if (b < a)
                std::swap(a, b);
            std::snprintf(buf, sizeof buf, "%.*s-%.*s:%lld", int(a.size()), a.data(), int(b.size()), b.data(),
                          q(periodic_distance(s, i, j)));
            pairs.emplace_back(buf);
        }
    std::sort(pairs.begin(), pairs.end());
    std::string text = reduced_formula(s.composition()) + "|";
    const auto len = s.lattice().lengths();
    const auto ang = s.lattice().angles();
    for (int c = 0; c < 3; ++c)
        text += std::to_string(q(len[c])) + "," + std::to_string(q(ang[c])) + ";";
    for (const auto& p : pairs)
        text += p + " ";
    return sha256_hex(text);
}

namespace {

struct Draft {
    Candidate candidate;
    bool neutral = false;
    bool spaced = false;
    std::string key;
};

Draft draft_candidate(const std::vector<Structure>& prototypes, const GenConfig& cfg, std::size_t index) {
    const Structure& parent = prototypes[index % prototypes.size()];
    CounterRng rng = CounterRng::substream(cfg.seed, index);
    char id[32];
    std::snprintf(id, sizeof id, "cand-%06zu", index);

    std::vector<Operation> ops;
    Structure s = make_supercell(parent, cfg.supercell);
    ops.push_back({"supercell", {{"dims", cfg.supercell}}});
    std::vector<SubstitutionChange> changes;
    s = substitute(s, cfg.rules, cfg.p_sub, rng, &changes);
    json swaps = json::array();
    for (const auto& c : changes)
        swaps.push_back({{"site", c.site}, {"from", std::string(c.from.symbol())}, {"to", std::string(c.to.symbol())}});
    ops.push_back({"substitute", {{"p", cfg.p_sub}, {"changes", swaps}}});
    s = perturb(s, cfg.sigma, rng);
    ops.push_back({"perturb", {{"sigma", cfg.sigma}}});

    Candidate cand{id, s.with_id(id), parent.id(), std::move(ops), {}, {}, {}, CandidateStatus::generated, {}};
    Draft d{std::move(cand), false, false, {}};
    try {
        d.neutral = charge_neutral_possible(s.composition());
    } catch (const Error&) {
        d.neutral = false;
    }
    d.spaced = min_distance_ok(s, cfg.min_dist_factor);
    if (d.neutral && d.spaced)
        d.key = dedup_key(s);
    return d;
}

} // namespace

GenerationResult generate(const std::vector<Structure>& prototypes, const GenConfig& cfg) {
    if (prototypes.empty())
        throw Error(ErrorKind::NoPrototypes, "generation needs at least one prototype structure");
    cfg.validate();

    std::vector<std::optional<Draft>> drafts(cfg.count);
    parallel_for(cfg.count, cfg.workers, [&](std::size_t i) { drafts[i] = draft_candidate(prototypes, cfg, i); });

    GenerationResult result;
    std::set<std::string> seen;
    for (auto& d : drafts) {
        Candidate c = std::move(d->candidate);
        std::string reason;
        if (!d->neutral)
            reason = "charge_neutrality";
        else if (!d->spaced)
            reason = "min_distance";
        else if (!seen.insert(d->key).second)
            reason = "duplicate";
        if (reason.empty()) {
            result.accepted.push_back(std::move(c));
        } else {
            c.advance(CandidateStatus::rejected, reason);
            ++result.rejection_counts[reason];
            result.rejected.push_back(std::move(c));
        }
    }
    return result;
}

json generation_manifest(const GenerationResult& r) {
    json accepted = json::array();
    for (const auto& c : r.accepted)
        accepted.push_back(candidate_to_json(c));
    return {{"accepted", accepted},
            {"accepted_count", r.accepted.size()},
            {"rejected_count", r.rejected.size()},
            {"rejection_counts", r.rejection_counts}};
}

} // namespace matnav
