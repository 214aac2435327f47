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

// Shared generators and fixtures for the unit and acceptance suites.

#include <matnav/core.hpp>
#include <matnav/error.hpp>
#include <matnav/hash.hpp>
#include <matnav/random.hpp>
#include <matnav/stability.hpp>
#include <matnav/structgen.hpp>

#include <unistd.h>

#include <Eigen/Dense>

#include <atomic>
#include <cmath>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace matnav::testing {

inline std::filesystem::path data_dir() { return MATNAV_DATA_DIR; }

inline Element el(const char* s) { return Element::from_symbol(s); }

/// True when `fn` throws a matnav::Error of the given kind.
template <class Fn>
bool throws_kind(Fn&& fn, ErrorKind kind) {
    try {
        fn();
    } catch (const Error& e) {
        return e.kind() == kind;
    }
    return false;
}

inline double uniform(CounterRng& rng, double lo, double hi) {
    return lo + (hi - lo) * rng.uniform();
}

/// Random valid lattice: lengths in [2, 10] A, angles in [60, 120] deg,
/// redrawn until the cell is non-degenerate.
inline Lattice random_lattice(CounterRng& rng) {
    while (true) {
        double a = uniform(rng, 2, 10), b = uniform(rng, 2, 10),
               c = uniform(rng, 2, 10);
        double al = uniform(rng, 60, 120), be = uniform(rng, 60, 120),
               ga = uniform(rng, 60, 120);
        try {
            Lattice l = Lattice::from_parameters(a, b, c, al, be, ga);
            if (l.volume() > 0.2 * a * b * c)
                return l;
        } catch (const Error&) {
        }
    }
}

inline Structure random_structure(CounterRng& rng, std::size_t max_sites = 8,
                                  std::string id = "rand") {
    static const char* pool[] = {"Be", "C", "O", "Mg", "Si", "Ca",
                                 "Fe", "Ba", "Sn", "N", "Al", "B"};
    std::size_t n = 1 + rng.below(max_sites);
    std::vector<Site> sites;
    for (std::size_t i = 0; i < n; ++i)
        sites.push_back({el(pool[rng.below(12)]),
                         {rng.uniform(), rng.uniform(), rng.uniform()}});
    return Structure(random_lattice(rng), std::move(sites), std::move(id));
}

/// Conventional zinc-blende cell (8 atoms); diamond when a == b.
inline Structure zincblende(const char* a_el, const char* b_el, double a, std::string id) {
    const double fcc[4][3] = {{0, 0, 0}, {0, 0.5, 0.5}, {0.5, 0, 0.5}, {0.5, 0.5, 0}};
    std::vector<Site> sites;
    for (auto& f : fcc)
        sites.push_back({el(a_el), {f[0], f[1], f[2]}});
    for (auto& f : fcc)
        sites.push_back({el(b_el), {f[0] + 0.25, f[1] + 0.25, f[2] + 0.25}});
    return Structure(Lattice::from_parameters(a, a, a, 90, 90, 90), std::move(sites), std::move(id));
}

/// Wurtzite cell (4 atoms) with internal parameter u.
inline Structure wurtzite(const char* cat, const char* an, double a, double c, double u,
                          std::string id) {
    std::vector<Site> sites = {{el(cat), {1.0 / 3, 2.0 / 3, 0}},
                               {el(cat), {2.0 / 3, 1.0 / 3, 0.5}},
                               {el(an), {1.0 / 3, 2.0 / 3, u}},
                               {el(an), {2.0 / 3, 1.0 / 3, 0.5 + u}}};
    return Structure(Lattice::from_parameters(a, a, c, 90, 90, 120), std::move(sites), std::move(id));
}

/// Primitive antifluorite Be2C cell (3 atoms), cubic a = 4.342 A.
inline Structure be2c_primitive(std::string id = "mp-1569") {
    const double h = 4.342 / 2;
    Eigen::Matrix3d basis;
    basis << 0, h, h, h, 0, h, h, h, 0;
    std::vector<Site> sites = {{el("C"), {0, 0, 0}},
                               {el("Be"), {0.25, 0.25, 0.25}},
                               {el("Be"), {0.75, 0.75, 0.75}}};
    return Structure(Lattice(basis), std::move(sites), std::move(id));
}

/// Unique scratch directory, removed on destruction.
struct TempDir {
    std::filesystem::path path;
    explicit TempDir(const std::string& tag) {
        static std::atomic<int> counter{0};
        path = std::filesystem::temp_directory_path() /
               ("matnav-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
        std::filesystem::remove_all(path);
        std::filesystem::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;
};

/// Relative path -> content for every file under `root`.
inline std::map<std::string, std::string> snapshot(const std::filesystem::path& root) {
    std::map<std::string, std::string> out;
    for (const auto& e : std::filesystem::recursive_directory_iterator(root))
        if (e.is_regular_file())
            out[std::filesystem::relative(e.path(), root).generic_string()] = read_file(e.path());
    return out;
}

/// 2x2x2 supercell of be2c_primitive whose first sites of each host
/// element are replaced to reach `counts` (24 atoms in total).
inline Structure substituted_be2c(const std::map<std::string, int>& counts, std::string id) {
    const double h = 4.342 / 2;
    Eigen::Matrix3d basis;
    basis << 0, h, h, h, 0, h, h, h, 0;
    std::vector<Site> sites;
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j)
            for (int k = 0; k < 2; ++k)
                for (auto [sym, f] : {std::pair{"C", 0.0}, std::pair{"Be", 0.25}, std::pair{"Be", 0.75}})
                    sites.push_back({el(sym), Eigen::Vector3d((i + f) / 2, (j + f) / 2, (k + f) / 2)});
    auto host_of = [](const std::string& s) {
        for (const char* g : {"Mg", "Ca", "Sr", "Ba"})
            if (s == g)
                return std::string("Be");
        return std::string("C");
    };
    for (const auto& [sym, n] : counts) {
        if (sym == "Be" || sym == "C")
            continue;
        int left = n;
        for (auto& s : sites)
            if (left > 0 && s.element == el(host_of(sym).c_str())) {
                s.element = el(sym.c_str());
                --left;
            }
    }
    return Structure(Lattice(basis * 2), std::move(sites), std::move(id));
}

/// Periodic difference of fractional coordinates, in [0, 0.5].
inline double frac_distance(double a, double b) {
    double d = std::abs(a - b);
    d -= std::floor(d);
    return std::min(d, 1.0 - d);
}

// Enumerate every subset of at most m phases, solve the square system
// exactly and keep the cheapest non-negative solution.
template <class Phase>
inline std::optional<double> vertex_oracle(const std::map<Element, double>& x, const std::vector<Phase>& refs) {
    std::vector<Element> els;
    for (const auto& [e, f] : x)
        if (f > 0)
            els.push_back(e);
    const std::size_t m = els.size();
    std::vector<std::size_t> usable;
    for (std::size_t k = 0; k < refs.size(); ++k) {
        bool ok = true;
        for (Element e : refs[k].composition.elements())
            ok = ok && x.count(e) && x.at(e) > 0;
        if (ok)
            usable.push_back(k);
    }
    std::optional<double> best;
    std::vector<std::size_t> pick;
    std::function<void(std::size_t)> rec = [&](std::size_t start) {
        if (!pick.empty()) {
            Eigen::MatrixXd A(m + 1, pick.size());
            Eigen::VectorXd b(m + 1);
            for (std::size_t j = 0; j < pick.size(); ++j) {
                auto f = atom_fractions(refs[pick[j]].composition);
                for (std::size_t i = 0; i < m; ++i)
                    A(i, j) = f.count(els[i]) ? f[els[i]] : 0.0;
                A(m, j) = 1;
            }
            for (std::size_t i = 0; i < m; ++i)
                b[i] = x.at(els[i]);
            b[m] = 1;
            Eigen::VectorXd lam = A.colPivHouseholderQr().solve(b);
            if ((A * lam - b).norm() < 1e-9 && lam.minCoeff() > -1e-12) {
                double e = 0;
                for (std::size_t j = 0; j < pick.size(); ++j)
                    e += lam[j] * refs[pick[j]].e_form;
                if (!best || e < *best)
                    best = e;
            }
        }
        if (pick.size() == m)
            return;
        for (std::size_t k = start; k < usable.size(); ++k) {
            pick.push_back(usable[k]);
            rec(k + 1);
            pick.pop_back();
        }
    };
    rec(0);
    return best;
}

// Exhaustive product enumeration over per-element states.
inline bool neutral_oracle(const Composition& c, const OxidationTable& table) {
    const Composition r = reduce_composition(c);
    if (r.size() == 1)
        return true;
    std::vector<std::pair<long long, std::vector<int>>> terms;
    for (Element e : r.elements())
        terms.push_back({std::llround(r.count(e)), table.at(e)});
    std::function<bool(std::size_t, long long)> rec = [&](std::size_t i, long long sum) {
        if (i == terms.size())
            return sum == 0;
        for (int s : terms[i].second)
            if (rec(i + 1, sum + terms[i].first * s))
                return true;
        return false;
    };
    return rec(0, 0);
}

inline OxidationTable embedded_table(const Composition& c) {
    OxidationTable t;
    for (Element e : c.elements()) {
        auto s = oxidation_states(e);
        t[e] = {s.begin(), s.end()};
    }
    return t;
}

// Minimum distance over images -2..2 of the raw (unwrapped) difference.
inline bool spacing_oracle(const Structure& s, double factor) {
    for (std::size_t i = 0; i < s.size(); ++i)
        for (std::size_t j = i; j < s.size(); ++j)
            for (int a = -2; a <= 2; ++a)
                for (int b = -2; b <= 2; ++b)
                    for (int c = -2; c <= 2; ++c) {
                        if (i == j && a == 0 && b == 0 && c == 0)
                            continue;
                        Eigen::Vector3d d = s.sites()[j].frac - s.sites()[i].frac + Eigen::Vector3d(a, b, c);
                        const double limit = factor * (covalent_radius(s.sites()[i].element) +
                                                       covalent_radius(s.sites()[j].element));
                        if (s.lattice().to_cartesian(d).norm() < limit)
                            return false;
                    }
    return true;
}

/// Two to four elements with their elemental references, up to ten
/// random compounds and a random query composition.
struct RandomSystem {
    std::vector<ReferencePhase> refs;
    Composition query;
};

inline RandomSystem random_system(CounterRng& rng) {
    static const char* pool[] = {"Be", "C", "Mg", "Si", "O", "Ca"};
    std::vector<Element> els;
    const std::size_t n = 2 + rng.below(3);
    while (els.size() < n) {
        Element e = el(pool[rng.below(6)]);
        if (std::find(els.begin(), els.end(), e) == els.end())
            els.push_back(e);
    }
    RandomSystem sys{{}, Composition(Composition::Counts{{els[0], 1.0}})};
    for (Element e : els)
        sys.refs.push_back({Composition(Composition::Counts{{e, 1.0}}), 0.0, "element"});
    const std::size_t extra = rng.below(12 - n + 1);
    for (std::size_t k = 0; k < extra; ++k) {
        Composition::Counts counts;
        for (Element e : els)
            if (const auto c = rng.below(4))
                counts[e] = double(c);
        if (counts.size() < 2)
            continue;
        sys.refs.push_back({reduce_composition(Composition(counts)), uniform(rng, -1.0, 0.2), "random"});
    }
    Composition::Counts q;
    for (Element e : els)
        if (const auto c = rng.below(5))
            q[e] = double(c);
    if (q.empty())
        q[els[0]] = 1;
    sys.query = Composition(q);
    return sys;
}

} // namespace matnav::testing
