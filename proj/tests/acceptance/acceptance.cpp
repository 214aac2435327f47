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

// Acceptance checks AC1..AC10. One line per criterion:
//   AC<n> PASS|FAIL <name>: <measurements> [<seconds> s, limit <limit> s]
// Exit status is the number of failed criteria.

#include "../unit/test_support.hpp"

#include <matnav/cif.hpp>
#include <matnav/elasticity.hpp>
#include <matnav/evidence.hpp>
#include <matnav/fetcher.hpp>
#include <matnav/pipeline.hpp>
#include <matnav/predictor.hpp>

#include <json.hpp>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <set>
#include <sstream>

using namespace matnav;
using namespace matnav::testing;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = true;
    std::ostringstream detail;

    void require(bool ok, const std::string& what) {
        if (!ok) {
            pass = false;
            detail << " [failed: " << what << "]";
        }
    }
};

int failures = 0;

template <class Fn>
void criterion(const char* id, const char* name, double limit_s, Fn fn) {
    Outcome o;
    const auto t0 = std::chrono::steady_clock::now();
    try {
        fn(o);
    } catch (const std::exception& e) {
        o.pass = false;
        o.detail << " [exception: " << e.what() << "]";
    }
    const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    o.require(s < limit_s, "runtime");
    failures += !o.pass;
    std::printf("%s %s %s:%s [%.2f s, limit %g s]\n", id, o.pass ? "PASS" : "FAIL", name, o.detail.str().c_str(), s,
                limit_s);
    std::fflush(stdout);
}

double rel_err(double a, double b) { return std::abs(a / b - 1.0); }

std::vector<std::vector<std::string>> csv_rows(const std::string& text) {
    std::istringstream in(text);
    std::vector<std::vector<std::string>> out;
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) {
        std::vector<std::string> cells;
        std::stringstream ss(line);
        for (std::string cell; std::getline(ss, cell, ',');)
            cells.push_back(cell);
        out.push_back(cells);
    }
    return out;
}

struct Phase {
    Composition composition;
    double e_form;
};

std::vector<Phase> phases_csv(const fs::path& p) {
    std::vector<Phase> out;
    for (const auto& r : csv_rows(read_file(p)))
        out.push_back({parse_formula(r.at(0)), std::stod(r.at(1))});
    return out;
}

void ac1(Outcome& o) {
    const json db = json::parse(read_file(data_dir() / "stub_db" / "materials.json"));
    const std::map<std::string, std::pair<std::string, double>> literature = {
        {"mp-66", {"diamond", 2230}}, {"mp-8062", {"SiC", 1200}}, {"mp-2542", {"BeO", 1280}}};
    std::size_t seen = 0;
    for (const auto& m : db["materials"]) {
        auto it = literature.find(m["material_id"]);
        if (it == literature.end())
            continue;
        ++seen;
        const Structure s = structure_from_wire(m["structure"], it->first);
        const double theta = debye_from_tensor(s, tensor_from_wire(m["elastic_tensor"]["ieee_format"]));
        const double e = rel_err(theta, it->second.second);
        char buf[128];
        std::snprintf(buf, sizeof buf, " %s %.0f K vs %.0f K (%.1f%%)", it->second.first.c_str(), theta,
                      it->second.second, 100 * e);
        o.detail << buf;
        o.require(e < 0.05, it->second.first + " within 5%");
    }
    o.require(seen == 3, "three reference materials in the stub database");
}

void ac2(Outcome& o) {
    CounterRng rng(2002);
    double worst = 0;
    for (int t = 0; t < 100; ++t) {
        const Structure s = random_structure(rng, 8, "r" + std::to_string(t));
        const double c11 = uniform(rng, 150, 900);
        const double c12 = uniform(rng, 0.05, 0.6) * c11;
        const ElasticTensor c = ElasticTensor::cubic(c11, c12, uniform(rng, 40, 500));
        const double a = debye_from_tensor(s, c);
        const double b = debye_from_tensor(make_supercell(s, {2, 2, 2}), c);
        worst = std::max(worst, rel_err(b, a));
    }
    o.detail << " 100 structures, max rel err " << worst;
    o.require(worst < 1e-12, "rel err < 1e-12");
}

void ac3(Outcome& o) {
    CounterRng rng(4242);
    double worst = 0;
    for (int t = 0; t < 200; ++t) {
        const RandomSystem sys = random_system(rng);
        const auto x = atom_fractions(sys.query);
        const auto oracle = vertex_oracle(x, sys.refs);
        if (!oracle) {
            o.require(false, "oracle found a decomposition");
            continue;
        }
        worst = std::max(worst, std::abs(hull_point(x, sys.refs).energy - *oracle));
        const double ef = uniform(rng, -1.0, 0.3);
        const double eh = energy_above_hull(sys.query, ef, sys.refs).e_hull;
        worst = std::max(worst, std::abs(eh - std::max(0.0, ef - *oracle)));
    }
    o.detail << " 200 systems, max |LP - oracle| " << worst << " eV/atom;";
    o.require(worst < 1e-6, "LP within 1e-6 of the oracle");

    const auto refs = load_reference_csv(data_dir() / "stability" / "references.csv");
    const auto energies = file_energy_provider(data_dir() / "stability" / "energies.csv");
    const Structure be2c = substituted_be2c({}, "be2c");
    const double be2c_hull = energy_above_hull(be2c.composition(), *energies.formation_energy(be2c), refs).e_hull;
    o.detail << " Be2C e_hull " << be2c_hull << ";";
    o.require(be2c_hull == 0.0, "Be2C on the hull");

    const Structure edge = substituted_be2c({{"Mg", 1}, {"Ca", 1}}, "edge");
    Candidate c{"edge", edge, "mp-1569", {}, {}, energies.formation_energy(edge), {}, CandidateStatus::predicted, {}};
    const auto part = filter_stable({c}, refs, 0.05);
    o.require(part.stable.empty() && part.rejected.size() == 1, "0.05 case excluded");
    if (!part.rejected.empty()) {
        o.detail << " " << reduced_formula(edge.composition()) << " e_hull " << *part.rejected[0].e_hull
                 << " rejected at < 0.05";
        o.require(std::abs(*part.rejected[0].e_hull - 0.05) < 1e-9, "edge case sits at 0.05");
    }
}

void ac4(Outcome& o) {
    std::vector<Site> sites;
    for (int i = 0; i < 10000; ++i)
        sites.push_back({el(i % 2 ? "Be" : "C"), {i / 10000.0, 0.5, 0.5}});
    const Structure big(Lattice::from_parameters(100, 100, 100, 90, 90, 90), sites, "big");
    CounterRng rng(777);
    const Structure sub = substitute(big, default_substitution_rules(), 0.15, rng);
    std::size_t changed = 0;
    for (std::size_t i = 0; i < sub.size(); ++i)
        changed += sub.sites()[i].element != big.sites()[i].element;
    const double rate = changed / 10000.0;
    o.detail << " substitution rate " << rate << ";";
    o.require(rate >= 0.13 && rate <= 0.17, "rate in [0.13, 0.17]");

    std::vector<Site> cloud_sites(10000, Site{el("C"), {0.5, 0.5, 0.5}});
    const Structure cloud(Lattice::from_parameters(10, 11, 12, 80, 95, 105), cloud_sites, "cloud");
    const Structure shaken = perturb(cloud, 0.03, rng);
    o.detail << " perturbation std";
    for (int k = 0; k < 3; ++k) {
        double sum = 0, sq = 0;
        for (std::size_t i = 0; i < shaken.size(); ++i) {
            const double d = shaken.lattice().to_cartesian(shaken.sites()[i].frac - cloud.sites()[i].frac)[k];
            sum += d;
            sq += d * d;
        }
        const double mean = sum / 1e4, sd = std::sqrt(sq / 1e4 - mean * mean);
        o.detail << " " << sd;
        o.require(sd >= 0.028 && sd <= 0.032, "std in [0.028, 0.032]");
    }
    o.detail << " A;";

    GenConfig cfg;
    cfg.count = 500;
    cfg.seed = 99;
    const std::vector<Structure> protos = {be2c_primitive(), zincblende("Si", "C", 4.3596, "mp-8062")};
    cfg.workers = 1;
    const auto one = generate(protos, cfg);
    cfg.workers = 8;
    const auto eight = generate(protos, cfg);
    bool same = one.accepted.size() == eight.accepted.size() &&
                generation_manifest(one).dump() == generation_manifest(eight).dump();
    for (std::size_t i = 0; same && i < one.accepted.size(); ++i)
        same = one.accepted[i].structure == eight.accepted[i].structure;
    o.detail << " 1 vs 8 workers " << (same ? "identical" : "differ") << " (" << one.accepted.size()
             << " candidates)";
    o.require(same, "worker independence");
}

void ac5(Outcome& o) {
    GenConfig cfg;
    cfg.count = 4000;
    cfg.seed = 5150;
    const auto result = generate({be2c_primitive()}, cfg);
    o.require(result.accepted.size() >= 1000, "at least 1000 candidates");
    std::size_t spacing = 0, neutral = 0, unique = 0;
    std::set<std::string> keys;
    const std::size_t n = std::min<std::size_t>(1000, result.accepted.size());
    for (std::size_t i = 0; i < n; ++i) {
        const Structure& s = result.accepted[i].structure;
        spacing += spacing_oracle(s, cfg.min_dist_factor);
        neutral += neutral_oracle(s.composition(), embedded_table(s.composition()));
        unique += keys.insert(dedup_key(s)).second;
    }
    o.detail << " " << n << " candidates: spacing " << spacing << ", neutral " << neutral << ", unique " << unique;
    o.require(spacing == n && neutral == n && unique == n, "all re-checks pass");
}

void ac6(Outcome& o) {
    std::string text;
    CounterRng rng(6);
    for (int i = 0; i < 5321; ++i)
        text.push_back(char('a' + rng.below(26)));
    const auto chunks = chunk_text("d", text, 500, 100);
    bool offsets = chunks.size() == 14;
    for (std::size_t i = 0; offsets && i < chunks.size(); ++i)
        offsets = chunks[i].start == 400 * i && chunks[i].text == text.substr(400 * i, 500);
    o.detail << " " << chunks.size() << " chunks with starts 0,400,..;";
    o.require(offsets, "chunk offsets");

    std::size_t matched = 0;
    for (int t = 0; t < 50; ++t) {
        std::vector<double> v;
        for (std::size_t i = 0, n = 2 + rng.below(60); i < n; ++i)
            v.push_back(double(rng.below(3000)));
        std::vector<double> d = v;
        std::sort(d.begin(), d.end());
        d.erase(std::unique(d.begin(), d.end()), d.end());
        auto q = [&](double p) {
            const double pos = (double(d.size()) - 1) * p;
            const std::size_t lo = std::size_t(std::floor(pos));
            const std::size_t hi = std::min(lo + 1, d.size() - 1);
            return d[lo] + (pos - double(lo)) * (d[hi] - d[lo]);
        };
        const double p10 = q(0.1), p90 = q(0.9);
        std::vector<double> low, high;
        for (double x : d) {
            if (x <= p10 + 1e-9)
                low.push_back(x);
            if (x >= p90 - 1e-9)
                high.push_back(x);
        }
        const auto b = percentile_bands(v);
        matched += b.low_band == low && b.high_band == high && std::abs(b.p10 - p10) < 1e-6 &&
                   std::abs(b.p90 - p90) < 1e-6;
    }
    o.detail << " bands match the oracle on " << matched << "/50;";
    o.require(matched == 50, "bands");

    const auto r = ground_query("Find materials with high Debye temperature", load_corpus(data_dir() / "corpus"),
                                HashedTfEmbedder{}, PatternExtractor{});
    const std::string label = criterion_label(r.criterion);
    o.detail << " fixture corpus criterion \"" << label << "\"";
    o.require(label == "Θ_D > 800 K", "fixture criterion");
}

RoutineDescriptor literal(json rows) {
    RoutineDescriptor r;
    r.endpoint = "literal";
    r.literal_rows = std::move(rows);
    r.unit = "K";
    return r;
}

json good_rows() {
    return json::array({{{"material_id", "mp-66"}, {"formula", "C"}, {"value", 2246.0}},
                        {{"material_id", "mp-149"}, {"formula", "Si"}, {"value", 640.0}}});
}

void ac7(Outcome& o) {
    TempDir scratch("ac7");
    RoutineRunner runner(nullptr, scratch.path);
    json nan_rows = good_rows(), hot_rows = good_rows();
    nan_rows[1]["value"] = nullptr;
    hot_rows[0]["value"] = 12000.0;
    RoutineDescriptor raising = literal(good_rows());
    raising.steps = {{"raise", {{"message", "scripted failure"}}}};
    const std::vector<RoutineDescriptor> broken = {raising, literal(nan_rows), literal(hot_rows)};
    for (int k = 1; k <= 4; ++k) {
        std::vector<RoutineDescriptor> script(broken.begin(), broken.begin() + std::min(k - 1, 3));
        if (k <= 3)
            script.push_back(literal(good_rows()));
        ScriptedRoutineSource source(script);
        try {
            const auto r = fetch_with_repair(debye_spec(), source, runner);
            o.detail << " k=" << k << ": success at attempt " << r.attempts << " with " << r.diagnostics.size()
                     << " diagnostics;";
            o.require(k <= 3 && r.attempts == k && r.diagnostics.size() == std::size_t(k - 1),
                      "success at attempt " + std::to_string(k));
        } catch (const BudgetExhaustedError& e) {
            const auto& d = e.diagnostics();
            o.detail << " k=" << k << ": BudgetExhausted with " << d.size() << " diagnostics";
            o.require(k == 4 && d.size() == 3, "budget exhausted at k = 4");
            if (d.size() == 3) {
                o.require(d[0].kind == "execution" && d[0].message.find("scripted failure") != std::string::npos,
                          "diagnostic 1");
                o.require(d[1].failed_checks == std::vector<std::string>{"finite", "range"}, "diagnostic 2");
                o.require(d[2].failed_checks == std::vector<std::string>{"range"}, "diagnostic 3");
            }
        }
    }
}

void ac8(Outcome& o) {
    CounterRng rng(88);
    std::size_t ok = 0;
    std::vector<std::string> texts;
    for (int i = 0; i < 1000; ++i) {
        const Structure s = random_structure(rng, 12, "s" + std::to_string(i));
        const std::string text = write_cif(s);
        if (texts.size() < 50)
            texts.push_back(text);
        const Structure back = parse_cif(text);
        bool same = back.size() == s.size();
        const auto l0 = s.lattice().lengths(), l1 = back.lattice().lengths();
        const auto a0 = s.lattice().angles(), a1 = back.lattice().angles();
        for (int k = 0; same && k < 3; ++k)
            same = std::abs(l0[k] - l1[k]) < 1e-6 && std::abs(a0[k] - a1[k]) < 1e-6;
        for (std::size_t j = 0; same && j < s.size(); ++j) {
            same = back.sites()[j].element == s.sites()[j].element;
            for (int k = 0; same && k < 3; ++k)
                same = frac_distance(back.sites()[j].frac[k], s.sites()[j].frac[k]) < 1e-6;
        }
        ok += same;
    }
    o.detail << " round trip " << ok << "/1000;";
    o.require(ok == 1000, "round trip");

    std::size_t structured = 0, parsed = 0, other = 0;
    for (int i = 0; i < 100000; ++i) {
        std::string text;
        switch (i % 3) {
        case 0:
            for (std::size_t k = 0, n = rng.below(300); k < n; ++k)
                text.push_back(char(rng.below(256)));
            break;
        case 1:
            text = texts[rng.below(texts.size())];
            for (std::size_t m = 0, n = 1 + rng.below(6); m < n; ++m)
                text[rng.below(text.size())] = char(rng.below(256));
            break;
        default: {
            text = texts[rng.below(texts.size())];
            const std::size_t a = rng.below(text.size()), b = rng.below(text.size());
            text.erase(std::min(a, b), std::max(a, b) - std::min(a, b));
        }
        }
        try {
            parse_cif(text);
            ++parsed;
        } catch (const Error&) {
            ++structured;
        } catch (...) {
            ++other;
        }
    }
    o.detail << " fuzz 100000 cases: " << structured << " structured errors, " << parsed << " parsed, " << other
             << " other";
    o.require(other == 0, "only structured errors");
}

void ac9(Outcome& o) {
    std::vector<double> y, shifted, mean;
    for (int i = 0; i < 20; ++i) {
        y.push_back(400 + 73.0 * i);
        shifted.push_back(y.back() + 10);
    }
    double m = 0;
    for (double v : y)
        m += v / double(y.size());
    mean.assign(y.size(), m);
    const EvalReport a = score(y, shifted);
    const EvalReport b = score(y, mean);
    o.detail << " +10 K shift rmse " << a.rmse << " K; mean predictor r2 " << b.r2;
    o.require(std::abs(a.rmse - 10) < 1e-9, "rmse = 10");
    o.require(std::abs(b.r2) < 1e-12, "r2 = 0");
    o.require(score(y, y).r2 == 1.0 && score(y, y).rmse == 0.0, "perfect predictor");
}

int run_cli(const fs::path& dir) {
    const std::string cmd = std::string("\"") + MATNAV_CLI + "\" all --config \"" +
                            (data_dir() / "fixture_run.json").string() + "\" --run-dir \"" + dir.string() +
                            "\" > \"" + (dir.string() + ".log") + "\" 2>&1";
    return std::system(cmd.c_str());
}

void ac10(Outcome& o) {
    TempDir tmp("ac10");
    const int ra = run_cli(tmp.path / "a"), rb = run_cli(tmp.path / "b");
    o.require(ra == 0 && rb == 0, "CLI exit status");
    if (ra != 0 || rb != 0)
        return;
    const RunState s = load_run_state(tmp.path / "a");
    for (int n = 1; n <= 3; ++n)
        o.require(s.stage(n).status == StageStatus::done, "stage " + std::to_string(n) + " done");

    auto a = snapshot(tmp.path / "a"), b = snapshot(tmp.path / "b");
    const bool identical = a == b;
    o.detail << " " << a.size() << " files, runs " << (identical ? "byte-identical" : "differ") << ";";
    o.require(identical, "byte reproducible");

    const double threshold = s.criterion.at("threshold");
    const auto refs = phases_csv(data_dir() / "stability" / "references.csv");
    std::map<std::string, double> energy;
    for (const auto& r : csv_rows(read_file(data_dir() / "stability" / "energies.csv")))
        energy[reduced_formula(parse_formula(r[0]))] = std::stod(r[1]);
    const auto table = csv_rows(a.at("stage3/ranked_table.csv"));
    std::size_t valid = 0;
    for (const auto& row : table) {
        const Composition c = parse_formula(row.at(2));
        const auto hull = vertex_oracle(atom_fractions(c), refs);
        const auto ef = energy.find(reduced_formula(c));
        if (!hull || ef == energy.end())
            continue;
        const double eh = std::max(0.0, ef->second - *hull);
        valid += std::stod(row.at(3)) > threshold && eh < 0.05 && std::abs(eh - std::stod(row.at(4))) < 1e-3;
    }
    o.detail << " " << table.size() << " ranked rows, " << valid << " pass the independent re-filter (Θ_D > "
             << threshold << " K, e_hull < 0.05)";
    o.require(!table.empty() && valid == table.size(), "every row re-validated");
}

} // namespace

int main() {
    criterion("AC1", "Debye formula fidelity", 1, ac1);
    criterion("AC2", "Supercell invariance", 5, ac2);
    criterion("AC3", "Hull oracle equivalence", 30, ac3);
    criterion("AC4", "Generation statistics", 60, ac4);
    criterion("AC5", "Filter soundness", 60, ac5);
    criterion("AC6", "Evidence determinism", 10, ac6);
    criterion("AC7", "Repair-loop contract", 5, ac7);
    criterion("AC8", "CIF round trip", 60, ac8);
    criterion("AC9", "Metric correctness", 1, ac9);
    criterion("AC10", "End-to-end fixture run", 120, ac10);
    std::printf("%d of 10 criteria failed\n", failures);
    return failures;
}
