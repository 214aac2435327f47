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

#include <matnav/core.hpp>
#include <matnav/error.hpp>
#include <matnav/random.hpp>

#include <doctest.h>

#include <cmath>
#include <numeric>

using namespace matnav;

namespace {

Element el(const char* s) { return Element::from_symbol(s); }

ErrorKind kind_of(auto&& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.kind();
    }
    FAIL("expected an Error");
    return ErrorKind::InvalidArgument;
}

Structure cubic_carbon(double a) {
    return Structure(Lattice::from_parameters(a, a, a, 90, 90, 90),
                     {{el("C"), {0, 0, 0}}}, "c1");
}

} // namespace

TEST_CASE("element lookup") {
    CHECK(el("Be").z() == 4);
    CHECK(Element(118).symbol() == "Og");
    CHECK(kind_of([] { el("Xx"); }) == ErrorKind::UnknownElement);
    CHECK(kind_of([] { Element(0); }) == ErrorKind::UnknownElement);
    CHECK(atomic_mass(el("C")) == doctest::Approx(12.011));
    CHECK(kind_of([] { atomic_mass(el("Og")); }) == ErrorKind::MissingMass);
    CHECK(kind_of([] { covalent_radius(el("Fm")); }) ==
          ErrorKind::MissingRadius);
    CHECK(kind_of([] { oxidation_states(el("He")); }) ==
          ErrorKind::MissingOxidationStates);
}

TEST_CASE("parse_formula") {
    SUBCASE("Be2C") {
        auto c = parse_formula("Be2C");
        CHECK(c.size() == 2);
        CHECK(c.count(el("Be")) == 2);
        CHECK(c.count(el("C")) == 1);
    }
    SUBCASE("nested groups multiply through") {
        auto c = parse_formula("CaMg(Be7C4)2");
        CHECK(c.count(el("Ca")) == 1);
        CHECK(c.count(el("Mg")) == 1);
        CHECK(c.count(el("Be")) == 14);
        CHECK(c.count(el("C")) == 8);
    }
    SUBCASE("single symbol") {
        auto c = parse_formula("H");
        CHECK(c.size() == 1);
        CHECK(c.count(el("H")) == 1);
    }
    SUBCASE("decimals and repeated symbols") {
        auto c = parse_formula("Fe0.5Ni0.5Fe");
        CHECK(c.count(el("Fe")) == doctest::Approx(1.5));
        CHECK(c.count(el("Ni")) == doctest::Approx(0.5));
    }
    SUBCASE("deep nesting") {
        auto c = parse_formula("((BeO)2)3");
        CHECK(c.count(el("Be")) == 6);
        CHECK(c.count(el("O")) == 6);
    }
    SUBCASE("errors") {
        CHECK(kind_of([] { parse_formula("Xy2"); }) ==
              ErrorKind::UnknownElement);
        CHECK(kind_of([] { parse_formula("Be2(C"); }) ==
              ErrorKind::MalformedFormula);
        CHECK(kind_of([] { parse_formula("Be2)C"); }) ==
              ErrorKind::MalformedFormula);
        CHECK(kind_of([] { parse_formula("2Be"); }) ==
              ErrorKind::MalformedFormula);
        CHECK(kind_of([] { parse_formula("()"); }) ==
              ErrorKind::MalformedFormula);
        CHECK(kind_of([] { parse_formula(""); }) ==
              ErrorKind::MalformedFormula);
        CHECK(kind_of([] { parse_formula("Be.C"); }) ==
              ErrorKind::MalformedFormula);
        CHECK(kind_of([] { parse_formula("be2c"); }) ==
              ErrorKind::MalformedFormula);
    }
}

TEST_CASE("reduce_composition") {
    auto f = [](const char* s) { return format_formula(reduce_composition(parse_formula(s))); };
    CHECK(f("Be16C8") == "Be2C");
    CHECK(f("Be2C") == "Be2C");
    // gcd(2, 14, 8) = 2, checked by hand
    auto r = reduce_composition(parse_formula("Mg2Be14C8"));
    CHECK(r.count(el("Mg")) == 1);
    CHECK(r.count(el("Be")) == 7);
    CHECK(r.count(el("C")) == 4);
    CHECK(f("Fe0.5O0.75") == "Fe2O3");
}

TEST_CASE("format_formula orders by electronegativity") {
    CHECK(reduced_formula(parse_formula("C8Be13Mg2Ba")) == "BaMg2Be13C8");
    CHECK(reduced_formula(parse_formula("C7SiBe15Mg")) == "MgBe15SiC7");
    CHECK(reduced_formula(parse_formula("SeIn")) == "InSe");
}

TEST_CASE("atom_fractions") {
    auto fr = atom_fractions(parse_formula("Be2C"));
    CHECK(fr[el("Be")] == doctest::Approx(2.0 / 3.0));
    CHECK(fr[el("C")] == doctest::Approx(1.0 / 3.0));
    CHECK(atom_fractions(parse_formula("Fe"))[el("Fe")] == 1.0);
    auto f3 = atom_fractions(parse_formula("MgBe7C4"));
    CHECK(f3[el("Mg")] == doctest::Approx(1.0 / 12));
    CHECK(f3[el("Be")] == doctest::Approx(7.0 / 12));
    CHECK(f3[el("C")] == doctest::Approx(4.0 / 12));
}

TEST_CASE("composition invariants on random formulas") {
    CounterRng rng(2024);
    const char* pool[] = {"H", "Be", "C", "O", "Mg", "Si", "Ca", "Fe",
                          "Ba", "Sn", "Cl", "N"};
    for (int trial = 0; trial < 500; ++trial) {
        Composition::Counts counts;
        int n = 1 + static_cast<int>(rng.below(4));
        for (int i = 0; i < n; ++i)
            counts[el(pool[rng.below(12)])] +=
                static_cast<double>(1 + rng.below(20));
        Composition c(counts);
        // fractions sum to one
        double sum = 0;
        for (auto& [e, x] : atom_fractions(c))
            sum += x;
        CHECK(std::abs(sum - 1.0) < 1e-12);
        // parse(format(reduced)) is the identity
        Composition r = reduce_composition(c);
        CHECK(parse_formula(format_formula(r)) == r);
        // reduced counts are integers with gcd 1
        long long g = 0;
        for (auto& [e, k] : r.counts()) {
            CHECK(k == std::round(k));
            g = std::gcd(g, static_cast<long long>(k));
        }
        CHECK(g == 1);
    }
}

TEST_CASE("lattice invariants") {
    CHECK(kind_of([] {
              Eigen::Matrix3d m = Eigen::Matrix3d::Identity();
              m(2, 2) = -1;
              Lattice{m};
          }) == ErrorKind::InvalidLattice);
    CHECK(kind_of([] {
              Eigen::Matrix3d m = Eigen::Matrix3d::Identity() * 0.05;
              Lattice{m};
          }) == ErrorKind::InvalidLattice);
    auto l = Lattice::from_parameters(3, 4, 5, 80, 95, 110);
    auto len = l.lengths();
    auto ang = l.angles();
    CHECK(len[0] == doctest::Approx(3));
    CHECK(len[1] == doctest::Approx(4));
    CHECK(len[2] == doctest::Approx(5));
    CHECK(ang[0] == doctest::Approx(80));
    CHECK(ang[1] == doctest::Approx(95));
    CHECK(ang[2] == doctest::Approx(110));
    Eigen::Vector3d f(0.1, 0.7, 0.3);
    CHECK((l.to_fractional(l.to_cartesian(f)) - f).norm() < 1e-12);
}

TEST_CASE("structure normalizes fractional coordinates") {
    Structure s(Lattice::from_parameters(3, 3, 3, 90, 90, 90),
                {{el("C"), {-0.25, 1.5, -1e-18}}});
    auto f = s.sites()[0].frac;
    CHECK(f[0] == doctest::Approx(0.75));
    CHECK(f[1] == doctest::Approx(0.5));
    CHECK(f[2] >= 0.0);
    CHECK(f[2] < 1.0);
    CHECK(kind_of([] {
              Structure(Lattice::from_parameters(3, 3, 3, 90, 90, 90), {});
          }) == ErrorKind::InvalidStructure);
}

TEST_CASE("density") {
    // hand calculation: 12.011 g/mol / (N_A * 8e-24 cm^3)
    const double expected = 12.011 / (6.02214076e23 * 8e-24);
    CHECK(density(cubic_carbon(2.0)) == doctest::Approx(expected).epsilon(1e-12));
    CHECK(density(cubic_carbon(2.0)) == doctest::Approx(2.4931).epsilon(1e-4));

    // 2x1x1 expansion keeps the density
    Eigen::Matrix3d m = Eigen::Matrix3d::Identity() * 2.0;
    m(0, 0) = 4.0;
    Structure doubled(Lattice(m), {{el("C"), {0, 0, 0}}, {el("C"), {0.5, 0, 0}}});
    CHECK(std::abs(density(doubled) / expected - 1.0) < 1e-9);

    Structure superheavy(Lattice::from_parameters(3, 3, 3, 90, 90, 90),
                         {{el("Og"), {0, 0, 0}}});
    CHECK(kind_of([&] { density(superheavy); }) == ErrorKind::MissingMass);
}
