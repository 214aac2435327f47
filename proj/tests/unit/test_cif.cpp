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

#include "test_support.hpp"

#include <matnav/cif.hpp>

#include <doctest.h>

using namespace matnav;
using namespace matnav::testing;

namespace {

const char* cubic_c = R"(data_cubic
_cell_length_a 3.0
_cell_length_b 3.0
_cell_length_c 3.0
_cell_angle_alpha 90
_cell_angle_beta 90
_cell_angle_gamma 90
loop_
_atom_site_type_symbol
_atom_site_fract_x
_atom_site_fract_y
_atom_site_fract_z
C 0 0 0
)";

} // namespace

TEST_CASE("parse a cubic cell") {
    Structure s = parse_cif(cubic_c);
    CHECK(s.size() == 1);
    CHECK(s.volume() == doctest::Approx(27.0));
    CHECK(s.id() == "cubic");
    CHECK(s.sites()[0].element == el("C"));
}

TEST_CASE("unknown tags are ignored") {
    std::string text = cubic_c;
    text.insert(text.find("_cell_length_a"), "_journal_year 2024\n");
    CHECK(parse_cif(text) == parse_cif(cubic_c));
}

TEST_CASE("missing cell tag") {
    std::string text = cubic_c;
    text.erase(text.find("_cell_length_a"), std::string("_cell_length_a 3.0\n").size());
    CHECK(throws_kind([&] { parse_cif(text); }, ErrorKind::MissingCellTag));
}

TEST_CASE("tolerated syntax") {
    const char* text = R"(# leading comment
data_Be2C_test   # trailing comment
_journal_name_full 'Acta Cryst''s journal'
_publ_section_title
;
Multi-line text field
with 'quotes' and data_ words inside
;
_cell_length_a 4.342(2)
_cell_length_b 4.342(2)
_cell_length_c 4.342(2)
_cell_angle_alpha 90.0
_cell_angle_beta 90.0
_cell_angle_gamma 90.0
_symmetry_space_group_name_H-M 'P 1'
loop_
_symmetry_equiv_pos_as_xyz
'x, y, z'
loop_
_atom_site_label
_atom_site_fract_x
_atom_site_fract_y
_atom_site_fract_z
_atom_site_occupancy
Be1 0.25 0.25 0.25 1
Be2 0.75 0.75 0.75 1
C1 0 0 0 1.0(1)
)";
    Structure s = parse_cif(text);
    CHECK(s.size() == 3);
    CHECK(s.lattice().lengths()[0] == doctest::Approx(4.342));
    CHECK(format_formula(s.composition()) == "Be2C");
}

TEST_CASE("label fallback prefers two-letter symbols") {
    std::string text = cubic_c;
    auto pos = text.find("_atom_site_type_symbol");
    text.replace(pos, std::string("_atom_site_type_symbol").size(), "_atom_site_label");
    auto row = text.find("C 0 0 0");
    text.replace(row, 7, "Ca12 0 0 0\nC3 0.5 0.5 0.5");
    Structure s = parse_cif(text);
    CHECK(s.sites()[0].element == el("Ca"));
    CHECK(s.sites()[1].element == el("C"));
}

TEST_CASE("non-identity symmetry is rejected") {
    std::string text = cubic_c;
    text += "loop_\n_symmetry_equiv_pos_as_xyz\n'x, y, z'\n'-x, -y, -z'\n";
    CHECK(throws_kind([&] { parse_cif(text); }, ErrorKind::UnsupportedSymmetry));
    std::string hm = cubic_c;
    hm += "_symmetry_space_group_name_H-M 'F m -3 m'\n";
    CHECK(throws_kind([&] { parse_cif(hm); }, ErrorKind::UnsupportedSymmetry));
}

TEST_CASE("structured errors") {
    CHECK(throws_kind([] { parse_cif(""); }, ErrorKind::MalformedCif));
    CHECK(throws_kind([] { parse_cif("_cell_length_a 3\n"); }, ErrorKind::MalformedCif));
    std::string no_loop = cubic_c;
    no_loop.erase(no_loop.find("loop_"));
    CHECK(throws_kind([&] { parse_cif(no_loop); }, ErrorKind::MissingAtomLoop));
    std::string bad_num = cubic_c;
    bad_num.replace(bad_num.find("3.0"), 3, "3.x");
    CHECK(throws_kind([&] { parse_cif(bad_num); }, ErrorKind::NumericParse));
    std::string bad_el = cubic_c;
    bad_el.replace(bad_el.find("C 0 0 0"), 1, "Qq");
    CHECK(throws_kind([&] { parse_cif(bad_el); }, ErrorKind::UnknownElement));
    std::string ragged = cubic_c;
    ragged += "Si 0.5 0.5\n";
    CHECK(throws_kind([&] { parse_cif(ragged); }, ErrorKind::MalformedCif));
}

TEST_CASE("multi-block input yields one document per block") {
    std::string two = std::string(cubic_c) + "\n" + cubic_c;
    two.replace(two.rfind("data_cubic"), 10, "data_second");
    auto docs = parse_cif_documents(two);
    REQUIRE(docs.size() == 2);
    CHECK(docs[1].data_block_name == "second");
    CHECK(structure_from_cif(docs[1]).id() == "second");
}

TEST_CASE("write_cif is deterministic and row-complete") {
    Structure s(Lattice::from_parameters(4.342, 4.342, 4.342, 90, 90, 90),
                {{el("Be"), {0.25, 0.25, 0.25}}, {el("Be"), {0.75, 0.75, 0.75}},
                 {el("C"), {0, 0, 0}}},
                "mp 1569");
    std::string a = write_cif(s);
    CHECK(a == write_cif(s));
    CHECK(a.find("data_mp_1569\n") != std::string::npos);

    // 2x2x2 expansion of a single-site cell: eight atom rows
    std::vector<Site> eight;
    for (int i = 0; i < 8; ++i)
        eight.push_back({el("C"), {0.5 * (i & 1), 0.5 * ((i >> 1) & 1), 0.5 * (i >> 2)}});
    Structure big(Lattice::from_parameters(6, 6, 6, 90, 90, 90), eight, "c8");
    auto doc = parse_cif_documents(write_cif(big)).front();
    CHECK(doc.loop_with("_atom_site_fract_x")->rows.size() == 8);
}

TEST_CASE("round trip on random structures") {
    CounterRng rng(77);
    for (int i = 0; i < 200; ++i) {
        Structure s = random_structure(rng, 10, "r" + std::to_string(i));
        Structure back = parse_cif(write_cif(s));
        REQUIRE(back.size() == s.size());
        CHECK(back.id() == s.id());
        auto l0 = s.lattice().lengths(), l1 = back.lattice().lengths();
        auto a0 = s.lattice().angles(), a1 = back.lattice().angles();
        for (int k = 0; k < 3; ++k) {
            CHECK(std::abs(l0[k] - l1[k]) < 1e-6);
            CHECK(std::abs(a0[k] - a1[k]) < 1e-6);
        }
        for (std::size_t j = 0; j < s.size(); ++j) {
            CHECK(back.sites()[j].element == s.sites()[j].element);
            for (int k = 0; k < 3; ++k)
                CHECK(frac_distance(back.sites()[j].frac[k], s.sites()[j].frac[k]) < 1e-6);
        }
    }
}

TEST_CASE("fuzzed input only raises matnav::Error") {
    CounterRng rng(5);
    const std::string seed_text = cubic_c;
    for (int i = 0; i < 3000; ++i) {
        std::string text;
        if (i % 2 == 0) {
            std::size_t n = rng.below(200);
            for (std::size_t k = 0; k < n; ++k)
                text.push_back(static_cast<char>(rng.below(256)));
        } else {
            text = seed_text;
            for (int m = 0; m < 4; ++m) {
                std::size_t at = rng.below(text.size());
                text[at] = static_cast<char>(rng.below(256));
            }
        }
        try {
            parse_cif(text);
        } catch (const Error&) {
        }
    }
}
