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

#include <matnav/elements.hpp>
#include <matnav/error.hpp>

#include <array>
#include <charconv>
#include <vector>

namespace matnav {

namespace {

struct Row {
    const char* symbol;
    double mass;
    double radius;
    double chi;
    int group;
    int period;
    const char* oxidation;
};

// clang-format off
constexpr std::array<Row, element_count> rows{{
    {"H",    1.008,   0.31, 2.20,  1, 1, "-1,1"},
    {"He",   4.0026,  0.28, 0.0,  18, 1, ""},
    {"Li",   6.94,    1.28, 0.98,  1, 2, "1"},
    {"Be",   9.0122,  0.96, 1.57,  2, 2, "2"},
    {"B",   10.81,    0.84, 2.04, 13, 2, "3"},
    {"C",   12.011,   0.76, 2.55, 14, 2, "-4,4"},
    {"N",   14.007,   0.71, 3.04, 15, 2, "-3,3,5"},
    {"O",   15.999,   0.66, 3.44, 16, 2, "-2"},
    {"F",   18.998,   0.57, 3.98, 17, 2, "-1"},
    {"Ne",  20.180,   0.58, 0.0,  18, 2, ""},
    {"Na",  22.990,   1.66, 0.93,  1, 3, "1"},
    {"Mg",  24.305,   1.41, 1.31,  2, 3, "2"},
    {"Al",  26.982,   1.21, 1.61, 13, 3, "3"},
    {"Si",  28.085,   1.11, 1.90, 14, 3, "-4,4"},
    {"P",   30.974,   1.07, 2.19, 15, 3, "-3,3,5"},
    {"S",   32.06,    1.05, 2.58, 16, 3, "-2,2,4,6"},
    {"Cl",  35.45,    1.02, 3.16, 17, 3, "-1,1,3,5,7"},
    {"Ar",  39.95,    1.06, 0.0,  18, 3, ""},
    {"K",   39.098,   2.03, 0.82,  1, 4, "1"},
    {"Ca",  40.078,   1.76, 1.00,  2, 4, "2"},
    {"Sc",  44.956,   1.70, 1.36,  3, 4, "3"},
    {"Ti",  47.867,   1.60, 1.54,  4, 4, "4"},
    {"V",   50.942,   1.53, 1.63,  5, 4, "5"},
    {"Cr",  51.996,   1.39, 1.66,  6, 4, "3,6"},
    {"Mn",  54.938,   1.39, 1.55,  7, 4, "2,4,7"},
    {"Fe",  55.845,   1.32, 1.83,  8, 4, "2,3"},
    {"Co",  58.933,   1.26, 1.88,  9, 4, "2,3"},
    {"Ni",  58.693,   1.24, 1.91, 10, 4, "2"},
    {"Cu",  63.546,   1.32, 1.90, 11, 4, "2"},
    {"Zn",  65.38,    1.22, 1.65, 12, 4, "2"},
    {"Ga",  69.723,   1.22, 1.81, 13, 4, "3"},
    {"Ge",  72.630,   1.20, 2.01, 14, 4, "-4,2,4"},
    {"As",  74.922,   1.19, 2.18, 15, 4, "-3,3,5"},
    {"Se",  78.971,   1.20, 2.55, 16, 4, "-2,2,4,6"},
    {"Br",  79.904,   1.20, 2.96, 17, 4, "-1,1,3,5,7"},
    {"Kr",  83.798,   1.16, 3.00, 18, 4, ""},
    {"Rb",  85.468,   2.20, 0.82,  1, 5, "1"},
    {"Sr",  87.62,    1.95, 0.95,  2, 5, "2"},
    {"Y",   88.906,   1.90, 1.22,  3, 5, "3"},
    {"Zr",  91.224,   1.75, 1.33,  4, 5, "4"},
    {"Nb",  92.906,   1.64, 1.60,  5, 5, "5"},
    {"Mo",  95.95,    1.54, 2.16,  6, 5, "4,6"},
    {"Tc",  98.0,     1.47, 1.90,  7, 5, "4,7"},
    {"Ru", 101.07,    1.46, 2.20,  8, 5, "3,4"},
    {"Rh", 102.91,    1.42, 2.28,  9, 5, "3"},
    {"Pd", 106.42,    1.39, 2.20, 10, 5, "2,4"},
    {"Ag", 107.87,    1.45, 1.93, 11, 5, "1"},
    {"Cd", 112.41,    1.44, 1.69, 12, 5, "2"},
    {"In", 114.82,    1.42, 1.78, 13, 5, "3"},
    {"Sn", 118.71,    1.39, 1.96, 14, 5, "-4,2,4"},
    {"Sb", 121.76,    1.39, 2.05, 15, 5, "-3,3,5"},
    {"Te", 127.60,    1.38, 2.10, 16, 5, "-2,2,4,6"},
    {"I",  126.90,    1.39, 2.66, 17, 5, "-1,1,3,5,7"},
    {"Xe", 131.29,    1.40, 2.60, 18, 5, ""},
    {"Cs", 132.91,    2.44, 0.79,  1, 6, "1"},
    {"Ba", 137.33,    2.15, 0.89,  2, 6, "2"},
    {"La", 138.91,    2.07, 1.10,  3, 6, "3"},
    {"Ce", 140.12,    2.04, 1.12,  3, 6, "3,4"},
    {"Pr", 140.91,    2.03, 1.13,  3, 6, "3"},
    {"Nd", 144.24,    2.01, 1.14,  3, 6, "3"},
    {"Pm", 145.0,     1.99, 1.13,  3, 6, "3"},
    {"Sm", 150.36,    1.98, 1.17,  3, 6, "3"},
    {"Eu", 151.96,    1.98, 1.20,  3, 6, "2,3"},
    {"Gd", 157.25,    1.96, 1.20,  3, 6, "3"},
    {"Tb", 158.93,    1.94, 1.10,  3, 6, "3"},
    {"Dy", 162.50,    1.92, 1.22,  3, 6, "3"},
    {"Ho", 164.93,    1.92, 1.23,  3, 6, "3"},
    {"Er", 167.26,    1.89, 1.24,  3, 6, "3"},
    {"Tm", 168.93,    1.90, 1.25,  3, 6, "3"},
    {"Yb", 173.05,    1.87, 1.10,  3, 6, "3"},
    {"Lu", 174.97,    1.87, 1.27,  3, 6, "3"},
    {"Hf", 178.49,    1.75, 1.30,  4, 6, "4"},
    {"Ta", 180.95,    1.70, 1.50,  5, 6, "5"},
    {"W",  183.84,    1.62, 2.36,  6, 6, "4,6"},
    {"Re", 186.21,    1.51, 1.90,  7, 6, "4"},
    {"Os", 190.23,    1.44, 2.20,  8, 6, "4"},
    {"Ir", 192.22,    1.41, 2.20,  9, 6, "3,4"},
    {"Pt", 195.08,    1.36, 2.28, 10, 6, "2,4"},
    {"Au", 196.97,    1.36, 2.54, 11, 6, "3"},
    {"Hg", 200.59,    1.32, 2.00, 12, 6, "1,2"},
    {"Tl", 204.38,    1.45, 1.62, 13, 6, "1,3"},
    {"Pb", 207.2,     1.46, 2.33, 14, 6, "2,4"},
    {"Bi", 208.98,    1.48, 2.02, 15, 6, "3"},
    {"Po", 209.0,     1.40, 2.00, 16, 6, "-2,2,4"},
    {"At", 210.0,     1.50, 2.20, 17, 6, "-1,1"},
    {"Rn", 222.0,     1.50, 0.0,  18, 6, ""},
    {"Fr", 223.0,     2.60, 0.70,  1, 7, "1"},
    {"Ra", 226.0,     2.21, 0.90,  2, 7, "2"},
    {"Ac", 227.0,     2.15, 1.10,  3, 7, "3"},
    {"Th", 232.04,    2.06, 1.30,  3, 7, "4"},
    {"Pa", 231.04,    2.00, 1.50,  3, 7, "5"},
    {"U",  238.03,    1.96, 1.38,  3, 7, "6"},
    {"Np", 237.0,     1.90, 1.36,  3, 7, "5"},
    {"Pu", 244.0,     1.87, 1.28,  3, 7, "4"},
    {"Am", 243.0,     1.80, 1.30,  3, 7, "3"},
    {"Cm", 247.0,     1.69, 1.30,  3, 7, "3"},
    {"Bk", 247.0,     0.0,  1.30,  3, 7, "3"},
    {"Cf", 251.0,     0.0,  1.30,  3, 7, "3"},
    {"Es", 252.0,     0.0,  1.30,  3, 7, "3"},
    {"Fm", 257.0,     0.0,  1.30,  3, 7, "3"},
    {"Md", 258.0,     0.0,  1.30,  3, 7, "3"},
    {"No", 259.0,     0.0,  1.30,  3, 7, "2"},
    {"Lr", 262.0,     0.0,  1.30,  3, 7, "3"},
    {"Rf",   0.0,     0.0,  0.0,   4, 7, ""},
    {"Db",   0.0,     0.0,  0.0,   5, 7, ""},
    {"Sg",   0.0,     0.0,  0.0,   6, 7, ""},
    {"Bh",   0.0,     0.0,  0.0,   7, 7, ""},
    {"Hs",   0.0,     0.0,  0.0,   8, 7, ""},
    {"Mt",   0.0,     0.0,  0.0,   9, 7, ""},
    {"Ds",   0.0,     0.0,  0.0,  10, 7, ""},
    {"Rg",   0.0,     0.0,  0.0,  11, 7, ""},
    {"Cn",   0.0,     0.0,  0.0,  12, 7, ""},
    {"Nh",   0.0,     0.0,  0.0,  13, 7, ""},
    {"Fl",   0.0,     0.0,  0.0,  14, 7, ""},
    {"Mc",   0.0,     0.0,  0.0,  15, 7, ""},
    {"Lv",   0.0,     0.0,  0.0,  16, 7, ""},
    {"Ts",   0.0,     0.0,  0.0,  17, 7, ""},
    {"Og",   0.0,     0.0,  0.0,  18, 7, ""},
}};
// clang-format on

struct Table {
    std::array<std::vector<int>, element_count> oxidation;
    std::array<ElementData, element_count> data;

    Table() {
        for (int i = 0; i < element_count; ++i) {
            const Row& r = rows[i];
            std::string_view ox = r.oxidation;
            while (!ox.empty()) {
                auto comma = ox.find(',');
                auto tok = ox.substr(0, comma);
                int v = 0;
                std::from_chars(tok.data(), tok.data() + tok.size(), v);
                oxidation[i].push_back(v);
                ox = comma == std::string_view::npos ? std::string_view{}
                                                     : ox.substr(comma + 1);
            }
            data[i] = ElementData{i + 1,     r.symbol, r.mass,
                                  r.radius,  r.chi,    r.group,
                                  r.period,  oxidation[i]};
        }
    }
};

const Table& table() {
    static const Table t;
    return t;
}

} // namespace

Element::Element(int atomic_number) : z_(atomic_number) {
    if (atomic_number < 1 || atomic_number > element_count)
        throw Error(ErrorKind::UnknownElement,
                    "invalid atomic number " + std::to_string(atomic_number));
}

std::optional<Element> Element::try_from_symbol(std::string_view symbol) {
    for (int i = 0; i < element_count; ++i)
        if (symbol == rows[i].symbol)
            return Element(i + 1);
    return std::nullopt;
}

Element Element::from_symbol(std::string_view symbol) {
    if (auto e = try_from_symbol(symbol))
        return *e;
    throw Error(ErrorKind::UnknownElement,
                "unknown chemical symbol '" + std::string(symbol) + "'");
}

std::string_view Element::symbol() const noexcept {
    return rows[z_ - 1].symbol;
}

const ElementData& element_data(Element e) {
    return table().data[e.z() - 1];
}

double atomic_mass(Element e) {
    double m = element_data(e).mass;
    if (m <= 0.0)
        throw Error(ErrorKind::MissingMass,
                    "no tabulated atomic mass for " + std::string(e.symbol()));
    return m;
}

double covalent_radius(Element e) {
    double r = element_data(e).covalent_radius;
    if (r <= 0.0)
        throw Error(ErrorKind::MissingRadius,
                    "no tabulated covalent radius for " +
                        std::string(e.symbol()));
    return r;
}

double electronegativity(Element e) {
    double x = element_data(e).electronegativity;
    if (x <= 0.0)
        throw Error(ErrorKind::MissingElementData,
                    "no tabulated electronegativity for " +
                        std::string(e.symbol()));
    return x;
}

std::span<const int> oxidation_states(Element e) {
    auto s = element_data(e).oxidation_states;
    if (s.empty())
        throw Error(ErrorKind::MissingOxidationStates,
                    "no oxidation states tabulated for " +
                        std::string(e.symbol()));
    return s;
}

std::string_view to_string(ErrorKind kind) {
    switch (kind) {
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::UnknownElement: return "UnknownElement";
    case ErrorKind::MalformedFormula: return "MalformedFormula";
    case ErrorKind::MissingMass: return "MissingMass";
    case ErrorKind::InvalidLattice: return "InvalidLattice";
    case ErrorKind::InvalidStructure: return "InvalidStructure";
    case ErrorKind::MissingCellTag: return "MissingCellTag";
    case ErrorKind::MissingAtomLoop: return "MissingAtomLoop";
    case ErrorKind::NumericParse: return "NumericParse";
    case ErrorKind::UnsupportedSymmetry: return "UnsupportedSymmetry";
    case ErrorKind::MalformedCif: return "MalformedCif";
    case ErrorKind::InvalidWindow: return "InvalidWindow";
    case ErrorKind::EmptyCorpus: return "EmptyCorpus";
    case ErrorKind::SchemaViolation: return "SchemaViolation";
    case ErrorKind::InsufficientData: return "InsufficientData";
    case ErrorKind::NetworkError: return "NetworkError";
    case ErrorKind::AuthError: return "AuthError";
    case ErrorKind::DecodeError: return "DecodeError";
    case ErrorKind::BudgetExhausted: return "BudgetExhausted";
    case ErrorKind::Timeout: return "Timeout";
    case ErrorKind::AsymmetricTensor: return "AsymmetricTensor";
    case ErrorKind::SingularTensor: return "SingularTensor";
    case ErrorKind::NonPositiveModulus: return "NonPositiveModulus";
    case ErrorKind::NonPositiveDensity: return "NonPositiveDensity";
    case ErrorKind::MissingRadius: return "MissingRadius";
    case ErrorKind::MissingOxidationStates: return "MissingOxidationStates";
    case ErrorKind::NoPrototypes: return "NoPrototypes";
    case ErrorKind::MissingElementData: return "MissingElementData";
    case ErrorKind::DegenerateFeatures: return "DegenerateFeatures";
    case ErrorKind::SchemaMismatch: return "SchemaMismatch";
    case ErrorKind::EmptyTestSet: return "EmptyTestSet";
    case ErrorKind::InfeasibleComposition: return "InfeasibleComposition";
    case ErrorKind::MissingEnergy: return "MissingEnergy";
    case ErrorKind::EmptySeries: return "EmptySeries";
    case ErrorKind::StageOrder: return "StageOrder";
    case ErrorKind::AlreadyRunning: return "AlreadyRunning";
    case ErrorKind::NotReady: return "NotReady";
    case ErrorKind::NotFound: return "NotFound";
    case ErrorKind::ConfigError: return "ConfigError";
    case ErrorKind::IoError: return "IoError";
    case ErrorKind::ExternalProcess: return "ExternalProcess";
    }
    return "Unknown";
}

} // namespace matnav
