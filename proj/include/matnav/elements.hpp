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
/// Embedded per-element data table.
///
/// Sources:
///  - atomic masses: IUPAC standard atomic weights (abridged); for
///    elements without a standard weight up to Lr, the mass number of
///    the longest-lived isotope. Elements 104-118 carry no mass.
///  - covalent radii: Cordero et al., Dalton Trans. (2008) 2832,
///    single-bond values (sp3 for C, low-spin for Mn/Fe/Co); up to Cm.
///  - electronegativities: Pauling scale (absent for He, Ne, Ar, Rn and
///    elements 104-118).
///  - oxidation states: the "common" oxidation states commonly used by
///    materials-database tooling.

#include <optional>
#include <span>
#include <string>
#include <string_view>

namespace matnav {

/// Atomic number, 1..118.
class Element {
public:
    constexpr Element() = default;
    /// Throws Error(UnknownElement) for numbers outside 1..118.
    explicit Element(int atomic_number);
    /// Throws Error(UnknownElement) for unrecognised symbols.
    static Element from_symbol(std::string_view symbol);
    static std::optional<Element> try_from_symbol(std::string_view symbol);

    constexpr int z() const noexcept { return z_; }
    std::string_view symbol() const noexcept;

    friend constexpr auto operator<=>(Element, Element) = default;

private:
    int z_ = 1;
};

struct ElementData {
    int z;
    std::string_view symbol;
    double mass;                  ///< g/mol, 0 when unknown
    double covalent_radius;       ///< Angstrom, 0 when unknown
    double electronegativity;     ///< Pauling, 0 when unknown
    int group;                    ///< 1..18 (lanthanides/actinides: 3)
    int period;
    std::span<const int> oxidation_states;
};

const ElementData& element_data(Element e);

/// Accessors that throw the module-specific error kind when a value
/// is not tabulated.
double atomic_mass(Element e);         // MissingMass
double covalent_radius(Element e);     // MissingRadius
double electronegativity(Element e);   // MissingElementData
std::span<const int> oxidation_states(Element e); // MissingOxidationStates

inline constexpr int element_count = 118;

} // namespace matnav
