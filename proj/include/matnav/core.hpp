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
/// Crystal structures, compositions and formula arithmetic.
///
/// All types here are immutable value objects once constructed.

#include <matnav/elements.hpp>

#include <Eigen/Dense>

#include <array>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace matnav {

/// Avogadro constant, 1/mol (exact, SI 2019).
inline constexpr double avogadro = 6.02214076e23;

/// Periodic cell spanned by three row vectors in Angstrom.
class Lattice {
public:
    /// Rows of `basis` are the lattice vectors a, b, c.
    /// Throws Error(InvalidLattice) unless det > 0 and every vector is
    /// longer than 0.1 A.
    explicit Lattice(const Eigen::Matrix3d& basis);

    /// Standard crystallographic setting: a along x, b in the xy-plane.
    /// Angles in degrees.
    static Lattice from_parameters(double a, double b, double c,
                                   double alpha, double beta, double gamma);

    const Eigen::Matrix3d& matrix() const noexcept { return basis_; }
    double volume() const noexcept { return basis_.determinant(); }
    std::array<double, 3> lengths() const;
    /// alpha, beta, gamma in degrees.
    std::array<double, 3> angles() const;

    Eigen::Vector3d to_cartesian(const Eigen::Vector3d& frac) const;
    Eigen::Vector3d to_fractional(const Eigen::Vector3d& cart) const;

    bool operator==(const Lattice& other) const {
        return basis_ == other.basis_;
    }

private:
    Eigen::Matrix3d basis_;
    Eigen::Matrix3d inverse_;
};

/// Map every coordinate into [0, 1).
Eigen::Vector3d wrap_fractional(const Eigen::Vector3d& frac);

struct Site {
    Element element;
    Eigen::Vector3d frac;

    bool operator==(const Site& other) const {
        return element == other.element && frac == other.frac;
    }
};

/// Element -> count, with rational (decimal) counts allowed.
class Composition {
public:
    using Counts = std::map<Element, double>;

    /// Zero entries are dropped. Throws Error(InvalidArgument) for
    /// negative or non-finite counts or when nothing positive remains.
    explicit Composition(Counts counts);

    const Counts& counts() const noexcept { return counts_; }
    double count(Element e) const;
    double total() const;
    std::size_t size() const noexcept { return counts_.size(); }
    std::vector<Element> elements() const;

    bool operator==(const Composition& other) const {
        return counts_ == other.counts_;
    }

private:
    Counts counts_;
};

class Structure {
public:
    /// Fractional coordinates are wrapped into [0, 1). Throws
    /// Error(InvalidStructure) for an empty site list.
    Structure(Lattice lattice, std::vector<Site> sites, std::string id = {});

    const Lattice& lattice() const noexcept { return lattice_; }
    const std::vector<Site>& sites() const noexcept { return sites_; }
    const std::string& id() const noexcept { return id_; }
    std::size_t size() const noexcept { return sites_.size(); }
    double volume() const noexcept { return lattice_.volume(); }
    Composition composition() const;

    Structure with_id(std::string id) const;

    bool operator==(const Structure& other) const = default;

private:
    Lattice lattice_;
    std::vector<Site> sites_;
    std::string id_;
};

/// Parse "CaMg(Be7C4)2"-style formulas: element symbols, integer or
/// decimal subscripts and nested parentheses.
/// Throws Error(UnknownElement) or Error(MalformedFormula).
Composition parse_formula(std::string_view text);

/// Integer-count formula ordered by increasing electronegativity
/// (elements without a tabulated value last, by atomic number).
/// Subscripts of 1 are omitted; non-integer counts print with up to
/// six decimals.
std::string format_formula(const Composition& c);

/// Counts divided by their gcd. Non-integer counts are first scaled by
/// the smallest multiplier in 1..1000 that makes them integral.
Composition reduce_composition(const Composition& c);

/// Shorthand for format_formula(reduce_composition(c)).
std::string reduced_formula(const Composition& c);

std::map<Element, double> atom_fractions(const Composition& c);

/// Mass density in g/cm^3. Throws Error(MissingMass).
double density(const Structure& s);

} // namespace matnav
