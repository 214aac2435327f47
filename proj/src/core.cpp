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

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <numeric>

namespace matnav {

namespace {

constexpr double deg = std::numbers::pi / 180.0;

bool near_integer(double x, double tol = 1e-8) {
    return std::abs(x - std::round(x)) <= tol * std::max(1.0, std::abs(x));
}

} // namespace

// ---------------------------------------------------------------- Lattice

Lattice::Lattice(const Eigen::Matrix3d& basis) : basis_(basis) {
    if (!basis_.allFinite())
        throw Error(ErrorKind::InvalidLattice, "non-finite lattice matrix");
    for (int i = 0; i < 3; ++i) {
        if (!(basis_.row(i).norm() > 0.1))
            throw Error(ErrorKind::InvalidLattice,
                        "lattice vector " + std::to_string(i) +
                            " shorter than 0.1 A");
    }
    if (!(basis_.determinant() > 0.0))
        throw Error(ErrorKind::InvalidLattice,
                    "lattice must be right-handed with positive volume");
    inverse_ = basis_.inverse();
}

Lattice Lattice::from_parameters(double a, double b, double c, double alpha,
                                 double beta, double gamma) {
    const double ca = std::cos(alpha * deg);
    const double cb = std::cos(beta * deg);
    const double cg = std::cos(gamma * deg);
    const double sg = std::sin(gamma * deg);
    if (!(sg > 1e-8))
        throw Error(ErrorKind::InvalidLattice, "gamma must lie in (0, 180)");
    const double cy = (ca - cb * cg) / sg;
    const double cz2 = 1.0 - cb * cb - cy * cy;
    if (!(cz2 > 0.0))
        throw Error(ErrorKind::InvalidLattice,
                    "cell angles do not describe a valid cell");
    Eigen::Matrix3d m;
    m << a, 0.0, 0.0,
         b * cg, b * sg, 0.0,
         c * cb, c * cy, c * std::sqrt(cz2);
    return Lattice(m);
}

std::array<double, 3> Lattice::lengths() const {
    return {basis_.row(0).norm(), basis_.row(1).norm(), basis_.row(2).norm()};
}

std::array<double, 3> Lattice::angles() const {
    auto angle = [&](int i, int j) {
        double c = basis_.row(i).dot(basis_.row(j)) /
                   (basis_.row(i).norm() * basis_.row(j).norm());
        return std::acos(std::clamp(c, -1.0, 1.0)) / deg;
    };
    return {angle(1, 2), angle(0, 2), angle(0, 1)};
}

Eigen::Vector3d Lattice::to_cartesian(const Eigen::Vector3d& frac) const {
    return basis_.transpose() * frac;
}

Eigen::Vector3d Lattice::to_fractional(const Eigen::Vector3d& cart) const {
    return inverse_.transpose() * cart;
}

Eigen::Vector3d wrap_fractional(const Eigen::Vector3d& frac) {
    Eigen::Vector3d out;
    for (int i = 0; i < 3; ++i) {
        double x = frac[i] - std::floor(frac[i]);
        // floor of a tiny negative number can round back up to exactly 1
        if (x >= 1.0)
            x = 0.0;
        out[i] = x;
    }
    return out;
}

// ------------------------------------------------------------ Composition

Composition::Composition(Counts counts) {
    for (const auto& [e, n] : counts) {
        if (!std::isfinite(n) || n < 0.0)
            throw Error(ErrorKind::InvalidArgument,
                        "composition counts must be finite and non-negative");
        if (n > 0.0)
            counts_.emplace(e, n);
    }
    if (counts_.empty())
        throw Error(ErrorKind::InvalidArgument,
                    "composition needs at least one element with count > 0");
}

double Composition::count(Element e) const {
    auto it = counts_.find(e);
    return it == counts_.end() ? 0.0 : it->second;
}

double Composition::total() const {
    double t = 0.0;
    for (const auto& [e, n] : counts_)
        t += n;
    return t;
}

std::vector<Element> Composition::elements() const {
    std::vector<Element> out;
    out.reserve(counts_.size());
    for (const auto& [e, n] : counts_)
        out.push_back(e);
    return out;
}

// -------------------------------------------------------------- Structure

Structure::Structure(Lattice lattice, std::vector<Site> sites, std::string id)
    : lattice_(std::move(lattice)), sites_(std::move(sites)),
      id_(std::move(id)) {
    if (sites_.empty())
        throw Error(ErrorKind::InvalidStructure,
                    "a structure needs at least one site");
    for (auto& s : sites_) {
        if (!s.frac.allFinite())
            throw Error(ErrorKind::InvalidStructure,
                        "non-finite fractional coordinate");
        s.frac = wrap_fractional(s.frac);
    }
}

Composition Structure::composition() const {
    Composition::Counts c;
    for (const auto& s : sites_)
        c[s.element] += 1.0;
    return Composition(std::move(c));
}

Structure Structure::with_id(std::string id) const {
    Structure copy = *this;
    copy.id_ = std::move(id);
    return copy;
}

// ---------------------------------------------------------------- formula

namespace {

class FormulaParser {
public:
    explicit FormulaParser(std::string_view text) : text_(text) {}

    Composition::Counts parse() {
        auto counts = group_sequence(0);
        if (pos_ != text_.size())
            fail("unexpected '" + std::string(1, text_[pos_]) + "'");
        return counts;
    }

private:
    [[noreturn]] void fail(const std::string& why) const {
        throw Error(ErrorKind::MalformedFormula,
                    "malformed formula '" + std::string(text_) + "' at " +
                        std::to_string(pos_) + ": " + why);
    }

    char peek() const { return pos_ < text_.size() ? text_[pos_] : '\0'; }

    static char closing(char open) { return open == '(' ? ')' : ']'; }

    Composition::Counts group_sequence(int depth) {
        Composition::Counts acc;
        bool any = false;
        while (pos_ < text_.size()) {
            char c = peek();
            if (c == ')' || c == ']') {
                if (depth == 0)
                    fail("unbalanced closing parenthesis");
                break;
            }
            Composition::Counts part;
            if (c == '(' || c == '[') {
                ++pos_;
                part = group_sequence(depth + 1);
                if (peek() != closing(c))
                    fail("unbalanced parenthesis");
                ++pos_;
            } else if (std::isupper(static_cast<unsigned char>(c))) {
                std::size_t start = pos_++;
                while (std::islower(static_cast<unsigned char>(peek())))
                    ++pos_;
                part[Element::from_symbol(text_.substr(start, pos_ - start))] =
                    1.0;
            } else if (std::isdigit(static_cast<unsigned char>(c)) ||
                       c == '.') {
                fail("dangling number");
            } else {
                fail("unexpected character");
            }
            double mult = number_or_one();
            for (const auto& [e, n] : part)
                acc[e] += n * mult;
            any = true;
        }
        if (!any)
            fail("empty group");
        return acc;
    }

    double number_or_one() {
        std::size_t start = pos_;
        while (std::isdigit(static_cast<unsigned char>(peek())) ||
               peek() == '.')
            ++pos_;
        if (start == pos_)
            return 1.0;
        double v = 0.0;
        auto [ptr, ec] =
            std::from_chars(text_.data() + start, text_.data() + pos_, v);
        if (ec != std::errc{} || ptr != text_.data() + pos_ ||
            !std::isfinite(v))
            fail("bad subscript");
        return v;
    }

    std::string_view text_;
    std::size_t pos_ = 0;
};

std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front())))
        s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back())))
        s.remove_suffix(1);
    return s;
}

} // namespace

Composition parse_formula(std::string_view text) {
    text = trim(text);
    if (text.empty())
        throw Error(ErrorKind::MalformedFormula, "empty formula");
    for (char c : text)
        if (static_cast<unsigned char>(c) > 127)
            throw Error(ErrorKind::MalformedFormula,
                        "formula must be ASCII");
    auto counts = FormulaParser(text).parse();
    std::erase_if(counts, [](const auto& kv) { return kv.second <= 0.0; });
    if (counts.empty())
        throw Error(ErrorKind::MalformedFormula,
                    "formula '" + std::string(text) + "' has no atoms");
    return Composition(std::move(counts));
}

std::string format_formula(const Composition& c) {
    std::vector<Element> order = c.elements();
    std::sort(order.begin(), order.end(), [](Element a, Element b) {
        double xa = element_data(a).electronegativity;
        double xb = element_data(b).electronegativity;
        bool ha = xa > 0.0, hb = xb > 0.0;
        if (ha != hb)
            return ha;
        if (ha && xa != xb)
            return xa < xb;
        return a < b;
    });
    std::string out;
    for (Element e : order) {
        out += e.symbol();
        double n = c.count(e);
        if (near_integer(n)) {
            long long k = std::llround(n);
            if (k != 1)
                out += std::to_string(k);
        } else {
            char buf[32];
            std::snprintf(buf, sizeof buf, "%.6f", n);
            std::string s = buf;
            while (!s.empty() && s.back() == '0')
                s.pop_back();
            if (!s.empty() && s.back() == '.')
                s.pop_back();
            out += s;
        }
    }
    return out;
}

Composition reduce_composition(const Composition& c) {
    int multiplier = 0;
    for (int m = 1; m <= 1000; ++m) {
        bool ok = std::all_of(c.counts().begin(), c.counts().end(),
                              [m](const auto& kv) {
                                  return near_integer(kv.second * m, 1e-6);
                              });
        if (ok) {
            multiplier = m;
            break;
        }
    }
    if (multiplier == 0)
        return c;
    long long g = 0;
    for (const auto& [e, n] : c.counts())
        g = std::gcd(g, std::llround(n * multiplier));
    Composition::Counts out;
    for (const auto& [e, n] : c.counts())
        out[e] = static_cast<double>(std::llround(n * multiplier) / g);
    return Composition(std::move(out));
}

std::string reduced_formula(const Composition& c) {
    return format_formula(reduce_composition(c));
}

std::map<Element, double> atom_fractions(const Composition& c) {
    std::map<Element, double> out;
    const double total = c.total();
    for (const auto& [e, n] : c.counts())
        out[e] = n / total;
    return out;
}

double density(const Structure& s) {
    double mass = 0.0;
    for (const auto& site : s.sites())
        mass += atomic_mass(site.element);
    // g/mol / (1/mol * A^3 * 1e-24 cm^3/A^3)
    return mass / (avogadro * s.volume() * 1e-24);
}

} // namespace matnav
