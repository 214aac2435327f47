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
/// CIF 1.1 reading and writing for P1 structures.
///
/// Supported: cell tags, an atom-site loop with fractional coordinates
/// and `_atom_site_type_symbol` (or `_atom_site_label` with trailing
/// digits stripped), comments, quoted and semicolon-delimited values,
/// unknown tags, and uncertainty suffixes such as `3.0(2)`. Symmetry
/// operators other than the identity are rejected.

#include <matnav/core.hpp>

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace matnav {

struct CifLoop {
    std::vector<std::string> columns; ///< lower-cased tag names
    std::vector<std::vector<std::string>> rows;

    std::optional<std::size_t> column(std::string_view tag) const;
};

struct CifDocument {
    std::string data_block_name;
    std::map<std::string, std::string> tags; ///< keys lower-cased
    std::vector<CifLoop> loops;

    const std::string* tag(std::string_view name) const;
    /// First loop that has a column named `tag`.
    const CifLoop* loop_with(std::string_view tag) const;
};

/// One document per `data_` block. Throws Error(MalformedCif) on
/// syntax errors.
std::vector<CifDocument> parse_cif_documents(std::string_view text);

/// Structure of a single document. Throws Error with kind
/// MissingCellTag, MissingAtomLoop, NumericParse, UnknownElement,
/// UnsupportedSymmetry or InvalidLattice.
Structure structure_from_cif(const CifDocument& doc);

/// Structure from the first data block. Never throws anything but
/// matnav::Error, whatever the input bytes.
Structure parse_cif(std::string_view text);

/// Deterministic P1 CIF. Numbers carry six decimals; the block name
/// is the structure id with whitespace replaced by underscores.
std::string write_cif(const Structure& s);

/// Parse a CIF numeric value, discarding a trailing "(n)" uncertainty.
/// Throws Error(NumericParse).
double parse_cif_number(std::string_view value);

} // namespace matnav
