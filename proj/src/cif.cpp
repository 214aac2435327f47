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

#include <matnav/cif.hpp>
#include <matnav/error.hpp>

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>

namespace matnav {

namespace {

std::string lower(std::string_view s) {
    std::string out(s);
    for (auto& c : out)
        c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

bool is_space(char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' ||
           c == '\v';
}

enum class TokenKind { DataBlock, Loop, Tag, Value, End };

struct Token {
    TokenKind kind;
    std::string text;
    std::size_t line;
};

class Lexer {
public:
    explicit Lexer(std::string_view text) : text_(text) {}

    Token next() {
        skip_blank();
        if (pos_ >= text_.size())
            return {TokenKind::End, {}, line_};
        const std::size_t line = line_;
        const char c = text_[pos_];
        if (c == ';' && at_line_start()) {
            // text field: runs until a line that starts with ';'
            ++pos_;
            std::string value;
            while (true) {
                if (pos_ >= text_.size())
                    fail("unterminated text field", line);
                if (text_[pos_] == ';' && at_line_start()) {
                    ++pos_;
                    break;
                }
                if (text_[pos_] == '\n')
                    ++line_;
                value.push_back(text_[pos_++]);
            }
            while (!value.empty() && (value.back() == '\n' || value.back() == '\r'))
                value.pop_back();
            return {TokenKind::Value, std::move(value), line};
        }
        if (c == '\'' || c == '"') {
            std::size_t start = ++pos_;
            while (true) {
                if (pos_ >= text_.size() || text_[pos_] == '\n')
                    fail("unterminated quoted string", line);
                if (text_[pos_] == c &&
                    (pos_ + 1 >= text_.size() || is_space(text_[pos_ + 1])))
                    break;
                ++pos_;
            }
            std::string value(text_.substr(start, pos_ - start));
            ++pos_;
            return {TokenKind::Value, std::move(value), line};
        }
        std::size_t start = pos_;
        while (pos_ < text_.size() && !is_space(text_[pos_]))
            ++pos_;
        std::string word(text_.substr(start, pos_ - start));
        std::string low = lower(word);
        if (low.starts_with("data_"))
            return {TokenKind::DataBlock, word.substr(5), line};
        if (low == "loop_")
            return {TokenKind::Loop, {}, line};
        if (low.starts_with("save_") || low == "global_" || low == "stop_")
            fail("unsupported reserved word '" + word + "'", line);
        if (word.front() == '_')
            return {TokenKind::Tag, low, line};
        return {TokenKind::Value, std::move(word), line};
    }

    [[noreturn]] static void fail(const std::string& why, std::size_t line) {
        throw Error(ErrorKind::MalformedCif,
                    "CIF line " + std::to_string(line) + ": " + why);
    }

private:
    bool at_line_start() const {
        return pos_ == 0 || text_[pos_ - 1] == '\n' || text_[pos_ - 1] == '\r';
    }

    void skip_blank() {
        while (pos_ < text_.size()) {
            char c = text_[pos_];
            if (c == '\n') {
                ++line_;
                ++pos_;
            } else if (is_space(c)) {
                ++pos_;
            } else if (c == '#') {
                while (pos_ < text_.size() && text_[pos_] != '\n')
                    ++pos_;
            } else {
                break;
            }
        }
    }

    std::string_view text_;
    std::size_t pos_ = 0;
    std::size_t line_ = 1;
};

class Parser {
public:
    explicit Parser(std::string_view text) : lexer_(text) { advance(); }

    std::vector<CifDocument> run() {
        std::vector<CifDocument> docs;
        while (tok_.kind != TokenKind::End) {
            switch (tok_.kind) {
            case TokenKind::DataBlock:
                docs.emplace_back();
                docs.back().data_block_name = tok_.text;
                advance();
                break;
            case TokenKind::Tag: {
                CifDocument& doc = current(docs);
                std::string name = tok_.text;
                advance();
                if (tok_.kind != TokenKind::Value)
                    Lexer::fail("tag " + name + " has no value", tok_.line);
                doc.tags[name] = tok_.text;
                advance();
                break;
            }
            case TokenKind::Loop:
                parse_loop(current(docs));
                break;
            case TokenKind::Value:
                Lexer::fail("value '" + tok_.text + "' outside a tag or loop",
                            tok_.line);
            case TokenKind::End:
                break;
            }
        }
        if (docs.empty())
            throw Error(ErrorKind::MalformedCif, "no data_ block found");
        return docs;
    }

private:
    void advance() { tok_ = lexer_.next(); }

    CifDocument& current(std::vector<CifDocument>& docs) {
        if (docs.empty())
            Lexer::fail("content before the first data_ block", tok_.line);
        return docs.back();
    }

    void parse_loop(CifDocument& doc) {
        const std::size_t line = tok_.line;
        advance();
        CifLoop loop;
        while (tok_.kind == TokenKind::Tag) {
            loop.columns.push_back(tok_.text);
            advance();
        }
        if (loop.columns.empty())
            Lexer::fail("loop_ without column tags", line);
        std::vector<std::string> values;
        while (tok_.kind == TokenKind::Value) {
            values.push_back(std::move(tok_.text));
            advance();
        }
        if (values.empty() || values.size() % loop.columns.size() != 0)
            Lexer::fail("loop value count " + std::to_string(values.size()) +
                            " is not a multiple of " +
                            std::to_string(loop.columns.size()) + " columns",
                        line);
        const std::size_t width = loop.columns.size();
        for (std::size_t i = 0; i < values.size(); i += width)
            loop.rows.emplace_back(values.begin() + i,
                                   values.begin() + i + width);
        doc.loops.push_back(std::move(loop));
    }

    Lexer lexer_;
    Token tok_;
};

std::string compact_op(std::string_view op) {
    std::string out;
    for (char c : op)
        if (!is_space(c) && c != '\'' && c != '"')
            out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    return out;
}

bool is_identity_op(std::string_view op) {
    auto c = compact_op(op);
    return c == "x,y,z" || c == "+x,+y,+z";
}

Element element_from_site_label(std::string_view raw, bool from_label) {
    std::size_t n = 0;
    while (n < raw.size() && std::isalpha(static_cast<unsigned char>(raw[n])))
        ++n;
    std::string sym(raw.substr(0, n));
    for (std::size_t i = 0; i < sym.size(); ++i)
        sym[i] = static_cast<char>(
            i == 0 ? std::toupper(static_cast<unsigned char>(sym[i]))
                   : std::tolower(static_cast<unsigned char>(sym[i])));
    if (auto e = Element::try_from_symbol(sym))
        return *e;
    // labels like "Ca1a" or "Oxy" carry extra letters; prefer two-letter
    // symbols over one-letter ones
    if (from_label) {
        for (std::size_t len : {2u, 1u}) {
            if (sym.size() >= len)
                if (auto e = Element::try_from_symbol(sym.substr(0, len)))
                    return *e;
        }
    }
    throw Error(ErrorKind::UnknownElement,
                "unknown element symbol '" + std::string(raw) + "'");
}

void format_number(std::string& out, double v) {
    char buf[64];
    if (std::abs(v) < 5e-7)
        v = 0.0;
    std::snprintf(buf, sizeof buf, "%.6f", v);
    out += buf;
}

} // namespace

std::optional<std::size_t> CifLoop::column(std::string_view tag) const {
    for (std::size_t i = 0; i < columns.size(); ++i)
        if (columns[i] == tag)
            return i;
    return std::nullopt;
}

const std::string* CifDocument::tag(std::string_view name) const {
    auto it = tags.find(std::string(name));
    return it == tags.end() ? nullptr : &it->second;
}

const CifLoop* CifDocument::loop_with(std::string_view tag) const {
    for (const auto& l : loops)
        if (l.column(tag))
            return &l;
    return nullptr;
}

double parse_cif_number(std::string_view value) {
    std::string_view v = value;
    if (auto paren = v.find('('); paren != std::string_view::npos) {
        if (v.back() != ')')
            throw Error(ErrorKind::NumericParse,
                        "bad uncertainty suffix in '" + std::string(value) + "'");
        v = v.substr(0, paren);
    }
    if (!v.empty() && v.front() == '+')
        v.remove_prefix(1);
    double out = 0.0;
    auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (v.empty() || ec != std::errc{} || ptr != v.data() + v.size() ||
        !std::isfinite(out))
        throw Error(ErrorKind::NumericParse,
                    "not a number: '" + std::string(value) + "'");
    return out;
}

std::vector<CifDocument> parse_cif_documents(std::string_view text) {
    return Parser(text).run();
}

Structure structure_from_cif(const CifDocument& doc) {
    static constexpr std::string_view cell_tags[6] = {
        "_cell_length_a", "_cell_length_b",    "_cell_length_c",
        "_cell_angle_alpha", "_cell_angle_beta", "_cell_angle_gamma"};
    double cell[6];
    for (int i = 0; i < 6; ++i) {
        const std::string* v = doc.tag(cell_tags[i]);
        if (!v)
            throw Error(ErrorKind::MissingCellTag,
                        "missing " + std::string(cell_tags[i]));
        cell[i] = parse_cif_number(*v);
    }

    for (std::string_view op_tag :
         {"_symmetry_equiv_pos_as_xyz", "_space_group_symop_operation_xyz"}) {
        if (const CifLoop* ops = doc.loop_with(op_tag)) {
            std::size_t col = *ops->column(op_tag);
            for (const auto& row : ops->rows)
                if (!is_identity_op(row[col]))
                    throw Error(ErrorKind::UnsupportedSymmetry,
                                "symmetry operator '" + row[col] +
                                    "' is not the identity; only P1 is "
                                    "supported");
        }
        if (const std::string* single = doc.tag(op_tag))
            if (!is_identity_op(*single))
                throw Error(ErrorKind::UnsupportedSymmetry,
                            "symmetry operator '" + *single +
                                "' is not the identity");
    }
    for (std::string_view hm_tag :
         {"_symmetry_space_group_name_h-m", "_space_group_name_h-m_alt"}) {
        if (const std::string* hm = doc.tag(hm_tag)) {
            auto c = compact_op(*hm);
            if (c != "p1" && c != "?" && c != ".")
                throw Error(ErrorKind::UnsupportedSymmetry,
                            "space group '" + *hm + "' is not P 1");
        }
    }

    const CifLoop* atoms = doc.loop_with("_atom_site_fract_x");
    if (!atoms || !atoms->column("_atom_site_fract_y") ||
        !atoms->column("_atom_site_fract_z"))
        throw Error(ErrorKind::MissingAtomLoop,
                    "no atom-site loop with fractional coordinates");
    auto type_col = atoms->column("_atom_site_type_symbol");
    auto label_col = atoms->column("_atom_site_label");
    if (!type_col && !label_col)
        throw Error(ErrorKind::MissingAtomLoop,
                    "atom-site loop has neither type symbols nor labels");
    const std::size_t xc = *atoms->column("_atom_site_fract_x");
    const std::size_t yc = *atoms->column("_atom_site_fract_y");
    const std::size_t zc = *atoms->column("_atom_site_fract_z");

    std::vector<Site> sites;
    sites.reserve(atoms->rows.size());
    for (const auto& row : atoms->rows) {
        Element e = type_col ? element_from_site_label(row[*type_col], false)
                             : element_from_site_label(row[*label_col], true);
        Eigen::Vector3d frac(parse_cif_number(row[xc]),
                             parse_cif_number(row[yc]),
                             parse_cif_number(row[zc]));
        sites.push_back({e, frac});
    }
    if (sites.empty())
        throw Error(ErrorKind::MissingAtomLoop, "atom-site loop is empty");
    return Structure(Lattice::from_parameters(cell[0], cell[1], cell[2],
                                              cell[3], cell[4], cell[5]),
                     std::move(sites), doc.data_block_name);
}

Structure parse_cif(std::string_view text) {
    try {
        auto docs = parse_cif_documents(text);
        return structure_from_cif(docs.front());
    } catch (const Error&) {
        throw;
    } catch (const std::exception& e) {
        throw Error(ErrorKind::MalformedCif, e.what());
    }
}

std::string write_cif(const Structure& s) {
    std::string name = s.id().empty() ? "structure" : s.id();
    for (auto& c : name)
        if (is_space(c))
            c = '_';

    const auto len = s.lattice().lengths();
    const auto ang = s.lattice().angles();
    const Composition comp = s.composition();

    std::string out;
    out.reserve(512 + 64 * s.size());
    out += "# generated by matnav\n";
    out += "data_" + name + "\n";
    out += "_symmetry_space_group_name_H-M   'P 1'\n";
    const char* cell_names[6] = {"_cell_length_a   ", "_cell_length_b   ",
                                 "_cell_length_c   ", "_cell_angle_alpha   ",
                                 "_cell_angle_beta   ", "_cell_angle_gamma   "};
    const double cell[6] = {len[0], len[1], len[2], ang[0], ang[1], ang[2]};
    for (int i = 0; i < 6; ++i) {
        out += cell_names[i];
        format_number(out, cell[i]);
        out += '\n';
    }
    out += "_symmetry_Int_Tables_number   1\n";
    out += "_chemical_formula_structural   " + format_formula(comp) + "\n";
    out += "_cell_volume   ";
    format_number(out, s.volume());
    out += "\n";
    out += "loop_\n"
           " _symmetry_equiv_pos_site_id\n"
           " _symmetry_equiv_pos_as_xyz\n"
           "  1  'x, y, z'\n";
    out += "loop_\n"
           " _atom_site_type_symbol\n"
           " _atom_site_label\n"
           " _atom_site_symmetry_multiplicity\n"
           " _atom_site_fract_x\n"
           " _atom_site_fract_y\n"
           " _atom_site_fract_z\n"
           " _atom_site_occupancy\n";
    std::map<Element, int> counter;
    for (const auto& site : s.sites()) {
        std::string sym(site.element.symbol());
        out += "  " + sym + "  " + sym +
               std::to_string(counter[site.element]++) + "  1  ";
        for (int k = 0; k < 3; ++k) {
            format_number(out, site.frac[k]);
            out += "  ";
        }
        out += "1\n";
    }
    return out;
}

} // namespace matnav
