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
#include <matnav/evidence.hpp>
#include <matnav/hash.hpp>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <regex>
#include <tuple>

namespace matnav {

namespace {

using nlohmann::json;

std::string lower(std::string_view s) {
    std::string out(s);
    for (char& c : out)
        c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

std::string trim(std::string_view s) {
    auto is_space = [](char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; };
    while (!s.empty() && is_space(s.front()))
        s.remove_prefix(1);
    while (!s.empty() && is_space(s.back()))
        s.remove_suffix(1);
    return std::string(s);
}

std::string collapse_spaces(std::string_view s) {
    std::string out;
    bool space = false;
    for (char c : s) {
        if (std::isspace(static_cast<unsigned char>(c))) {
            space = true;
            continue;
        }
        if (space && !out.empty())
            out.push_back(' ');
        space = false;
        out.push_back(c);
    }
    return out;
}

std::string regex_escape(std::string_view s) {
    static const std::string special = R"(\^$.|?*+()[]{}-)";
    std::string out;
    for (char c : s) {
        if (special.find(c) != std::string::npos)
            out.push_back('\\');
        out.push_back(c);
    }
    return out;
}

struct LexiconEntry {
    const char* name;
    const char* unit;
    std::vector<std::string> aliases;
};

const std::vector<LexiconEntry>& lexicon() {
    static const std::vector<LexiconEntry> entries = {
        {"Debye temperature", "K", {"Debye temperature", "Theta_D", "\xce\x98_D", "\xce\x98" "D"}},
        {"bulk modulus", "GPa", {"bulk modulus"}},
        {"shear modulus", "GPa", {"shear modulus"}},
        {"band gap", "eV", {"band gap", "bandgap"}},
    };
    return entries;
}

} // namespace

// ------------------------------------------------------------------ corpus

std::vector<Document> load_corpus(const std::filesystem::path& dir) {
    std::error_code ec;
    if (!std::filesystem::is_directory(dir, ec))
        throw Error(ErrorKind::IoError, "corpus directory not found: " + dir.string());
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(dir))
        if (entry.is_regular_file() && entry.path().extension() == ".txt")
            files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    std::vector<Document> docs;
    for (const auto& f : files)
        docs.push_back({f.stem().string(), read_file(f)});
    return docs;
}

std::vector<Chunk> chunk_text(std::string_view doc_id, std::string_view text,
                              std::size_t window, std::size_t overlap) {
    if (window == 0 || overlap >= window)
        throw Error(ErrorKind::InvalidWindow,
                    "chunk overlap " + std::to_string(overlap) +
                        " must be smaller than window " + std::to_string(window));
    const std::size_t stride = window - overlap;
    std::vector<Chunk> out;
    for (std::size_t start = 0; start < text.size(); start += stride)
        out.push_back({std::string(doc_id), start, std::string(text.substr(start, window))});
    return out;
}

// --------------------------------------------------------------- retrieval

std::vector<std::string> tokenize(std::string_view text) {
    std::vector<std::string> tokens;
    std::string cur;
    for (char c : text) {
        if (std::isalnum(static_cast<unsigned char>(c))) {
            cur.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
        } else if (!cur.empty()) {
            tokens.push_back(std::move(cur));
            cur.clear();
        }
    }
    if (!cur.empty())
        tokens.push_back(std::move(cur));
    return tokens;
}

HashedTfEmbedder::HashedTfEmbedder(std::size_t dimension) : dim_(dimension) {
    if (dim_ == 0)
        throw Error(ErrorKind::InvalidArgument, "embedding dimension must be positive");
}

std::vector<double> HashedTfEmbedder::embed(std::string_view text) const {
    std::vector<double> v(dim_, 0.0);
    for (const auto& tok : tokenize(text))
        v[fnv1a64(tok) % dim_] += 1.0;
    double norm = 0;
    for (double x : v)
        norm += x * x;
    if (norm > 0) {
        norm = std::sqrt(norm);
        for (double& x : v)
            x /= norm;
    }
    return v;
}

double cosine(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size())
        throw Error(ErrorKind::InvalidArgument, "embedding dimensions differ");
    double dot = 0, na = 0, nb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if (na == 0 || nb == 0)
        return 0.0;
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

std::vector<RankedChunk> rank_chunks(std::string_view query, const std::vector<Chunk>& chunks,
                                     std::size_t k, const Embedder& embedder) {
    if (chunks.empty())
        throw Error(ErrorKind::EmptyCorpus, "no chunks to rank");
    if (k == 0)
        throw Error(ErrorKind::InvalidArgument, "k must be at least 1");
    const auto q = embedder.embed(query);
    std::vector<RankedChunk> ranked;
    ranked.reserve(chunks.size());
    for (const auto& c : chunks)
        ranked.push_back({c, cosine(q, embedder.embed(c.text))});
    // Scores equal to 1e-12 count as ties, so equal cosines reached via
    // different rounding paths still fall back to the positional order.
    auto level = [](double s) { return std::llround(s * 1e12); };
    auto better = [&](const RankedChunk& a, const RankedChunk& b) {
        if (level(a.score) != level(b.score))
            return level(a.score) > level(b.score);
        return std::tie(a.chunk.doc_id, a.chunk.start) < std::tie(b.chunk.doc_id, b.chunk.start);
    };
    const std::size_t n = std::min(k, ranked.size());
    std::partial_sort(ranked.begin(), ranked.begin() + static_cast<std::ptrdiff_t>(n), ranked.end(),
                      better);
    ranked.resize(n);
    return ranked;
}

// ----------------------------------------------------------------- records

PropertyRecord record_from_json(const json& j) {
    if (!j.is_object())
        throw Error(ErrorKind::SchemaViolation, "record must be a JSON object");
    auto text_field = [&](const char* key) {
        auto it = j.find(key);
        if (it == j.end())
            throw Error(ErrorKind::SchemaViolation, std::string("record missing '") + key + "'");
        if (!it->is_string())
            throw Error(ErrorKind::SchemaViolation, std::string("'") + key + "' must be a string");
        return it->get<std::string>();
    };
    PropertyRecord r;
    r.material = text_field("material");
    r.property_name = text_field("property_name");
    r.unit = text_field("unit");
    r.source_snippet = text_field("source_snippet");
    auto v = j.find("value");
    if (v == j.end())
        throw Error(ErrorKind::SchemaViolation, "record missing 'value'");
    if (!v->is_number())
        throw Error(ErrorKind::SchemaViolation, "'value' must be numeric");
    r.value = v->get<double>();
    if (!std::isfinite(r.value))
        throw Error(ErrorKind::SchemaViolation, "'value' must be finite");
    if (trim(r.material).empty())
        throw Error(ErrorKind::SchemaViolation, "'material' is empty");
    if (trim(r.unit).empty())
        throw Error(ErrorKind::SchemaViolation, "'unit' is empty");
    if (auto n = j.find("normalized"); n != j.end()) {
        if (!n->is_array())
            throw Error(ErrorKind::SchemaViolation, "'normalized' must be an array");
        for (const auto& s : *n) {
            if (!s.is_string())
                throw Error(ErrorKind::SchemaViolation, "'normalized' entries must be strings");
            r.normalized.push_back(s.get<std::string>());
        }
    }
    for (auto it = j.begin(); it != j.end(); ++it) {
        static const char* known[] = {"material", "property_name", "value", "unit",
                                      "source_snippet", "normalized"};
        if (std::find(std::begin(known), std::end(known), it.key()) == std::end(known))
            r.extra[it.key()] = it.value();
    }
    return r;
}

json record_to_json(const PropertyRecord& r) {
    json j = r.extra.is_object() ? r.extra : json::object();
    j["material"] = r.material;
    j["property_name"] = r.property_name;
    j["value"] = r.value;
    j["unit"] = r.unit;
    j["source_snippet"] = r.source_snippet;
    if (!r.normalized.empty())
        j["normalized"] = r.normalized;
    return j;
}

std::vector<PropertyRecord> records_from_json(const json& array) {
    if (!array.is_array())
        throw Error(ErrorKind::SchemaViolation, "record file must hold a JSON array");
    std::vector<PropertyRecord> out;
    for (const auto& j : array)
        out.push_back(record_from_json(j));
    return out;
}

json records_to_json(const std::vector<PropertyRecord>& records) {
    json out = json::array();
    for (const auto& r : records)
        out.push_back(record_to_json(r));
    return out;
}

std::optional<std::string> normalize_unit(std::string_view unit) {
    const std::string u = trim(unit);
    if (u == "K" || u == "k" || lower(u) == "kelvin")
        return "K";
    if (lower(u) == "gpa")
        return "GPa";
    if (u == "eV" || u == "ev")
        return "eV";
    return std::nullopt;
}

std::vector<NormalizedName> normalize_material(std::string_view raw) {
    std::string s = collapse_spaces(raw);
    // Parenthetical notes are only recognized after whitespace, so group
    // brackets inside formulas such as CaMg(Be7C4)2 survive.
    static const std::regex note(R"(\s+[(\[][^()\[\]]*[)\]])");
    for (std::string prev; prev != s;) {
        prev = s;
        s = std::regex_replace(s, note, "");
    }
    static const std::regex separators(R"(\s*(?:/|,|;|\s+and\s+)\s*)", std::regex::icase);
    static const std::regex polytype("^(?:[0-9]+[HCR]|\xce\xb1|\xce\xb2|\xce\xb3|alpha|beta|gamma)-",
                                     std::regex::icase);
    std::vector<NormalizedName> out;
    std::sregex_token_iterator it(s.begin(), s.end(), separators, -1), end;
    for (; it != end; ++it) {
        std::string part = trim(it->str());
        part = std::regex_replace(part, polytype, "");
        part = trim(part);
        if (part.empty())
            continue;
        try {
            out.push_back({reduced_formula(parse_formula(part)), true});
        } catch (const Error&) {
            out.push_back({part, false});
        }
    }
    if (out.empty())
        out.push_back({trim(raw), false});
    return out;
}

std::string material_key(std::string_view raw) {
    std::string key;
    for (const auto& n : normalize_material(raw)) {
        if (!key.empty())
            key += '+';
        key += n.resolved ? n.text : "?" + lower(n.text);
    }
    return key;
}

std::vector<PropertyRecord> merge_records(const std::vector<std::vector<PropertyRecord>>& fragments) {
    struct Item {
        std::string key, property, unit;
        PropertyRecord record;
    };
    std::vector<Item> items;
    for (const auto& fragment : fragments) {
        for (const auto& r : fragment) {
            if (!std::isfinite(r.value))
                throw Error(ErrorKind::SchemaViolation, "non-finite value for " + r.material);
            if (trim(r.material).empty() || trim(r.unit).empty())
                throw Error(ErrorKind::SchemaViolation, "record with empty material or unit");
            Item item{material_key(r.material), lower(trim(r.property_name)),
                      normalize_unit(r.unit).value_or(trim(r.unit)), r};
            item.record.unit = item.unit;
            item.record.normalized.clear();
            for (const auto& n : normalize_material(r.material))
                if (n.resolved)
                    item.record.normalized.push_back(n.text);
            items.push_back(std::move(item));
        }
    }
    std::sort(items.begin(), items.end(), [](const Item& a, const Item& b) {
        return std::tie(a.key, a.property, a.unit, a.record.value, a.record.source_snippet,
                        a.record.material) < std::tie(b.key, b.property, b.unit, b.record.value,
                                                      b.record.source_snippet, b.record.material);
    });

    std::vector<PropertyRecord> out;
    std::size_t i = 0;
    while (i < items.size()) {
        std::size_t best = i, j = i + 1;
        for (; j < items.size(); ++j) {
            const auto& prev = items[j - 1];
            const auto& cur = items[j];
            if (std::tie(cur.key, cur.property, cur.unit) != std::tie(prev.key, prev.property, prev.unit))
                break;
            const double a = prev.record.value, b = cur.record.value;
            if (std::abs(b - a) > merge_tolerance * std::max(std::abs(a), std::abs(b)))
                break;
            if (cur.record.source_snippet.size() > items[best].record.source_snippet.size())
                best = j;
        }
        out.push_back(items[best].record);
        i = j;
    }
    std::stable_sort(out.begin(), out.end(), [](const PropertyRecord& a, const PropertyRecord& b) {
        const auto ka = material_key(a.material), kb = material_key(b.material);
        return std::tie(ka, a.value) < std::tie(kb, b.value);
    });
    return out;
}

// ------------------------------------------------------------- percentiles

double quantile_sorted(const std::vector<double>& sorted, double p) {
    if (sorted.empty())
        throw Error(ErrorKind::InsufficientData, "quantile of empty data");
    double h = (static_cast<double>(sorted.size()) - 1.0) * p;
    if (std::abs(h - std::round(h)) < 1e-9)
        h = std::round(h);
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

PercentileBands percentile_bands(const std::vector<double>& values) {
    if (values.size() < 2)
        throw Error(ErrorKind::InsufficientData,
                    "percentile bands need at least 2 values, got " + std::to_string(values.size()));
    for (double v : values)
        if (!std::isfinite(v))
            throw Error(ErrorKind::InsufficientData, "non-finite value in percentile input");
    std::vector<double> sorted = values;
    std::sort(sorted.begin(), sorted.end());
    sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
    PercentileBands b;
    b.p10 = quantile_sorted(sorted, 0.10);
    b.p90 = quantile_sorted(sorted, 0.90);
    for (double v : sorted) {
        if (v <= b.p10)
            b.low_band.push_back(v);
        if (v >= b.p90)
            b.high_band.push_back(v);
    }
    return b;
}

// ------------------------------------------------------------------ intent

QueryIntent parse_query(std::string_view query) {
    const std::string q = lower(collapse_spaces(query));
    for (const auto& entry : lexicon()) {
        for (const auto& alias : entry.aliases) {
            if (q.find(lower(alias)) == std::string::npos)
                continue;
            QueryIntent intent{entry.name, entry.unit, Direction::High, entry.aliases};
            for (const auto& tok : tokenize(q))
                if (tok == "low" || tok == "lower" || tok == "lowest" || tok == "small" ||
                    tok == "smallest" || tok == "minimal" || tok == "minimum")
                    intent.direction = Direction::Low;
            return intent;
        }
    }
    throw Error(ErrorKind::InvalidArgument,
                "query does not name a known property: " + std::string(query));
}

json criterion_to_json(const ScreeningCriterion& c) {
    return {{"property_name", c.property_name},
            {"comparator", c.comparator},
            {"threshold", c.threshold},
            {"unit", c.unit},
            {"provenance", c.provenance}};
}

ScreeningCriterion criterion_from_json(const json& j) {
    try {
        ScreeningCriterion c;
        c.property_name = j.at("property_name").get<std::string>();
        c.comparator = j.at("comparator").get<std::string>();
        c.threshold = j.at("threshold").get<double>();
        c.unit = j.at("unit").get<std::string>();
        c.provenance = j.value("provenance", json::object());
        if (c.comparator != ">" && c.comparator != "<")
            throw Error(ErrorKind::SchemaViolation, "comparator must be '>' or '<'");
        return c;
    } catch (const json::exception& e) {
        throw Error(ErrorKind::SchemaViolation, std::string("criterion: ") + e.what());
    }
}

ScreeningCriterion derive_threshold(const std::vector<PropertyRecord>& records,
                                    const QueryIntent& intent, const ThresholdOptions& options) {
    std::vector<std::string> names{lower(intent.property_name)};
    for (const auto& a : intent.aliases)
        names.push_back(lower(a));
    std::vector<PropertyRecord> selected;
    std::size_t excluded = 0;
    for (const auto& r : records) {
        const std::string p = lower(trim(r.property_name));
        if (std::find(names.begin(), names.end(), p) == names.end())
            continue;
        if (normalize_unit(r.unit) != intent.unit) {
            ++excluded;
            continue;
        }
        selected.push_back(r);
    }
    const auto merged = merge_records({selected});
    if (merged.size() < options.min_records)
        throw Error(ErrorKind::InsufficientData,
                    "need " + std::to_string(options.min_records) + " records for '" +
                        intent.property_name + "', have " + std::to_string(merged.size()));
    std::vector<double> values;
    for (const auto& r : merged)
        values.push_back(r.value);
    const PercentileBands bands = percentile_bands(values);
    const bool high = intent.direction == Direction::High;
    const double pivot = high ? bands.p90 : bands.p10;
    const double g = options.granularity;
    ScreeningCriterion c;
    c.property_name = intent.property_name;
    c.comparator = high ? ">" : "<";
    c.threshold = g > 0 ? std::round(pivot / g) * g : pivot;
    c.unit = intent.unit;
    c.provenance = {{"p10", bands.p10},
                    {"p90", bands.p90},
                    {"percentile", high ? 90 : 10},
                    {"quantile", "linear interpolation (type 7) on distinct values"},
                    {"granularity", g},
                    {"low_band_size", bands.low_band.size()},
                    {"high_band_size", bands.high_band.size()},
                    {"low_band", bands.low_band},
                    {"high_band", bands.high_band},
                    {"record_count", merged.size()},
                    {"excluded_unit_records", excluded}};
    return c;
}

// --------------------------------------------------------------- map stage

std::vector<PropertyRecord> PatternExtractor::extract(const std::vector<RankedChunk>& batch,
                                                      const QueryIntent& intent) const {
    std::string alt;
    for (const auto& a : intent.aliases.empty() ? std::vector<std::string>{intent.property_name}
                                                : intent.aliases) {
        if (!alt.empty())
            alt += '|';
        alt += regex_escape(a);
    }
    const std::string number = R"((-?[0-9]+(?:\.[0-9]+)?))";
    const std::string unit = R"(\s*(K|GPa|eV|meV|kelvin)\b)";
    // "<alias> of <material> is 812 K"
    const std::regex stated("(?:" + alt + R"()\s+(?:of|for)\s+([^.;:\n]+?)\s+(?:is|was|=|reaches|of)\s+(?:about\s+|approximately\s+|around\s+|~\s*)?)" +
                                number + unit,
                            std::regex::icase);
    // "<alias> = 429 K for <material>"
    const std::regex measured("(?:" + alt + R"()\s*=\s*)" + number + unit +
                                  R"(\s+(?:was\s+(?:found|measured)\s+)?for\s+(?:a\s+|an\s+|the\s+)?(?:pure\s+)?([A-Za-z0-9()\-]+))",
                              std::regex::icase);
    std::vector<PropertyRecord> out;
    auto add = [&](std::string material, const std::string& value, const std::string& u,
                   const std::string& snippet) {
        material = trim(material);
        static const std::regex article("^(?:the|a|an)\\s+", std::regex::icase);
        material = std::regex_replace(material, article, "");
        if (material.empty())
            return;
        PropertyRecord r;
        r.material = material;
        r.property_name = intent.property_name;
        r.value = std::stod(value);
        r.unit = u;
        r.source_snippet = collapse_spaces(snippet);
        out.push_back(std::move(r));
    };
    for (const auto& rc : batch) {
        const std::string& text = rc.chunk.text;
        for (std::sregex_iterator it(text.begin(), text.end(), stated), end; it != end; ++it)
            add((*it)[1].str(), (*it)[2].str(), (*it)[3].str(), it->str());
        for (std::sregex_iterator it(text.begin(), text.end(), measured), end; it != end; ++it)
            add((*it)[3].str(), (*it)[1].str(), (*it)[2].str(), it->str());
    }
    return out;
}

EvidenceResult ground_query(std::string_view query, const std::vector<Document>& corpus,
                            const Embedder& embedder, const Extractor& extractor,
                            const EvidenceOptions& options) {
    EvidenceResult result;
    result.intent = parse_query(query);
    std::vector<Chunk> chunks;
    for (const auto& doc : corpus) {
        auto c = chunk_text(doc.id, doc.text, options.window, options.overlap);
        chunks.insert(chunks.end(), c.begin(), c.end());
    }
    result.chunk_count = chunks.size();
    result.retrieved = rank_chunks(query, chunks, options.top_k, embedder);
    const auto batches = batch_chunks(result.retrieved, options.batch_size);
    result.batch_count = batches.size();
    std::vector<std::vector<PropertyRecord>> fragments;
    for (const auto& batch : batches)
        fragments.push_back(extractor.extract(batch, result.intent));
    result.records = merge_records(fragments);
    result.criterion = derive_threshold(result.records, result.intent, options.threshold);
    return result;
}

} // namespace matnav
