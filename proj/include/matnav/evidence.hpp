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
/// Literature evidence: chunking, retrieval, record merging, material
/// name normalization and percentile-based screening thresholds.

#include <json.hpp>

#include <cstddef>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace matnav {

struct Document {
    std::string id;
    std::string text;
};

/// Text files of a directory, sorted by file name; id = file stem.
std::vector<Document> load_corpus(const std::filesystem::path& dir);

struct Chunk {
    std::string doc_id;
    std::size_t start = 0; ///< byte offset into the document
    std::string text;

    bool operator==(const Chunk&) const = default;
};

/// Fixed-window chunking with stride `window - overlap`. Throws
/// Error(InvalidWindow) unless 0 <= overlap < window.
std::vector<Chunk> chunk_text(std::string_view doc_id, std::string_view text,
                              std::size_t window = 500, std::size_t overlap = 100);

class Embedder {
public:
    virtual ~Embedder() = default;
    virtual std::size_t dimension() const = 0;
    virtual std::vector<double> embed(std::string_view text) const = 0;
};

/// Lowercase alphanumeric tokens, FNV-1a bucketed term counts, L2
/// normalized.
class HashedTfEmbedder final : public Embedder {
public:
    explicit HashedTfEmbedder(std::size_t dimension = 512);
    std::size_t dimension() const override { return dim_; }
    std::vector<double> embed(std::string_view text) const override;

private:
    std::size_t dim_;
};

/// Lowercase alphanumeric runs of `text`.
std::vector<std::string> tokenize(std::string_view text);

/// Cosine similarity; 0 when either vector is zero.
double cosine(const std::vector<double>& a, const std::vector<double>& b);

struct RankedChunk {
    Chunk chunk;
    double score = 0;
};

/// Top-k chunks by cosine similarity to `query`, ties broken by
/// (doc_id, start). Throws Error(EmptyCorpus) or Error(InvalidArgument)
/// for k == 0.
std::vector<RankedChunk> rank_chunks(std::string_view query, const std::vector<Chunk>& chunks,
                                     std::size_t k, const Embedder& embedder);

template <class T>
std::vector<std::vector<T>> batch_chunks(const std::vector<T>& items, std::size_t size = 5) {
    std::vector<std::vector<T>> out;
    if (size == 0)
        size = 1;
    for (std::size_t i = 0; i < items.size(); i += size)
        out.emplace_back(items.begin() + static_cast<std::ptrdiff_t>(i),
                         items.begin() + static_cast<std::ptrdiff_t>(std::min(items.size(), i + size)));
    return out;
}

struct PropertyRecord {
    std::string material;
    std::string property_name;
    double value = 0;
    std::string unit;
    std::string source_snippet;
    std::vector<std::string> normalized; ///< canonical formulas, filled by merge
    nlohmann::json extra = nlohmann::json::object(); ///< unknown keys, passed through

    bool operator==(const PropertyRecord&) const = default;
};

/// Throws Error(SchemaViolation) on missing keys, wrong types,
/// non-finite values or empty material/unit.
PropertyRecord record_from_json(const nlohmann::json& j);
nlohmann::json record_to_json(const PropertyRecord& r);
std::vector<PropertyRecord> records_from_json(const nlohmann::json& array);
nlohmann::json records_to_json(const std::vector<PropertyRecord>& records);

/// Canonical unit symbol, or nullopt when the unit is not in the table.
std::optional<std::string> normalize_unit(std::string_view unit);

struct NormalizedName {
    std::string text; ///< reduced formula when resolved, cleaned name otherwise
    bool resolved = false;

    bool operator==(const NormalizedName&) const = default;
};

/// Strip parenthetical notes and polytype prefixes, split compound
/// names, and reduce each part to a formula.
std::vector<NormalizedName> normalize_material(std::string_view raw);

/// Key used to group records of the same material.
std::string material_key(std::string_view raw);

/// Relative tolerance used by merge_records.
inline constexpr double merge_tolerance = 0.005;

/// Collapse records that share material key, property, normalized unit
/// and agree in value within `merge_tolerance`. Sorted by (key, value).
std::vector<PropertyRecord> merge_records(const std::vector<std::vector<PropertyRecord>>& fragments);

struct PercentileBands {
    std::vector<double> low_band;
    std::vector<double> high_band;
    double p10 = 0;
    double p90 = 0;
};

/// Linear-interpolation ("type 7") quantile of sorted data.
double quantile_sorted(const std::vector<double>& sorted, double p);

/// Throws Error(InsufficientData) for fewer than 2 or non-finite values.
PercentileBands percentile_bands(const std::vector<double>& values);

enum class Direction { High, Low };

struct QueryIntent {
    std::string property_name;
    std::string unit;
    Direction direction = Direction::High;
    std::vector<std::string> aliases; ///< phrases naming the property in text
};

/// Recognize the target property and direction in a free-text query.
/// Throws Error(InvalidArgument) when no known property is named.
QueryIntent parse_query(std::string_view query);

struct ThresholdOptions {
    std::size_t min_records = 10;
    double granularity = 50;
};

struct ScreeningCriterion {
    std::string property_name;
    std::string comparator; ///< ">" or "<"
    double threshold = 0;
    std::string unit;
    nlohmann::json provenance;

    bool admits(double value) const {
        return comparator == ">" ? value > threshold : value < threshold;
    }
};

nlohmann::json criterion_to_json(const ScreeningCriterion& c);
ScreeningCriterion criterion_from_json(const nlohmann::json& j);

/// Threshold from the upper (or lower) percentile band of the merged
/// records for the intent's property, rounded to `granularity`.
ScreeningCriterion derive_threshold(const std::vector<PropertyRecord>& records,
                                    const QueryIntent& intent,
                                    const ThresholdOptions& options = {});

/// Map stage: turns a batch of retrieved chunks into record fragments.
class Extractor {
public:
    virtual ~Extractor() = default;
    virtual std::vector<PropertyRecord> extract(const std::vector<RankedChunk>& batch,
                                                const QueryIntent& intent) const = 0;
};

/// Regex extraction of statements such as "<alias> of <material> is 812 K"
/// and "<alias> = 429 K for <material>".
class PatternExtractor final : public Extractor {
public:
    std::vector<PropertyRecord> extract(const std::vector<RankedChunk>& batch,
                                        const QueryIntent& intent) const override;
};

struct EvidenceOptions {
    std::size_t window = 500;
    std::size_t overlap = 100;
    std::size_t top_k = 100;
    std::size_t batch_size = 5;
    ThresholdOptions threshold;
};

struct EvidenceResult {
    QueryIntent intent;
    std::size_t chunk_count = 0;
    std::vector<RankedChunk> retrieved;
    std::size_t batch_count = 0;
    std::vector<PropertyRecord> records; ///< merged
    ScreeningCriterion criterion;
};

/// Chunk, retrieve, extract per batch, merge and derive the criterion.
EvidenceResult ground_query(std::string_view query, const std::vector<Document>& corpus,
                            const Embedder& embedder, const Extractor& extractor,
                            const EvidenceOptions& options = {});

} // namespace matnav
