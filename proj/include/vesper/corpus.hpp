#pragma once

#include "vesper/common.hpp"

#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

namespace vesper {

inline constexpr int kMinYear = 1800;
inline constexpr int kMaxYear = 2100;

struct PaperRecord {
    std::string id;
    std::optional<std::string> doi;
    std::string title;
    std::string abstract;
    int year = 0;
    std::optional<std::string> venue;
    std::vector<std::string> references;
    bool is_core = true;

    bool operator==(const PaperRecord&) const = default;
};

/// A recoverable problem found while reading input; the record is skipped.
struct ParseWarning {
    std::size_t line = 0;
    std::string message;
};

/// Validated paper collection. Papers keep their input order; lookups go
/// through the id index.
class Corpus {
public:
    Corpus() = default;

    /// Adds a record. Throws DataError on duplicate id or invalid fields.
    void add(PaperRecord record);

    std::size_t size() const { return papers_.size(); }
    bool empty() const { return papers_.empty(); }
    const std::vector<PaperRecord>& papers() const { return papers_; }
    const PaperRecord& operator[](std::size_t i) const { return papers_[i]; }
    PaperRecord& mutable_paper(std::size_t i) { return papers_[i]; }

    std::optional<std::size_t> index_of(std::string_view id) const;
    bool contains(std::string_view id) const { return index_of(id).has_value(); }

    /// Sorted set of years that carry at least one core paper.
    std::set<int> core_years() const;
    /// Reference ids that do not resolve to a record, with citing counts.
    std::map<std::string, std::size_t> dangling_references() const;
    std::size_t resolvable_reference_count() const;

    bool operator==(const Corpus& other) const { return papers_ == other.papers_; }

private:
    std::vector<PaperRecord> papers_;
    std::unordered_map<std::string, std::size_t> index_;
};

struct ParseResult {
    Corpus corpus;
    std::vector<ParseWarning> warnings;
};

/// Reads newline-delimited JSON records. Malformed lines and out-of-range
/// years are collected as warnings; a duplicate id throws DataError.
ParseResult parse_corpus(std::istream& in);
ParseResult parse_corpus_file(const std::string& path);

PaperRecord record_from_json_line(std::string_view line);
std::string record_to_json_line(const PaperRecord& record);
void write_corpus(std::ostream& out, const Corpus& corpus);

/// Dense document vectors with their id manifest.
struct EmbeddingMatrix {
    Matrix values;
    std::vector<std::string> ids;
    std::string model_id;

    Digest payload_hash() const;
};

/// Bidirectional id <-> row mapping between a corpus and an embedding file.
struct AlignedView {
    std::unordered_map<std::string, std::size_t> row_of;  // paper id -> matrix row
    std::vector<std::size_t> paper_of_row;                // matrix row -> corpus index

    std::optional<std::size_t> row(std::string_view id) const;
};

/// Throws DataError naming the offending id when a manifest id is unknown
/// or duplicated.
AlignedView align_embeddings(const Corpus& corpus, const EmbeddingMatrix& matrix);

/// Papers visible at year t: every paper published in t or earlier plus
/// everything those papers reference.
struct CorpusWindow {
    int year = 0;
    std::vector<std::size_t> members;       // sorted corpus indices
    std::vector<char> published_by_t;       // parallel to members
    std::vector<std::size_t> cohort;        // core papers with year == t, sorted

    bool contains(std::size_t corpus_index) const;
};

CorpusWindow window(const Corpus& corpus, int t);

}  // namespace vesper
