#include "vesper/corpus.hpp"

#include <json.hpp>

#include <algorithm>
#include <bit>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

namespace vesper {

using nlohmann::json;

void Corpus::add(PaperRecord record) {
    if (record.id.empty()) throw DataError("paper record has an empty id");
    if (record.year < kMinYear || record.year > kMaxYear) {
        throw DataError("paper " + record.id + ": year " + std::to_string(record.year) +
                        " outside [1800, 2100]");
    }
    if (index_.contains(record.id)) throw DataError("duplicate paper id \"" + record.id + "\"");
    std::erase(record.references, record.id);
    index_.emplace(record.id, papers_.size());
    papers_.push_back(std::move(record));
}

std::optional<std::size_t> Corpus::index_of(std::string_view id) const {
    auto it = index_.find(std::string(id));
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

std::set<int> Corpus::core_years() const {
    std::set<int> years;
    for (const auto& p : papers_) {
        if (p.is_core) years.insert(p.year);
    }
    return years;
}

std::map<std::string, std::size_t> Corpus::dangling_references() const {
    std::map<std::string, std::size_t> out;
    for (const auto& p : papers_) {
        for (const auto& r : p.references) {
            if (!index_.contains(r)) ++out[r];
        }
    }
    return out;
}

std::size_t Corpus::resolvable_reference_count() const {
    std::size_t n = 0;
    for (const auto& p : papers_) {
        for (const auto& r : p.references) n += index_.contains(r) ? 1 : 0;
    }
    return n;
}

PaperRecord record_from_json_line(std::string_view line) {
    const json j = json::parse(line);
    if (!j.is_object()) throw DataError("record is not a JSON object");
    PaperRecord r;
    if (!j.contains("id") || !j["id"].is_string()) throw DataError("missing string field \"id\"");
    r.id = j["id"].get<std::string>();
    if (!j.contains("year") || !j["year"].is_number_integer()) {
        throw DataError("missing integer field \"year\"");
    }
    r.year = j["year"].get<int>();
    if (!j.contains("title") || !j["title"].is_string()) {
        throw DataError("missing string field \"title\"");
    }
    r.title = j["title"].get<std::string>();
    if (j.contains("abstract") && !j["abstract"].is_null()) r.abstract = j["abstract"].get<std::string>();
    if (j.contains("doi") && !j["doi"].is_null()) r.doi = j["doi"].get<std::string>();
    if (j.contains("venue") && !j["venue"].is_null()) r.venue = j["venue"].get<std::string>();
    if (j.contains("references")) r.references = j["references"].get<std::vector<std::string>>();
    if (j.contains("is_core")) r.is_core = j["is_core"].get<bool>();
    return r;
}

std::string record_to_json_line(const PaperRecord& r) {
    json j;
    j["id"] = r.id;
    if (r.doi) j["doi"] = *r.doi;
    j["title"] = r.title;
    j["abstract"] = r.abstract;
    j["year"] = r.year;
    if (r.venue) j["venue"] = *r.venue;
    j["references"] = r.references;
    j["is_core"] = r.is_core;
    return j.dump();
}

ParseResult parse_corpus(std::istream& in) {
    ParseResult result;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        PaperRecord record;
        try {
            record = record_from_json_line(line);
        } catch (const json::exception& e) {
            result.warnings.push_back({line_no, std::string("malformed record: ") + e.what()});
            continue;
        } catch (const DataError& e) {
            result.warnings.push_back({line_no, e.what()});
            continue;
        }
        if (record.year < kMinYear || record.year > kMaxYear) {
            result.warnings.push_back(
                {line_no, "year " + std::to_string(record.year) + " out of range for " + record.id});
            continue;
        }
        if (std::find(record.references.begin(), record.references.end(), record.id) !=
            record.references.end()) {
            result.warnings.push_back({line_no, "self-reference dropped for " + record.id});
        }
        if (result.corpus.contains(record.id)) {
            throw DataError("line " + std::to_string(line_no) + ": duplicate paper id \"" +
                            record.id + "\"");
        }
        result.corpus.add(std::move(record));
    }
    return result;
}

ParseResult parse_corpus_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open corpus file " + path);
    return parse_corpus(in);
}

void write_corpus(std::ostream& out, const Corpus& corpus) {
    for (const auto& p : corpus.papers()) out << record_to_json_line(p) << '\n';
}

Digest EmbeddingMatrix::payload_hash() const {
    // payload is the little-endian f32 block; x86/ARM hosts are little-endian
    static_assert(std::endian::native == std::endian::little);
    return sha256(std::span<const std::uint8_t>(
        reinterpret_cast<const std::uint8_t*>(values.data.data()), values.data.size() * sizeof(float)));
}

std::optional<std::size_t> AlignedView::row(std::string_view id) const {
    auto it = row_of.find(std::string(id));
    if (it == row_of.end()) return std::nullopt;
    return it->second;
}

AlignedView align_embeddings(const Corpus& corpus, const EmbeddingMatrix& matrix) {
    if (matrix.ids.size() != matrix.values.rows) {
        throw DataError("embedding manifest lists " + std::to_string(matrix.ids.size()) +
                        " ids for " + std::to_string(matrix.values.rows) + " rows");
    }
    AlignedView view;
    view.paper_of_row.resize(matrix.ids.size());
    for (std::size_t row = 0; row < matrix.ids.size(); ++row) {
        const auto& id = matrix.ids[row];
        auto idx = corpus.index_of(id);
        if (!idx) throw DataError("embedding id \"" + id + "\" is not in the corpus");
        if (!view.row_of.emplace(id, row).second) {
            throw DataError("duplicate id \"" + id + "\" in embedding manifest");
        }
        view.paper_of_row[row] = *idx;
    }
    return view;
}

bool CorpusWindow::contains(std::size_t corpus_index) const {
    return std::binary_search(members.begin(), members.end(), corpus_index);
}

CorpusWindow window(const Corpus& corpus, int t) {
    if (t < kMinYear || t > kMaxYear) {
        throw ConfigError("window year " + std::to_string(t) + " outside [1800, 2100]");
    }
    CorpusWindow w;
    w.year = t;
    std::vector<char> in(corpus.size(), 0), published(corpus.size(), 0);
    for (std::size_t i = 0; i < corpus.size(); ++i) {
        const auto& p = corpus[i];
        if (p.year > t) continue;
        in[i] = published[i] = 1;
        for (const auto& r : p.references) {
            if (auto j = corpus.index_of(r)) in[*j] = 1;
        }
    }
    for (std::size_t i = 0; i < corpus.size(); ++i) {
        if (!in[i]) continue;
        w.members.push_back(i);
        w.published_by_t.push_back(published[i]);
        if (corpus[i].is_core && corpus[i].year == t) w.cohort.push_back(i);
    }
    return w;
}

}  // namespace vesper
