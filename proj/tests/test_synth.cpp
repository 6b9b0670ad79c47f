#include <doctest.h>

#include "oracles.hpp"
#include "vesper/events.hpp"
#include "vesper/graph.hpp"
#include "vesper/synth.hpp"

#include <cmath>
#include <map>
#include <sstream>

using namespace vesper;

TEST_SUITE("synth") {

TEST_CASE("reference timeline plants the event mix") {
    auto spec = reference_timeline(3, 30);
    std::map<EventKind, int> count;
    for (const auto& e : spec.events) ++count[e.kind];
    CHECK(count[EventKind::Continuation] == 5);
    CHECK(count[EventKind::Split] == 3);
    CHECK(count[EventKind::Merge] == 3);
    CHECK(count[EventKind::Death] == 2);
    CHECK(count[EventKind::Birth] == 2);
    CHECK(spec.years.size() == 4);
    for (const auto& e : spec.events) {
        if (e.kind != EventKind::Split) continue;
        for (const auto& c : e.children) {
            const double cs = cosine(std::span<const double>(spec.blob(e.parents[0]).center),
                                     std::span<const double>(spec.blob(c).center));
            CHECK(cs > 0.95);
        }
    }
    CHECK_NOTHROW(validate_timeline(spec));
}

TEST_CASE("validation rejects an unlinkable split") {
    auto spec = reference_timeline(3, 30);
    for (const auto& e : spec.events) {
        if (e.kind != EventKind::Split) continue;
        for (auto& b : spec.blobs) {
            if (b.name == e.children[0]) {
                for (auto& v : b.center) v = -v;
            }
        }
        break;
    }
    CHECK_THROWS_AS(validate_timeline(spec), ConfigError);
}

TEST_CASE("generated timeline") {
    auto spec = reference_timeline(5, 20);
    auto a = gen_timeline(spec);
    auto b = gen_timeline(spec);
    CHECK(a.embeddings.values == b.embeddings.values);
    CHECK(a.corpus.size() == b.corpus.size());
    CHECK(a.embeddings.values.cols == 768);
    std::size_t expected = 0;
    for (const auto& blob : spec.blobs) expected += std::size_t(blob.count);
    CHECK(a.embeddings.ids.size() == expected);
    for (std::size_t i = 0; i < a.corpus.size(); ++i) {
        CHECK(record_to_json_line(a.corpus[i]) == record_to_json_line(b.corpus[i]));
        CHECK(record_from_json_line(record_to_json_line(a.corpus[i])) == a.corpus[i]);
    }
    auto labels = a.planted_labels();
    int dynamic = 0;
    for (const auto& [blob, label] : labels) dynamic += label;
    CHECK(dynamic > 0);
    std::ostringstream ev, lab;
    write_planted_events_csv(ev, a.events);
    write_planted_labels_csv(lab, a);
    const auto text = ev.str();
    CHECK(text.rfind("year", 0) == 0);
    CHECK(std::count(text.begin(), text.end(), '\n') == 16);
}

TEST_CASE("citation blocks are recovered by louvain") {
    double total = 0;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        std::vector<SbmNode> nodes;
        std::vector<int> truth;
        for (int i = 0; i < 128; ++i) {
            nodes.push_back({"n" + std::to_string(i), 2015, "b" + std::to_string(i / 32)});
            truth.push_back(i / 32);
        }
        CitationModel m;
        m.p_in = 0.3;
        m.p_out = 0.01;
        auto cites = gen_citation_sbm(nodes, m, {}, seed);
        std::map<std::string, std::uint32_t> idx;
        for (std::uint32_t i = 0; i < 128; ++i) idx[nodes[i].id] = i;
        oracle::Edges e;
        std::vector<std::string> ids;
        for (const auto& n : nodes) ids.push_back(n.id);
        for (const auto& [from, to] : cites) {
            CHECK(idx[from] > idx[to]);
            e.push_back({idx[to], idx[from]});
        }
        YearGraph g(2015, ids, e);
        total += oracle::ari(truth, louvain(g, 1.0, seed).community);
    }
    CHECK(total / 10 >= 0.9);
}

TEST_CASE("null coefficients give a balanced table") {
    auto d = gen_feature_table({0.0, 0.0, 0.0}, 10000, 1);
    double ones = 0;
    for (int y : d.y) ones += y;
    CHECK(std::abs(ones / 10000 - 0.5) <= 0.02);
    double mean = 0, var = 0;
    for (const auto& r : d.x) mean += r[0] / 10000;
    for (const auto& r : d.x) var += (r[0] - mean) * (r[0] - mean) / 10000;
    CHECK(std::abs(mean) < 0.05);
    CHECK(std::abs(var - 1) < 0.05);
}

TEST_CASE("random timeline") {
    auto spec = random_timeline(4, 4, 400, 8);
    CHECK_NOTHROW(validate_timeline(spec));
    std::map<int, int> per_year;
    for (const auto& b : spec.blobs) per_year[b.year] += b.count;
    CHECK(per_year.size() == 4);
    for (auto [y, n] : per_year) CHECK(std::abs(n - 400) <= 40);
    auto tl = gen_timeline(spec);
    std::set<int> kinds;
    for (const auto& [blob, label] : tl.planted_labels()) kinds.insert(label);
    CHECK(kinds == std::set<int>{0, 1});
}

}  // TEST_SUITE synth
