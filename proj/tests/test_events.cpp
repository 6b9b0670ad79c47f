#include <doctest.h>

#include "vesper/events.hpp"
#include "vesper/synth.hpp"

#include <cmath>
#include <random>
#include <sstream>

using namespace vesper;

namespace {

std::vector<double> random_unit(std::mt19937_64& g, std::size_t d) {
    std::normal_distribution<double> n;
    std::vector<double> v(d);
    double s = 0;
    for (auto& x : v) s += (x = n(g)) * x;
    for (auto& x : v) x /= std::sqrt(s);
    return v;
}

EventLink link(int from, int to) { return {2010, from, to, 0.99, true}; }

}  // namespace

TEST_SUITE("events") {

TEST_CASE("centroid is the element-wise mean") {
    Matrix e(3, 2);
    e(0, 0) = 1;
    e(1, 0) = 3;
    e(1, 1) = 2;
    e(2, 1) = 100;
    const std::vector<std::size_t> members{0, 1};
    auto c = centroid(members, e);
    CHECK(c.centroid == std::vector<double>{2.0, 1.0});
    CHECK_FALSE(c.near_zero);
    Matrix opposite(2, 2);
    opposite(0, 0) = 1;
    opposite(1, 0) = -1;
    const std::vector<std::size_t> both{0, 1};
    CHECK(centroid(both, opposite).near_zero);
    CHECK_THROWS_AS(centroid({}, e), DataError);
}

TEST_CASE("link basics") {
    std::mt19937_64 g(1);
    auto a = random_unit(g, 768);
    auto r = link_years(2010, {a}, {a});
    REQUIRE(r.links().size() == 1);
    CHECK(r.links()[0].cosine == doctest::Approx(1.0));
    std::vector<double> x{1, 0, 0}, y{0, 1, 0}, z{0, 0, 0};
    CHECK(link_years(2010, {x}, {y}).links().empty());
    auto skipped = link_years(2010, {x, z}, {y});
    CHECK(skipped.pairs.size() == 1);
    CHECK(skipped.warnings.size() == 1);
    CHECK_THROWS_AS(link_years(2010, {x}, {y}, 1.0), ConfigError);
}

TEST_CASE("planted split gives two links from the parent") {
    std::mt19937_64 g(2);
    std::normal_distribution<double> n(0.0, 0.01);
    const auto parent = random_unit(g, 768);
    std::vector<std::vector<double>> later;
    for (int k = 0; k < 2; ++k) {
        auto child = parent;
        for (auto& v : child) v += n(g);
        later.push_back(child);
    }
    later.push_back(random_unit(g, 768));
    auto r = link_years(2010, {parent}, later);
    CHECK(r.links().size() == 2);
    auto t = classify(2010, r.pairs, 1, 3);
    CHECK(t.earlier[0].has(EventKind::Split));
    CHECK(t.earlier[0].group == EventGroup::dynamic);
    CHECK(t.later[0].has(EventKind::Split));
    CHECK(t.later[2].kinds == std::vector<EventKind>{EventKind::Birth});
}

TEST_CASE("classification patterns") {
    auto one = classify(2010, {link(0, 0)}, 1, 1);
    CHECK(one.earlier[0].kinds == std::vector<EventKind>{EventKind::Continuation});
    CHECK(one.earlier[0].group == EventGroup::stable);

    auto merge = classify(2010, {link(0, 0), link(1, 0)}, 2, 1);
    CHECK(merge.later[0].has(EventKind::Merge));
    CHECK(merge.earlier[0].has(EventKind::Merge));
    CHECK(merge.earlier[1].group == EventGroup::dynamic);

    auto death = classify(2010, {}, 2, 1);
    CHECK(death.earlier[0].kinds == std::vector<EventKind>{EventKind::Death});
    CHECK(death.earlier[1].group == EventGroup::stable);
    CHECK(death.later[0].group == EventGroup::excluded);

    // split and merge in one component
    auto both = classify(2010, {link(0, 0), link(0, 1), link(1, 1)}, 2, 2);
    CHECK(both.earlier[0].has(EventKind::Split));
    CHECK(both.earlier[0].has(EventKind::Merge));
    CHECK(both.earlier[1].has(EventKind::Merge));
    CHECK(both.later[1].has(EventKind::Merge));
    CHECK(both.later[1].has(EventKind::Split));
    CHECK_THROWS_AS(classify(2010, {link(3, 0)}, 2, 1), DataError);
}

TEST_CASE("reversing time swaps the roles") {
    std::mt19937_64 g(3);
    std::uniform_int_distribution<int> pick(0, 5);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<EventLink> fwd, rev;
        for (int k = 0; k < 5; ++k) {
            const int a = pick(g), b = pick(g);
            fwd.push_back(link(a, b));
            rev.push_back(link(b, a));
        }
        auto f = classify(2010, fwd, 6, 6);
        auto r = classify(2010, rev, 6, 6);
        for (int c = 0; c < 6; ++c) {
            CHECK(f.earlier[c].has(EventKind::Death) == r.later[c].has(EventKind::Birth));
            CHECK(f.earlier[c].has(EventKind::Split) == r.later[c].has(EventKind::Merge));
            CHECK(f.earlier[c].has(EventKind::Merge) == r.later[c].has(EventKind::Split));
            CHECK(f.earlier[c].has(EventKind::Continuation) == r.later[c].has(EventKind::Continuation));
        }
    }
}

TEST_CASE("raising the threshold never revives a death") {
    std::mt19937_64 g(4);
    std::vector<std::vector<double>> a, b;
    const auto base = random_unit(g, 16);
    std::normal_distribution<double> n(0.0, 0.15);
    for (int k = 0; k < 6; ++k) {
        auto v = base;
        for (auto& x : v) x += n(g);
        (k < 3 ? a : b).push_back(v);
    }
    std::vector<bool> dead(3, false);
    for (double theta : {0.5, 0.7, 0.8, 0.9, 0.95, 0.99}) {
        auto t = classify(2010, link_years(2010, a, b, theta).pairs, 3, 3);
        for (int c = 0; c < 3; ++c) {
            if (dead[c]) CHECK(t.earlier[c].has(EventKind::Death));
            dead[c] = t.earlier[c].has(EventKind::Death);
        }
    }
}

TEST_CASE("events csv") {
    auto t = classify(2010, {link(0, 0)}, 2, 2);
    LinkResult r;
    r.pairs = {link(0, 0)};
    std::ostringstream out;
    write_events_csv(out, r, t);
    CHECK(out.str() ==
          "year_from,year_to,cluster_from,cluster_to,cosine,event_type\n"
          "2010,2011,0,0,0.99,Continuation\n"
          "2010,2011,1,,,Death\n"
          "2010,2011,,1,,Birth\n");
    CHECK(parse_event_kind("Split") == EventKind::Split);
    CHECK_THROWS_AS(parse_event_kind("Boom"), DataError);
}

TEST_CASE("planted blob centroids recover the reference timeline") {
    auto spec = reference_timeline(7, 40);
    auto tl = gen_timeline(spec);
    // blob centroids from the generated vectors, ordered by name within each year
    std::map<int, std::vector<std::string>> names;
    for (const auto& b : spec.blobs) names[b.year].push_back(b.name);
    std::map<std::string, std::vector<std::size_t>> rows;
    for (std::size_t i = 0; i < tl.embeddings.ids.size(); ++i) rows[tl.blob_of.at(tl.embeddings.ids[i])].push_back(i);
    auto centroids = [&](int year) {
        std::vector<std::vector<double>> out;
        for (auto& n : names[year]) out.push_back(centroid(rows[n], tl.embeddings.values).centroid);
        return out;
    };
    auto index = [&](int year, const std::string& n) {
        auto& v = names[year];
        return int(std::find(v.begin(), v.end(), n) - v.begin());
    };
    int matched = 0;
    for (const auto& ev : tl.events) {
        auto t = classify(ev.year, link_years(ev.year, centroids(ev.year), centroids(ev.year + 1)).pairs,
                          names[ev.year].size(), names[ev.year + 1].size());
        bool ok;
        if (ev.kind == EventKind::Birth) {
            ok = t.later[index(ev.year + 1, ev.children[0])].has(EventKind::Birth);
        } else if (ev.kind == EventKind::Merge) {
            ok = t.later[index(ev.year + 1, ev.children[0])].has(EventKind::Merge);
        } else {
            ok = t.earlier[index(ev.year, ev.parents[0])].has(ev.kind);
        }
        CHECK_MESSAGE(ok, to_string(ev.kind) << " at " << ev.year);
        matched += ok ? 1 : 0;
    }
    CHECK(matched == 15);
}

}  // TEST_SUITE events
