#include "vesper/synth.hpp"

#include "vesper/csv.hpp"
#include "vesper/embedding_file.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <ostream>
#include <set>

namespace vesper {

namespace {

constexpr double kRadius = 100.0;
constexpr double kDeg = std::numbers::pi / 180.0;
constexpr double kTwinAngle = 30.0 * kDeg;
constexpr double kSplitAngle = 12.0 * kDeg;
constexpr double kDriftAngle = 2.0 * kDeg;

std::vector<double> random_unit(Rng& rng, std::size_t dims) {
    std::vector<double> v(dims);
    for (auto& x : v) x = rng.normal();
    const double n = norm(std::span<const double>(v));
    for (auto& x : v) x /= n;
    return v;
}

std::vector<double> orthogonal_unit(std::span<const double> u, Rng& rng) {
    auto v = random_unit(rng, u.size());
    double dot = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) dot += u[i] * v[i];
    for (std::size_t i = 0; i < u.size(); ++i) v[i] -= dot * u[i];
    const double n = norm(std::span<const double>(v));
    for (auto& x : v) x /= n;
    return v;
}

std::vector<double> unit(std::span<const double> c) {
    std::vector<double> u(c.begin(), c.end());
    const double n = norm(std::span<const double>(u));
    for (auto& x : u) x /= n;
    return u;
}

std::vector<double> rotate(std::span<const double> center, double angle, Rng& rng) {
    const auto u = unit(center);
    const auto v = orthogonal_unit(u, rng);
    std::vector<double> out(u.size());
    for (std::size_t i = 0; i < u.size(); ++i) out[i] = kRadius * (std::cos(angle) * u[i] + std::sin(angle) * v[i]);
    return out;
}

const char* const kSyllables[] = {"ka", "lo", "mi", "ren", "tas", "vo", "qui", "zel", "dor", "fen",
                                  "gra", "hul", "ix", "jun", "pra", "sol", "tem", "ul", "wex", "yor",
                                  "bri", "cas", "nep", "os", "tru", "vin", "ax", "mor", "pel", "sid"};

std::string pseudo_word(Rng& rng) {
    std::string w;
    const std::size_t n = 2 + rng.index(2);
    for (std::size_t i = 0; i < n; ++i) w += kSyllables[rng.index(std::size(kSyllables))];
    return w;
}

std::vector<std::string> fresh_words(Rng& rng, std::size_t n) {
    std::vector<std::string> out;
    while (out.size() < n) out.push_back(pseudo_word(rng));
    return out;
}

std::vector<std::string> sample_words(const std::vector<std::string>& pool, std::size_t n, Rng& rng) {
    auto copy = pool;
    rng.shuffle(copy);
    copy.resize(std::min(n, copy.size()));
    return copy;
}

class Builder {
public:
    Builder(std::uint64_t seed, std::size_t dims) : rng_(seed) {
        spec_.seed = seed;
        spec_.dims = dims;
    }

    std::string fresh(int year) { return add(year, rotate(random_unit(rng_, spec_.dims), 0.0, rng_), fresh_words(rng_, 10)); }

    std::string twin(int year, const std::string& other) {
        const auto& o = spec_.blob(other);
        auto c = rotate(o.center, kTwinAngle, rng_);
        return add(year, std::move(c), fresh_words(rng_, 10));
    }

    std::string cont(const std::string& parent) {
        const auto p = spec_.blob(parent);
        auto child = add(p.year + 1, rotate(p.center, kDriftAngle, rng_), p.vocabulary);
        spec_.events.push_back({p.year, EventKind::Continuation, {parent}, {child}});
        return child;
    }

    std::pair<std::string, std::string> split(const std::string& parent) {
        const auto p = spec_.blob(parent);
        const auto u = unit(p.center);
        const auto v = orthogonal_unit(u, rng_);
        std::vector<double> c1(u.size()), c2(u.size());
        for (std::size_t i = 0; i < u.size(); ++i) {
            c1[i] = kRadius * (std::cos(kSplitAngle) * u[i] + std::sin(kSplitAngle) * v[i]);
            c2[i] = kRadius * (std::cos(kSplitAngle) * u[i] - std::sin(kSplitAngle) * v[i]);
        }
        auto vocab1 = sample_words(p.vocabulary, 5, rng_);
        auto vocab2 = sample_words(p.vocabulary, 5, rng_);
        for (auto& w : fresh_words(rng_, 5)) vocab1.push_back(w);
        for (auto& w : fresh_words(rng_, 5)) vocab2.push_back(w);
        auto a = add(p.year + 1, std::move(c1), std::move(vocab1));
        auto b = add(p.year + 1, std::move(c2), std::move(vocab2));
        spec_.events.push_back({p.year, EventKind::Split, {parent}, {a, b}});
        return {a, b};
    }

    std::string merge(const std::string& p1, const std::string& p2) {
        const auto a = spec_.blob(p1);
        const auto b = spec_.blob(p2);
        std::vector<double> c(a.center.size());
        for (std::size_t i = 0; i < c.size(); ++i) c[i] = a.center[i] + b.center[i];
        auto u = unit(c);
        for (auto& x : u) x *= kRadius;
        auto vocab = sample_words(a.vocabulary, 5, rng_);
        for (auto& w : sample_words(b.vocabulary, 5, rng_)) vocab.push_back(w);
        auto child = add(a.year + 1, std::move(u), std::move(vocab));
        spec_.events.push_back({a.year, EventKind::Merge, {p1, p2}, {child}});
        return child;
    }

    void death(const std::string& parent) {
        spec_.events.push_back({spec_.blob(parent).year, EventKind::Death, {parent}, {}});
    }

    std::string birth(int year) {
        auto child = fresh(year);
        spec_.events.push_back({year - 1, EventKind::Birth, {}, {child}});
        return child;
    }

    std::string birth_twin(int year, const std::string& other) {
        auto child = twin(year, other);
        spec_.events.push_back({year - 1, EventKind::Birth, {}, {child}});
        return child;
    }

    Rng& rng() { return rng_; }
    TimelineSpec& spec() { return spec_; }

private:
    std::string add(int year, std::vector<double> center, std::vector<std::string> vocab) {
        char name[16];
        std::snprintf(name, sizeof name, "b%02zu", spec_.blobs.size());
        BlobSpec b;
        b.name = name;
        b.year = year;
        b.center = std::move(center);
        b.vocabulary = std::move(vocab);
        spec_.blobs.push_back(std::move(b));
        return spec_.blobs.back().name;
    }

    Rng rng_;
    TimelineSpec spec_;
};

// Blobs that split or merge at t+1 cite each other at t, in pairs (merge
// parents together) with one triple when the count is odd.
void derive_partners(TimelineSpec& spec) {
    std::map<int, std::vector<std::string>> singles;
    std::map<int, std::vector<std::pair<std::string, std::string>>> pairs;
    for (const auto& e : spec.events) {
        if (e.kind == EventKind::Merge) {
            for (std::size_t i = 1; i < e.parents.size(); ++i) pairs[e.year].emplace_back(e.parents[0], e.parents[i]);
        } else if (e.kind == EventKind::Split) {
            singles[e.year].push_back(e.parents[0]);
        }
    }
    for (auto& [year, names] : singles) {
        std::sort(names.begin(), names.end());
        for (std::size_t i = 0; i + 1 < names.size(); i += 2) pairs[year].emplace_back(names[i], names[i + 1]);
        if (names.size() % 2 == 1) {
            auto& existing = pairs[year];
            if (!existing.empty()) existing.emplace_back(names.back(), existing.front().first);
        }
    }
    for (auto& [year, list] : pairs) {
        for (auto& p : list) spec.partners.push_back(p);
    }
}

}  // namespace

const BlobSpec& TimelineSpec::blob(const std::string& name) const {
    for (const auto& b : blobs) {
        if (b.name == name) return b;
    }
    throw ConfigError("unknown blob \"" + name + "\"");
}

std::map<std::string, int> Timeline::planted_labels() const {
    std::map<std::string, int> out;
    for (const auto& e : events) {
        const int label = (e.kind == EventKind::Split || e.kind == EventKind::Merge) ? 1 : 0;
        if (e.kind == EventKind::Birth) continue;
        for (const auto& p : e.parents) out[p] = label;
    }
    return out;
}

void validate_timeline(const TimelineSpec& spec) {
    constexpr double kMargin = 0.005;
    if (spec.years.empty()) throw ConfigError("timeline has no years");
    std::set<std::string> names;
    for (const auto& b : spec.blobs) {
        if (!names.insert(b.name).second) throw ConfigError("duplicate blob \"" + b.name + "\"");
        if (b.center.size() != spec.dims) throw ConfigError("blob " + b.name + " has the wrong dimension");
        if (b.count < 1) throw ConfigError("blob " + b.name + " has no papers");
        if (!(b.sigma > 0)) throw ConfigError("blob " + b.name + " needs a positive sigma");
        if (std::find(spec.years.begin(), spec.years.end(), b.year) == spec.years.end()) {
            throw ConfigError("blob " + b.name + " lies outside the timeline years");
        }
    }
    std::map<std::string, int> as_parent, as_child;
    std::set<std::pair<std::string, std::string>> linked;
    for (const auto& e : spec.events) {
        const std::size_t np = e.parents.size(), nc = e.children.size();
        const bool shape_ok = (e.kind == EventKind::Continuation && np == 1 && nc == 1) ||
                              (e.kind == EventKind::Split && np == 1 && nc >= 2) ||
                              (e.kind == EventKind::Merge && np >= 2 && nc == 1) ||
                              (e.kind == EventKind::Death && np == 1 && nc == 0) ||
                              (e.kind == EventKind::Birth && np == 0 && nc == 1);
        if (!shape_ok) throw ConfigError("planted " + to_string(e.kind) + " has the wrong number of blobs");
        for (const auto& p : e.parents) {
            if (spec.blob(p).year != e.year) throw ConfigError("parent " + p + " is not in year " + std::to_string(e.year));
            ++as_parent[p];
        }
        for (const auto& c : e.children) {
            if (spec.blob(c).year != e.year + 1) throw ConfigError("child " + c + " is not in the following year");
            ++as_child[c];
        }
        for (const auto& p : e.parents) {
            for (const auto& c : e.children) linked.emplace(p, c);
        }
    }
    const int last = *std::max_element(spec.years.begin(), spec.years.end());
    const int first = *std::min_element(spec.years.begin(), spec.years.end());
    for (const auto& b : spec.blobs) {
        if (b.year != last && as_parent[b.name] != 1) throw ConfigError("blob " + b.name + " needs exactly one fate");
        if (b.year != first && as_child[b.name] != 1) throw ConfigError("blob " + b.name + " needs exactly one origin");
    }
    for (const auto& a : spec.blobs) {
        for (const auto& b : spec.blobs) {
            if (b.year != a.year + 1) continue;
            const double c = cosine(std::span<const double>(a.center), std::span<const double>(b.center));
            if (linked.count({a.name, b.name})) {
                if (!(c > spec.link_threshold + kMargin)) {
                    throw ConfigError("infeasible timeline: " + a.name + " -> " + b.name + " cosine " + format_float(c) +
                                      " does not clear the link threshold");
                }
            } else if (!(c < spec.link_threshold - kMargin)) {
                throw ConfigError("infeasible timeline: unrelated blobs " + a.name + " and " + b.name + " have cosine " +
                                  format_float(c));
            }
        }
    }
    if (!(spec.citations.p_in >= 0 && spec.citations.p_in <= 1 && spec.citations.p_out >= 0 &&
          spec.citations.p_out < spec.citations.p_in && spec.citations.p_partner >= 0 &&
          spec.citations.p_partner <= 1)) {
        throw ConfigError("citation probabilities must satisfy 0 <= p_out < p_in <= 1");
    }
}

std::vector<std::pair<std::string, std::string>> gen_citation_sbm(
    const std::vector<SbmNode>& nodes, const CitationModel& m,
    const std::vector<std::pair<std::string, std::string>>& partners, std::uint64_t seed,
    std::vector<std::string>* bridge_papers) {
    if (!(m.p_in >= 0 && m.p_in <= 1 && m.p_out >= 0 && m.p_out < m.p_in && m.p_partner >= 0 && m.p_partner <= 1)) {
        throw ConfigError("citation probabilities must satisfy 0 <= p_out < p_in <= 1");
    }
    std::set<std::pair<std::string, std::string>> partnered;
    for (const auto& [a, b] : partners) {
        partnered.emplace(a, b);
        partnered.emplace(b, a);
    }
    Rng rng(seed);
    std::vector<std::pair<std::string, std::string>> edges;
    std::map<int, std::vector<std::size_t>> by_year;
    for (std::size_t i = 0; i < nodes.size(); ++i) by_year[nodes[i].year].push_back(i);
    for (const auto& [year, idx] : by_year) {
        for (std::size_t a = 1; a < idx.size(); ++a) {
            const auto& citing = nodes[idx[a]];
            for (std::size_t b = 0; b < a; ++b) {
                const auto& cited = nodes[idx[b]];
                double p = m.p_out;
                if (citing.block == cited.block) {
                    p = m.p_in;
                } else if (partnered.count({citing.block, cited.block})) {
                    p = m.p_partner;
                }
                if (p > 0 && rng.uniform() < p) edges.emplace_back(citing.id, cited.id);
            }
        }
        if (m.bridges <= 0) continue;
        std::map<std::string, std::vector<std::size_t>> members;
        for (auto i : idx) members[nodes[i].block].push_back(i);
        for (const auto& [block, ids] : members) {
            std::vector<std::string> mates;
            for (const auto& [x, y] : partnered) {
                if (x == block && members.count(y)) mates.push_back(y);
            }
            if (mates.empty()) continue;
            auto pool = ids;
            rng.shuffle(pool);
            pool.resize(std::min<std::size_t>(pool.size(), static_cast<std::size_t>(m.bridges)));
            std::sort(pool.begin(), pool.end());
            for (auto bridge : pool) {
                if (bridge_papers) bridge_papers->push_back(nodes[bridge].id);
                for (const auto& mate : mates) {
                    auto targets = members.at(mate);
                    rng.shuffle(targets);
                    targets.resize(std::min<std::size_t>(targets.size(), static_cast<std::size_t>(m.bridge_refs)));
                    std::sort(targets.begin(), targets.end());
                    for (auto t : targets) edges.emplace_back(nodes[bridge].id, nodes[t].id);
                }
            }
        }
    }
    return edges;
}

Timeline gen_timeline(const TimelineSpec& spec) {
    validate_timeline(spec);
    Timeline tl;
    tl.events = spec.events;

    std::vector<const BlobSpec*> order;
    for (const auto& b : spec.blobs) order.push_back(&b);
    std::stable_sort(order.begin(), order.end(), [](const BlobSpec* a, const BlobSpec* b) { return a->year < b->year; });

    static const char* const kFiller[] = {"the", "of", "and", "in", "for", "with", "on", "we", "this", "a"};
    Rng text_rng(mix_seed(spec.seed, 2));
    Rng emb_rng(mix_seed(spec.seed, 1));
    std::vector<SbmNode> nodes;
    std::vector<PaperRecord> papers;
    std::size_t total = 0;
    for (const auto* b : order) total += static_cast<std::size_t>(b->count);
    tl.embeddings.values = Matrix(total, spec.dims);
    tl.embeddings.model_id = "synth-gaussian-v1";
    std::size_t row = 0;
    for (const auto* b : order) {
        for (int k = 0; k < b->count; ++k) {
            char id[64];
            std::snprintf(id, sizeof id, "%d-%s-%04d", b->year, b->name.c_str(), k);
            PaperRecord p;
            p.id = id;
            p.year = b->year;
            for (int w = 0; w < 6; ++w) {
                if (w) p.title += ' ';
                p.title += b->vocabulary[text_rng.index(b->vocabulary.size())];
            }
            for (int w = 0; w < 24; ++w) {
                if (w) p.abstract += ' ';
                p.abstract += (w % 3 == 2) ? kFiller[text_rng.index(std::size(kFiller))]
                                           : b->vocabulary[text_rng.index(b->vocabulary.size())];
            }
            auto r = tl.embeddings.values.row(row);
            for (std::size_t d = 0; d < spec.dims; ++d) {
                r[d] = static_cast<float>(b->center[d] + b->sigma * emb_rng.normal());
            }
            tl.embeddings.ids.push_back(p.id);
            tl.blob_of[p.id] = b->name;
            nodes.push_back({p.id, p.year, b->name});
            papers.push_back(std::move(p));
            ++row;
        }
    }
    const auto edges = gen_citation_sbm(nodes, spec.citations, spec.partners, mix_seed(spec.seed, 3), &tl.bridge_papers);
    std::map<std::string, std::size_t> pos;
    for (std::size_t i = 0; i < papers.size(); ++i) pos[papers[i].id] = i;
    for (const auto& [citing, cited] : edges) papers[pos.at(citing)].references.push_back(cited);
    for (auto& p : papers) {
        std::sort(p.references.begin(), p.references.end());
        p.references.erase(std::unique(p.references.begin(), p.references.end()), p.references.end());
        tl.corpus.add(std::move(p));
    }
    return tl;
}

Dataset gen_feature_table(const std::vector<double>& beta, std::size_t n, std::uint64_t seed, double intercept) {
    for (double b : beta) {
        if (!std::isfinite(b)) throw ConfigError("feature table coefficients must be finite");
    }
    Dataset d;
    for (std::size_t j = 0; j < beta.size(); ++j) d.names.push_back("x" + std::to_string(j + 1));
    Rng rng(seed);
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<double> x(beta.size());
        double eta = intercept;
        for (std::size_t j = 0; j < beta.size(); ++j) {
            x[j] = rng.normal();
            eta += beta[j] * x[j];
        }
        d.y.push_back(rng.uniform() < 1.0 / (1.0 + std::exp(-eta)) ? 1 : 0);
        d.x.push_back(std::move(x));
    }
    return d;
}

TimelineSpec reference_timeline(std::uint64_t seed, int papers_per_blob, int first_year) {
    Builder b(seed, kDocumentDims);
    const int y0 = first_year;
    const auto A = b.fresh(y0);
    const auto B = b.fresh(y0);
    const auto C = b.twin(y0, B);
    const auto D = b.fresh(y0);
    const auto E = b.fresh(y0);

    const auto [A1, A2] = b.split(A);
    const auto BC = b.merge(B, C);
    const auto D_1 = b.cont(D);
    b.death(E);
    const auto F = b.birth(y0 + 1);

    const auto A1_2 = b.cont(A1);
    const auto A2_2 = b.cont(A2);
    const auto [P, Q] = b.split(BC);
    const auto D_2 = b.cont(D_1);
    const auto F_2 = b.cont(F);

    b.merge(A1_2, A2_2);
    b.merge(P, Q);
    b.split(D_2);
    b.death(F_2);
    b.birth(y0 + 3);

    auto& spec = b.spec();
    spec.years = {y0, y0 + 1, y0 + 2, y0 + 3};
    for (auto& blob : spec.blobs) blob.count = papers_per_blob;
    spec.citations = {0.06, 0.0, 0.002, 4, 6};
    derive_partners(spec);
    validate_timeline(spec);
    return spec;
}

TimelineSpec random_timeline(std::uint64_t seed, int n_years, int papers_per_year, int blobs_per_year, int first_year) {
    if (n_years < 2) throw ConfigError("random timeline needs at least 2 years");
    if (blobs_per_year < 2 || papers_per_year < blobs_per_year * 20) {
        throw ConfigError("random timeline needs >= 2 blobs of >= 20 papers per year");
    }
    for (std::uint64_t attempt = 0; attempt < 64; ++attempt) {
        Builder b(mix_seed(seed, attempt), kDocumentDims);
        auto& rng = b.rng();
        std::map<std::string, std::string> mate;
        std::vector<std::string> alive;
        for (int i = 0; i < blobs_per_year; i += 2) {
            const auto x = b.fresh(first_year);
            alive.push_back(x);
            if (i + 1 < blobs_per_year) {
                const auto y = b.twin(first_year, x);
                alive.push_back(y);
                mate[x] = y;
                mate[y] = x;
            }
        }
        for (int t = first_year; t + 1 < first_year + n_years; ++t) {
            enum class Fate { cont, split, death, merge };
            std::map<std::string, Fate> fate;
            std::map<std::string, std::string> merge_with;
            std::vector<std::string> splits;
            for (const auto& x : alive) {
                if (fate.count(x)) continue;
                auto m = mate.find(x);
                if (m != mate.end() && !fate.count(m->second) && rng.uniform() < 0.5) {
                    fate[x] = fate[m->second] = Fate::merge;
                    merge_with[x] = m->second;
                    continue;
                }
                const double u = rng.uniform();
                if (u < 0.3) {
                    fate[x] = Fate::split;
                    splits.push_back(x);
                } else {
                    fate[x] = u < 0.42 ? Fate::death : Fate::cont;
                }
            }
            // Keep within the per-year blob budget and plant split parents in pairs.
            auto children = [&] {
                std::size_t n = 0;
                for (const auto& [x, f] : fate) n += f == Fate::cont ? 1 : f == Fate::split ? 2 : 0;
                return n + merge_with.size();
            };
            while (!splits.empty() && (children() > static_cast<std::size_t>(blobs_per_year) || splits.size() % 2 == 1)) {
                fate[splits.back()] = Fate::cont;
                splits.pop_back();
            }

            std::vector<std::string> next;
            std::map<std::string, std::string> next_mate;
            std::map<std::string, std::string> cont_of;
            for (const auto& x : alive) {
                switch (fate.at(x)) {
                    case Fate::merge:
                        if (merge_with.count(x)) next.push_back(b.merge(x, merge_with.at(x)));
                        break;
                    case Fate::split: {
                        const auto [c1, c2] = b.split(x);
                        next.push_back(c1);
                        next.push_back(c2);
                        next_mate[c1] = c2;
                        next_mate[c2] = c1;
                        break;
                    }
                    case Fate::death:
                        b.death(x);
                        break;
                    case Fate::cont: {
                        const auto c = b.cont(x);
                        cont_of[x] = c;
                        next.push_back(c);
                        break;
                    }
                }
            }
            for (const auto& [x, c] : cont_of) {
                auto m = mate.find(x);
                if (m != mate.end() && cont_of.count(m->second)) next_mate[c] = cont_of.at(m->second);
            }
            while (next.size() < static_cast<std::size_t>(blobs_per_year)) {
                const auto x = b.birth(t + 1);
                next.push_back(x);
                if (next.size() < static_cast<std::size_t>(blobs_per_year)) {
                    const auto y = b.birth_twin(t + 1, x);
                    next.push_back(y);
                    next_mate[x] = y;
                    next_mate[y] = x;
                }
            }
            alive = std::move(next);
            mate = std::move(next_mate);
        }
        auto& spec = b.spec();
        for (int y = 0; y < n_years; ++y) spec.years.push_back(first_year + y);
        std::map<int, int> per_year;
        for (const auto& blob : spec.blobs) ++per_year[blob.year];
        std::map<int, int> seen;
        for (auto& blob : spec.blobs) {
            const int n = per_year[blob.year];
            const int k = seen[blob.year]++;
            blob.count = papers_per_year / n + (k < papers_per_year % n ? 1 : 0);
        }
        spec.citations = {0.06, 0.0, 0.002, 4, 6};
        derive_partners(spec);
        try {
            validate_timeline(spec);
            return spec;
        } catch (const ConfigError&) {
        }
    }
    throw ConfigError("could not draw a feasible random timeline");
}

void write_planted_events_csv(std::ostream& out, const std::vector<PlantedEvent>& events) {
    auto join = [](const std::vector<std::string>& v) {
        std::string s;
        for (const auto& x : v) s += (s.empty() ? "" : ";") + x;
        return s;
    };
    out << "year_from,year_to,event_type,parents,children\n";
    for (const auto& e : events) {
        out << e.year << ',' << e.year + 1 << ',' << to_string(e.kind) << ',' << csv_field(join(e.parents)) << ','
            << csv_field(join(e.children)) << '\n';
    }
}

void write_planted_labels_csv(std::ostream& out, const Timeline& tl) {
    out << "blob,year,label\n";
    std::map<std::string, int> year_of;
    for (const auto& e : tl.events) {
        for (const auto& p : e.parents) year_of[p] = e.year;
    }
    for (const auto& [blob, label] : tl.planted_labels()) out << blob << ',' << year_of[blob] << ',' << label << '\n';
}

}  // namespace vesper
