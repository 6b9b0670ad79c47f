#include "vesper/events.hpp"

#include "vesper/csv.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

namespace vesper {

std::string to_string(EventKind k) {
    switch (k) {
        case EventKind::Birth: return "Birth";
        case EventKind::Death: return "Death";
        case EventKind::Merge: return "Merge";
        case EventKind::Split: return "Split";
        case EventKind::Continuation: return "Continuation";
    }
    return "?";
}

std::string to_string(EventGroup g) {
    switch (g) {
        case EventGroup::dynamic: return "dynamic";
        case EventGroup::stable: return "stable";
        case EventGroup::excluded: return "excluded";
    }
    return "?";
}

EventKind parse_event_kind(const std::string& s) {
    for (auto k : {EventKind::Birth, EventKind::Death, EventKind::Merge, EventKind::Split, EventKind::Continuation}) {
        if (to_string(k) == s) return k;
    }
    throw DataError("unknown event kind \"" + s + "\"");
}

bool ClusterEvent::has(EventKind k) const { return std::find(kinds.begin(), kinds.end(), k) != kinds.end(); }

CentroidResult centroid(std::span<const std::size_t> members, const Matrix& emb) {
    if (members.empty()) throw DataError("centroid of an empty cluster");
    CentroidResult r;
    r.centroid.assign(emb.cols, 0.0);
    for (auto i : members) {
        const auto row = emb.row(i);
        for (std::size_t d = 0; d < emb.cols; ++d) r.centroid[d] += row[d];
    }
    double mean_norm = 0.0;
    for (auto i : members) mean_norm += norm(emb.row(i));
    mean_norm /= static_cast<double>(members.size());
    for (auto& v : r.centroid) v /= static_cast<double>(members.size());
    r.near_zero = norm(std::span<const double>(r.centroid)) <= 1e-6 * std::max(mean_norm, 1e-300);
    return r;
}

std::vector<EventLink> LinkResult::links() const {
    std::vector<EventLink> out;
    std::copy_if(pairs.begin(), pairs.end(), std::back_inserter(out), [](const EventLink& l) { return l.linked; });
    return out;
}

LinkResult link_years(int year, const std::vector<std::vector<double>>& from,
                      const std::vector<std::vector<double>>& to, double threshold) {
    if (!(threshold > 0.0 && threshold < 1.0)) throw ConfigError("link threshold must lie in (0, 1)");
    LinkResult r;
    for (std::size_t a = 0; a < from.size(); ++a) {
        for (std::size_t b = 0; b < to.size(); ++b) {
            const double c = cosine(std::span<const double>(from[a]), std::span<const double>(to[b]));
            if (std::isnan(c)) {
                r.warnings.push_back("zero-norm centroid: pair (" + std::to_string(a) + ", " + std::to_string(b) +
                                     ") in year " + std::to_string(year) + " skipped");
                continue;
            }
            r.pairs.push_back({year, static_cast<int>(a), static_cast<int>(b), c, c > threshold});
        }
    }
    return r;
}

Transition classify(int year, const std::vector<EventLink>& links, std::size_t n_from, std::size_t n_to) {
    std::vector<std::vector<int>> children(n_from), parents(n_to);
    for (const auto& l : links) {
        if (!l.linked) continue;
        if (l.cluster_from < 0 || static_cast<std::size_t>(l.cluster_from) >= n_from || l.cluster_to < 0 ||
            static_cast<std::size_t>(l.cluster_to) >= n_to) {
            throw DataError("event link refers to an unknown cluster");
        }
        children[static_cast<std::size_t>(l.cluster_from)].push_back(l.cluster_to);
        parents[static_cast<std::size_t>(l.cluster_to)].push_back(l.cluster_from);
    }
    Transition t;
    for (std::size_t a = 0; a < n_from; ++a) {
        ClusterEvent e{year, static_cast<int>(a), false, {}, EventGroup::stable};
        const auto& ch = children[a];
        if (ch.empty()) {
            e.kinds.push_back(EventKind::Death);
        } else {
            if (ch.size() >= 2) e.kinds.push_back(EventKind::Split);
            if (std::any_of(ch.begin(), ch.end(), [&](int b) { return parents[static_cast<std::size_t>(b)].size() >= 2; })) {
                e.kinds.push_back(EventKind::Merge);
            }
            if (e.kinds.empty()) e.kinds.push_back(EventKind::Continuation);
        }
        e.group = (e.has(EventKind::Split) || e.has(EventKind::Merge)) ? EventGroup::dynamic : EventGroup::stable;
        t.earlier.push_back(std::move(e));
    }
    for (std::size_t b = 0; b < n_to; ++b) {
        ClusterEvent e{year + 1, static_cast<int>(b), true, {}, EventGroup::excluded};
        const auto& pa = parents[b];
        if (pa.empty()) {
            e.kinds.push_back(EventKind::Birth);
        } else {
            if (pa.size() >= 2) e.kinds.push_back(EventKind::Merge);
            if (std::any_of(pa.begin(), pa.end(), [&](int a) { return children[static_cast<std::size_t>(a)].size() >= 2; })) {
                e.kinds.push_back(EventKind::Split);
            }
            if (e.kinds.empty()) e.kinds.push_back(EventKind::Continuation);
            e.group = (e.has(EventKind::Split) || e.has(EventKind::Merge)) ? EventGroup::dynamic : EventGroup::stable;
        }
        t.later.push_back(std::move(e));
    }
    return t;
}

namespace {

std::string kinds_label(const ClusterEvent& e) {
    std::string s;
    for (auto k : e.kinds) {
        if (!s.empty()) s += '+';
        s += to_string(k);
    }
    return s;
}

}  // namespace

void write_events_csv(std::ostream& out, const LinkResult& links, const Transition& t) {
    out << "year_from,year_to,cluster_from,cluster_to,cosine,event_type\n";
    const auto linked = links.links();
    for (const auto& e : t.earlier) {
        bool any = false;
        for (const auto& l : linked) {
            if (l.cluster_from != e.cluster) continue;
            any = true;
            out << e.year << ',' << e.year + 1 << ',' << l.cluster_from << ',' << l.cluster_to << ','
                << format_float(l.cosine) << ',' << kinds_label(e) << '\n';
        }
        if (!any) out << e.year << ',' << e.year + 1 << ',' << e.cluster << ",,," << kinds_label(e) << '\n';
    }
    for (const auto& e : t.later) {
        if (e.has(EventKind::Birth)) out << e.year - 1 << ',' << e.year << ",," << e.cluster << ",,Birth\n";
    }
}

}  // namespace vesper
