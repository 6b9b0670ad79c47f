#include "vesper/cli.hpp"

#include "vesper/csv.hpp"
#include "vesper/embedding_file.hpp"
#include "vesper/metadata_client.hpp"
#include "vesper/pipeline.hpp"
#include "vesper/synth.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <sys/wait.h>

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

namespace vesper {

namespace {

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

constexpr const char* kVersion = "0.1.0";

const char* kDefaultConfig = R"({
  "corpus": null,
  "embeddings": null,
  "out_dir": "out",
  "seed": 42,
  "threads": 0,
  "years": [],
  "ingest": {
    "input": null,
    "fetch_metadata": false,
    "base_url": "https://api.crossref.org",
    "requests_per_second": 5.0,
    "max_retries": 4,
    "batch_size": 100
  },
  "embedder": {
    "executable": null,
    "mode": "stub",
    "batch_size": 32,
    "model_path": null,
    "seed": 0
  },
  "reducer": {
    "mode": "umap",
    "n_neighbors": 30,
    "min_dist": 0.1,
    "target_dims": 10,
    "n_epochs": 300
  },
  "clusterer": {
    "min_cluster_size": 15,
    "min_samples": 15
  },
  "graph": {
    "resolution": 1.0,
    "allow_sampling": false,
    "sampling_threshold": 200000,
    "pivots": 1024
  },
  "scoring": {
    "cluster_count_scope": "per_year",
    "weak_text": false
  },
  "events": {
    "theta": 0.95
  },
  "compare": {
    "theta": 0.1
  },
  "keyphrases": {
    "enabled": true,
    "ngram_min": 1,
    "ngram_max": 3,
    "min_df": 2,
    "top": 100,
    "k": 5,
    "lambda": 0.6
  },
  "predict": {
    "features": ["year", "n_strong", "n_weak", "mean_id_text_strong", "mean_id_net_strong", "mean_id_net_weak"],
    "alpha": 0.05,
    "trees": 100,
    "max_features": 0,
    "min_samples_split": 2,
    "test_year": null,
    "text_includes_weak": false
  },
  "synth": {
    "kind": "random",
    "years": 4,
    "papers_per_year": 2000,
    "blobs_per_year": 16,
    "papers_per_blob": 120,
    "first_year": 2015
  }
})";

// ---- configuration --------------------------------------------------------

bool same_kind(const Json& d, const Json& g) {
    if (d.is_number_integer()) return g.is_number_integer();
    if (d.is_number()) return g.is_number();
    return d.type() == g.type();
}

void merge_into(Json& base, const Json& patch, const std::string& path) {
    if (!patch.is_object()) throw ConfigError("config" + (path.empty() ? "" : " key " + path) + " must be an object");
    for (auto it = patch.begin(); it != patch.end(); ++it) {
        const std::string key = path.empty() ? it.key() : path + "." + it.key();
        if (!base.contains(it.key())) throw ConfigError("unknown config key " + key);
        Json& d = base[it.key()];
        const Json& g = it.value();
        if (d.is_object()) {
            merge_into(d, g, key);
        } else if (g.is_null()) {
            if (!d.is_null()) throw ConfigError("config key " + key + " cannot be null");
        } else if (d.is_null() || same_kind(d, g)) {
            d = g;
        } else {
            throw ConfigError("config key " + key + " has the wrong type");
        }
    }
}

Json default_config() { return Json::parse(kDefaultConfig); }

// Nullable keys keep their type once set.
const std::set<std::string> kStringKeys = {"corpus", "embeddings", "ingest.input", "embedder.executable",
                                           "embedder.model_path"};

void check_nullable(const Json& cfg) {
    for (const auto& key : kStringKeys) {
        const auto dot = key.find('.');
        const Json& v = dot == std::string::npos ? cfg.at(key) : cfg.at(key.substr(0, dot)).at(key.substr(dot + 1));
        if (!v.is_null() && !v.is_string()) throw ConfigError("config key " + key + " must be a string");
    }
    const auto& ty = cfg.at("predict").at("test_year");
    if (!ty.is_null() && !ty.is_number_integer()) throw ConfigError("config key predict.test_year must be an integer");
}

Json parse_set(const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("--set expects KEY=VALUE, got \"" + assignment + "\"");
    const std::string key = assignment.substr(0, eq);
    const std::string text = assignment.substr(eq + 1);
    Json value = Json::parse(text, nullptr, false);
    if (value.is_discarded()) value = text;
    std::vector<std::string> parts;
    std::stringstream ss(key);
    for (std::string p; std::getline(ss, p, '.');) parts.push_back(p);
    Json patch = value;
    for (auto it = parts.rbegin(); it != parts.rend(); ++it) {
        Json wrap = Json::object();
        wrap[*it] = std::move(patch);
        patch = std::move(wrap);
    }
    return patch;
}

template <typename T>
T get(const Json& cfg, const std::string& block, const std::string& key) {
    const Json& v = block.empty() ? cfg.at(key) : cfg.at(block).at(key);
    try {
        if constexpr (std::is_unsigned_v<T> && !std::is_same_v<T, bool>) {
            if (!v.is_number_unsigned()) throw ConfigError("");
        }
        return v.get<T>();
    } catch (const std::exception&) {
        throw ConfigError("config key " + (block.empty() ? key : block + "." + key) + " has an invalid value");
    }
}

double open_unit(double v, const std::string& key) {
    if (!(v > 0.0 && v < 1.0)) throw ConfigError(key + " must lie in (0, 1)");
    return v;
}

int at_least(int v, int lo, const std::string& key) {
    if (v < lo) throw ConfigError(key + " must be at least " + std::to_string(lo));
    return v;
}

PipelineConfig pipeline_config(const Json& c) {
    PipelineConfig p;
    p.seed = get<std::uint64_t>(c, "", "seed");
    p.reducer.mode = parse_reduce_mode(get<std::string>(c, "reducer", "mode"));
    p.reducer.n_neighbors = at_least(get<int>(c, "reducer", "n_neighbors"), 2, "reducer.n_neighbors");
    p.reducer.min_dist = get<double>(c, "reducer", "min_dist");
    if (p.reducer.min_dist < 0.0) throw ConfigError("reducer.min_dist must be nonnegative");
    p.reducer.target_dims = at_least(get<int>(c, "reducer", "target_dims"), 1, "reducer.target_dims");
    p.reducer.n_epochs = at_least(get<int>(c, "reducer", "n_epochs"), 1, "reducer.n_epochs");
    p.hdbscan.min_cluster_size = at_least(get<int>(c, "clusterer", "min_cluster_size"), 2, "clusterer.min_cluster_size");
    p.hdbscan.min_samples = at_least(get<int>(c, "clusterer", "min_samples"), 1, "clusterer.min_samples");
    p.link_threshold = open_unit(get<double>(c, "events", "theta"), "events.theta");
    p.overlap_threshold = open_unit(get<double>(c, "compare", "theta"), "compare.theta");
    p.louvain_resolution = get<double>(c, "graph", "resolution");
    if (!(p.louvain_resolution > 0.0)) throw ConfigError("graph.resolution must be positive");
    p.centrality.allow_sampling = get<bool>(c, "graph", "allow_sampling");
    p.centrality.sampling_threshold = get<std::size_t>(c, "graph", "sampling_threshold");
    p.centrality.pivots = get<std::size_t>(c, "graph", "pivots");
    p.centrality.seed = p.seed;
    const auto scope = get<std::string>(c, "scoring", "cluster_count_scope");
    if (scope == "per_year") {
        p.scoring.scope = ClusterCountScope::per_year;
    } else if (scope == "all_years") {
        p.scoring.scope = ClusterCountScope::all_years;
    } else {
        throw ConfigError("scoring.cluster_count_scope must be per_year or all_years");
    }
    p.scoring.weak_text = get<bool>(c, "scoring", "weak_text");
    p.keyphrases = get<bool>(c, "keyphrases", "enabled");
    p.candidates.ngram_min = at_least(get<int>(c, "keyphrases", "ngram_min"), 1, "keyphrases.ngram_min");
    p.candidates.ngram_max = at_least(get<int>(c, "keyphrases", "ngram_max"), p.candidates.ngram_min,
                                      "keyphrases.ngram_max");
    p.candidates.min_df = at_least(get<int>(c, "keyphrases", "min_df"), 1, "keyphrases.min_df");
    p.candidates.top = get<std::size_t>(c, "keyphrases", "top");
    p.keyphrase_k = get<std::size_t>(c, "keyphrases", "k");
    p.mmr_lambda = get<double>(c, "keyphrases", "lambda");
    if (p.mmr_lambda < 0.0 || p.mmr_lambda > 1.0) throw ConfigError("keyphrases.lambda must lie in [0, 1]");
    p.features.text_includes_weak = get<bool>(c, "predict", "text_includes_weak");
    p.feature_names = get<std::vector<std::string>>(c, "predict", "features");
    if (p.feature_names.empty()) throw ConfigError("predict.features is empty");
    const FeatureRow probe;
    for (const auto& f : p.feature_names) probe.get(f);
    p.alpha = open_unit(get<double>(c, "predict", "alpha"), "predict.alpha");
    p.forest.n_trees = at_least(get<int>(c, "predict", "trees"), 1, "predict.trees");
    p.forest.max_features = at_least(get<int>(c, "predict", "max_features"), 0, "predict.max_features");
    p.forest.min_samples_split = at_least(get<int>(c, "predict", "min_samples_split"), 2, "predict.min_samples_split");
    const auto& ty = c.at("predict").at("test_year");
    if (!ty.is_null()) p.test_year = ty.get<int>();
    p.phrase_seed = get<std::uint64_t>(c, "embedder", "seed");
    return p;
}

// ---- run context ----------------------------------------------------------

struct FileRecord {
    std::string path;
    std::string sha256;
};

std::string read_bytes(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw DataError("cannot read " + p.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string file_sha(const fs::path& p) { return to_hex(sha256(read_bytes(p))); }

struct Run {
    std::string stage;
    Json config;
    std::string config_sha;
    PipelineConfig pc;
    fs::path out_dir;
    fs::path corpus_path;
    fs::path embeddings_path;
    std::vector<int> years_filter;
    std::vector<FileRecord> inputs;
    std::vector<FileRecord> outputs;
    std::vector<std::string> warnings;
    std::ostream* out = nullptr;
    std::ostream* err = nullptr;

    fs::path at(const std::string& name) const { return out_dir / name; }

    void warn(const std::string& w) {
        *err << "warning: " << w << '\n';
        warnings.push_back(w);
    }

    void input(const fs::path& p) {
        const auto s = p.generic_string();
        for (const auto& r : inputs) {
            if (r.path == s) return;
        }
        inputs.push_back({s, file_sha(p)});
    }

    void output(const fs::path& p) {
        const auto rel = p.lexically_relative(out_dir).generic_string();
        const auto sha = file_sha(p);
        for (auto& r : outputs) {
            if (r.path == rel) {
                r.sha256 = sha;
                return;
            }
        }
        outputs.push_back({rel, sha});
    }

    void write(const std::string& name, const std::string& content) {
        const auto p = at(name);
        std::ofstream f(p, std::ios::binary);
        if (!f) throw DataError("cannot write " + p.string());
        f << content;
        f.close();
        if (!f) throw DataError("cannot write " + p.string());
        output(p);
    }

    void write_matrix(const std::string& name, const EmbeddingMatrix& m) {
        const auto p = at(name);
        write_embeddings(p.string(), m);
        output(p);
        output(manifest_path(p.string()));
    }

    void write_manifest() {
        Json j;
        j["stage"] = stage;
        j["version"] = kVersion;
        j["config_sha256"] = config_sha;
        j["seed"] = pc.seed;
        j["config"] = config;
        j["inputs"] = Json::array();
        for (const auto& r : inputs) j["inputs"].push_back({{"path", r.path}, {"sha256", r.sha256}});
        j["outputs"] = Json::array();
        for (const auto& r : outputs) j["outputs"].push_back({{"path", r.path}, {"sha256", r.sha256}});
        j["warnings"] = warnings;
        const auto p = at("manifest_" + stage + ".json");
        std::ofstream f(p, std::ios::binary);
        f << j.dump(2) << '\n';
        if (!f) throw DataError("cannot write " + p.string());
    }
};

fs::path require_file(const fs::path& p, const std::string& what) {
    if (!fs::is_regular_file(p)) throw ConfigError(what + " " + p.string() + " does not exist");
    return p;
}

fs::path artifact(const Run& run, const std::string& name, const std::string& producer) {
    const auto p = run.at(name);
    if (!fs::is_regular_file(p)) {
        throw ConfigError("missing artifact " + p.string() + "; run `vesper " + producer + "` first");
    }
    return p;
}

Corpus load_corpus(Run& run) {
    require_file(run.corpus_path, "corpus");
    auto parsed = parse_corpus_file(run.corpus_path.string());
    for (const auto& w : parsed.warnings) run.warn("corpus line " + std::to_string(w.line) + ": " + w.message);
    run.input(run.corpus_path);
    return std::move(parsed.corpus);
}

EmbeddingMatrix load_embeddings(Run& run, const fs::path& p) {
    auto m = read_embeddings(p.string());
    run.input(p);
    run.input(manifest_path(p.string()));
    return m;
}

std::vector<int> stage_years(const Run& run, const Corpus& corpus) {
    const auto core = corpus.core_years();
    if (run.years_filter.empty()) return {core.begin(), core.end()};
    std::vector<int> out;
    for (int y : run.years_filter) {
        if (!core.count(y)) throw ConfigError("year " + std::to_string(y) + " has no core papers");
        out.push_back(y);
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

std::string y_name(const std::string& stem, int year, const std::string& ext) {
    return stem + "_" + std::to_string(year) + ext;
}

// ---- parsing of persisted artifacts ----------------------------------------

std::vector<std::vector<std::string>> read_csv_rows(const fs::path& p, const std::string& header) {
    std::istringstream in(read_bytes(p));
    std::string line;
    if (!std::getline(in, line) || line != header) throw DataError(p.string() + ": unexpected header");
    std::vector<std::vector<std::string>> rows;
    while (std::getline(in, line)) {
        if (!line.empty()) rows.push_back(split_csv_line(line));
    }
    return rows;
}

std::optional<double> parse_number(const std::string& s, const std::string& where) {
    if (s.empty()) return std::nullopt;
    if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) throw DataError(where + ": bad number \"" + s + "\"");
    return v;
}

int parse_int(const std::string& s, const std::string& where) {
    int v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) throw DataError(where + ": bad integer \"" + s + "\"");
    return v;
}

struct YearClusters {
    std::vector<std::string> ids;
    ClusterModel model;
};

std::string clusters_json(int year, const std::vector<std::string>& ids, const ClusterModel& model) {
    Json j;
    j["year"] = year;
    j["ids"] = ids;
    j["model"] = Json::parse(model_to_json(model));
    return j.dump() + "\n";
}

YearClusters load_clusters(Run& run, int year) {
    const auto p = artifact(run, y_name("clusters", year, ".json"), "cluster");
    run.input(p);
    try {
        const auto j = Json::parse(read_bytes(p));
        YearClusters c;
        c.ids = j.at("ids").get<std::vector<std::string>>();
        c.model = model_from_json(j.at("model").dump());
        if (j.at("year").get<int>() != year || c.ids.size() != c.model.size()) {
            throw DataError(p.string() + ": inconsistent cluster file");
        }
        return c;
    } catch (const nlohmann::json::exception& e) {
        throw DataError(p.string() + ": " + e.what());
    }
}

CentralityScores load_centrality(Run& run, int year, const std::vector<std::string>& cohort) {
    const auto p = artifact(run, y_name("centrality", year, ".csv"), "graph");
    run.input(p);
    CentralityScores c;
    c.year = year;
    for (const auto& row : read_csv_rows(p, "node_id,betweenness")) {
        if (row.size() != 2) throw DataError(p.string() + ": expected 2 fields");
        const auto v = parse_number(row[1], p.string());
        if (!v) throw DataError(p.string() + ": missing betweenness for " + row[0]);
        c.index[row[0]] = c.node_ids.size();
        c.node_ids.push_back(row[0]);
        c.values.push_back(*v);
    }
    c.cohorts[year] = cohort;
    return c;
}

std::vector<IdSet> load_communities(Run& run, int year) {
    const auto p = artifact(run, y_name("communities", year, ".csv"), "graph");
    run.input(p);
    std::map<int, IdSet> comm;
    for (const auto& row : read_csv_rows(p, "node_id,community")) {
        if (row.size() != 2) throw DataError(p.string() + ": expected 2 fields");
        comm[parse_int(row[1], p.string())].insert(row[0]);
    }
    std::vector<IdSet> out;
    for (auto& [c, s] : comm) out.push_back(std::move(s));
    return out;
}

// year -> paper id -> score
std::map<int, std::map<std::string, InterdisciplinarityScore>> load_scores(Run& run) {
    const auto p = artifact(run, "scores.csv", "score");
    run.input(p);
    std::map<int, std::map<std::string, InterdisciplinarityScore>> out;
    for (const auto& row : read_csv_rows(p, "paper_id,year,cluster_id,is_weak,id_text,id_network")) {
        if (row.size() != 6) throw DataError(p.string() + ": expected 6 fields");
        InterdisciplinarityScore s;
        s.paper_id = row[0];
        s.year = parse_int(row[1], p.string());
        s.cluster_id = parse_int(row[2], p.string());
        s.is_weak = row[3] == "1";
        s.id_text = parse_number(row[4], p.string());
        s.id_network = parse_number(row[5], p.string()).value_or(0.0);
        out[s.year][s.paper_id] = s;
    }
    return out;
}

std::vector<InterdisciplinarityScore> aligned_scores(const std::map<std::string, InterdisciplinarityScore>& by_id,
                                                     const std::vector<std::string>& ids) {
    std::vector<InterdisciplinarityScore> out;
    for (const auto& id : ids) {
        auto it = by_id.find(id);
        if (it == by_id.end()) throw DataError("scores.csv has no row for paper " + id);
        out.push_back(it->second);
    }
    return out;
}

// ---- external embedder -----------------------------------------------------

std::string shell_quote(const std::string& s) {
    std::string q = "'";
    for (char c : s) {
        if (c == '\'') {
            q += "'\\''";
        } else {
            q += c;
        }
    }
    return q + "'";
}

void run_embedder(const Json& cfg, const fs::path& in, const fs::path& out) {
    const auto& e = cfg.at("embedder");
    std::string cmd = shell_quote(e.at("executable").get<std::string>()) + " " + shell_quote(in.string()) + " " +
                      shell_quote(out.string()) + " --mode " + shell_quote(e.at("mode").get<std::string>()) +
                      " --batch-size " + std::to_string(get<int>(cfg, "embedder", "batch_size")) + " --seed " +
                      std::to_string(get<std::uint64_t>(cfg, "embedder", "seed"));
    if (!e.at("model_path").is_null()) cmd += " --model-path " + shell_quote(e.at("model_path").get<std::string>());
    std::cout.flush();
    const int status = std::system(cmd.c_str());
    const int code = status == -1 ? -1 : WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    if (code == 0) return;
    const std::string msg = "embedder exited with status " + std::to_string(code);
    if (code == kExitConfig) throw ConfigError(msg);
    if (code == kExitNumerical) throw NumericalError(msg);
    throw DataError(msg);
}

PhraseEmbedder external_phrase_embedder(const Run& run) {
    const Json cfg = run.config;
    const fs::path dir = run.out_dir;
    return [cfg, dir](const std::vector<std::string>& phrases, std::size_t dims) {
        const auto in = dir / ".phrases.jsonl";
        const auto out = dir / ".phrases.vesp";
        {
            std::ofstream f(in, std::ios::binary);
            for (const auto& ph : phrases) {
                PaperRecord r;
                r.id = ph;
                r.title = ph;
                r.year = 2000;
                f << record_to_json_line(r) << '\n';
            }
        }
        run_embedder(cfg, in, out);
        auto m = read_embeddings(out.string());
        fs::remove(in);
        fs::remove(out);
        fs::remove(manifest_path(out.string()));
        if (m.values.rows != phrases.size() || m.values.cols != dims || m.ids != phrases) {
            throw DataError("embedder returned a matrix that does not match the phrases");
        }
        return std::move(m.values);
    };
}

// ---- shared writers --------------------------------------------------------

template <typename Fn>
std::string render(Fn&& fn) {
    std::ostringstream ss;
    fn(ss);
    return ss.str();
}

std::string reduced_model_id(const PipelineConfig& pc) { return "reduced-" + to_string(pc.reducer.mode); }

const char* const kPalette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
                                "#8c564b", "#e377c2", "#17becf", "#bcbd22", "#393b79"};

std::string fixed2(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

std::string scatter_svg(int year, const Matrix& reduced, const ClusterModel& model,
                        const std::vector<InterdisciplinarityScore>& scores) {
    constexpr double size = 640.0, pad = 40.0;
    double lo0 = 0, hi0 = 1, lo1 = 0, hi1 = 1;
    if (reduced.rows > 0) {
        lo0 = hi0 = reduced(0, 0);
        lo1 = hi1 = reduced(0, 1);
        for (std::size_t i = 0; i < reduced.rows; ++i) {
            lo0 = std::min<double>(lo0, reduced(i, 0));
            hi0 = std::max<double>(hi0, reduced(i, 0));
            lo1 = std::min<double>(lo1, reduced(i, 1));
            hi1 = std::max<double>(hi1, reduced(i, 1));
        }
    }
    const double s0 = hi0 > lo0 ? (size - 2 * pad) / (hi0 - lo0) : 1.0;
    const double s1 = hi1 > lo1 ? (size - 2 * pad) / (hi1 - lo1) : 1.0;
    std::ostringstream o;
    o << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      << "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"640\" height=\"640\" viewBox=\"0 0 640 640\">\n"
      << "<rect width=\"640\" height=\"640\" fill=\"#ffffff\"/>\n"
      << "<text x=\"20\" y=\"24\" font-family=\"sans-serif\" font-size=\"14\">" << year << ": " << model.n_clusters
      << " clusters, " << reduced.rows << " papers</text>\n";
    // weak members first so cluster cores stay visible
    for (int pass = 0; pass < 2; ++pass) {
        for (std::size_t i = 0; i < reduced.rows; ++i) {
            if (model.is_weak(i) != (pass == 0)) continue;
            const double x = pad + (reduced(i, 0) - lo0) * s0;
            const double y = size - pad - (reduced(i, 1) - lo1) * s1;
            const double t = i < scores.size() && scores[i].id_text ? *scores[i].id_text : 0.0;
            const int c = model.labels[i];
            const char* fill = c == kWeak ? "#bbbbbb" : kPalette[static_cast<std::size_t>(c) % std::size(kPalette)];
            o << "<circle cx=\"" << fixed2(x) << "\" cy=\"" << fixed2(y) << "\" r=\"" << fixed2(1.5 + 5.0 * t)
              << "\" fill=\"" << fill << "\" fill-opacity=\"0.7\"/>\n";
        }
    }
    o << "</svg>\n";
    return o.str();
}

std::string summary_header() { return "year,n_papers,n_clusters,n_strong,n_weak,dbcv\n"; }

std::string summary_row(int year, const ClusterModel& m) {
    std::size_t weak = 0;
    for (std::size_t i = 0; i < m.size(); ++i) weak += m.is_weak(i) ? 1 : 0;
    return std::to_string(year) + "," + std::to_string(m.size()) + "," + std::to_string(m.n_clusters) + "," +
           std::to_string(m.size() - weak) + "," + std::to_string(weak) + "," + format_float(m.dbcv) + "\n";
}

std::string events_csv(const std::map<int, LinkResult>& links, const std::map<int, Transition>& transitions) {
    std::ostringstream o;
    bool header = true;
    for (const auto& [y, l] : links) {
        std::ostringstream part;
        write_events_csv(part, l, transitions.at(y));
        auto s = part.str();
        if (!header) s = s.substr(s.find('\n') + 1);
        header = false;
        o << s;
    }
    if (header) {
        std::ostringstream empty;
        write_events_csv(empty, LinkResult{}, Transition{});
        o << empty.str();
    }
    return o.str();
}

std::string prediction_artifacts(Run& run, const std::optional<PredictionResult>& p) {
    if (!p) return {};
    run.write("predictions.csv", render([&](auto& o) { write_predictions_csv(o, p->predictions); }));
    const SelectionResult* sel = p->selection ? &*p->selection : nullptr;
    const Metrics* lm = p->logit_metrics ? &*p->logit_metrics : nullptr;
    run.write("fit_report.json", fit_report_json(sel, &p->forest, lm, &p->forest_metrics) + "\n");
    return "test year " + std::to_string(p->test_year) + ": forest micro-F1 " + format_float(p->forest_metrics.micro_f1);
}

// ---- stages ---------------------------------------------------------------

void stage_ingest(Run& run) {
    const auto& in = run.config.at("ingest").at("input");
    if (in.is_null()) throw ConfigError("ingest needs ingest.input (or --input)");
    const fs::path src = require_file(in.get<std::string>(), "ingest input");
    auto parsed = parse_corpus_file(src.string());
    run.input(src);
    for (const auto& w : parsed.warnings) run.warn("line " + std::to_string(w.line) + ": " + w.message);
    Corpus corpus = std::move(parsed.corpus);
    if (get<bool>(run.config, "ingest", "fetch_metadata")) {
        EndpointConfig ep;
        ep.base_url = get<std::string>(run.config, "ingest", "base_url");
        ep.requests_per_second = get<double>(run.config, "ingest", "requests_per_second");
        ep.max_retries = get<int>(run.config, "ingest", "max_retries");
        ep.max_batch = get<std::size_t>(run.config, "ingest", "batch_size");
        if (ep.max_batch == 0) throw ConfigError("ingest.batch_size must be positive");
        std::vector<std::string> dois;
        for (const auto& p : corpus.papers()) {
            if (p.doi && (p.title.empty() || p.abstract.empty())) dois.push_back(*p.doi);
        }
        std::size_t merged = 0;
        for (std::size_t i = 0; i < dois.size(); i += ep.max_batch) {
            const std::vector<std::string> batch(dois.begin() + static_cast<std::ptrdiff_t>(i),
                                                 dois.begin() + static_cast<std::ptrdiff_t>(std::min(dois.size(), i + ep.max_batch)));
            auto report = fetch_metadata(batch, ep);
            for (const auto& w : report.warnings) run.warn(w);
            merged += merge_fragments(corpus, report.fragments);
        }
        *run.out << "metadata: " << merged << " fields filled from " << dois.size() << " DOIs\n";
    }
    const auto dangling = corpus.dangling_references();
    if (!dangling.empty()) run.warn(std::to_string(dangling.size()) + " references point outside the corpus");
    run.write("corpus.jsonl", render([&](auto& o) { write_corpus(o, corpus); }));
    *run.out << "ingested " << corpus.size() << " papers\n";
}

void stage_embed(Run& run) {
    const Corpus corpus = load_corpus(run);
    const auto dest = run.embeddings_path;
    if (run.config.at("embedder").at("executable").is_null()) {
        if (get<std::string>(run.config, "embedder", "mode") != "stub") {
            throw ConfigError("embedder.mode " + get<std::string>(run.config, "embedder", "mode") +
                              " needs embedder.executable");
        }
        std::vector<std::string> ids;
        for (const auto& p : corpus.papers()) ids.push_back(p.id);
        write_embeddings(dest.string(), stub_embed(ids, get<std::uint64_t>(run.config, "embedder", "seed")));
    } else {
        run_embedder(run.config, run.corpus_path, dest);
    }
    const auto m = read_embeddings(dest.string());
    align_embeddings(corpus, m);
    if (m.ids.size() != corpus.size()) throw DataError("embedder returned " + std::to_string(m.ids.size()) +
                                                       " rows for " + std::to_string(corpus.size()) + " papers");
    run.output(dest);
    run.output(manifest_path(dest.string()));
    *run.out << "embedded " << m.values.rows << " papers (" << m.model_id << ")\n";
}

struct Loaded {
    Corpus corpus;
    EmbeddingMatrix embeddings;
    AlignedView view;
};

Loaded load_inputs(Run& run) {
    Loaded l;
    l.corpus = load_corpus(run);
    require_file(run.embeddings_path, "embeddings");
    l.embeddings = load_embeddings(run, run.embeddings_path);
    l.view = align_embeddings(l.corpus, l.embeddings);
    return l;
}

void stage_reduce(Run& run) {
    const auto l = load_inputs(run);
    for (int y : stage_years(run, l.corpus)) {
        const auto cohort = cohort_of(l.corpus, l.embeddings, l.view, window(l.corpus, y));
        const auto name = y_name("reduced", y, ".vesp");
        if (!can_cluster(cohort.ids.size(), run.pc)) {
            run.warn("year " + std::to_string(y) + ": " + std::to_string(cohort.ids.size()) +
                     " papers are too few to reduce");
            fs::remove(run.at(name));
            fs::remove(manifest_path(run.at(name).string()));
            continue;
        }
        run.write_matrix(name, {reduce(cohort.embeddings, year_reducer(run.pc, y)), cohort.ids,
                                reduced_model_id(run.pc)});
        *run.out << y << ": reduced " << cohort.ids.size() << " papers\n";
    }
}

void stage_cluster(Run& run) {
    const auto l = load_inputs(run);
    for (int y : stage_years(run, l.corpus)) {
        const auto cohort = cohort_of(l.corpus, l.embeddings, l.view, window(l.corpus, y));
        const auto rp = run.at(y_name("reduced", y, ".vesp"));
        ClusterModel model;
        if (can_cluster(cohort.ids.size(), run.pc)) {
            const auto reduced = load_embeddings(run, artifact(run, rp.filename().string(), "reduce"));
            if (reduced.ids != cohort.ids) throw DataError(rp.string() + " does not match the year's cohort");
            model = cluster_year(reduced.values, cohort.embeddings, run.pc);
        } else {
            run.warn("year " + std::to_string(y) + ": too few papers to cluster; every paper is weak");
            model = all_weak_model(cohort.ids.size());
        }
        if (model.degenerate) run.warn("year " + std::to_string(y) + ": no clusters found");
        run.write(y_name("clusters", y, ".json"), clusters_json(y, cohort.ids, model));
        *run.out << y << ": " << model.n_clusters << " clusters\n";
    }
}

void stage_graph(Run& run) {
    const Corpus corpus = load_corpus(run);
    for (int y : stage_years(run, corpus)) {
        const auto win = window(corpus, y);
        const auto g = build_graph(corpus, win);
        const auto comm = louvain(g, run.pc.louvain_resolution, louvain_seed(run.pc, y));
        const auto cent = centrality_scores(g, corpus, win, run.pc.centrality);
        run.write(y_name("edges", y, ".csv"), render([&](auto& o) { write_edge_list(o, g); }));
        run.write(y_name("communities", y, ".csv"), render([&](auto& o) { write_communities_csv(o, g, comm); }));
        run.write(y_name("centrality", y, ".csv"), render([&](auto& o) { write_centrality_csv(o, cent); }));
        *run.out << y << ": " << g.node_count() << " nodes, " << g.edge_count() << " edges, Q = "
                 << format_float(comm.modularity) << '\n';
    }
}

void stage_score(Run& run) {
    const Corpus corpus = load_corpus(run);
    const auto years = stage_years(run, corpus);
    std::map<int, YearClusters> clusters;
    auto opts = run.pc.scoring;
    for (int y : years) {
        clusters[y] = load_clusters(run, y);
        opts.all_years_cluster_count += clusters[y].model.n_clusters;
    }
    std::vector<InterdisciplinarityScore> all;
    for (int y : years) {
        const auto& c = clusters[y];
        const auto cent = load_centrality(run, y, c.ids);
        for (auto& s : score_year(y, c.ids, c.model, cent, opts)) all.push_back(std::move(s));
    }
    run.write("scores.csv", render([&](auto& o) { write_scores_csv(o, all); }));
    *run.out << "scored " << all.size() << " papers\n";
}

struct Tracked {
    std::map<int, LinkResult> links;
    std::map<int, Transition> transitions;
};

Tracked track(Run& run, const std::vector<int>& years, std::map<int, YearClusters>& clusters) {
    Tracked t;
    for (std::size_t i = 0; i + 1 < years.size(); ++i) {
        const int y = years[i];
        if (years[i + 1] != y + 1) continue;
        const auto& a = clusters.at(y).model;
        const auto& b = clusters.at(y + 1).model;
        auto links = link_years(y, a.strong_centroids, b.strong_centroids, run.pc.link_threshold);
        for (const auto& w : links.warnings) run.warn(w);
        t.transitions[y] = classify(y, links.pairs, a.strong_centroids.size(), b.strong_centroids.size());
        t.links[y] = std::move(links);
    }
    return t;
}

void stage_events(Run& run) {
    const Corpus corpus = load_corpus(run);
    const auto years = stage_years(run, corpus);
    std::map<int, YearClusters> clusters;
    for (int y : years) clusters[y] = load_clusters(run, y);
    const auto t = track(run, years, clusters);
    run.write("events.csv", events_csv(t.links, t.transitions));
    *run.out << t.transitions.size() << " transitions\n";
}

void stage_compare(Run& run) {
    const Corpus corpus = load_corpus(run);
    std::vector<OverlapReport> reports;
    for (int y : stage_years(run, corpus)) {
        const auto c = load_clusters(run, y);
        reports.push_back(year_overlap(y, c.ids, c.model, load_communities(run, y), run.pc.overlap_threshold));
    }
    run.write("overlap.csv", render([&](auto& o) { write_overlap_csv(o, reports); }));
}

void stage_keyphrases(Run& run) {
    const Corpus corpus = load_corpus(run);
    std::vector<KeyphraseRow> rows;
    for (int y : stage_years(run, corpus)) {
        const auto c = load_clusters(run, y);
        const auto win = window(corpus, y);
        std::vector<std::string> ids;
        for (auto i : win.cohort) ids.push_back(corpus[i].id);
        if (ids != c.ids) throw DataError(y_name("clusters", y, ".json") + " does not match the corpus cohort");
        for (auto& set : year_keyphrases(corpus, win.cohort, c.model, run.pc)) rows.push_back({y, std::move(set)});
    }
    run.write("keyphrases.csv", render([&](auto& o) { write_keyphrases_csv(o, rows); }));
}

void stage_predict(Run& run) {
    const Corpus corpus = load_corpus(run);
    const auto years = stage_years(run, corpus);
    std::map<int, YearClusters> clusters;
    for (int y : years) clusters[y] = load_clusters(run, y);
    const auto scores = load_scores(run);
    const auto t = track(run, years, clusters);
    std::vector<FeatureRow> rows;
    for (const auto& [y, tr] : t.transitions) {
        auto it = scores.find(y);
        if (it == scores.end()) throw DataError("scores.csv has no rows for year " + std::to_string(y));
        const auto& c = clusters.at(y);
        auto built = build_features(y, c.model, aligned_scores(it->second, c.ids), tr, run.pc.features);
        for (const auto& w : built.warnings) run.warn(w);
        for (auto& r : built.rows) rows.push_back(std::move(r));
    }
    run.write("features.csv", render([&](auto& o) { write_features_csv(o, rows); }));
    std::vector<std::string> warnings;
    const auto p = run_prediction(rows, run.pc, warnings);
    for (const auto& w : warnings) run.warn(w);
    const auto line = prediction_artifacts(run, p);
    *run.out << rows.size() << " feature rows" << (line.empty() ? "" : "; " + line) << '\n';
}

void stage_report(Run& run) {
    const Corpus corpus = load_corpus(run);
    const auto scores = load_scores(run);
    std::string summary = summary_header();
    for (int y : stage_years(run, corpus)) {
        const auto c = load_clusters(run, y);
        summary += summary_row(y, c.model);
        const auto rp = run.at(y_name("reduced", y, ".vesp"));
        if (!fs::is_regular_file(rp)) {
            run.warn("year " + std::to_string(y) + ": no reduced projection to plot");
            continue;
        }
        const auto reduced = load_embeddings(run, rp);
        if (reduced.ids != c.ids) throw DataError(rp.string() + " does not match " + y_name("clusters", y, ".json"));
        if (reduced.values.cols < 2) {
            run.warn("year " + std::to_string(y) + ": projection has fewer than 2 dimensions");
            continue;
        }
        auto it = scores.find(y);
        if (it == scores.end()) throw DataError("scores.csv has no rows for year " + std::to_string(y));
        run.write(y_name("report", y, ".svg"), scatter_svg(y, reduced.values, c.model, aligned_scores(it->second, c.ids)));
    }
    run.write("report_summary.csv", summary);
}

void stage_synth(Run& run) {
    const auto kind = get<std::string>(run.config, "synth", "kind");
    const auto first = get<int>(run.config, "synth", "first_year");
    TimelineSpec spec;
    if (kind == "reference") {
        spec = reference_timeline(run.pc.seed, at_least(get<int>(run.config, "synth", "papers_per_blob"), 1,
                                                        "synth.papers_per_blob"), first);
    } else if (kind == "random") {
        spec = random_timeline(run.pc.seed, at_least(get<int>(run.config, "synth", "years"), 2, "synth.years"),
                               at_least(get<int>(run.config, "synth", "papers_per_year"), 1, "synth.papers_per_year"),
                               at_least(get<int>(run.config, "synth", "blobs_per_year"), 2, "synth.blobs_per_year"),
                               first);
    } else {
        throw ConfigError("synth.kind must be random or reference");
    }
    spec.link_threshold = run.pc.link_threshold;
    const auto tl = gen_timeline(spec);
    run.write("corpus.jsonl", render([&](auto& o) { write_corpus(o, tl.corpus); }));
    run.write_matrix("embeddings.vesp", tl.embeddings);
    run.write("planted_events.csv", render([&](auto& o) { write_planted_events_csv(o, tl.events); }));
    run.write("planted_labels.csv", render([&](auto& o) { write_planted_labels_csv(o, tl); }));
    run.write("paper_blobs.csv", render([&](auto& o) {
                  o << "paper_id,blob\n";
                  for (const auto& p : tl.corpus.papers()) o << csv_field(p.id) << ',' << csv_field(tl.blob_of.at(p.id)) << '\n';
              }));
    *run.out << "synthesized " << tl.corpus.size() << " papers, " << tl.events.size() << " planted events\n";
}

void stage_pipeline(Run& run) {
    if (!run.years_filter.empty()) throw ConfigError("pipeline processes every core year; drop the years filter");
    if (!fs::is_regular_file(run.embeddings_path)) {
        run.warn("no embeddings at " + run.embeddings_path.string() + "; running the embed stage");
        stage_embed(run);
    }
    const auto l = load_inputs(run);
    auto res = run_pipeline(l.corpus, l.embeddings, run.pc);
    for (const auto& w : res.warnings) run.warn(w);

    std::vector<InterdisciplinarityScore> scores;
    std::vector<OverlapReport> overlaps;
    std::vector<KeyphraseRow> phrases;
    std::string summary = summary_header();
    for (const auto& y : res.years) {
        if (y.reduced.rows > 0) run.write_matrix(y_name("reduced", y.year, ".vesp"), {y.reduced, y.ids, reduced_model_id(run.pc)});
        run.write(y_name("clusters", y.year, ".json"), clusters_json(y.year, y.ids, y.model));
        run.write(y_name("edges", y.year, ".csv"), render([&](auto& o) { write_edge_list(o, y.graph); }));
        run.write(y_name("communities", y.year, ".csv"),
                  render([&](auto& o) { write_communities_csv(o, y.graph, y.communities); }));
        run.write(y_name("centrality", y.year, ".csv"), render([&](auto& o) { write_centrality_csv(o, y.centrality); }));
        if (y.reduced.cols >= 2) run.write(y_name("report", y.year, ".svg"), scatter_svg(y.year, y.reduced, y.model, y.scores));
        scores.insert(scores.end(), y.scores.begin(), y.scores.end());
        overlaps.push_back(y.overlap);
        for (const auto& k : y.keyphrases) phrases.push_back({y.year, k});
        summary += summary_row(y.year, y.model);
        *run.out << y.year << ": " << y.ids.size() << " papers, " << y.model.n_clusters << " clusters\n";
    }
    run.write("scores.csv", render([&](auto& o) { write_scores_csv(o, scores); }));
    run.write("events.csv", events_csv(res.links, res.transitions));
    run.write("overlap.csv", render([&](auto& o) { write_overlap_csv(o, overlaps); }));
    if (run.pc.keyphrases) run.write("keyphrases.csv", render([&](auto& o) { write_keyphrases_csv(o, phrases); }));
    run.write("features.csv", render([&](auto& o) { write_features_csv(o, res.features); }));
    run.write("report_summary.csv", summary);
    const auto line = prediction_artifacts(run, res.prediction);
    if (!line.empty()) *run.out << line << '\n';
}

const std::vector<std::pair<std::string, std::string>> kStages = {
    {"ingest", "normalize a JSONL corpus (optionally filling metadata over HTTP)"},
    {"embed", "embed the corpus (built-in stub or the external embedder)"},
    {"reduce", "reduce each year's embeddings"},
    {"cluster", "HDBSCAN clusters with soft membership per year"},
    {"graph", "citation graph, Louvain communities and betweenness per year"},
    {"score", "language and network interdisciplinarity scores"},
    {"events", "link clusters across consecutive years and classify events"},
    {"compare", "overlap of clusters and citation communities"},
    {"keyphrases", "MMR keyphrases per cluster"},
    {"predict", "feature table, logit selection and random forest"},
    {"synth", "generate a synthetic timeline with planted events"},
    {"report", "SVG scatter plots and a summary table"},
    {"pipeline", "every stage end to end"},
};

void dispatch(Run& run) {
    const auto& s = run.stage;
    if (s == "ingest") return stage_ingest(run);
    if (s == "embed") return stage_embed(run);
    if (s == "reduce") return stage_reduce(run);
    if (s == "cluster") return stage_cluster(run);
    if (s == "graph") return stage_graph(run);
    if (s == "score") return stage_score(run);
    if (s == "events") return stage_events(run);
    if (s == "compare") return stage_compare(run);
    if (s == "keyphrases") return stage_keyphrases(run);
    if (s == "predict") return stage_predict(run);
    if (s == "synth") return stage_synth(run);
    if (s == "report") return stage_report(run);
    if (s == "pipeline") return stage_pipeline(run);
    throw ConfigError("unknown subcommand " + s);
}

struct Flags {
    std::string config_file;
    std::string out_dir, corpus, embeddings, input;
    std::uint64_t seed = 0;
    int threads = 0;
    int test_year = 0;
    std::vector<int> years;
    std::vector<std::string> sets;
    bool print_config = false;
};

}  // namespace

std::string default_config_json() { return default_config().dump(2) + "\n"; }

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"vesper: interdisciplinarity and topic evolution of a publication corpus"};
    app.name("vesper");
    app.fallthrough();
    app.require_subcommand(1, 1);
    Flags f;
    auto* o_config = app.add_option("--config", f.config_file, "JSON config document");
    auto* o_out = app.add_option("-o,--out", f.out_dir, "output directory (out_dir)");
    auto* o_corpus = app.add_option("--corpus", f.corpus, "corpus JSONL (default <out>/corpus.jsonl)");
    auto* o_emb = app.add_option("--embeddings", f.embeddings, "VESP-EMB file (default <out>/embeddings.vesp)");
    auto* o_seed = app.add_option("--seed", f.seed, "run seed");
    auto* o_threads = app.add_option("--threads", f.threads, "worker threads, 0 = all cores");
    auto* o_years = app.add_option("--year", f.years, "restrict per-year stages to these years");
    auto* o_input = app.add_option("--input", f.input, "ingest input (ingest.input)");
    auto* o_test = app.add_option("--test-year", f.test_year, "held-out year (predict.test_year)");
    app.add_option("--set", f.sets, "override a config key, e.g. --set reducer.n_neighbors=15");
    app.add_flag("--print-config", f.print_config, "print the effective config and exit");
    for (const auto& [name, help] : kStages) app.add_subcommand(name, help);

    try {
        std::vector<std::string> rev(args.rbegin(), args.rend());
        app.parse(rev);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        if (code == 0) return kExitOk;
        err << app.help();
        return kExitConfig;
    }

    try {
        Run run;
        run.stage = app.get_subcommands().front()->get_name();
        run.out = &out;
        run.err = &err;
        Json cfg = default_config();
        if (*o_config) {
            const Json file = Json::parse(read_bytes(require_file(f.config_file, "config")), nullptr, false);
            if (file.is_discarded()) throw ConfigError("config " + f.config_file + " is not valid JSON");
            merge_into(cfg, file, "");
        }
        for (const auto& s : f.sets) merge_into(cfg, parse_set(s), "");
        if (*o_out) cfg["out_dir"] = f.out_dir;
        if (*o_corpus) cfg["corpus"] = f.corpus;
        if (*o_emb) cfg["embeddings"] = f.embeddings;
        if (*o_seed) cfg["seed"] = f.seed;
        if (*o_threads) cfg["threads"] = f.threads;
        if (*o_years) cfg["years"] = f.years;
        if (*o_input) cfg["ingest"]["input"] = f.input;
        if (*o_test) cfg["predict"]["test_year"] = f.test_year;
        check_nullable(cfg);
        if (f.print_config) {
            out << cfg.dump(2) << '\n';
            return kExitOk;
        }

        run.config = cfg;
        run.config_sha = to_hex(sha256(cfg.dump()));
        run.pc = pipeline_config(cfg);
        run.years_filter = get<std::vector<int>>(cfg, "", "years");
        const int threads = at_least(get<int>(cfg, "", "threads"), 0, "threads");
        set_thread_count(static_cast<unsigned>(threads));
        run.out_dir = get<std::string>(cfg, "", "out_dir");
        fs::create_directories(run.out_dir);
        run.corpus_path = cfg["corpus"].is_null() ? run.at("corpus.jsonl") : fs::path(cfg["corpus"].get<std::string>());
        run.embeddings_path =
            cfg["embeddings"].is_null() ? run.at("embeddings.vesp") : fs::path(cfg["embeddings"].get<std::string>());
        if (!cfg["embedder"]["executable"].is_null() && run.pc.keyphrases) {
            run.pc.phrase_embedder = external_phrase_embedder(run);
        }
        dispatch(run);
        run.write_manifest();
        return kExitOk;
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const NumericalError& e) {
        err << "numerical error: " << e.what() << '\n';
        return kExitNumerical;
    } catch (const DataError& e) {
        err << "data error: " << e.what() << '\n';
        return kExitData;
    } catch (const fs::filesystem_error& e) {
        err << "data error: " << e.what() << '\n';
        return kExitData;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    }
}

}  // namespace vesper
