#include <doctest.h>

#include <json.hpp>
#include <openssl/evp.h>

#include "vesper/cli.hpp"
#include "vesper/embedding_file.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace vesper;
namespace fs = std::filesystem;

namespace {

struct Result {
    int code;
    std::string out, err;
};

Result run(std::vector<std::string> args) {
    std::ostringstream out, err;
    const int code = run_cli(args, out, err);
    return {code, out.str(), err.str()};
}

fs::path fresh_dir(const std::string& name) {
    auto p = fs::temp_directory_path() / ("vesper_cli_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), {});
}

std::string sha256_hex(const std::string& bytes) {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr);
    static const char* hex = "0123456789abcdef";
    std::string s;
    for (unsigned i = 0; i < len; ++i) {
        s += hex[md[i] >> 4];
        s += hex[md[i] & 15];
    }
    return s;
}

void check_manifest(const fs::path& dir, const std::string& stage) {
    const auto path = dir / ("manifest_" + stage + ".json");
    REQUIRE(fs::exists(path));
    auto m = nlohmann::ordered_json::parse(slurp(path));
    CHECK(m["stage"] == stage);
    CHECK(m["config_sha256"] == sha256_hex(m["config"].dump()));
    for (const auto& o : m["outputs"]) {
        const auto file = dir / o["path"].get<std::string>();
        CHECK_MESSAGE(fs::exists(file), file);
        CHECK(o["sha256"] == sha256_hex(slurp(file)));
    }
}

std::vector<std::string> small_synth(const fs::path& dir) {
    return {"-o", dir.string(), "--seed", "5", "--set", "synth.kind=reference", "--set", "synth.papers_per_blob=40",
            "--set", "reducer.n_epochs=100"};
}

std::vector<std::string> with(std::vector<std::string> base, std::initializer_list<std::string> more) {
    base.insert(base.end(), more);
    return base;
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("usage errors exit with 2") {
    CHECK(run({}).code == kExitConfig);
    CHECK(run({"frobnicate"}).code == kExitConfig);
    CHECK(run({"--help"}).code == kExitOk);
    const auto dir = fresh_dir("usage");
    CHECK(run({"-o", dir.string(), "--set", "reducer.no_such_key=1", "reduce"}).code == kExitConfig);
    CHECK(run({"-o", dir.string(), "--set", "reducer.n_neighbors=\"many\"", "reduce"}).code == kExitConfig);
    CHECK(run({"-o", dir.string(), "--set", "events.theta=1.5", "events"}).code == kExitConfig);
    auto missing = run({"-o", dir.string(), "cluster"});
    CHECK(missing.code == kExitConfig);
    CHECK(missing.err.find("config error") != std::string::npos);
}

TEST_CASE("config precedence") {
    const auto dir = fresh_dir("precedence");
    const auto file = dir / "cfg.json";
    std::ofstream(file) << R"({"seed": 7, "reducer": {"n_neighbors": 12}})";
    auto r = run({"--config", file.string(), "--set", "seed=8", "--seed", "9", "--print-config", "reduce"});
    REQUIRE(r.code == kExitOk);
    auto cfg = nlohmann::json::parse(r.out);
    CHECK(cfg["seed"] == 9);
    CHECK(cfg["reducer"]["n_neighbors"] == 12);
    CHECK(cfg["events"]["theta"] == 0.95);
    CHECK(cfg["compare"]["theta"] == 0.1);
    CHECK(nlohmann::json::parse(default_config_json())["clusterer"]["min_cluster_size"] == 15);
    std::ofstream(dir / "bad.json") << "{not json";
    CHECK(run({"--config", (dir / "bad.json").string(), "reduce"}).code == kExitConfig);
}

TEST_CASE("malformed inputs exit with 3") {
    const auto dir = fresh_dir("data");
    std::ofstream(dir / "in.jsonl") << "{\"id\":\"a\",\"title\":\"x\",\"year\":2011}\n{\"id\":\"a\",\"title\":\"y\",\"year\":2011}\n";
    CHECK(run({"-o", dir.string(), "--input", (dir / "in.jsonl").string(), "ingest"}).code == kExitData);
    std::ofstream(dir / "corpus.jsonl") << "{\"id\":\"a\",\"title\":\"x\",\"year\":2011}\n";
    std::ofstream(dir / "embeddings.vesp") << "garbage";
    CHECK(run({"-o", dir.string(), "reduce"}).code == kExitData);
}

TEST_CASE("ingest and stub embed") {
    const auto dir = fresh_dir("ingest");
    std::ofstream(dir / "in.jsonl") << "{\"id\":\"a\",\"title\":\"Income hedging\",\"year\":2011,\"references\":[\"b\"]}\n"
                                       "{\"id\":\"b\",\"title\":\"B\",\"year\":2010}\nbroken\n";
    auto r = run({"-o", dir.string(), "--input", (dir / "in.jsonl").string(), "ingest"});
    REQUIRE(r.code == kExitOk);
    check_manifest(dir, "ingest");
    auto m = nlohmann::json::parse(slurp(dir / "manifest_ingest.json"));
    CHECK(m["warnings"].size() == 1);
    REQUIRE(run({"-o", dir.string(), "embed"}).code == kExitOk);
    check_manifest(dir, "embed");
    auto e = read_embeddings((dir / "embeddings.vesp").string());
    CHECK(e.ids == std::vector<std::string>{"a", "b"});
    CHECK(e.values.cols == 768);
}

TEST_CASE("external embedder exit status") {
    const auto dir = fresh_dir("external");
    std::ofstream(dir / "corpus.jsonl") << "{\"id\":\"a\",\"title\":\"x\",\"year\":2011}\n";
    const auto script = dir / "embedder.sh";
    std::ofstream(script) << "#!/bin/sh\nexit 4\n";
    fs::permissions(script, fs::perms::owner_all);
    auto set_exe = "embedder.executable=" + script.string();
    CHECK(run({"-o", dir.string(), "--set", set_exe, "embed"}).code == kExitNumerical);
    std::ofstream(script) << "#!/bin/sh\nexit 2\n";
    CHECK(run({"-o", dir.string(), "--set", set_exe, "embed"}).code == kExitConfig);
}

TEST_CASE("synth then pipeline") {
    const auto dir = fresh_dir("pipeline");
    REQUIRE(run(with(small_synth(dir), {"synth"})).code == kExitOk);
    check_manifest(dir, "synth");
    auto r = run(with(small_synth(dir), {"pipeline"}));
    INFO(r.err);
    REQUIRE(r.code == kExitOk);
    check_manifest(dir, "pipeline");
    for (const char* f : {"scores.csv", "events.csv", "overlap.csv", "keyphrases.csv", "features.csv",
                          "predictions.csv", "fit_report.json", "clusters_2015.json", "edges_2015.csv",
                          "communities_2016.csv", "centrality_2017.csv", "reduced_2018.vesp", "report_2016.svg"}) {
        CHECK_MESSAGE(fs::exists(dir / f), f);
    }
    CHECK(slurp(dir / "scores.csv").rfind("paper_id,year,cluster_id,is_weak,id_text,id_network\n", 0) == 0);
    CHECK(slurp(dir / "events.csv").rfind("year_from,year_to,cluster_from,cluster_to,cosine,event_type\n", 0) == 0);
    CHECK(slurp(dir / "keyphrases.csv").rfind("year,cluster_id,rank,phrase,score\n", 0) == 0);
    CHECK(run(with(small_synth(dir), {"--year", "2016", "pipeline"})).code == kExitConfig);

    const auto twice = fresh_dir("pipeline_b");
    REQUIRE(run(with(small_synth(twice), {"synth"})).code == kExitOk);
    REQUIRE(run(with(small_synth(twice), {"pipeline"})).code == kExitOk);
    for (const char* f : {"scores.csv", "events.csv", "overlap.csv", "features.csv", "predictions.csv"}) {
        CHECK_MESSAGE(slurp(dir / f) == slurp(twice / f), f);
    }

    // the per-stage path reproduces the clusters and events
    const auto staged = fresh_dir("staged");
    REQUIRE(run(with(small_synth(staged), {"synth"})).code == kExitOk);
    for (const char* s : {"reduce", "cluster", "graph", "score", "events", "compare", "keyphrases", "predict",
                          "report"}) {
        auto sr = run(with(small_synth(staged), {s}));
        CHECK_MESSAGE(sr.code == kExitOk, s << ": " << sr.err);
        check_manifest(staged, s);
    }
    for (const char* f : {"clusters_2015.json", "edges_2016.csv", "events.csv", "overlap.csv", "keyphrases.csv"}) {
        CHECK_MESSAGE(slurp(dir / f) == slurp(staged / f), f);
    }
}

}  // TEST_SUITE cli
