#include "vesper/embedding_file.hpp"

#include <json.hpp>

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <numbers>

namespace vesper {

namespace {

static_assert(std::endian::native == std::endian::little, "VESP-EMB IO assumes a little-endian host");

template <typename T>
void put(std::vector<std::uint8_t>& out, T v) {
    const auto* p = reinterpret_cast<const std::uint8_t*>(&v);
    out.insert(out.end(), p, p + sizeof(T));
}

template <typename T>
T get(std::span<const std::uint8_t> bytes, std::size_t offset) {
    T v;
    std::memcpy(&v, bytes.data() + offset, sizeof(T));
    return v;
}

std::vector<std::uint8_t> read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

std::vector<std::uint8_t> encode_vesp(const Matrix& m) {
    if (m.rows > UINT32_MAX || m.cols > UINT32_MAX) throw DataError("matrix too large for VESP-EMB");
    std::vector<std::uint8_t> out;
    out.reserve(kVespHeaderSize + m.data.size() * sizeof(float));
    out.insert(out.end(), {'V', 'E', 'S', 'P'});
    put<std::uint16_t>(out, kVespVersion);
    put<std::uint16_t>(out, 0);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(m.rows));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(m.cols));
    const auto* p = reinterpret_cast<const std::uint8_t*>(m.data.data());
    out.insert(out.end(), p, p + m.data.size() * sizeof(float));
    return out;
}

Matrix decode_vesp(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < kVespHeaderSize) throw DataError("VESP-EMB: truncated header");
    if (std::memcmp(bytes.data(), "VESP", 4) != 0) throw DataError("VESP-EMB: bad magic");
    if (get<std::uint16_t>(bytes, 4) != kVespVersion) throw DataError("VESP-EMB: unsupported version");
    if (get<std::uint16_t>(bytes, 6) != 0) throw DataError("VESP-EMB: nonzero flags");
    const std::size_t rows = get<std::uint32_t>(bytes, 8);
    const std::size_t cols = get<std::uint32_t>(bytes, 12);
    if (bytes.size() != kVespHeaderSize + rows * cols * sizeof(float)) {
        throw DataError("VESP-EMB: payload size does not match header dimensions");
    }
    Matrix m(rows, cols);
    if (!m.data.empty()) {
        std::memcpy(m.data.data(), bytes.data() + kVespHeaderSize, m.data.size() * sizeof(float));
    }
    if (!m.all_finite()) throw DataError("VESP-EMB: non-finite value in payload");
    return m;
}

std::string manifest_path(const std::string& vesp_path) { return vesp_path + ".json"; }

void write_embeddings(const std::string& path, const EmbeddingMatrix& emb) {
    if (emb.ids.size() != emb.values.rows) throw DataError("embedding ids/rows mismatch");
    const auto bytes = encode_vesp(emb.values);
    {
        std::ofstream out(path, std::ios::binary);
        if (!out) throw DataError("cannot write " + path);
        out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    }
    nlohmann::json manifest;
    manifest["ids"] = emb.ids;
    manifest["model_id"] = emb.model_id;
    manifest["payload_sha256"] = to_hex(emb.payload_hash());
    std::ofstream out(manifest_path(path));
    if (!out) throw DataError("cannot write " + manifest_path(path));
    out << manifest.dump(1) << '\n';
}

EmbeddingMatrix read_embeddings(const std::string& path) {
    const auto bytes = read_file(path);
    EmbeddingMatrix emb;
    emb.values = decode_vesp(bytes);
    std::ifstream in(manifest_path(path));
    if (!in) throw DataError("missing manifest " + manifest_path(path));
    nlohmann::json manifest;
    try {
        in >> manifest;
        emb.ids = manifest.at("ids").get<std::vector<std::string>>();
        emb.model_id = manifest.at("model_id").get<std::string>();
        const auto digest = manifest.at("payload_sha256").get<std::string>();
        if (digest != to_hex(emb.payload_hash())) {
            throw DataError("VESP-EMB: payload_sha256 mismatch for " + path);
        }
    } catch (const nlohmann::json::exception& e) {
        throw DataError("malformed manifest " + manifest_path(path) + ": " + e.what());
    }
    if (emb.ids.size() != emb.values.rows) {
        throw DataError("VESP-EMB: manifest has " + std::to_string(emb.ids.size()) + " ids for " +
                        std::to_string(emb.values.rows) + " rows");
    }
    return emb;
}

std::vector<float> stub_vector(std::string_view id, std::uint64_t seed, std::size_t dims) {
    std::string keyed(id);
    for (int b = 0; b < 8; ++b) keyed.push_back(static_cast<char>((seed >> (8 * b)) & 0xff));
    const Digest key = sha256(keyed);

    std::vector<double> uniforms;
    uniforms.reserve(dims + 4);
    std::uint64_t counter = 0;
    while (uniforms.size() < dims + (dims % 2)) {
        std::string block(key.begin(), key.end());
        for (int b = 0; b < 8; ++b) block.push_back(static_cast<char>((counter >> (8 * b)) & 0xff));
        ++counter;
        const Digest d = sha256(block);
        for (int w = 0; w < 4; ++w) {
            std::uint64_t word = 0;
            std::memcpy(&word, d.data() + 8 * w, 8);
            uniforms.push_back(static_cast<double>(word >> 11) * 0x1.0p-53);
        }
    }
    std::vector<double> v(dims);
    for (std::size_t i = 0; i + 1 < dims + 1; i += 2) {
        const double u1 = std::max(uniforms[i], 0x1.0p-53);
        const double u2 = uniforms[i + 1];
        const double r = std::sqrt(-2.0 * std::log(u1));
        v[i] = r * std::cos(2.0 * std::numbers::pi * u2);
        if (i + 1 < dims) v[i + 1] = r * std::sin(2.0 * std::numbers::pi * u2);
    }
    const double n = norm(std::span<const double>(v));
    std::vector<float> out(dims);
    for (std::size_t i = 0; i < dims; ++i) out[i] = static_cast<float>(v[i] / n);
    return out;
}

EmbeddingMatrix stub_embed(const std::vector<std::string>& ids, std::uint64_t seed, std::size_t dims) {
    EmbeddingMatrix emb;
    emb.values = Matrix(ids.size(), dims);
    emb.ids = ids;
    emb.model_id = "stub-sha256-v1";
    for (std::size_t i = 0; i < ids.size(); ++i) {
        const auto v = stub_vector(ids[i], seed, dims);
        std::copy(v.begin(), v.end(), emb.values.row(i).begin());
    }
    return emb;
}

}  // namespace vesper
