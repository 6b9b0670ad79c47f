#pragma once

#include "vesper/corpus.hpp"

#include <string>
#include <vector>

namespace vesper {

// VESP-EMB v1 layout (all little-endian):
//   "VESP" | u16 version=1 | u16 flags=0 | u32 n_rows | u32 n_cols | f32[n_rows*n_cols]
// The sidecar manifest `<path>.json` holds {ids[], model_id, payload_sha256}
// where the digest covers the f32 block only.
inline constexpr std::uint16_t kVespVersion = 1;
inline constexpr std::size_t kVespHeaderSize = 16;
inline constexpr std::size_t kDocumentDims = 768;

std::vector<std::uint8_t> encode_vesp(const Matrix& m);
Matrix decode_vesp(std::span<const std::uint8_t> bytes);

std::string manifest_path(const std::string& vesp_path);

void write_embeddings(const std::string& path, const EmbeddingMatrix& emb);
/// Reads and validates magic, version, flags, size, finiteness, and the
/// manifest digest. Throws DataError on any mismatch.
EmbeddingMatrix read_embeddings(const std::string& path);

/// Deterministic stand-in for the language model: 768 standard-normal draws
/// from a counter-based generator keyed by SHA-256(id || seed_le64), then
/// L2-normalized.
///
/// Block c (c = 0, 1, ...) is SHA-256(key || c_le64); each block yields four
/// little-endian u64 words, converted to uniforms (w >> 11) * 2^-53 and paired
/// into Box-Muller normals (cos branch then sin branch).
std::vector<float> stub_vector(std::string_view id, std::uint64_t seed,
                               std::size_t dims = kDocumentDims);

/// Stub-mode embedding of a list of texts keyed by id; row order follows input.
EmbeddingMatrix stub_embed(const std::vector<std::string>& ids, std::uint64_t seed,
                           std::size_t dims = kDocumentDims);

}  // namespace vesper
