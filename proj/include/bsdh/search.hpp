#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "bsdh/codec.hpp"

namespace bsdh {

// Packed code store with the weight-rank permutation applied at build time,
// so serving a shorter code is a prefix operation. weights are kept at
// 32-bit precision, matching the on-disk format exactly.
struct CodeDatabase {
    std::uint32_t q = 0;
    std::vector<float> weights;          // length q, in bit_order
    std::vector<std::uint16_t> bit_order; // original bit index per stored position
    std::vector<std::uint64_t> ids;
    std::vector<std::uint8_t> codes;     // n * stride(), MSB-first, permuted

    std::size_t stride() const { return (static_cast<std::size_t>(q) + 7) / 8; }
    std::size_t size() const { return ids.size(); }
    std::span<const std::uint8_t> code(std::size_t row) const {
        return {codes.data() + row * stride(), stride()};
    }
};

// Build with the default descending-weight order, or with an explicit
// order/subset (bit-selection experiments).
CodeDatabase build_database(const std::vector<EncodedItem>& items,
                            std::span<const double> weights);
CodeDatabase build_database_with_order(const std::vector<EncodedItem>& items,
                                       std::span<const double> weights,
                                       std::span<const std::uint16_t> order);

// Repacks one +-1 code into database order (queries must be permuted the
// same way as the stored codes).
std::vector<std::uint8_t> pack_in_order(std::span<const std::int8_t> code,
                                        std::span<const std::uint16_t> order);

struct RankedItem {
    std::uint64_t id = 0;
    double affinity = 0.0;
};
// Ascending affinity (most similar first), ties by ascending id.
using RankingList = std::vector<RankedItem>;

// Per-chunk lookup tables: chunk c maps an 8-bit XOR pattern x to
// sum_{i in chunk} w_i^2 * (bit set ? +1 : -1), positions past k_bits
// contributing zero. t[0] = -sum w_i^2 (full agreement).
using ChunkLuts = std::vector<std::array<double, 256>>;
ChunkLuts build_lut(std::span<const float> weights_in_order, std::size_t k_bits);

// Affinity of the query against every stored code, over the first k_bits.
// The two engines accumulate per 8-bit chunk in the same order, so their
// results agree bit for bit; the bruteforce route never touches the tables.
void scan_lut_serial(const CodeDatabase& db, const ChunkLuts& luts,
                     std::span<const std::uint8_t> query, std::vector<double>& affinities);
void scan_lut_omp(const CodeDatabase& db, const ChunkLuts& luts,
                  std::span<const std::uint8_t> query, std::vector<double>& affinities);
void scan_bruteforce_serial(const CodeDatabase& db, std::span<const std::uint8_t> query,
                            std::size_t k_bits, std::vector<double>& affinities);
void scan_bruteforce_omp(const CodeDatabase& db, std::span<const std::uint8_t> query,
                         std::size_t k_bits, std::vector<double>& affinities);

RankingList query_lut(const CodeDatabase& db, const ChunkLuts& luts,
                      std::span<const std::uint8_t> query, std::size_t k_bits, std::size_t top_k);
RankingList query_lut(const CodeDatabase& db, std::span<const std::uint8_t> query,
                      std::size_t k_bits, std::size_t top_k);
RankingList query_bruteforce(const CodeDatabase& db, std::span<const std::uint8_t> query,
                             std::size_t k_bits, std::size_t top_k);

// Plain Hamming distance between the query and a stored code on the first
// k_bits (hash-lookup semantics; weights do not participate).
unsigned hamming_prefix(const CodeDatabase& db, std::size_t row,
                        std::span<const std::uint8_t> query, std::size_t k_bits);

// Standalone database keeping only the first k_bits (already the largest
// weights); bit_order of the result is the identity.
CodeDatabase truncate_database(const CodeDatabase& db, std::size_t k_bits);

// Code database file, format version 1: magic "BSDH-CDB", version u32,
// q u32, n u64, weights f32[q] (bit order), bit_order u16[q], then n records
// of (id u64, code ceil(q/8) bytes). All integers little-endian.
void save_database(const CodeDatabase& db, const std::string& path);
CodeDatabase load_database(const std::string& path);

} // namespace bsdh
