#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "bsdh/dataset.hpp"
#include "bsdh/model.hpp"

namespace bsdh {

// Packed q-bit code, MSB-first within bytes; bit 1 encodes +1, bit 0
// encodes -1. Padding bits in the last byte are zero.
std::vector<std::uint8_t> pack_code(std::span<const std::int8_t> code);
std::vector<std::int8_t> unpack_code(std::span<const std::uint8_t> bytes, std::size_t q);

// Element-wise sign with sign(0) := +1 (the tanh-like layer makes exact
// zeros measure-zero, but the rule must be deterministic).
std::vector<std::int8_t> sign_code(std::span<const double> values);

struct EncodedItem {
    std::uint64_t id = 0;
    std::vector<std::int8_t> code; // +-1 entries, length q
};

// Test-stage codes: sign of the relaxed code r = o(phi(I)), so the result
// does not depend on beta or on the bit weights.
std::vector<EncodedItem> encode(const Model& model, const Dataset& dataset);

// Indices of the k largest w_i^2, in descending weight order, ties broken
// by the lower index. k = q returns the full permutation.
std::vector<std::uint16_t> select_bits(std::span<const double> weights, std::size_t k);

} // namespace bsdh
