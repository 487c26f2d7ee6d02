#include "bsdh/codec.hpp"

#include <algorithm>
#include <numeric>

#include "bsdh/error.hpp"
#include "bsdh/parallel.hpp"

namespace bsdh {

std::vector<std::uint8_t> pack_code(std::span<const std::int8_t> code) {
    std::vector<std::uint8_t> out((code.size() + 7) / 8, 0);
    for (std::size_t i = 0; i < code.size(); ++i)
        if (code[i] > 0) out[i / 8] |= static_cast<std::uint8_t>(0x80u >> (i % 8));
    return out;
}

std::vector<std::int8_t> unpack_code(std::span<const std::uint8_t> bytes, std::size_t q) {
    if (bytes.size() * 8 < q) throw InputError("unpack_code: too few bytes for q bits");
    std::vector<std::int8_t> out(q);
    for (std::size_t i = 0; i < q; ++i)
        out[i] = (bytes[i / 8] & (0x80u >> (i % 8))) ? 1 : -1;
    return out;
}

std::vector<std::int8_t> sign_code(std::span<const double> values) {
    std::vector<std::int8_t> out(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) out[i] = values[i] < 0.0 ? -1 : 1;
    return out;
}

std::vector<EncodedItem> encode(const Model& model, const Dataset& dataset) {
    const std::size_t n = dataset.size();
    std::vector<EncodedItem> out(n);
    const bool parallel = parallel_enabled();
    std::exception_ptr err;
#pragma omp parallel for schedule(static) if (parallel)
    for (std::size_t i = 0; i < n; ++i) {
        try {
            std::vector<double> relaxed;
            model.forward_one(dataset.items[i].features, nullptr, &relaxed);
            out[i].id = dataset.items[i].id;
            out[i].code = sign_code(relaxed);
        } catch (...) {
#pragma omp critical
            if (!err) err = std::current_exception();
        }
    }
    if (err) std::rethrow_exception(err);
    return out;
}

std::vector<std::uint16_t> select_bits(std::span<const double> weights, std::size_t k) {
    const std::size_t q = weights.size();
    if (k < 1 || k > q) throw InputError("select_bits: k out of range [1, q]");
    std::vector<std::uint16_t> order(q);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::uint16_t a, std::uint16_t b) {
        return weights[a] * weights[a] > weights[b] * weights[b];
    });
    order.resize(k);
    return order;
}

} // namespace bsdh
