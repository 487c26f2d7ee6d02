#include "bsdh/search.hpp"

#include <algorithm>
#include <bit>
#include <fstream>
#include <numeric>
#include <unordered_set>

#include "bsdh/error.hpp"
#include "bsdh/parallel.hpp"
#include "wire.hpp"

namespace bsdh {

CodeDatabase build_database(const std::vector<EncodedItem>& items,
                            std::span<const double> weights) {
    const auto order = select_bits(weights, weights.size());
    return build_database_with_order(items, weights, order);
}

CodeDatabase build_database_with_order(const std::vector<EncodedItem>& items,
                                       std::span<const double> weights,
                                       std::span<const std::uint16_t> order) {
    if (order.empty()) throw InputError("build_database: empty bit order");
    for (std::uint16_t b : order)
        if (b >= weights.size()) throw InputError("build_database: bit index out of range");

    CodeDatabase db;
    db.q = static_cast<std::uint32_t>(order.size());
    db.bit_order.assign(order.begin(), order.end());
    db.weights.reserve(order.size());
    for (std::uint16_t b : order) db.weights.push_back(static_cast<float>(weights[b]));
    db.ids.reserve(items.size());
    db.codes.reserve(items.size() * db.stride());
    for (const EncodedItem& item : items) {
        if (item.code.size() != weights.size())
            throw InputError("build_database: code length does not match weights");
        db.ids.push_back(item.id);
        const auto packed = pack_in_order(item.code, order);
        db.codes.insert(db.codes.end(), packed.begin(), packed.end());
    }
    return db;
}

std::vector<std::uint8_t> pack_in_order(std::span<const std::int8_t> code,
                                        std::span<const std::uint16_t> order) {
    std::vector<std::uint8_t> out((order.size() + 7) / 8, 0);
    for (std::size_t i = 0; i < order.size(); ++i)
        if (code[order[i]] > 0) out[i / 8] |= static_cast<std::uint8_t>(0x80u >> (i % 8));
    return out;
}

ChunkLuts build_lut(std::span<const float> weights_in_order, std::size_t k_bits) {
    if (k_bits < 1 || k_bits > weights_in_order.size())
        throw InputError("build_lut: k_bits out of range");
    const std::size_t nchunks = (k_bits + 7) / 8;
    ChunkLuts luts(nchunks);
    for (std::size_t c = 0; c < nchunks; ++c) {
        const std::size_t lo = c * 8;
        const std::size_t len = std::min<std::size_t>(8, k_bits - lo);
        for (unsigned x = 0; x < 256; ++x) {
            double acc = 0.0;
            for (std::size_t i = 0; i < len; ++i) {
                const double w = weights_in_order[lo + i];
                const double w2 = w * w;
                acc += (x & (0x80u >> i)) ? w2 : -w2;
            }
            luts[c][x] = acc;
        }
    }
    return luts;
}

namespace {

double lut_affinity(const ChunkLuts& luts, const std::uint8_t* a, const std::uint8_t* b) {
    double acc = 0.0;
    for (std::size_t c = 0; c < luts.size(); ++c) acc += luts[c][a[c] ^ b[c]];
    return acc;
}

// Direct evaluation of -sum w_i^2 h_i h'_i over the first k_bits, chunk by
// chunk so the rounding matches the lookup-table route exactly.
double bruteforce_affinity(const CodeDatabase& db, const std::uint8_t* row,
                           std::span<const std::uint8_t> query, std::size_t k_bits) {
    double acc = 0.0;
    for (std::size_t lo = 0; lo < k_bits; lo += 8) {
        const std::size_t len = std::min<std::size_t>(8, k_bits - lo);
        double part = 0.0;
        for (std::size_t i = 0; i < len; ++i) {
            const std::size_t bit = lo + i;
            const std::uint8_t mask = static_cast<std::uint8_t>(0x80u >> (bit % 8));
            const int hq = (query[bit / 8] & mask) ? 1 : -1;
            const int hd = (row[bit / 8] & mask) ? 1 : -1;
            const double w = db.weights[bit];
            part += hq == hd ? -(w * w) : (w * w);
        }
        acc += part;
    }
    return acc;
}

void check_query(const CodeDatabase& db, std::span<const std::uint8_t> query,
                 std::size_t k_bits) {
    if (query.size() != db.stride())
        throw InputError("query: packed length does not match database stride");
    if (k_bits < 1 || k_bits > db.q) throw InputError("query: k_bits out of range [1, q]");
}

RankingList rank(const CodeDatabase& db, const std::vector<double>& affinities,
                 std::size_t top_k) {
    std::vector<std::size_t> idx(db.size());
    std::iota(idx.begin(), idx.end(), 0);
    const std::size_t k = std::min(top_k, db.size());
    auto better = [&](std::size_t a, std::size_t b) {
        if (affinities[a] != affinities[b]) return affinities[a] < affinities[b];
        return db.ids[a] < db.ids[b];
    };
    std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k), idx.end(), better);
    RankingList out;
    out.reserve(k);
    for (std::size_t r = 0; r < k; ++r) out.push_back({db.ids[idx[r]], affinities[idx[r]]});
    return out;
}

} // namespace

void scan_lut_serial(const CodeDatabase& db, const ChunkLuts& luts,
                     std::span<const std::uint8_t> query, std::vector<double>& affinities) {
    const std::size_t n = db.size(), stride = db.stride();
    affinities.resize(n);
    for (std::size_t r = 0; r < n; ++r)
        affinities[r] = lut_affinity(luts, db.codes.data() + r * stride, query.data());
}

void scan_lut_omp(const CodeDatabase& db, const ChunkLuts& luts,
                  std::span<const std::uint8_t> query, std::vector<double>& affinities) {
    const std::size_t n = db.size(), stride = db.stride();
    affinities.resize(n);
    const std::uint8_t* qp = query.data();
#pragma omp parallel for schedule(static)
    for (std::size_t r = 0; r < n; ++r)
        affinities[r] = lut_affinity(luts, db.codes.data() + r * stride, qp);
}

void scan_bruteforce_serial(const CodeDatabase& db, std::span<const std::uint8_t> query,
                            std::size_t k_bits, std::vector<double>& affinities) {
    const std::size_t n = db.size(), stride = db.stride();
    affinities.resize(n);
    for (std::size_t r = 0; r < n; ++r)
        affinities[r] = bruteforce_affinity(db, db.codes.data() + r * stride, query, k_bits);
}

void scan_bruteforce_omp(const CodeDatabase& db, std::span<const std::uint8_t> query,
                         std::size_t k_bits, std::vector<double>& affinities) {
    const std::size_t n = db.size(), stride = db.stride();
    affinities.resize(n);
#pragma omp parallel for schedule(static)
    for (std::size_t r = 0; r < n; ++r)
        affinities[r] = bruteforce_affinity(db, db.codes.data() + r * stride, query, k_bits);
}

RankingList query_lut(const CodeDatabase& db, const ChunkLuts& luts,
                      std::span<const std::uint8_t> query, std::size_t k_bits,
                      std::size_t top_k) {
    check_query(db, query, k_bits);
    if (luts.size() != (k_bits + 7) / 8)
        throw InputError("query_lut: tables were built for a different k_bits");
    std::vector<double> affinities;
    if (parallel_enabled()) scan_lut_omp(db, luts, query, affinities);
    else scan_lut_serial(db, luts, query, affinities);
    return rank(db, affinities, top_k);
}

RankingList query_lut(const CodeDatabase& db, std::span<const std::uint8_t> query,
                      std::size_t k_bits, std::size_t top_k) {
    check_query(db, query, k_bits);
    const ChunkLuts luts = build_lut(db.weights, k_bits);
    return query_lut(db, luts, query, k_bits, top_k);
}

RankingList query_bruteforce(const CodeDatabase& db, std::span<const std::uint8_t> query,
                             std::size_t k_bits, std::size_t top_k) {
    check_query(db, query, k_bits);
    std::vector<double> affinities;
    if (parallel_enabled()) scan_bruteforce_omp(db, query, k_bits, affinities);
    else scan_bruteforce_serial(db, query, k_bits, affinities);
    return rank(db, affinities, top_k);
}

unsigned hamming_prefix(const CodeDatabase& db, std::size_t row,
                        std::span<const std::uint8_t> query, std::size_t k_bits) {
    check_query(db, query, k_bits);
    const std::uint8_t* a = db.codes.data() + row * db.stride();
    const std::uint8_t* b = query.data();
    unsigned acc = 0;
    const std::size_t full = k_bits / 8;
    for (std::size_t i = 0; i < full; ++i)
        acc += static_cast<unsigned>(std::popcount(static_cast<unsigned>(a[i] ^ b[i])));
    const std::size_t rem = k_bits % 8;
    if (rem) {
        const std::uint8_t mask = static_cast<std::uint8_t>(0xFFu << (8 - rem));
        acc += static_cast<unsigned>(std::popcount(static_cast<unsigned>((a[full] ^ b[full]) & mask)));
    }
    return acc;
}

CodeDatabase truncate_database(const CodeDatabase& db, std::size_t k_bits) {
    if (k_bits < 1 || k_bits > db.q) throw InputError("truncate: k_bits out of range [1, q]");
    CodeDatabase out;
    out.q = static_cast<std::uint32_t>(k_bits);
    out.weights.assign(db.weights.begin(), db.weights.begin() + static_cast<std::ptrdiff_t>(k_bits));
    out.bit_order.resize(k_bits);
    std::iota(out.bit_order.begin(), out.bit_order.end(), 0);
    out.ids = db.ids;
    const std::size_t old_stride = db.stride();
    const std::size_t new_stride = out.stride();
    const std::size_t rem = k_bits % 8;
    const std::uint8_t mask = rem ? static_cast<std::uint8_t>(0xFFu << (8 - rem)) : 0xFFu;
    out.codes.resize(db.size() * new_stride);
    for (std::size_t r = 0; r < db.size(); ++r) {
        const std::uint8_t* src = db.codes.data() + r * old_stride;
        std::uint8_t* dst = out.codes.data() + r * new_stride;
        for (std::size_t i = 0; i < new_stride; ++i) dst[i] = src[i];
        dst[new_stride - 1] &= mask;
    }
    return out;
}

namespace {
constexpr char kDbMagic[8] = {'B', 'S', 'D', 'H', '-', 'C', 'D', 'B'};
constexpr std::uint32_t kDbVersion = 1;
} // namespace

void save_database(const CodeDatabase& db, const std::string& path) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw FormatError("db: cannot open '" + path + "' for writing");
    os.write(kDbMagic, 8);
    wire::put_u32(os, kDbVersion);
    wire::put_u32(os, db.q);
    wire::put_u64(os, db.size());
    for (float w : db.weights) wire::put_f32(os, w);
    for (std::uint16_t b : db.bit_order) wire::put_u16(os, b);
    const std::size_t stride = db.stride();
    for (std::size_t r = 0; r < db.size(); ++r) {
        wire::put_u64(os, db.ids[r]);
        os.write(reinterpret_cast<const char*>(db.codes.data() + r * stride),
                 static_cast<std::streamsize>(stride));
    }
    if (!os) throw FormatError("db: write failed for '" + path + "'");
}

CodeDatabase load_database(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw FormatError("db: cannot open '" + path + "'");
    char magic[8];
    if (!is.read(magic, 8) || std::memcmp(magic, kDbMagic, 8) != 0)
        throw FormatError("db: bad magic (not a BSDH-CDB file)");
    const std::uint32_t version = wire::get_u32(is, "db version");
    if (version != kDbVersion)
        throw FormatError("db: unsupported format version " + std::to_string(version));
    CodeDatabase db;
    db.q = wire::get_u32(is, "db q");
    if (db.q == 0) throw FormatError("db: q must be >= 1");
    const std::uint64_t n = wire::get_u64(is, "db record count");
    db.weights.resize(db.q);
    for (std::uint32_t i = 0; i < db.q; ++i) db.weights[i] = wire::get_f32(is, "db weights");
    db.bit_order.resize(db.q);
    std::unordered_set<std::uint16_t> seen;
    for (std::uint32_t i = 0; i < db.q; ++i) {
        db.bit_order[i] = wire::get_u16(is, "db bit order");
        if (!seen.insert(db.bit_order[i]).second)
            throw FormatError("db: bit_order contains duplicate indices");
    }
    const std::size_t stride = db.stride();
    db.ids.resize(n);
    db.codes.resize(n * stride);
    for (std::uint64_t r = 0; r < n; ++r) {
        db.ids[r] = wire::get_u64(is, "db record id");
        if (!is.read(reinterpret_cast<char*>(db.codes.data() + r * stride),
                     static_cast<std::streamsize>(stride)))
            throw FormatError("db: truncated code record " + std::to_string(r));
    }
    if (is.peek() != EOF) throw FormatError("db: trailing bytes after records");
    return db;
}

} // namespace bsdh
