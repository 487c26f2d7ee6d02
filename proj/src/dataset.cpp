#include "bsdh/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "bsdh/error.hpp"
#include "bsdh/rng.hpp"

namespace bsdh {

void Dataset::rebuild_index() {
    label_index.clear();
    tag_index.clear();
    for (std::size_t i = 0; i < items.size(); ++i) {
        if (multilabel) {
            for (std::int32_t t : items[i].tags) tag_index[t].push_back(i);
        } else {
            label_index[items[i].label].push_back(i);
        }
    }
}

namespace {

std::uint32_t read_be32(std::istream& is, const char* what) {
    unsigned char b[4];
    if (!is.read(reinterpret_cast<char*>(b), 4))
        throw FormatError(std::string("idx: truncated file while reading ") + what);
    return (std::uint32_t(b[0]) << 24) | (std::uint32_t(b[1]) << 16) |
           (std::uint32_t(b[2]) << 8) | std::uint32_t(b[3]);
}

} // namespace

Dataset load_idx(const std::string& images_path, const std::string& labels_path) {
    std::ifstream imgs(images_path, std::ios::binary);
    if (!imgs) throw FormatError("idx: cannot open '" + images_path + "'");
    std::ifstream labs(labels_path, std::ios::binary);
    if (!labs) throw FormatError("idx: cannot open '" + labels_path + "'");

    if (read_be32(imgs, "image magic") != 0x00000803u)
        throw FormatError("idx: '" + images_path + "' is not an unsigned-byte image file");
    const std::uint32_t n = read_be32(imgs, "image count");
    const std::uint32_t rows = read_be32(imgs, "rows");
    const std::uint32_t cols = read_be32(imgs, "cols");

    if (read_be32(labs, "label magic") != 0x00000801u)
        throw FormatError("idx: '" + labels_path + "' is not an unsigned-byte label file");
    const std::uint32_t nl = read_be32(labs, "label count");
    if (nl != n)
        throw FormatError("idx: image/label count mismatch (" + std::to_string(n) + " vs " +
                          std::to_string(nl) + ")");

    Dataset ds;
    ds.feature_shape = {1, rows, cols};
    ds.items.reserve(n);
    std::vector<unsigned char> pix(static_cast<std::size_t>(rows) * cols);
    for (std::uint32_t i = 0; i < n; ++i) {
        if (!imgs.read(reinterpret_cast<char*>(pix.data()), static_cast<std::streamsize>(pix.size())))
            throw FormatError("idx: truncated image data at item " + std::to_string(i));
        char lab;
        if (!labs.read(&lab, 1))
            throw FormatError("idx: truncated label data at item " + std::to_string(i));
        DatasetItem item;
        item.features = Tensor({1, rows, cols});
        for (std::size_t p = 0; p < pix.size(); ++p)
            item.features[p] = static_cast<double>(pix[p]) / 255.0;
        item.label = static_cast<unsigned char>(lab);
        item.id = i;
        ds.items.push_back(std::move(item));
    }
    ds.rebuild_index();
    return ds;
}

Dataset synthetic_clusters(std::size_t num_classes, std::size_t per_class, std::size_t dim,
                           double sigma, std::uint64_t seed) {
    if (sigma <= 0.0) throw InputError("synthetic_clusters: sigma must be > 0");
    if (num_classes == 0 || per_class == 0 || dim == 0)
        throw InputError("synthetic_clusters: counts must be >= 1");

    auto rng = make_rng(seed, 0x5c);
    std::normal_distribution<double> gauss(0.0, 1.0);

    auto unit_vector = [&]() {
        std::vector<double> v(dim);
        double norm = 0.0;
        do {
            norm = 0.0;
            for (double& x : v) {
                x = gauss(rng);
                norm += x * x;
            }
        } while (norm == 0.0);
        norm = std::sqrt(norm);
        for (double& x : v) x /= norm;
        return v;
    };

    const double min_sep = 4.0 * sigma;
    std::vector<std::vector<double>> centers;
    std::size_t attempts = 0;
    const std::size_t max_attempts = 10000 * num_classes;
    while (centers.size() < num_classes) {
        if (++attempts > max_attempts)
            throw InputError("synthetic_clusters: could not place centers >= 4*sigma apart; "
                             "reduce sigma or class count");
        auto c = unit_vector();
        bool ok = true;
        for (const auto& other : centers) {
            double d2 = 0.0;
            for (std::size_t i = 0; i < dim; ++i) {
                const double d = c[i] - other[i];
                d2 += d * d;
            }
            if (d2 < min_sep * min_sep) { ok = false; break; }
        }
        if (ok) centers.push_back(std::move(c));
    }

    Dataset ds;
    ds.feature_shape = {dim};
    ds.items.reserve(num_classes * per_class);
    std::uint64_t next_id = 0;
    for (std::size_t k = 0; k < num_classes; ++k) {
        for (std::size_t p = 0; p < per_class; ++p) {
            DatasetItem item;
            item.features = Tensor({dim});
            for (std::size_t i = 0; i < dim; ++i)
                item.features[i] = centers[k][i] + sigma * gauss(rng);
            item.label = static_cast<std::int64_t>(k);
            item.id = next_id++;
            ds.items.push_back(std::move(item));
        }
    }
    ds.rebuild_index();
    return ds;
}

Dataset load_vector_csv(const std::string& path, bool header) {
    std::ifstream is(path);
    if (!is) throw FormatError("csv: cannot open '" + path + "'");

    Dataset ds;
    std::vector<std::string> label_fields;
    bool any_multi = false;
    std::string line;
    std::size_t lineno = 0;
    std::size_t dim = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (lineno == 1 && header) continue;
        if (line.empty()) continue;
        std::vector<std::string> fields;
        std::string cur;
        for (char ch : line) {
            if (ch == ',') { fields.push_back(cur); cur.clear(); }
            else if (ch != '\r') cur.push_back(ch);
        }
        fields.push_back(cur);
        if (fields.size() < 3)
            throw FormatError("csv: line " + std::to_string(lineno) +
                              ": expected id,label,v1,...");
        auto parse_ll = [&](const std::string& s, const char* what) -> long long {
            char* end = nullptr;
            const long long v = std::strtoll(s.c_str(), &end, 10);
            if (end == s.c_str() || *end != '\0')
                throw FormatError("csv: line " + std::to_string(lineno) + ": bad " + what +
                                  " '" + s + "'");
            return v;
        };
        DatasetItem item;
        item.id = static_cast<std::uint64_t>(parse_ll(fields[0], "id"));
        // A label field may carry several tags separated by ';' (multi-label
        // datasets); resolved after the whole file is read.
        if (fields[1].find(';') != std::string::npos) any_multi = true;
        label_fields.push_back(fields[1]);
        const std::size_t d = fields.size() - 2;
        if (dim == 0) dim = d;
        else if (d != dim)
            throw FormatError("csv: line " + std::to_string(lineno) + ": ragged row (" +
                              std::to_string(d) + " values, expected " + std::to_string(dim) + ")");
        item.features = Tensor({d});
        for (std::size_t i = 0; i < d; ++i) {
            char* end = nullptr;
            item.features[i] = std::strtod(fields[2 + i].c_str(), &end);
            if (end == fields[2 + i].c_str() || *end != '\0' ||
                !std::isfinite(item.features[i]))
                throw FormatError("csv: line " + std::to_string(lineno) + ": non-numeric field '" +
                                  fields[2 + i] + "'");
        }
        ds.items.push_back(std::move(item));
    }
    if (ds.items.empty()) throw FormatError("csv: '" + path + "' contains no data rows");

    auto parse_tag = [](const std::string& s, std::size_t row) -> std::int32_t {
        char* end = nullptr;
        const long v = std::strtol(s.c_str(), &end, 10);
        if (end == s.c_str() || *end != '\0')
            throw FormatError("csv: row " + std::to_string(row) + ": bad label '" + s + "'");
        return static_cast<std::int32_t>(v);
    };
    ds.multilabel = any_multi;
    for (std::size_t i = 0; i < ds.items.size(); ++i) {
        if (any_multi) {
            std::vector<std::int32_t> tags;
            std::string cur;
            for (char ch : label_fields[i] + ";") {
                if (ch == ';') {
                    if (!cur.empty()) tags.push_back(parse_tag(cur, i));
                    cur.clear();
                } else cur.push_back(ch);
            }
            if (tags.empty())
                throw FormatError("csv: row " + std::to_string(i) + ": empty tag set");
            std::sort(tags.begin(), tags.end());
            tags.erase(std::unique(tags.begin(), tags.end()), tags.end());
            ds.items[i].tags = std::move(tags);
        } else {
            ds.items[i].label = parse_tag(label_fields[i], i);
        }
    }
    ds.feature_shape = {dim};
    ds.rebuild_index();
    return ds;
}

} // namespace bsdh
