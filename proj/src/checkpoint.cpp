#include "bsdh/checkpoint.hpp"

#include <cstdio>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

#include "bsdh/error.hpp"
#include "wire.hpp"

namespace bsdh {

namespace {

constexpr char kMagic[8] = {'B', 'S', 'D', 'H', '-', 'M', 'D', 'L'};
constexpr std::uint32_t kVersion = 1;

std::string join(const std::vector<std::string>& parts, char sep) {
    std::string out;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        if (i) out.push_back(sep);
        out += parts[i];
    }
    return out;
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : s) {
        if (ch == sep) {
            out.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(ch);
        }
    }
    out.push_back(cur);
    return out;
}

} // namespace

void save_checkpoint(const Model& model, const std::string& path) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw FormatError("checkpoint: cannot open '" + path + "' for writing");

    std::vector<std::string> in_dims;
    for (std::size_t d : model.input_shape()) in_dims.push_back(std::to_string(d));
    char beta_buf[40];
    std::snprintf(beta_buf, sizeof beta_buf, "%.17g", model.beta());

    std::ostringstream header;
    header << "preset=" << model.preset() << "\n"
           << "input=" << join(in_dims, 'x') << "\n"
           << "q=" << model.code_bits() << "\n"
           << "beta=" << beta_buf << "\n"
           << "iterations=" << model.iterations_trained << "\n"
           << "layers=" << join(model.layer_specs(), ',') << "\n";
    const std::string h = header.str();

    os.write(kMagic, 8);
    wire::put_u32(os, kVersion);
    wire::put_u32(os, static_cast<std::uint32_t>(h.size()));
    os.write(h.data(), static_cast<std::streamsize>(h.size()));
    for (const Tensor* p : model.parameters()) {
        wire::put_u64(os, p->numel());
        for (double v : p->data) wire::put_f64(os, v);
    }
    if (!os) throw FormatError("checkpoint: write failed for '" + path + "'");
}

Model load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw FormatError("checkpoint: cannot open '" + path + "'");

    char magic[8];
    if (!is.read(magic, 8) || std::memcmp(magic, kMagic, 8) != 0)
        throw FormatError("checkpoint: bad magic (not a BSDH-MDL file)");
    const std::uint32_t version = wire::get_u32(is, "checkpoint header");
    if (version != kVersion)
        throw FormatError("checkpoint: unsupported format version " + std::to_string(version));

    const std::uint32_t hlen = wire::get_u32(is, "checkpoint header");
    std::string header(hlen, '\0');
    if (!is.read(header.data(), hlen)) throw FormatError("checkpoint: truncated header");

    std::map<std::string, std::string> kv;
    for (const std::string& line : split(header, '\n')) {
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw FormatError("checkpoint: malformed header line");
        kv[line.substr(0, eq)] = line.substr(eq + 1);
    }
    for (const char* key : {"preset", "input", "q", "beta", "iterations", "layers"})
        if (!kv.count(key)) throw FormatError(std::string("checkpoint: header missing ") + key);

    std::vector<std::size_t> input_shape;
    for (const std::string& d : split(kv["input"], 'x'))
        input_shape.push_back(std::stoull(d));
    const std::size_t q = std::stoull(kv["q"]);

    Model model = Model::from_specs(kv["preset"], input_shape, q, split(kv["layers"], ','), 0);
    model.set_beta(std::stod(kv["beta"]));
    model.iterations_trained = std::stoull(kv["iterations"]);

    for (Tensor* p : model.parameters()) {
        const std::uint64_t n = wire::get_u64(is, "checkpoint tensor length");
        if (n != p->numel())
            throw FormatError("checkpoint: parameter length mismatch (file " + std::to_string(n) +
                              ", expected " + std::to_string(p->numel()) + ")");
        for (std::size_t i = 0; i < n; ++i) p->data[i] = wire::get_f64(is, "checkpoint tensor data");
    }
    if (is.peek() != EOF) throw FormatError("checkpoint: trailing bytes after parameters");
    return model;
}

} // namespace bsdh
