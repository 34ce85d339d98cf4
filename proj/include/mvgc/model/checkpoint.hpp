#pragma once

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "mvgc/data/tu_dataset.hpp"
#include "mvgc/error.hpp"
#include "mvgc/model/params.hpp"

// Binary layout (all integers little-endian, reals IEEE-754 binary64):
//   8 bytes  magic "MVGCCKPT"
//   u32      format version
//   u32      length of the metadata text, then that many bytes (key = value lines)
//   u32      tensor count
//   per tensor: u32 key length, key bytes, u64 rows, u64 cols, rows*cols f64 row-major
// See docs/checkpoint_format.md.

namespace mvgc {

inline constexpr std::uint32_t checkpoint_version = 1;
inline constexpr char checkpoint_magic[8] = {'M', 'V', 'G', 'C', 'C', 'K', 'P', 'T'};

/// A model plus free-form `key = value` metadata (split, dataset, ...).
struct checkpoint {
    model net;
    std::vector<std::pair<std::string, std::string>> metadata;

    const std::string* find(std::string_view key) const {
        for (const auto& [k, v] : metadata)
            if (k == key) return &v;
        return nullptr;
    }
};

namespace detail {

static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);

template <typename T>
void put_le(std::ostream& out, T v) {
    unsigned char bytes[sizeof(T)];
    std::memcpy(bytes, &v, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
    out.write(reinterpret_cast<const char*>(bytes), sizeof(T));
}

template <typename T>
T get_le(std::istream& in, const std::string& what) {
    unsigned char bytes[sizeof(T)];
    if (!in.read(reinterpret_cast<char*>(bytes), sizeof(T))) throw io_error("checkpoint truncated while reading " + what);
    if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
    T v;
    std::memcpy(&v, bytes, sizeof(T));
    return v;
}

inline std::string get_bytes(std::istream& in, std::size_t n, const std::string& what) {
    std::string s(n, '\0');
    if (n > 0 && !in.read(s.data(), static_cast<std::streamsize>(n))) {
        throw io_error("checkpoint truncated while reading " + what);
    }
    return s;
}

inline std::string join_list(const std::vector<std::size_t>& xs) {
    std::string s;
    for (std::size_t i = 0; i < xs.size(); ++i) s += (i ? "," : "") + std::to_string(xs[i]);
    return s;
}

/// Architecture keys first, caller metadata after.
inline std::string metadata_text(const model_config& c, const std::vector<std::pair<std::string, std::string>>& extra) {
    std::ostringstream os;
    os.precision(17);
    os << "model.input_dim = " << c.input_dim << "\n"
       << "model.num_classes = " << c.num_classes << "\n"
       << "model.order = " << c.order << "\n"
       << "model.views = " << join_list(c.views) << "\n"
       << "model.widths = " << join_list(c.widths) << "\n"
       << "model.hidden = " << c.hidden << "\n"
       << "model.dropout = " << c.dropout << "\n"
       << "model.alpha = " << c.alpha << "\n"
       << "model.sigma = " << c.sigma << "\n"
       << "model.squared_kernel = " << (c.squared_kernel ? 1 : 0) << "\n"
       << "model.median_sigma = " << (c.median_sigma ? 1 : 0) << "\n"
       << "model.laplacian_pool = " << to_string(c.laplacian_pool) << "\n"
       << "model.lambda_mode = " << to_string(c.lambda_mode) << "\n"
       << "model.bn_eps = " << c.bn_eps << "\n";
    for (const auto& [k, v] : extra) os << k << " = " << v << "\n";
    return os.str();
}

inline std::size_t to_count(const std::string& key, const std::string& v) {
    try {
        std::size_t pos = 0;
        const auto n = std::stoull(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return static_cast<std::size_t>(n);
    } catch (const std::exception&) {
        throw io_error("checkpoint metadata: bad integer '" + v + "' for " + key);
    }
}

inline real to_real(const std::string& key, const std::string& v) {
    try {
        std::size_t pos = 0;
        const auto x = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return x;
    } catch (const std::exception&) {
        throw io_error("checkpoint metadata: bad number '" + v + "' for " + key);
    }
}

inline std::vector<std::size_t> to_list(const std::string& key, const std::string& v) {
    std::vector<std::size_t> out;
    for (auto f : split_fields(v)) out.push_back(to_count(key, std::string(f)));
    return out;
}

}  // namespace detail

inline void save_checkpoint(const checkpoint& ck, const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw io_error("cannot write checkpoint " + path.string());
    out.write(checkpoint_magic, sizeof checkpoint_magic);
    detail::put_le<std::uint32_t>(out, checkpoint_version);
    const auto meta = detail::metadata_text(ck.net.config, ck.metadata);
    detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(meta.size()));
    out.write(meta.data(), static_cast<std::streamsize>(meta.size()));
    const auto params = parameters(ck.net);
    detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(params.size()));
    for (const auto& p : params) {
        detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(p.key.size()));
        out.write(p.key.data(), static_cast<std::streamsize>(p.key.size()));
        detail::put_le<std::uint64_t>(out, static_cast<std::uint64_t>(p.rows));
        detail::put_le<std::uint64_t>(out, static_cast<std::uint64_t>(p.cols));
        for (Eigen::Index i = 0; i < p.size(); ++i) detail::put_le<double>(out, p.data[i]);
    }
    if (!out) throw io_error("error while writing checkpoint " + path.string());
}

/// Reads a checkpoint; every tensor of the described architecture must be
/// present exactly once with the expected shape.
inline checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw io_error("cannot open checkpoint " + path.string());
    char magic[8];
    if (!in.read(magic, sizeof magic) || std::memcmp(magic, checkpoint_magic, sizeof magic) != 0) {
        throw io_error(path.string() + " is not a checkpoint (bad magic)");
    }
    const auto version = detail::get_le<std::uint32_t>(in, "version");
    if (version != checkpoint_version) {
        throw io_error("unsupported checkpoint version " + std::to_string(version) + " in " + path.string());
    }
    const auto meta_len = detail::get_le<std::uint32_t>(in, "metadata length");
    const auto meta = detail::get_bytes(in, meta_len, "metadata");

    checkpoint ck;
    std::map<std::string, std::string> model_keys;
    for (const auto& line : detail::split_lines(meta)) {
        const auto eq = line.text.find('=');
        if (eq == std::string_view::npos) throw io_error("checkpoint metadata line " + std::to_string(line.number) + " has no '='");
        std::string key(detail::trim(line.text.substr(0, eq)));
        std::string value(detail::trim(line.text.substr(eq + 1)));
        if (key.starts_with("model.")) {
            model_keys[key.substr(6)] = value;
        } else {
            ck.metadata.emplace_back(std::move(key), std::move(value));
        }
    }
    auto need = [&](const std::string& k) -> const std::string& {
        auto it = model_keys.find(k);
        if (it == model_keys.end()) throw io_error("checkpoint metadata lacks model." + k);
        return it->second;
    };
    model_config c;
    c.input_dim = detail::to_count("input_dim", need("input_dim"));
    c.num_classes = detail::to_count("num_classes", need("num_classes"));
    c.order = detail::to_count("order", need("order"));
    c.views = detail::to_list("views", need("views"));
    c.widths = detail::to_list("widths", need("widths"));
    c.hidden = detail::to_count("hidden", need("hidden"));
    c.dropout = detail::to_real("dropout", need("dropout"));
    c.alpha = detail::to_real("alpha", need("alpha"));
    c.sigma = detail::to_real("sigma", need("sigma"));
    c.squared_kernel = detail::to_count("squared_kernel", need("squared_kernel")) != 0;
    c.median_sigma = detail::to_count("median_sigma", need("median_sigma")) != 0;
    c.bn_eps = detail::to_real("bn_eps", need("bn_eps"));
    try {
        c.laplacian_pool = parse_laplacian_pooling(need("laplacian_pool"));
        c.lambda_mode = parse_lambda_estimate(need("lambda_mode"));
        rng unused(0);
        ck.net = init_model(c, unused);
    } catch (const config_error& e) {
        throw io_error(std::string("checkpoint describes an invalid model: ") + e.what());
    }

    auto params = parameters(ck.net);
    std::map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < params.size(); ++i) index[params[i].key] = i;
    std::vector<bool> seen(params.size(), false);
    const auto count = detail::get_le<std::uint32_t>(in, "tensor count");
    for (std::uint32_t t = 0; t < count; ++t) {
        const auto key_len = detail::get_le<std::uint32_t>(in, "key length");
        const auto key = detail::get_bytes(in, key_len, "tensor key");
        const auto rows = detail::get_le<std::uint64_t>(in, key + " rows");
        const auto cols = detail::get_le<std::uint64_t>(in, key + " cols");
        auto it = index.find(key);
        if (it == index.end()) throw io_error("checkpoint has unexpected tensor " + key);
        auto& p = params[it->second];
        if (seen[it->second]) throw io_error("checkpoint repeats tensor " + key);
        if (rows != static_cast<std::uint64_t>(p.rows) || cols != static_cast<std::uint64_t>(p.cols)) {
            throw io_error("checkpoint tensor " + key + " is " + std::to_string(rows) + "x" + std::to_string(cols) +
                           ", architecture expects " + std::to_string(p.rows) + "x" + std::to_string(p.cols));
        }
        for (Eigen::Index i = 0; i < p.size(); ++i) p.data[i] = detail::get_le<double>(in, key + " data");
        seen[it->second] = true;
    }
    for (std::size_t i = 0; i < params.size(); ++i)
        if (!seen[i]) throw io_error("checkpoint lacks tensor " + params[i].key);
    return ck;
}

}  // namespace mvgc
