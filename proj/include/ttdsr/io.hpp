#pragma once

// TTD1 tensor files: magic "TTD1", three little-endian u64 dims, then the
// payload as little-endian IEEE-754 doubles in layout order. Matrices are
// stored as rows x cols x 1 tensors.
//
// Also holds the flat `key=value` text format used for sidecars, configs
// and experiment specs, and an 8-bit PGM dump of single bands.

#include "ttdsr/tensor.hpp"

#include <bit>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>

namespace ttdsr {

class FormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

namespace detail {

inline void put_u64_le(std::string& out, std::uint64_t v) {
    for (int b = 0; b < 8; ++b) out.push_back(static_cast<char>((v >> (8 * b)) & 0xffu));
}

inline std::uint64_t get_u64_le(const unsigned char* p) {
    std::uint64_t v = 0;
    for (int b = 7; b >= 0; --b) v = (v << 8) | p[b];
    return v;
}

}  // namespace detail

inline constexpr std::string_view ttd1_magic = "TTD1";

inline std::string encode_ttd1(const Tensor3& t) {
    std::string out;
    out.reserve(4 + 24 + 8 * static_cast<std::size_t>(t.size()));
    out.append(ttd1_magic);
    for (Index n : t.dims()) detail::put_u64_le(out, static_cast<std::uint64_t>(n));
    for (double v : t.data()) detail::put_u64_le(out, std::bit_cast<std::uint64_t>(v));
    return out;
}

inline Tensor3 decode_ttd1(std::string_view bytes) {
    if (bytes.size() < 28 || bytes.substr(0, 4) != ttd1_magic) {
        throw FormatError("TTD1: bad magic or header shorter than 28 bytes");
    }
    const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
    Dims dims{};
    std::uint64_t count = 1;
    for (int m = 0; m < 3; ++m) {
        const std::uint64_t n = detail::get_u64_le(p + 4 + 8 * m);
        if (n == 0 || n > (std::uint64_t{1} << 40)) throw FormatError("TTD1: invalid dimension in header");
        dims[static_cast<std::size_t>(m)] = static_cast<Index>(n);
        count *= n;
        if (count > (std::uint64_t{1} << 40)) throw FormatError("TTD1: element count overflow");
    }
    if (bytes.size() - 28 != count * 8) {
        throw FormatError("TTD1: payload has " + std::to_string(bytes.size() - 28) + " bytes, expected " +
                          std::to_string(count * 8));
    }
    std::vector<double> data(count);
    for (std::uint64_t n = 0; n < count; ++n) data[n] = std::bit_cast<double>(detail::get_u64_le(p + 28 + 8 * n));
    return Tensor3(dims, std::move(data));
}

inline void write_tensor(const std::filesystem::path& path, const Tensor3& t) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
    const std::string bytes = encode_ttd1(t);
    os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!os) throw std::runtime_error("write failed: " + path.string());
}

inline Tensor3 read_tensor(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open " + path.string());
    std::ostringstream ss;
    ss << is.rdbuf();
    try {
        return decode_ttd1(ss.str());
    } catch (const FormatError& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
}

inline Tensor3 matrix_as_tensor(const Matrix& m) {
    return Tensor3({m.rows(), m.cols(), 1}, std::vector<double>(m.data(), m.data() + m.size()));
}

inline void write_matrix(const std::filesystem::path& path, const Matrix& m) {
    write_tensor(path, matrix_as_tensor(m));
}

inline Matrix read_matrix(const std::filesystem::path& path) {
    const Tensor3 t = read_tensor(path);
    if (t.dims()[2] != 1) throw FormatError(path.string() + ": expected a matrix (third dim 1)");
    return t.as_matrix(t.dims()[0], t.dims()[1]);
}

// ---------------------------------------------------------------------------
// key=value text

using KeyValues = std::map<std::string, std::string, std::less<>>;

inline std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

/// Blank lines and lines starting with '#' are ignored; duplicate keys are errors.
inline KeyValues parse_key_values(std::istream& is, const std::string& origin = "<input>") {
    KeyValues kv;
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        const std::string t = trim(line);
        if (t.empty() || t.front() == '#') continue;
        const auto eq = t.find('=');
        if (eq == std::string::npos) {
            throw FormatError(origin + ":" + std::to_string(lineno) + ": expected key=value");
        }
        std::string key = trim(std::string_view(t).substr(0, eq));
        std::string value = trim(std::string_view(t).substr(eq + 1));
        if (key.empty()) throw FormatError(origin + ":" + std::to_string(lineno) + ": empty key");
        if (!kv.emplace(key, value).second) {
            throw FormatError(origin + ":" + std::to_string(lineno) + ": duplicate key '" + key + "'");
        }
    }
    return kv;
}

inline KeyValues read_key_values(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open " + path.string());
    return parse_key_values(is, path.string());
}

inline std::string format_double(double v) {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    if (std::isnan(v)) return "nan";
    std::ostringstream os;
    os << std::setprecision(17) << v;
    return os.str();
}

inline double parse_double(const std::string& key, const std::string& s) {
    if (s == "inf" || s == "+inf") return std::numeric_limits<double>::infinity();
    try {
        std::size_t pos = 0;
        const double v = std::stod(s, &pos);
        if (pos != s.size()) throw std::invalid_argument("trailing characters");
        return v;
    } catch (const std::exception&) {
        throw FormatError("key '" + key + "': not a number: '" + s + "'");
    }
}

inline long long parse_integer(const std::string& key, const std::string& s) {
    try {
        std::size_t pos = 0;
        const long long v = std::stoll(s, &pos);
        if (pos != s.size()) throw std::invalid_argument("trailing characters");
        return v;
    } catch (const std::exception&) {
        throw FormatError("key '" + key + "': not an integer: '" + s + "'");
    }
}

/// "16,16,12" -> {16, 16, 12}
inline Dims parse_dims(const std::string& s) {
    Dims d{};
    std::stringstream ss(s);
    std::string part;
    std::size_t n = 0;
    while (std::getline(ss, part, ',')) {
        if (n == 3) throw FormatError("dims: expected three comma-separated values, got '" + s + "'");
        const long long v = parse_integer("dims", trim(part));
        if (v <= 0) throw FormatError("dims: values must be positive, got '" + s + "'");
        d[n++] = static_cast<Index>(v);
    }
    if (n != 3) throw FormatError("dims: expected three comma-separated values, got '" + s + "'");
    return d;
}

inline std::string format_dims(const Dims& d) {
    return std::to_string(d[0]) + "," + std::to_string(d[1]) + "," + std::to_string(d[2]);
}

/// 8-bit binary PGM of frontal slice `band`, min-max normalized. A constant
/// slice maps to mid gray (128).
inline std::string encode_pgm_slice(const Tensor3& t, Index band) {
    if (band < 0 || band >= t.dims()[2]) {
        throw std::invalid_argument("band " + std::to_string(band) + " out of range [0, " +
                                    std::to_string(t.dims()[2]) + ")");
    }
    const auto slice = t.frontal_slice(band);
    const double lo = slice.minCoeff();
    const double hi = slice.maxCoeff();
    const Index rows = t.dims()[0], cols = t.dims()[1];
    std::string out = "P5\n" + std::to_string(cols) + " " + std::to_string(rows) + "\n255\n";
    out.reserve(out.size() + static_cast<std::size_t>(rows * cols));
    for (Index i = 0; i < rows; ++i) {
        for (Index j = 0; j < cols; ++j) {
            int level = 128;
            if (hi > lo) level = static_cast<int>(std::lround(255.0 * (slice(i, j) - lo) / (hi - lo)));
            out.push_back(static_cast<char>(static_cast<unsigned char>(level)));
        }
    }
    return out;
}

inline void write_pgm_slice(const std::filesystem::path& path, const Tensor3& t, Index band) {
    const std::string bytes = encode_pgm_slice(t, band);
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot write " + path.string());
    os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

}  // namespace ttdsr
