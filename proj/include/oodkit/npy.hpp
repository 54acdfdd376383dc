#pragma once

// Minimal NPY v1.0 container: little-endian '<f4' / '<f8' / '<i8',
// C-order, 1-D or 2-D shapes. Enough for feature, logit, label and
// score files; not a general numpy reader.

#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace oodkit::npy {

struct Shape {
    std::size_t rows = 0;
    std::size_t cols = 0;  // 0 == 1-D array
    bool is_1d() const { return cols == 0; }
    std::size_t count() const { return is_1d() ? rows : rows * cols; }
};

namespace detail {

inline const char kMagic[6] = {'\x93', 'N', 'U', 'M', 'P', 'Y'};

template <typename T>
const char* dtype_descr();
template <>
inline const char* dtype_descr<float>() { return "<f4"; }
template <>
inline const char* dtype_descr<double>() { return "<f8"; }
template <>
inline const char* dtype_descr<std::int64_t>() { return "<i8"; }

inline std::string build_header(const char* descr, const Shape& shape) {
    std::ostringstream os;
    os << "{'descr': '" << descr << "', 'fortran_order': False, 'shape': (";
    if (shape.is_1d())
        os << shape.rows << ",";
    else
        os << shape.rows << ", " << shape.cols;
    os << "), }";
    std::string dict = os.str();
    // Pad so that magic(6) + version(2) + len(2) + header is a multiple of 64.
    std::size_t total = 10 + dict.size() + 1;
    std::size_t padded = (total + 63) / 64 * 64;
    dict.append(padded - 10 - dict.size() - 1, ' ');
    dict.push_back('\n');
    return dict;
}

// Extracts the value of a quoted or bare key from the header dict text.
inline std::string header_field(const std::string& header, const std::string& key,
                                const std::string& path) {
    auto pos = header.find("'" + key + "'");
    if (pos == std::string::npos)
        throw std::runtime_error(path + ": malformed NPY header, missing key '" + key + "'");
    pos = header.find(':', pos);
    if (pos == std::string::npos)
        throw std::runtime_error(path + ": malformed NPY header");
    ++pos;
    while (pos < header.size() && header[pos] == ' ') ++pos;
    std::size_t end = pos;
    if (header[pos] == '\'') {
        end = header.find('\'', pos + 1);
        if (end == std::string::npos)
            throw std::runtime_error(path + ": malformed NPY header");
        return header.substr(pos + 1, end - pos - 1);
    }
    if (header[pos] == '(') {
        end = header.find(')', pos);
        if (end == std::string::npos)
            throw std::runtime_error(path + ": malformed NPY header");
        return header.substr(pos, end - pos + 1);
    }
    while (end < header.size() && header[end] != ',' && header[end] != '}') ++end;
    return header.substr(pos, end - pos);
}

inline Shape parse_shape(const std::string& tuple, const std::string& path) {
    // tuple looks like "(n,)" or "(n, d)"
    std::vector<std::size_t> dims;
    std::size_t i = 1;
    while (i < tuple.size()) {
        while (i < tuple.size() && (tuple[i] == ' ' || tuple[i] == ',')) ++i;
        if (i >= tuple.size() || tuple[i] == ')') break;
        std::size_t value = 0;
        if (!std::isdigit(static_cast<unsigned char>(tuple[i])))
            throw std::runtime_error(path + ": malformed shape tuple " + tuple);
        while (i < tuple.size() && std::isdigit(static_cast<unsigned char>(tuple[i])))
            value = value * 10 + static_cast<std::size_t>(tuple[i++] - '0');
        dims.push_back(value);
    }
    if (dims.empty() || dims.size() > 2)
        throw std::runtime_error(path + ": unsupported NPY rank (want 1-D or 2-D), got " + tuple);
    Shape s;
    s.rows = dims[0];
    s.cols = dims.size() == 2 ? dims[1] : 0;
    return s;
}

}  // namespace detail

template <typename T>
void save(const std::string& path, const std::vector<T>& data, const Shape& shape) {
    if (data.size() != shape.count())
        throw std::invalid_argument(path + ": data size does not match shape");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error(path + ": cannot open for writing");
    std::string header = detail::build_header(detail::dtype_descr<T>(), shape);
    out.write(detail::kMagic, 6);
    const char version[2] = {1, 0};
    out.write(version, 2);
    const std::uint16_t hlen = static_cast<std::uint16_t>(header.size());
    const char lenbytes[2] = {static_cast<char>(hlen & 0xff),
                              static_cast<char>((hlen >> 8) & 0xff)};
    out.write(lenbytes, 2);
    out.write(header.data(), static_cast<std::streamsize>(header.size()));
    out.write(reinterpret_cast<const char*>(data.data()),
              static_cast<std::streamsize>(data.size() * sizeof(T)));
    if (!out) throw std::runtime_error(path + ": write failed");
}

template <typename T>
Shape load(const std::string& path, std::vector<T>& data) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error(path + ": cannot open for reading");
    char magic[6];
    in.read(magic, 6);
    if (!in || std::memcmp(magic, detail::kMagic, 6) != 0)
        throw std::runtime_error(path + ": not an NPY file (bad magic)");
    char version[2];
    in.read(version, 2);
    if (!in || version[0] != 1 || version[1] != 0)
        throw std::runtime_error(path + ": unsupported NPY version");
    char lenbytes[2];
    in.read(lenbytes, 2);
    if (!in) throw std::runtime_error(path + ": truncated NPY header");
    const std::size_t hlen = static_cast<std::uint8_t>(lenbytes[0]) |
                             (static_cast<std::size_t>(static_cast<std::uint8_t>(lenbytes[1])) << 8);
    std::string header(hlen, '\0');
    in.read(header.data(), static_cast<std::streamsize>(hlen));
    if (!in) throw std::runtime_error(path + ": truncated NPY header");

    const std::string descr = detail::header_field(header, "descr", path);
    if (descr != detail::dtype_descr<T>())
        throw std::runtime_error(path + ": dtype mismatch, file has '" + descr + "', expected '" +
                                 detail::dtype_descr<T>() + "'");
    const std::string order = detail::header_field(header, "fortran_order", path);
    if (order.substr(0, 5) != "False")
        throw std::runtime_error(path + ": fortran_order=True is not supported");
    const Shape shape = detail::parse_shape(detail::header_field(header, "shape", path), path);

    data.resize(shape.count());
    in.read(reinterpret_cast<char*>(data.data()),
            static_cast<std::streamsize>(data.size() * sizeof(T)));
    if (!in) throw std::runtime_error(path + ": truncated NPY payload");
    return shape;
}

}  // namespace oodkit::npy
