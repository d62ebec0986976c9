#include "mvt/serialize.hpp"

#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <stdexcept>

#include "mvt/errors.hpp"

namespace mvt {

void write_f64_block(std::ostream& os, const std::vector<double>& values) {
    std::vector<char> buf(values.size() * 8);
    for (std::size_t i = 0; i < values.size(); ++i) {
        std::uint64_t bits;
        std::memcpy(&bits, &values[i], 8);
        for (std::size_t b = 0; b < 8; ++b)
            buf[i * 8 + b] = static_cast<char>((bits >> (8 * b)) & 0xff);
    }
    os.write(buf.data(), static_cast<std::streamsize>(buf.size()));
}

void read_f64_block(std::istream& is, std::vector<double>& values) {
    std::vector<char> buf(values.size() * 8);
    is.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (static_cast<std::size_t>(is.gcount()) != buf.size())
        throw DataError("stream truncated inside a value block");
    for (std::size_t i = 0; i < values.size(); ++i) {
        std::uint64_t bits = 0;
        for (std::size_t b = 0; b < 8; ++b)
            bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf[i * 8 + b])) << (8 * b);
        std::memcpy(&values[i], &bits, 8);
    }
}

std::string fmt17(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::uint64_t parse_u64_field(const std::string& key, const std::string& text) {
    try {
        std::size_t used = 0;
        std::uint64_t v = std::stoull(text, &used);
        if (used != text.size()) throw std::invalid_argument(text);
        return v;
    } catch (const std::exception&) {
        throw DataError("bad value for " + key + ": " + text);
    }
}

double parse_f64_field(const std::string& key, const std::string& text) {
    char* end = nullptr;
    double v = std::strtod(text.c_str(), &end);
    if (end == nullptr || *end != '\0' || end == text.c_str())
        throw DataError("bad value for " + key + ": " + text);
    return v;
}

}  // namespace mvt
