#pragma once

// Little-endian field readers/writers shared by the model and density
// container formats.

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "tpbs/error.hpp"

namespace tpbs::detail {

class LeWriter {
public:
    explicit LeWriter(std::ostream& os) : os_(os) {}

    void raw(const char* bytes, std::size_t n) { os_.write(bytes, static_cast<std::streamsize>(n)); }

    void u32(std::uint32_t v) {
        char b[4];
        for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xffu);
        raw(b, 4);
    }

    void f64(double v) {
        const auto bits = std::bit_cast<std::uint64_t>(v);
        char b[8];
        for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((bits >> (8 * i)) & 0xffu);
        raw(b, 8);
    }

    void f64s(const std::vector<double>& values) {
        for (double v : values) f64(v);
    }

private:
    std::ostream& os_;
};

class LeReader {
public:
    LeReader(std::istream& is, std::string what) : is_(is), what_(std::move(what)) {}

    void raw(char* bytes, std::size_t n) {
        is_.read(bytes, static_cast<std::streamsize>(n));
        if (static_cast<std::size_t>(is_.gcount()) != n)
            fail(ErrorKind::Truncated, what_ + ": file ends before all fields were read");
    }

    std::uint32_t u32() {
        unsigned char b[4];
        raw(reinterpret_cast<char*>(b), 4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
        return v;
    }

    double f64() {
        unsigned char b[8];
        raw(reinterpret_cast<char*>(b), 8);
        std::uint64_t bits = 0;
        for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(b[i]) << (8 * i);
        return std::bit_cast<double>(bits);
    }

    std::vector<double> f64s(std::size_t n) {
        std::vector<double> out(n);
        for (auto& v : out) v = f64();
        return out;
    }

    /// Upper bound on element counts read from headers, so a corrupted count
    /// fails as truncation instead of attempting a huge allocation.
    std::uint32_t count(std::uint32_t limit, const char* field) {
        const std::uint32_t v = u32();
        if (v > limit)
            fail(ErrorKind::Dimension, what_ + ": field '" + field + "' = " + std::to_string(v) +
                                           " exceeds limit " + std::to_string(limit));
        return v;
    }

private:
    std::istream& is_;
    std::string what_;
};

}  // namespace tpbs::detail
