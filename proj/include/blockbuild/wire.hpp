#pragma once

#include "blockbuild/errors.hpp"

#include <bit>
#include <cstdint>
#include <string>

namespace blockbuild::wire {

inline void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

inline void put_u64(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

inline void put_f32(std::string& out, float v) {
    put_u32(out, std::bit_cast<std::uint32_t>(v));
}

inline void put_f64(std::string& out, double v) {
    put_u64(out, std::bit_cast<std::uint64_t>(v));
}

inline void put_str(std::string& out, const std::string& s) {
    put_u32(out, static_cast<std::uint32_t>(s.size()));
    out += s;
}

// Bounds-checked little-endian reader over an in-memory buffer.
class Reader {
public:
    Reader(std::string bytes, std::string label)
        : bytes_(std::move(bytes)), label_(std::move(label)) {}

    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) {
            v |= static_cast<std::uint32_t>(byte(i)) << (8 * i);
        }
        pos_ += 4;
        return v;
    }

    std::uint64_t u64() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) {
            v |= static_cast<std::uint64_t>(byte(i)) << (8 * i);
        }
        pos_ += 8;
        return v;
    }

    float f32() { return std::bit_cast<float>(u32()); }
    double f64() { return std::bit_cast<double>(u64()); }

    std::string raw(std::size_t n) {
        need(n);
        std::string s = bytes_.substr(pos_, n);
        pos_ += n;
        return s;
    }

    std::string str() { return raw(u32()); }

    bool exhausted() const { return pos_ == bytes_.size(); }
    const std::string& label() const { return label_; }

private:
    unsigned char byte(int i) const {
        return static_cast<unsigned char>(bytes_[pos_ + static_cast<std::size_t>(i)]);
    }
    void need(std::size_t n) {
        if (pos_ + n > bytes_.size()) throw DataError(label_ + " is truncated");
    }

    std::string bytes_;
    std::string label_;
    std::size_t pos_ = 0;
};

} // namespace blockbuild::wire
