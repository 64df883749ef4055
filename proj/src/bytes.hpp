#pragma once

// Little-endian scalar codecs shared by the binary formats.

#include <bit>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace ntrojan::detail {

class ByteWriter {
public:
    explicit ByteWriter(std::vector<std::uint8_t>& out) : out_(out) {}

    void bytes(std::span<const std::uint8_t> b) {
        for (std::uint8_t v : b) out_.push_back(v);
    }
    void u8(std::uint8_t v) { out_.push_back(v); }
    void u16(std::uint16_t v) { le(v, 2); }
    void u32(std::uint32_t v) { le(v, 4); }
    void u64(std::uint64_t v) { le(v, 8); }
    void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }

private:
    void le(std::uint64_t v, int width) {
        for (int i = 0; i < width; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }

    std::vector<std::uint8_t>& out_;
};

inline std::uint64_t load_le(std::span<const std::uint8_t> b, std::size_t at, int width) {
    std::uint64_t v = 0;
    for (int i = 0; i < width; ++i) v |= std::uint64_t{b[at + i]} << (8 * i);
    return v;
}

inline std::uint16_t load_u16(std::span<const std::uint8_t> b, std::size_t at) {
    return static_cast<std::uint16_t>(load_le(b, at, 2));
}
inline std::uint32_t load_u32(std::span<const std::uint8_t> b, std::size_t at) {
    return static_cast<std::uint32_t>(load_le(b, at, 4));
}
inline std::uint64_t load_u64(std::span<const std::uint8_t> b, std::size_t at) {
    return load_le(b, at, 8);
}
inline float load_f32(std::span<const std::uint8_t> b, std::size_t at) {
    return std::bit_cast<float>(load_u32(b, at));
}

}  // namespace ntrojan::detail
