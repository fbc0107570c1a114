#pragma once

// Run-length encoding of binary masks and base64 packing of float arrays
// used by the dataset and checkpoint formats.

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "annoconsist/core.hpp"

namespace annoconsist {

class ParseError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Alternating run lengths over the row-major bits, starting with a run of
/// zeros (which may be 0 long).
[[nodiscard]] inline std::vector<std::uint32_t> rle_encode(const PixelMask& m) {
    std::vector<std::uint32_t> counts;
    std::uint8_t current = 0;
    std::uint32_t run = 0;
    for (const auto b : m.bits()) {
        if (b != current) {
            counts.push_back(run);
            run = 0;
            current = b;
        }
        ++run;
    }
    counts.push_back(run);
    return counts;
}

[[nodiscard]] inline PixelMask rle_decode(std::span<const std::uint32_t> counts, int width, int height) {
    PixelMask m(width, height);
    auto bits = m.bits();
    std::size_t pos = 0;
    std::uint8_t value = 0;
    for (const auto c : counts) {
        if (pos + c > bits.size()) throw ParseError("rle_decode: runs exceed mask size");
        std::memset(bits.data() + pos, value, c);
        pos += c;
        value ^= 1;
    }
    if (pos != bits.size()) throw ParseError("rle_decode: runs do not cover the mask");
    return m;
}

namespace detail {

inline constexpr std::string_view kB64 = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

inline std::string base64_encode(std::span<const std::uint8_t> data) {
    std::string out;
    out.reserve((data.size() + 2) / 3 * 4);
    std::size_t i = 0;
    for (; i + 2 < data.size(); i += 3) {
        const std::uint32_t v = (std::uint32_t{data[i]} << 16) | (std::uint32_t{data[i + 1]} << 8) | data[i + 2];
        out += kB64[(v >> 18) & 63];
        out += kB64[(v >> 12) & 63];
        out += kB64[(v >> 6) & 63];
        out += kB64[v & 63];
    }
    const std::size_t rest = data.size() - i;
    if (rest == 1) {
        const std::uint32_t v = std::uint32_t{data[i]} << 16;
        out += kB64[(v >> 18) & 63];
        out += kB64[(v >> 12) & 63];
        out += "==";
    } else if (rest == 2) {
        const std::uint32_t v = (std::uint32_t{data[i]} << 16) | (std::uint32_t{data[i + 1]} << 8);
        out += kB64[(v >> 18) & 63];
        out += kB64[(v >> 12) & 63];
        out += kB64[(v >> 6) & 63];
        out += '=';
    }
    return out;
}

inline std::vector<std::uint8_t> base64_decode(std::string_view text) {
    std::array<int, 256> lut{};
    lut.fill(-1);
    for (std::size_t i = 0; i < kB64.size(); ++i) lut[static_cast<unsigned char>(kB64[i])] = static_cast<int>(i);
    if (text.size() % 4 != 0) throw ParseError("base64: length is not a multiple of 4");
    std::vector<std::uint8_t> out;
    out.reserve(text.size() / 4 * 3);
    for (std::size_t i = 0; i < text.size(); i += 4) {
        std::uint32_t v = 0;
        int pad = 0;
        for (std::size_t j = 0; j < 4; ++j) {
            const char c = text[i + j];
            if (c == '=') {
                if (i + 4 != text.size() || j < 2) throw ParseError("base64: misplaced padding");
                ++pad;
                v <<= 6;
                continue;
            }
            if (pad > 0) throw ParseError("base64: data after padding");
            const int d = lut[static_cast<unsigned char>(c)];
            if (d < 0) throw ParseError("base64: invalid character");
            v = (v << 6) | static_cast<std::uint32_t>(d);
        }
        out.push_back(static_cast<std::uint8_t>(v >> 16));
        if (pad < 2) out.push_back(static_cast<std::uint8_t>((v >> 8) & 0xFF));
        if (pad < 1) out.push_back(static_cast<std::uint8_t>(v & 0xFF));
    }
    return out;
}

}  // namespace detail

static_assert(std::endian::native == std::endian::little, "float packing assumes a little-endian host");

/// Little-endian IEEE float32 array as base64.
[[nodiscard]] inline std::string pack_f32(std::span<const float> values) {
    std::vector<std::uint8_t> raw(values.size() * sizeof(float));
    if (!values.empty()) std::memcpy(raw.data(), values.data(), raw.size());
    return detail::base64_encode(raw);
}

[[nodiscard]] inline std::vector<float> unpack_f32(std::string_view text) {
    const auto raw = detail::base64_decode(text);
    if (raw.size() % sizeof(float) != 0) throw ParseError("unpack_f32: byte count is not a multiple of 4");
    std::vector<float> out(raw.size() / sizeof(float));
    if (!raw.empty()) std::memcpy(out.data(), raw.data(), raw.size());
    return out;
}

/// Little-endian IEEE float64 array as base64 (checkpoints keep full precision).
[[nodiscard]] inline std::string pack_f64(std::span<const double> values) {
    std::vector<std::uint8_t> raw(values.size() * sizeof(double));
    if (!values.empty()) std::memcpy(raw.data(), values.data(), raw.size());
    return detail::base64_encode(raw);
}

[[nodiscard]] inline std::vector<double> unpack_f64(std::string_view text) {
    const auto raw = detail::base64_decode(text);
    if (raw.size() % sizeof(double) != 0) throw ParseError("unpack_f64: byte count is not a multiple of 8");
    std::vector<double> out(raw.size() / sizeof(double));
    if (!raw.empty()) std::memcpy(out.data(), raw.data(), raw.size());
    return out;
}

}  // namespace annoconsist
