#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "thermo/annotations.hpp"
#include "thermo/frame.hpp"
#include "thermo/text_util.hpp"

namespace thermo {

inline constexpr int kGlyphWidth = 5;
inline constexpr int kGlyphHeight = 7;
inline constexpr int kGlyphAdvance = kGlyphWidth + 1;

struct Bgr {
    std::uint8_t b, g, r;
};

// Neither colour is gray, so overlay pixels always differ from a gray-derived frame.
inline constexpr Bgr kBoxColor{0, 255, 0};
inline constexpr Bgr kTextColor{0, 255, 255};

/// 5x7 bitmap rows, most significant of the low five bits is the leftmost column.
using Glyph = std::array<std::uint8_t, kGlyphHeight>;

inline std::optional<Glyph> glyph_for(char32_t c) {
    switch (c) {
        case U'0': return Glyph{0x0E, 0x11, 0x13, 0x15, 0x19, 0x11, 0x0E};
        case U'1': return Glyph{0x04, 0x0C, 0x04, 0x04, 0x04, 0x04, 0x0E};
        case U'2': return Glyph{0x0E, 0x11, 0x01, 0x02, 0x04, 0x08, 0x1F};
        case U'3': return Glyph{0x1F, 0x02, 0x04, 0x02, 0x01, 0x11, 0x0E};
        case U'4': return Glyph{0x02, 0x06, 0x0A, 0x12, 0x1F, 0x02, 0x02};
        case U'5': return Glyph{0x1F, 0x10, 0x1E, 0x01, 0x01, 0x11, 0x0E};
        case U'6': return Glyph{0x06, 0x08, 0x10, 0x1E, 0x11, 0x11, 0x0E};
        case U'7': return Glyph{0x1F, 0x01, 0x02, 0x04, 0x08, 0x08, 0x08};
        case U'8': return Glyph{0x0E, 0x11, 0x11, 0x0E, 0x11, 0x11, 0x0E};
        case U'9': return Glyph{0x0E, 0x11, 0x11, 0x0F, 0x01, 0x02, 0x0C};
        case U'.': return Glyph{0x00, 0x00, 0x00, 0x00, 0x00, 0x0C, 0x0C};
        case U'-': return Glyph{0x00, 0x00, 0x00, 0x1F, 0x00, 0x00, 0x00};
        case U'°': return Glyph{0x0C, 0x12, 0x12, 0x0C, 0x00, 0x00, 0x00};
        case U'C': return Glyph{0x0E, 0x11, 0x10, 0x10, 0x10, 0x11, 0x0E};
        default: return std::nullopt;
    }
}

/// Decodes the UTF-8 subset the glyph set covers (ASCII plus U+00B0).
inline std::u32string decode_label(std::string_view s) {
    std::u32string out;
    for (std::size_t i = 0; i < s.size(); ++i) {
        const auto c = static_cast<unsigned char>(s[i]);
        if (c == 0xC2 && i + 1 < s.size() && static_cast<unsigned char>(s[i + 1]) == 0xB0) {
            out.push_back(U'°');
            ++i;
        } else {
            out.push_back(static_cast<char32_t>(c));
        }
    }
    return out;
}

inline std::string temperature_label(double temperature_c, int decimals) {
    return text::fixed(temperature_c, decimals) + "°C";
}

inline int text_width(std::string_view label) {
    const auto n = static_cast<int>(decode_label(label).size());
    return n == 0 ? 0 : n * kGlyphAdvance - 1;
}

inline void put_pixel(ThermalFrame& f, int x, int y, Bgr c) {
    if (x < 0 || y < 0 || x >= f.width() || y >= f.height()) return;
    f.at(x, y, 0) = c.b;
    f.at(x, y, 1) = c.g;
    f.at(x, y, 2) = c.r;
}

/// Draws text with its top-left corner at (x, y), clipped to the frame.
inline void draw_text(ThermalFrame& f, int x, int y, std::string_view label, Bgr color) {
    int pen = x;
    for (char32_t c : decode_label(label)) {
        if (const auto g = glyph_for(c)) {
            for (int row = 0; row < kGlyphHeight; ++row) {
                for (int col = 0; col < kGlyphWidth; ++col) {
                    if ((*g)[static_cast<std::size_t>(row)] & (1u << (kGlyphWidth - 1 - col))) {
                        put_pixel(f, pen + col, y + row, color);
                    }
                }
            }
        }
        pen += kGlyphAdvance;
    }
}

/// One-pixel outline along the inside edge of the box.
inline void draw_box(ThermalFrame& f, const PixelBBox& b, Bgr color) {
    for (int x = b.x1; x < b.x2; ++x) {
        put_pixel(f, x, b.y1, color);
        put_pixel(f, x, b.y2 - 1, color);
    }
    for (int y = b.y1; y < b.y2; ++y) {
        put_pixel(f, b.x1, y, color);
        put_pixel(f, b.x2 - 1, y, color);
    }
}

/// Label origin: one pixel above the box, else one pixel below, else clamped
/// inside the frame. Horizontally aligned with the box, shifted left if needed.
inline std::pair<int, int> label_origin(const PixelBBox& b, int text_w, int frame_w, int frame_h) {
    const int x = std::max(0, std::min(b.x1, frame_w - text_w));
    int y = b.y1 - 1 - kGlyphHeight;
    if (y < 0) {
        y = b.y2 + 1;
        if (y + kGlyphHeight > frame_h) y = std::max(0, std::min(b.y1, frame_h - kGlyphHeight));
    }
    return {x, y};
}

}  // namespace thermo
