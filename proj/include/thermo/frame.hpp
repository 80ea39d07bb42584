#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "thermo/annotations.hpp"
#include "thermo/error.hpp"
#include "thermo/text_util.hpp"

namespace thermo {

/// Native resolution of the Lepton-class sensor the pipeline targets.
inline constexpr int kNativeWidth = 160;
inline constexpr int kNativeHeight = 120;

struct FrameDims {
    int width = 0;
    int height = 0;
    int channels = 1;

    friend bool operator==(const FrameDims&, const FrameDims&) = default;
};

/// One 8-bit thermal image. Three-channel frames hold interleaved B, G, R.
class ThermalFrame {
public:
    ThermalFrame() = default;

    ThermalFrame(int width, int height, int channels, std::uint8_t fill = 0)
        : width_(width), height_(height), channels_(channels) {
        check_shape(width, height, channels);
        pixels_.assign(static_cast<std::size_t>(width) * height * channels, fill);
    }

    ThermalFrame(int width, int height, int channels, std::vector<std::uint8_t> pixels)
        : width_(width), height_(height), channels_(channels), pixels_(std::move(pixels)) {
        check_shape(width, height, channels);
        if (pixels_.size() != static_cast<std::size_t>(width) * height * channels) {
            fail_data("frame: pixel buffer length does not match dimensions");
        }
    }

    int width() const { return width_; }
    int height() const { return height_; }
    int channels() const { return channels_; }
    FrameDims dims() const { return {width_, height_, channels_}; }
    bool empty() const { return pixels_.empty(); }

    std::span<const std::uint8_t> pixels() const { return pixels_; }
    std::span<std::uint8_t> pixels() { return pixels_; }

    std::uint8_t at(int x, int y, int c = 0) const { return pixels_[offset(x, y, c)]; }
    std::uint8_t& at(int x, int y, int c = 0) { return pixels_[offset(x, y, c)]; }

    std::uint64_t frame_index = 0;
    std::string source_id;

    friend bool operator==(const ThermalFrame& a, const ThermalFrame& b) {
        return a.width_ == b.width_ && a.height_ == b.height_ && a.channels_ == b.channels_ &&
               a.pixels_ == b.pixels_;
    }

private:
    static void check_shape(int width, int height, int channels) {
        if (width <= 0 || height <= 0) fail_data("frame: dimensions must be positive");
        if (channels != 1 && channels != 3) fail_data("frame: channels must be 1 or 3");
    }

    std::size_t offset(int x, int y, int c) const {
        return (static_cast<std::size_t>(y) * width_ + x) * channels_ + c;
    }

    int width_ = 0;
    int height_ = 0;
    int channels_ = 1;
    std::vector<std::uint8_t> pixels_;
};

struct DatasetItem {
    ThermalFrame frame;
    std::vector<GroundTruthLabel> labels;  // empty means a null-label frame
};

namespace detail {

// Netpbm header token reader: whitespace separated, '#' comments to end of line.
class PnmHeader {
public:
    explicit PnmHeader(std::string_view data) : data_(data) {}

    std::optional<std::string_view> token() {
        for (;;) {
            while (pos_ < data_.size() && is_space(data_[pos_])) ++pos_;
            if (pos_ < data_.size() && data_[pos_] == '#') {
                while (pos_ < data_.size() && data_[pos_] != '\n') ++pos_;
                continue;
            }
            break;
        }
        const auto start = pos_;
        while (pos_ < data_.size() && !is_space(data_[pos_]) && data_[pos_] != '#') ++pos_;
        if (pos_ == start) return std::nullopt;
        return data_.substr(start, pos_ - start);
    }

    // Exactly one whitespace byte separates maxval from the raster.
    std::optional<std::size_t> raster_offset() const {
        if (pos_ >= data_.size() || !is_space(data_[pos_])) return std::nullopt;
        return pos_ + 1;
    }

private:
    static bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f'; }

    std::string_view data_;
    std::size_t pos_ = 0;
};

[[noreturn]] inline void pnm_bad(const std::string& name, const std::string& why) {
    fail_data(name + ": malformed header (" + why + ")");
}

}  // namespace detail

/// Decodes binary PGM (P5) or PPM (P6) bytes. PPM rasters are stored R,G,B on
/// disk and reordered to B,G,R in memory.
inline ThermalFrame decode_pnm(std::string_view bytes, const std::string& name = "<memory>") {
    detail::PnmHeader header(bytes);
    const auto magic = header.token();
    if (!magic) detail::pnm_bad(name, "empty file");
    int channels = 0;
    if (*magic == "P5") {
        channels = 1;
    } else if (*magic == "P6") {
        channels = 3;
    } else {
        detail::pnm_bad(name, "unsupported magic '" + std::string(*magic) + "'");
    }
    long long fields[3] = {0, 0, 0};
    for (auto& f : fields) {
        const auto tok = header.token();
        if (!tok) detail::pnm_bad(name, "truncated");
        const auto v = text::to_int(*tok);
        if (!v || *v <= 0) detail::pnm_bad(name, "bad numeric field '" + std::string(*tok) + "'");
        f = *v;
    }
    if (fields[2] != 255) detail::pnm_bad(name, "maxval must be 255");
    if (fields[0] > 1 << 16 || fields[1] > 1 << 16) detail::pnm_bad(name, "dimensions too large");
    const auto start = header.raster_offset();
    if (!start) detail::pnm_bad(name, "missing raster separator");
    const int w = static_cast<int>(fields[0]);
    const int h = static_cast<int>(fields[1]);
    const std::size_t n = static_cast<std::size_t>(w) * h * channels;
    if (bytes.size() - *start < n) fail_data(name + ": truncated raster");
    std::vector<std::uint8_t> px(n);
    const auto* raster = reinterpret_cast<const std::uint8_t*>(bytes.data() + *start);
    if (channels == 1) {
        std::copy(raster, raster + n, px.begin());
    } else {
        for (std::size_t i = 0; i < n; i += 3) {
            px[i] = raster[i + 2];
            px[i + 1] = raster[i + 1];
            px[i + 2] = raster[i];
        }
    }
    ThermalFrame frame(w, h, channels, std::move(px));
    frame.source_id = name;
    return frame;
}

inline std::string encode_pnm(const ThermalFrame& frame) {
    std::string out = (frame.channels() == 1 ? "P5\n" : "P6\n") + std::to_string(frame.width()) + " " +
                      std::to_string(frame.height()) + "\n255\n";
    const auto px = frame.pixels();
    const auto header = out.size();
    out.resize(header + px.size());
    auto* raster = reinterpret_cast<std::uint8_t*>(out.data() + header);
    if (frame.channels() == 1) {
        std::copy(px.begin(), px.end(), raster);
    } else {
        for (std::size_t i = 0; i < px.size(); i += 3) {
            raster[i] = px[i + 2];
            raster[i + 1] = px[i + 1];
            raster[i + 2] = px[i];
        }
    }
    return out;
}

inline ThermalFrame load_frame(const std::filesystem::path& path, std::optional<FrameDims> expected = std::nullopt) {
    auto frame = decode_pnm(text::read_file(path), path.string());
    if (expected && frame.dims() != *expected) {
        fail_data(path.string() + ": dimension mismatch, expected " + std::to_string(expected->width) + "x" +
                  std::to_string(expected->height) + "x" + std::to_string(expected->channels) + ", got " +
                  std::to_string(frame.width()) + "x" + std::to_string(frame.height()) + "x" +
                  std::to_string(frame.channels()));
    }
    return frame;
}

inline void save_frame(const std::filesystem::path& path, const ThermalFrame& frame) {
    text::write_file_atomic(path, encode_pnm(frame));
}

/// BT.601 luma with half-up rounding, computed in exact integer arithmetic.
inline ThermalFrame bgr_to_grayscale(const ThermalFrame& frame) {
    if (frame.channels() != 3) fail_data("bgr_to_grayscale: frame is already single-channel");
    ThermalFrame out(frame.width(), frame.height(), 1);
    const auto src = frame.pixels();
    auto dst = out.pixels();
    for (std::size_t i = 0, j = 0; j < dst.size(); i += 3, ++j) {
        const unsigned b = src[i], g = src[i + 1], r = src[i + 2];
        const unsigned v = (299 * r + 587 * g + 114 * b + 500) / 1000;
        dst[j] = static_cast<std::uint8_t>(std::min(v, 255u));
    }
    out.frame_index = frame.frame_index;
    out.source_id = frame.source_id;
    return out;
}

/// Copies a gray plane into all three channels.
inline ThermalFrame replicate_channels(const ThermalFrame& gray) {
    if (gray.channels() != 1) fail_data("replicate_channels: expected a single-channel frame");
    ThermalFrame out(gray.width(), gray.height(), 3);
    const auto src = gray.pixels();
    auto dst = out.pixels();
    for (std::size_t j = 0; j < src.size(); ++j) dst[3 * j] = dst[3 * j + 1] = dst[3 * j + 2] = src[j];
    out.frame_index = gray.frame_index;
    out.source_id = gray.source_id;
    return out;
}

/// Bilinear resampling with pixel-center alignment. Aspect ratio is not preserved.
inline ThermalFrame resize(const ThermalFrame& frame, int target_w, int target_h) {
    if (target_w <= 0 || target_h <= 0) fail_usage("resize: target dimensions must be positive");
    if (target_w == frame.width() && target_h == frame.height()) return frame;

    struct Tap {
        int lo, hi;
        double frac;
    };
    const auto taps = [](int dst_n, int src_n) {
        std::vector<Tap> t(dst_n);
        const double scale = static_cast<double>(src_n) / dst_n;
        for (int i = 0; i < dst_n; ++i) {
            const double s = std::clamp((i + 0.5) * scale - 0.5, 0.0, static_cast<double>(src_n - 1));
            const int lo = static_cast<int>(std::floor(s));
            t[i] = {lo, std::min(lo + 1, src_n - 1), s - lo};
        }
        return t;
    };
    const auto xs = taps(target_w, frame.width());
    const auto ys = taps(target_h, frame.height());
    const int ch = frame.channels();
    ThermalFrame out(target_w, target_h, ch);
    for (int y = 0; y < target_h; ++y) {
        const auto& ty = ys[y];
        for (int x = 0; x < target_w; ++x) {
            const auto& tx = xs[x];
            for (int c = 0; c < ch; ++c) {
                const double top = frame.at(tx.lo, ty.lo, c) * (1 - tx.frac) + frame.at(tx.hi, ty.lo, c) * tx.frac;
                const double bot = frame.at(tx.lo, ty.hi, c) * (1 - tx.frac) + frame.at(tx.hi, ty.hi, c) * tx.frac;
                const double v = top * (1 - ty.frac) + bot * ty.frac;
                out.at(x, y, c) = static_cast<std::uint8_t>(std::clamp<long long>(round_half_up(v), 0, 255));
            }
        }
    }
    out.frame_index = frame.frame_index;
    out.source_id = frame.source_id;
    return out;
}

inline DatasetItem horizontal_flip(const DatasetItem& item) {
    DatasetItem out = item;
    const auto& src = item.frame;
    auto& dst = out.frame;
    const int w = src.width();
    for (int y = 0; y < src.height(); ++y) {
        for (int x = 0; x < w; ++x) {
            for (int c = 0; c < src.channels(); ++c) dst.at(w - 1 - x, y, c) = src.at(x, y, c);
        }
    }
    for (auto& label : out.labels) label.bbox.cx = 1.0 - label.bbox.cx;
    return out;
}

inline bool is_frame_file(const std::filesystem::path& p) {
    const auto ext = p.extension();
    return ext == ".pgm" || ext == ".ppm";
}

/// Frame files in a directory, sorted by stem. Two frames sharing a stem is an error.
inline std::vector<std::filesystem::path> list_frames(const std::filesystem::path& dir) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(dir)) fail_data("not a directory: '" + dir.string() + "'");
    std::map<std::string, fs::path> by_stem;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (!entry.is_regular_file() || !is_frame_file(entry.path())) continue;
        const auto stem = entry.path().stem().string();
        if (!by_stem.emplace(stem, entry.path()).second) fail_data("duplicate frame stem '" + stem + "' in " + dir.string());
    }
    std::vector<fs::path> out;
    out.reserve(by_stem.size());
    for (auto& [stem, path] : by_stem) out.push_back(std::move(path));
    return out;
}

/// Pairs `<stem>.pgm|.ppm` with `<stem>.txt`. Missing or empty label files yield
/// null-label items; a label file without a frame is an error.
inline std::vector<DatasetItem> pair_frames_with_labels(const std::filesystem::path& frames_dir,
                                                        const std::filesystem::path& labels_dir) {
    namespace fs = std::filesystem;
    const auto frames = list_frames(frames_dir);
    if (!fs::is_directory(labels_dir)) fail_data("not a directory: '" + labels_dir.string() + "'");
    std::map<std::string, fs::path> label_files;
    for (const auto& entry : fs::directory_iterator(labels_dir)) {
        if (entry.is_regular_file() && entry.path().extension() == ".txt") {
            label_files.emplace(entry.path().stem().string(), entry.path());
        }
    }
    std::vector<DatasetItem> items;
    items.reserve(frames.size());
    std::uint64_t index = 0;
    for (const auto& path : frames) {
        DatasetItem item{load_frame(path), {}};
        item.frame.frame_index = index++;
        const auto stem = path.stem().string();
        if (auto it = label_files.find(stem); it != label_files.end()) {
            item.labels = load_labels(it->second);
            label_files.erase(it);
        }
        items.push_back(std::move(item));
    }
    if (!label_files.empty()) {
        fail_data("orphan label file '" + label_files.begin()->second.string() + "' has no matching frame");
    }
    return items;
}

}  // namespace thermo
