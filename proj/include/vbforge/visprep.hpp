#pragma once

// Visual input planning: tile grids with a global thumbnail, visual token
// budgets for square-input encoders, and uniform video frame sampling.

#include <algorithm>
#include <cstdint>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include <json.hpp>

#include "vbforge/errors.hpp"

namespace vbforge {

struct EncoderSpec {
    std::int64_t resolution = 384; // pixels per side
    std::int64_t patch      = 14;  // pixels per patch side

    friend bool operator==(const EncoderSpec &, const EncoderSpec &) = default;
};

inline EncoderSpec make_encoder(std::int64_t resolution, std::int64_t patch) {
    if (patch < 1 || resolution < patch) {
        throw config_error("encoder needs resolution >= patch >= 1, got " + std::to_string(resolution) + "/" +
                           std::to_string(patch));
    }
    return {resolution, patch};
}

// Parses "RES/PATCH", e.g. "384/14".
inline EncoderSpec parse_encoder(std::string_view text) {
    auto slash = text.find('/');
    if (slash == std::string_view::npos) {
        throw config_error("encoder must be RES/PATCH, got '" + std::string(text) + "'");
    }
    try {
        std::size_t used = 0;
        std::string res(text.substr(0, slash));
        std::string patch(text.substr(slash + 1));
        long long r = std::stoll(res, &used);
        if (used != res.size()) throw std::invalid_argument("trailing");
        long long p = std::stoll(patch, &used);
        if (used != patch.size()) throw std::invalid_argument("trailing");
        return make_encoder(r, p);
    } catch (const std::logic_error &) {
        throw config_error("encoder must be RES/PATCH, got '" + std::string(text) + "'");
    }
}

inline std::int64_t visual_token_count(const EncoderSpec & enc) {
    const std::int64_t side = enc.resolution / enc.patch;
    return side * side;
}

struct TileCover {
    std::int64_t rows = 0;
    std::int64_t cols = 0;
    std::int64_t count = 0;

    friend bool operator==(const TileCover &, const TileCover &) = default;
};

// Naive full-resolution cover, padding included.
inline TileCover cover_tile_count(std::int64_t width, std::int64_t height, const EncoderSpec & enc) {
    const std::int64_t rows = (height + enc.resolution - 1) / enc.resolution;
    const std::int64_t cols = (width + enc.resolution - 1) / enc.resolution;
    return {rows, cols, rows * cols};
}

struct PixelBox {
    std::int64_t x = 0;
    std::int64_t y = 0;
    std::int64_t w = 0;
    std::int64_t h = 0;

    friend bool operator==(const PixelBox &, const PixelBox &) = default;
};

struct PixelSize {
    std::int64_t width  = 0;
    std::int64_t height = 0;

    friend bool operator==(const PixelSize &, const PixelSize &) = default;
};

struct TilePlan {
    std::int64_t rows = 1;
    std::int64_t cols = 1;
    PixelSize scaled_size;       // image after aspect-preserving resize
    PixelSize canvas_size;       // cols*res x rows*res, padding included
    PixelBox content_box;        // where the scaled image sits on the canvas
    std::vector<PixelBox> tile_boxes; // row-major, canvas coordinates
    bool include_thumbnail = false;
    std::int64_t tokens_per_tile = 0;
    std::int64_t total_tokens = 0;
};

namespace detail {

// Aspect-preserving fit of (w, h) inside (cw, ch), exact integer arithmetic.
inline PixelSize fit_inside(std::int64_t w, std::int64_t h, std::int64_t cw, std::int64_t ch) {
    // width-limited when cw/w <= ch/h
    if (cw * h <= ch * w) {
        return {cw, std::max<std::int64_t>(1, (h * cw) / w)};
    }
    return {std::max<std::int64_t>(1, (w * ch) / h), ch};
}

} // namespace detail

// Grid choice: among all (r, c) with r*c <= max_tiles, maximise retained source
// pixels after the fit, then minimise padding, then prefer fewer tiles, then
// fewer rows. Tiles are emitted row-major and the thumbnail follows them.
inline TilePlan plan_tiles(std::int64_t width, std::int64_t height, const EncoderSpec & enc, std::int64_t max_tiles) {
    if (width < 1 || height < 1) {
        throw config_error("image dimensions must be >= 1");
    }
    if (max_tiles < 1) {
        throw config_error("max_tiles must be >= 1");
    }

    const std::int64_t source_area = width * height;
    std::int64_t best_r = 1;
    std::int64_t best_c = 1;
    std::int64_t best_eff = -1;
    std::int64_t best_waste = 0;
    for (std::int64_t r = 1; r <= max_tiles; ++r) {
        for (std::int64_t c = 1; r * c <= max_tiles; ++c) {
            const std::int64_t cw = c * enc.resolution;
            const std::int64_t ch = r * enc.resolution;
            const PixelSize fit = detail::fit_inside(width, height, cw, ch);
            const std::int64_t eff = std::min(fit.width * fit.height, source_area);
            const std::int64_t waste = cw * ch - eff;
            const bool better = std::tuple(eff, -waste, -(r * c), -r) >
                                std::tuple(best_eff, -best_waste, -(best_r * best_c), -best_r);
            if (best_eff < 0 || better) {
                best_r = r;
                best_c = c;
                best_eff = eff;
                best_waste = waste;
            }
        }
    }

    TilePlan plan;
    plan.rows = best_r;
    plan.cols = best_c;
    plan.canvas_size = {best_c * enc.resolution, best_r * enc.resolution};
    plan.scaled_size = detail::fit_inside(width, height, plan.canvas_size.width, plan.canvas_size.height);
    plan.content_box = {(plan.canvas_size.width - plan.scaled_size.width) / 2,
                        (plan.canvas_size.height - plan.scaled_size.height) / 2,
                        plan.scaled_size.width, plan.scaled_size.height};
    for (std::int64_t r = 0; r < best_r; ++r) {
        for (std::int64_t c = 0; c < best_c; ++c) {
            plan.tile_boxes.push_back({c * enc.resolution, r * enc.resolution, enc.resolution, enc.resolution});
        }
    }
    plan.include_thumbnail = !(best_r == 1 && best_c == 1);
    plan.tokens_per_tile = visual_token_count(enc);
    plan.total_tokens = (best_r * best_c + (plan.include_thumbnail ? 1 : 0)) * plan.tokens_per_tile;
    return plan;
}

inline nlohmann::ordered_json tile_plan_to_json(const TilePlan & p) {
    using oj = nlohmann::ordered_json;
    auto box = [](const PixelBox & b) { return oj::array({b.x, b.y, b.w, b.h}); };
    oj j;
    j["grid"]        = oj::array({p.rows, p.cols});
    j["scaled_size"] = oj::array({p.scaled_size.width, p.scaled_size.height});
    oj boxes = oj::array();
    for (const auto & b : p.tile_boxes) {
        boxes.push_back(box(b));
    }
    j["tile_boxes"]        = std::move(boxes);
    j["include_thumbnail"] = p.include_thumbnail;
    j["tokens_per_tile"]   = p.tokens_per_tile;
    j["total_tokens"]      = p.total_tokens;
    j["canvas_size"]       = oj::array({p.canvas_size.width, p.canvas_size.height});
    j["content_box"]       = box(p.content_box);
    j["token_order"]       = "tiles-then-thumbnail";
    return j;
}

struct VideoSpec {
    std::int64_t frame_count = 32;
    std::int64_t resolution  = 384;
    bool tiling = false;
};

inline VideoSpec make_video_spec(std::int64_t frame_count, std::int64_t resolution) {
    if (frame_count < 1) {
        throw config_error("frame_count must be >= 1");
    }
    if (resolution < 1) {
        throw config_error("video resolution must be >= 1");
    }
    return {frame_count, resolution, false};
}

// k evenly spaced positions over [0, total_frames - 1], rounded half away from
// zero. Duplicates appear when total_frames < k.
inline std::vector<std::int64_t> sample_frame_indices(std::int64_t total_frames, std::int64_t k) {
    if (total_frames < 1 || k < 1) {
        throw config_error("sample_frame_indices needs total_frames >= 1 and k >= 1");
    }
    std::vector<std::int64_t> out;
    out.reserve(static_cast<std::size_t>(k));
    if (k == 1) {
        out.push_back(0);
        return out;
    }
    const std::int64_t span = total_frames - 1;
    const std::int64_t steps = k - 1;
    for (std::int64_t i = 0; i < k; ++i) {
        // round(i * span / steps) with non-negative operands
        out.push_back((2 * i * span + steps) / (2 * steps));
    }
    return out;
}

} // namespace vbforge
