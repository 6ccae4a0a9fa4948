#pragma once

// Declarative plans for the three training stages: which components train,
// which data each stage sees, and how visual inputs are prepared.

#include <algorithm>
#include <array>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <type_traits>
#include <variant>
#include <vector>

#include "vbforge/corpus_model.hpp"
#include "vbforge/errors.hpp"
#include "vbforge/visprep.hpp"

namespace vbforge {

enum class Component { projector, vision_encoder, language_model };

inline std::string_view to_string(Component c) {
    switch (c) {
        case Component::projector:      return "projector";
        case Component::vision_encoder: return "vision_encoder";
        case Component::language_model: return "language_model";
    }
    return "?";
}

inline Component parse_component(std::string_view s) {
    if (s == "projector")      return Component::projector;
    if (s == "vision_encoder") return Component::vision_encoder;
    if (s == "language_model") return Component::language_model;
    throw schema_error("unknown component '" + std::string(s) + "'");
}

inline constexpr std::array<Component, 3> k_all_components = {
    Component::projector, Component::vision_encoder, Component::language_model};

enum class LanguageScope { english, core, all };

inline std::string_view to_string(LanguageScope s) {
    switch (s) {
        case LanguageScope::english: return "english";
        case LanguageScope::core:    return "core";
        case LanguageScope::all:     return "all";
    }
    return "?";
}

inline LanguageScope parse_language_scope(std::string_view s) {
    if (s == "english") return LanguageScope::english;
    if (s == "core")    return LanguageScope::core;
    if (s == "all")     return LanguageScope::all;
    throw schema_error("unknown language scope '" + std::string(s) + "'");
}

// A block matches when it passes every populated filter; samples additionally
// have to pass the language scope.
struct DataSelection {
    std::vector<std::string> include_blocks;  // empty = no restriction
    std::vector<std::string> exclude_blocks;
    std::vector<Modality> modalities;         // empty = any
    LanguageScope languages = LanguageScope::all;

    friend bool operator==(const DataSelection &, const DataSelection &) = default;

    bool matches_block(const BlockDescriptor & b) const {
        if (!include_blocks.empty() &&
            std::find(include_blocks.begin(), include_blocks.end(), b.name) == include_blocks.end()) {
            return false;
        }
        if (std::find(exclude_blocks.begin(), exclude_blocks.end(), b.name) != exclude_blocks.end()) {
            return false;
        }
        if (!modalities.empty() && std::find(modalities.begin(), modalities.end(), b.modality) == modalities.end()) {
            return false;
        }
        // a block whose samples are all non-English cannot feed an English-only stage
        if (languages == LanguageScope::english && b.subset == Subset::multilingual) {
            return false;
        }
        return true;
    }

    bool matches_language(const LanguageTag & lang) const {
        switch (languages) {
            case LanguageScope::english: return lang.is_english();
            case LanguageScope::core:    return is_core_language(lang.code);
            case LanguageScope::all:     return true;
        }
        return false;
    }

    bool matches_sample(const Sample & s, const BlockDescriptor & b) const {
        return matches_block(b) && matches_language(s.language);
    }
};

struct SingleImagePolicy {
    std::int64_t resolution = 384;
    friend bool operator==(const SingleImagePolicy &, const SingleImagePolicy &) = default;
};

struct TilePolicy {
    std::int64_t max_tiles = 6;
    bool thumbnail = true;
    friend bool operator==(const TilePolicy &, const TilePolicy &) = default;
};

struct VideoPolicy {
    std::int64_t frame_count = 32;
    std::int64_t resolution = 384;
    bool tiling = false;
    friend bool operator==(const VideoPolicy &, const VideoPolicy &) = default;
};

using VisualPolicy = std::variant<SingleImagePolicy, TilePolicy, VideoPolicy>;

struct StagePlan {
    int stage_id = 1;
    std::string name;
    std::set<Component> trainable;
    std::set<Component> frozen;
    DataSelection data;
    VisualPolicy visual;
    EncoderSpec encoder;

    friend bool operator==(const StagePlan &, const StagePlan &) = default;
};

struct RecipeOptions {
    EncoderSpec encoder{384, 14};
    std::int64_t max_tiles = 6;
    std::int64_t video_frames = 32;
    bool projector_multilingual = false; // stage 1 adds translated captions
    bool core_languages_only = false;    // stage 2 language scope
    bool stage2_exclude_pixmo_cap = false;
    std::string caption_block = "VBlocks-PixMo-Cap";
    std::string translated_caption_block = "PixMo-Cap-Translated";
};

inline StagePlan emit_stage_plan(int stage_id, const RecipeOptions & opts = {}) {
    StagePlan p;
    p.stage_id = stage_id;
    p.encoder = opts.encoder;
    const std::set<Component> all(k_all_components.begin(), k_all_components.end());
    switch (stage_id) {
        case 1:
            p.name = "projector_pretraining";
            p.trainable = {Component::projector};
            p.data.include_blocks = {opts.caption_block};
            p.data.modalities = {Modality::image_text};
            p.data.languages = LanguageScope::english;
            if (opts.projector_multilingual) {
                p.data.include_blocks.push_back(opts.translated_caption_block);
                p.data.languages = LanguageScope::all;
            }
            p.visual = SingleImagePolicy{opts.encoder.resolution};
            break;
        case 2:
            p.name = "vision_finetuning";
            p.trainable = all;
            p.data.modalities = {Modality::text_only, Modality::image_text};
            p.data.languages = opts.core_languages_only ? LanguageScope::core : LanguageScope::all;
            if (opts.stage2_exclude_pixmo_cap) {
                p.data.exclude_blocks = {opts.caption_block};
            }
            p.visual = TilePolicy{opts.max_tiles, true};
            break;
        case 3:
            p.name = "video_finetuning";
            p.trainable = all;
            p.data.modalities = {Modality::video_text};
            p.data.languages = LanguageScope::all;
            p.visual = VideoPolicy{opts.video_frames, opts.encoder.resolution, false};
            break;
        default:
            throw unknown_stage_error(stage_id);
    }
    for (auto c : k_all_components) {
        if (!p.trainable.count(c)) {
            p.frozen.insert(c);
        }
    }
    return p;
}

// Violations are returned as data; an empty list means the sequence is valid.
inline std::vector<std::string> validate_sequence(std::span<const StagePlan> plans,
                                                  std::span<const BlockDescriptor> registry) {
    std::vector<std::string> out;
    std::set<int> seen;
    for (std::size_t i = 0; i < plans.size(); ++i) {
        const auto & p = plans[i];
        if (p.stage_id < 1 || p.stage_id > 3) {
            out.push_back("stage " + std::to_string(p.stage_id) + ": unknown stage id");
        }
        if (!seen.insert(p.stage_id).second) {
            out.push_back("stage " + std::to_string(p.stage_id) + ": duplicate stage id");
        }
        if (i > 0 && p.stage_id < plans[i - 1].stage_id) {
            out.push_back("stage " + std::to_string(p.stage_id) + ": out of order after stage " +
                          std::to_string(plans[i - 1].stage_id));
        }
        for (auto c : k_all_components) {
            const bool t = p.trainable.count(c) > 0;
            const bool f = p.frozen.count(c) > 0;
            if (t == f) {
                out.push_back("stage " + std::to_string(p.stage_id) + ": component " + std::string(to_string(c)) +
                              (t ? " both trainable and frozen" : " neither trainable nor frozen"));
            }
        }
        auto check = [&](const std::vector<std::string> & names) {
            for (const auto & n : names) {
                bool known = std::any_of(registry.begin(), registry.end(),
                                         [&](const BlockDescriptor & b) { return b.name == n; });
                if (!known) {
                    out.push_back("stage " + std::to_string(p.stage_id) + ": unknown block '" + n + "'");
                }
            }
        };
        check(p.data.include_blocks);
        check(p.data.exclude_blocks);
    }
    return out;
}

inline ordered_json stage_plan_to_json(const StagePlan & p) {
    ordered_json j;
    j["stage_id"] = p.stage_id;
    j["name"] = p.name;
    auto comps = [](const std::set<Component> & s) {
        ordered_json a = ordered_json::array();
        for (auto c : k_all_components) {
            if (s.count(c)) a.push_back(to_string(c));
        }
        return a;
    };
    j["trainable"] = comps(p.trainable);
    j["frozen"] = comps(p.frozen);
    ordered_json d;
    d["include_blocks"] = p.data.include_blocks;
    d["exclude_blocks"] = p.data.exclude_blocks;
    ordered_json mods = ordered_json::array();
    for (auto m : p.data.modalities) mods.push_back(to_string(m));
    d["modalities"] = std::move(mods);
    d["languages"] = to_string(p.data.languages);
    j["data_selection"] = std::move(d);
    ordered_json v;
    std::visit(
        [&](const auto & pol) {
            using T = std::decay_t<decltype(pol)>;
            if constexpr (std::is_same_v<T, SingleImagePolicy>) {
                v["kind"] = "single_image";
                v["resolution"] = pol.resolution;
            } else if constexpr (std::is_same_v<T, TilePolicy>) {
                v["kind"] = "tiles";
                v["max_tiles"] = pol.max_tiles;
                v["thumbnail"] = pol.thumbnail;
            } else {
                v["kind"] = "video";
                v["frame_count"] = pol.frame_count;
                v["resolution"] = pol.resolution;
                v["tiling"] = pol.tiling;
            }
        },
        p.visual);
    j["visual_policy"] = std::move(v);
    j["encoder"] = {{"resolution", p.encoder.resolution}, {"patch", p.encoder.patch}};
    return j;
}

inline StagePlan stage_plan_from_json(const ordered_json & j) {
    StagePlan p;
    try {
        p.stage_id = j.at("stage_id").get<int>();
        p.name = j.at("name").get<std::string>();
        for (const auto & c : j.at("trainable")) p.trainable.insert(parse_component(c.get<std::string>()));
        for (const auto & c : j.at("frozen")) p.frozen.insert(parse_component(c.get<std::string>()));
        const auto & d = j.at("data_selection");
        p.data.include_blocks = d.at("include_blocks").get<std::vector<std::string>>();
        p.data.exclude_blocks = d.at("exclude_blocks").get<std::vector<std::string>>();
        for (const auto & m : d.at("modalities")) p.data.modalities.push_back(parse_modality(m.get<std::string>()));
        p.data.languages = parse_language_scope(d.at("languages").get<std::string>());
        const auto & v = j.at("visual_policy");
        const auto kind = v.at("kind").get<std::string>();
        if (kind == "single_image") {
            p.visual = SingleImagePolicy{v.at("resolution").get<std::int64_t>()};
        } else if (kind == "tiles") {
            p.visual = TilePolicy{v.at("max_tiles").get<std::int64_t>(), v.at("thumbnail").get<bool>()};
        } else if (kind == "video") {
            if (v.at("tiling").get<bool>()) {
                throw schema_error("video policy requires tiling=false");
            }
            p.visual = VideoPolicy{v.at("frame_count").get<std::int64_t>(), v.at("resolution").get<std::int64_t>(),
                                   false};
        } else {
            throw schema_error("unknown visual policy kind '" + kind + "'");
        }
        p.encoder = make_encoder(j.at("encoder").at("resolution").get<std::int64_t>(),
                                 j.at("encoder").at("patch").get<std::int64_t>());
    } catch (const nlohmann::json::exception & e) {
        throw schema_error(std::string("bad stage plan: ") + e.what());
    }
    return p;
}

} // namespace vbforge
