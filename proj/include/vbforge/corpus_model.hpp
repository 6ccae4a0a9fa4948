#pragma once

// Canonical data schema shared by every pipeline stage: language registry,
// samples, block descriptors, and the JSONL encoding of samples.

#include <algorithm>
#include <array>
#include <cctype>
#include <compare>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "vbforge/errors.hpp"

namespace vbforge {

using json         = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

struct LanguageTag {
    std::string code;
    std::string display_name;

    bool is_english() const { return code == "en"; }

    friend bool operator==(const LanguageTag & a, const LanguageTag & b) { return a.code == b.code; }
    friend auto operator<=>(const LanguageTag & a, const LanguageTag & b) { return a.code <=> b.code; }
};

inline const std::vector<LanguageTag> & language_registry() {
    static const std::vector<LanguageTag> registry = {
        {"en",      "English"},
        {"de",      "German"},
        {"nl",      "Dutch"},
        {"es",      "Spanish (Latin America)"},
        {"fr",      "French"},
        {"pt-PT",   "Portuguese (Portugal)"},
        {"pt-BR",   "Portuguese (Brazilian)"},
        {"uk",      "Ukrainian"},
        {"hi",      "Hindi"},
        {"zh-Hans", "Chinese (Simplified)"},
        {"zh-Hant", "Chinese (Traditional)"},
        {"ru",      "Russian"},
        {"cs",      "Czech"},
        {"ko",      "Korean"},
        {"ja",      "Japanese"},
        {"it",      "Italian"},
        {"pl",      "Polish"},
        {"ro",      "Romanian"},
        {"nn",      "Norwegian (Nynorsk)"},
        {"nb",      "Norwegian (Bokmål)"},
    };
    return registry;
}

// The ten high-resource languages used for the core-vs-all coverage switch.
// "Portuguese" is the European variant here.
inline const std::vector<std::string> & core_language_codes() {
    static const std::vector<std::string> core = {
        "en", "de", "nl", "pt-PT", "ru", "zh-Hans", "zh-Hant", "es", "fr", "it",
    };
    return core;
}

namespace detail {

inline std::string ascii_lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

inline std::pair<std::string_view, std::string_view> split_primary(std::string_view code) {
    auto dash = code.find('-');
    if (dash == std::string_view::npos) {
        return {code, {}};
    }
    return {code.substr(0, dash), code.substr(dash)};
}

} // namespace detail

inline bool is_core_language(std::string_view code) {
    const auto & core = core_language_codes();
    return std::find(core.begin(), core.end(), code) != core.end();
}

// Primary subtag is matched case-insensitively, variant subtags exactly.
inline LanguageTag parse_language_tag(std::string_view code) {
    auto [primary, variant] = detail::split_primary(code);
    const std::string lowered = detail::ascii_lower(primary);
    for (const auto & tag : language_registry()) {
        auto [tp, tv] = detail::split_primary(tag.code);
        if (tp == lowered && tv == variant) {
            return tag;
        }
    }
    throw unsupported_language_error(std::string(code));
}

inline bool is_registered_language(std::string_view code) {
    const auto & reg = language_registry();
    return std::any_of(reg.begin(), reg.end(), [&](const LanguageTag & t) { return t.code == code; });
}

enum class CollectionTag { public_data, synthetic_generated, translated_augmented };

inline std::string_view to_string(CollectionTag t) {
    switch (t) {
        case CollectionTag::public_data:          return "PublicData";
        case CollectionTag::synthetic_generated:  return "SyntheticGenerated";
        case CollectionTag::translated_augmented: return "TranslatedAugmented";
    }
    return "?";
}

inline CollectionTag parse_collection_tag(std::string_view s) {
    if (s == "PublicData")          return CollectionTag::public_data;
    if (s == "SyntheticGenerated")  return CollectionTag::synthetic_generated;
    if (s == "TranslatedAugmented") return CollectionTag::translated_augmented;
    throw schema_error("unknown collection tag '" + std::string(s) + "'");
}

enum class Modality { text_only, image_text, video_text };

inline std::string_view to_string(Modality m) {
    switch (m) {
        case Modality::text_only:  return "text-only";
        case Modality::image_text: return "image-text";
        case Modality::video_text: return "video-text";
    }
    return "?";
}

inline Modality parse_modality(std::string_view s) {
    if (s == "text-only")  return Modality::text_only;
    if (s == "image-text") return Modality::image_text;
    if (s == "video-text") return Modality::video_text;
    throw schema_error("unknown modality '" + std::string(s) + "'");
}

enum class Role { user, assistant, system };

inline std::string_view to_string(Role r) {
    switch (r) {
        case Role::user:      return "user";
        case Role::assistant: return "assistant";
        case Role::system:    return "system";
    }
    return "?";
}

inline Role parse_role(std::string_view s) {
    if (s == "user")      return Role::user;
    if (s == "assistant") return Role::assistant;
    if (s == "system")    return Role::system;
    throw schema_error("unknown role '" + std::string(s) + "'");
}

// Which subset of the statistics table a block's samples are reported under
// when per-language counts are not available.
enum class Subset { english, multilingual };

inline std::string_view to_string(Subset s) {
    return s == Subset::english ? "english" : "multilingual";
}

inline Subset parse_subset(std::string_view s) {
    if (s == "english")      return Subset::english;
    if (s == "multilingual") return Subset::multilingual;
    throw schema_error("unknown subset '" + std::string(s) + "'");
}

struct ConversationTurn {
    Role role = Role::user;
    std::string text;

    friend bool operator==(const ConversationTurn &, const ConversationTurn &) = default;
};

struct Sample {
    std::string id;
    std::string block;
    Modality modality = Modality::text_only;
    LanguageTag language;
    std::vector<ConversationTurn> turns;
    std::optional<std::string> media_ref;
    std::optional<double> qe_score;
    // Unknown keys kept by lenient parsing; always an object (possibly empty).
    json extras = json::object();

    friend bool operator==(const Sample &, const Sample &) = default;
};

struct BlockDescriptor {
    std::string name;
    std::string category;
    CollectionTag tag = CollectionTag::public_data;
    std::uint64_t declared_count = 0;
    Modality modality = Modality::image_text;
    Subset subset = Subset::english;

    friend bool operator==(const BlockDescriptor &, const BlockDescriptor &) = default;
};

inline bool is_blank(std::string_view s) {
    return std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c); });
}

// Every violated Sample invariant, in a fixed order. Empty means valid.
inline std::vector<std::string> validate_sample(const Sample & s) {
    std::vector<std::string> out;
    if (s.id.empty()) {
        out.emplace_back("empty id");
    }
    if (s.block.empty()) {
        out.emplace_back("empty block");
    }
    if (!is_registered_language(s.language.code)) {
        out.emplace_back("unsupported language '" + s.language.code + "'");
    }
    if (s.turns.empty()) {
        out.emplace_back("empty turns");
    }

    // optional leading system turns, then user/assistant alternation from user
    std::size_t i = 0;
    while (i < s.turns.size() && s.turns[i].role == Role::system) {
        ++i;
    }
    if (!s.turns.empty() && i == s.turns.size()) {
        out.emplace_back("no user turn");
    }
    for (std::size_t k = i; k < s.turns.size(); ++k) {
        const Role expected = ((k - i) % 2 == 0) ? Role::user : Role::assistant;
        if (s.turns[k].role != expected) {
            out.emplace_back("role order: turn " + std::to_string(k) + " is " +
                             std::string(to_string(s.turns[k].role)) + ", expected " +
                             std::string(to_string(expected)));
            break;
        }
    }
    for (std::size_t k = 0; k < s.turns.size(); ++k) {
        if (is_blank(s.turns[k].text)) {
            out.emplace_back("empty text: turn " + std::to_string(k));
        }
    }

    const bool text_only = s.modality == Modality::text_only;
    if (text_only == s.media_ref.has_value()) {
        out.emplace_back("modality/media mismatch");
    }
    if (s.qe_score && !(*s.qe_score >= 0.0 && *s.qe_score <= 1.0)) {
        out.emplace_back("qe_score out of range");
    }
    return out;
}

enum class ParseMode { strict, lenient };

// Fields a raw source record may omit; ingest fills them from the block.
struct SampleDefaults {
    std::string id;
    std::string block;
    std::optional<Modality> modality;
};

namespace detail {

inline const std::string & require_string(const json & j, const char * key) {
    auto it = j.find(key);
    if (it == j.end()) {
        throw schema_error(std::string("missing key '") + key + "'");
    }
    if (!it->is_string()) {
        throw schema_error(std::string("key '") + key + "' must be a string");
    }
    return it->get_ref<const std::string &>();
}

} // namespace detail

inline Sample sample_from_json(const json & j, ParseMode mode, const SampleDefaults * defaults = nullptr) {
    if (!j.is_object()) {
        throw schema_error("record is not a JSON object");
    }
    static const std::array<std::string_view, 7> known = {
        "id", "block", "modality", "language", "turns", "media_ref", "qe_score",
    };

    Sample s;
    for (auto it = j.begin(); it != j.end(); ++it) {
        if (std::find(known.begin(), known.end(), it.key()) != known.end()) {
            continue;
        }
        if (mode == ParseMode::strict) {
            throw schema_error("unknown key '" + it.key() + "'");
        }
        s.extras[it.key()] = it.value();
    }

    if (defaults && !j.contains("id")) {
        s.id = defaults->id;
    } else {
        s.id = detail::require_string(j, "id");
    }
    if (defaults && !j.contains("block")) {
        s.block = defaults->block;
    } else {
        s.block = detail::require_string(j, "block");
    }
    if (defaults && defaults->modality && !j.contains("modality")) {
        s.modality = *defaults->modality;
    } else {
        s.modality = parse_modality(detail::require_string(j, "modality"));
    }
    try {
        s.language = parse_language_tag(detail::require_string(j, "language"));
    } catch (const unsupported_language_error & e) {
        throw schema_error(e.what());
    }

    auto turns = j.find("turns");
    if (turns == j.end() || !turns->is_array()) {
        throw schema_error("key 'turns' must be an array");
    }
    for (const auto & t : *turns) {
        if (!t.is_object()) {
            throw schema_error("turn is not an object");
        }
        ConversationTurn turn;
        turn.role = parse_role(detail::require_string(t, "role"));
        turn.text = detail::require_string(t, "text");
        s.turns.push_back(std::move(turn));
    }

    if (auto m = j.find("media_ref"); m != j.end() && !m->is_null()) {
        if (!m->is_string()) {
            throw schema_error("key 'media_ref' must be a string");
        }
        s.media_ref = m->get<std::string>();
    }
    if (auto q = j.find("qe_score"); q != j.end() && !q->is_null()) {
        if (!q->is_number()) {
            throw schema_error("key 'qe_score' must be a number");
        }
        s.qe_score = q->get<double>();
    }
    return s;
}

inline ordered_json sample_to_json(const Sample & s) {
    ordered_json j;
    j["id"]       = s.id;
    j["block"]    = s.block;
    j["modality"] = to_string(s.modality);
    j["language"] = s.language.code;
    ordered_json turns = ordered_json::array();
    for (const auto & t : s.turns) {
        ordered_json tj;
        tj["role"] = to_string(t.role);
        tj["text"] = t.text;
        turns.push_back(std::move(tj));
    }
    j["turns"] = std::move(turns);
    if (s.media_ref) {
        j["media_ref"] = *s.media_ref;
    }
    if (s.qe_score) {
        j["qe_score"] = *s.qe_score;
    }
    // extras follow the canonical keys in sorted order (json objects are sorted)
    for (auto it = s.extras.begin(); it != s.extras.end(); ++it) {
        j[it.key()] = ordered_json::parse(it.value().dump());
    }
    return j;
}

// One canonical JSONL line, without the trailing newline.
inline std::string serialize_sample(const Sample & s) {
    return sample_to_json(s).dump(-1, ' ', false, json::error_handler_t::strict);
}

inline Sample parse_sample(std::string_view line, ParseMode mode, const SampleDefaults * defaults = nullptr) {
    json j;
    try {
        j = json::parse(line);
    } catch (const json::parse_error & e) {
        throw schema_error(std::string("malformed JSON: ") + e.what());
    }
    return sample_from_json(j, mode, defaults);
}

inline ordered_json block_to_json(const BlockDescriptor & b) {
    ordered_json j;
    j["name"]           = b.name;
    j["category"]       = b.category;
    j["tag"]            = to_string(b.tag);
    j["declared_count"] = b.declared_count;
    j["modality"]       = to_string(b.modality);
    j["subset"]         = to_string(b.subset);
    return j;
}

template <typename Json>
BlockDescriptor block_from_json(const Json & j) {
    BlockDescriptor b;
    try {
        b.name     = j.at("name").template get<std::string>();
        b.category = j.at("category").template get<std::string>();
        b.tag      = parse_collection_tag(j.at("tag").template get<std::string>());
        if (j.contains("declared_count")) {
            if (!j.at("declared_count").is_number_unsigned() && !(j.at("declared_count").is_number_integer() &&
                                                                  j.at("declared_count").template get<long long>() >= 0)) {
                throw schema_error("declared_count must be a nonnegative integer");
            }
            b.declared_count = j.at("declared_count").template get<std::uint64_t>();
        }
        b.modality = parse_modality(j.at("modality").template get<std::string>());
        if (j.contains("subset")) {
            b.subset = parse_subset(j.at("subset").template get<std::string>());
        }
    } catch (const nlohmann::json::exception & e) {
        throw schema_error(std::string("bad block descriptor: ") + e.what());
    }
    if (b.name.empty()) {
        throw schema_error("block descriptor with empty name");
    }
    return b;
}

} // namespace vbforge
