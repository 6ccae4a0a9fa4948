#pragma once

// Target-language allocation (half English, half spread uniformly over the
// other languages), language-specific caption prompt pools, and the
// translation pass over allocated samples.

#include <algorithm>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "vbforge/corpus_model.hpp"
#include "vbforge/digest.hpp"
#include "vbforge/errors.hpp"
#include "vbforge/parallel.hpp"
#include "vbforge/random.hpp"

namespace vbforge {

struct Fraction {
    std::uint64_t num = 1;
    std::uint64_t den = 2;

    friend bool operator==(const Fraction &, const Fraction &) = default;
};

// Accepts "a/b" or a plain decimal ("0.5", "1").
inline Fraction parse_fraction(std::string_view text) {
    auto bad = [&] { return config_error("bad fraction '" + std::string(text) + "'"); };
    auto parse_uint = [&](std::string_view s) {
        if (s.empty() || !std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; })) {
            throw bad();
        }
        return std::stoull(std::string(s));
    };
    Fraction f;
    if (auto slash = text.find('/'); slash != std::string_view::npos) {
        f = {parse_uint(text.substr(0, slash)), parse_uint(text.substr(slash + 1))};
    } else if (auto dot = text.find('.'); dot != std::string_view::npos) {
        std::string_view whole = text.substr(0, dot);
        std::string_view frac  = text.substr(dot + 1);
        if (frac.size() > 9) {
            throw bad();
        }
        std::uint64_t den = 1;
        for (std::size_t i = 0; i < frac.size(); ++i) den *= 10;
        f = {(whole.empty() ? 0 : parse_uint(whole)) * den + (frac.empty() ? 0 : parse_uint(frac)), den};
    } else {
        f = {parse_uint(text), 1};
    }
    if (f.den == 0 || f.num > f.den) {
        throw bad();
    }
    return f;
}

inline std::string to_string(const Fraction & f) {
    return std::to_string(f.num) + "/" + std::to_string(f.den);
}

struct AllocationPolicy {
    Fraction english_fraction{1, 2};
    std::vector<LanguageTag> targets; // non-English, ordered
    std::uint64_t seed = 0;
};

// All 19 non-English registry languages, in registry order.
inline std::vector<LanguageTag> all_non_english_targets() {
    std::vector<LanguageTag> out;
    for (const auto & t : language_registry()) {
        if (!t.is_english()) {
            out.push_back(t);
        }
    }
    return out;
}

inline void validate_policy(const AllocationPolicy & p) {
    if (p.english_fraction.den == 0 || p.english_fraction.num > p.english_fraction.den) {
        throw config_error("english_fraction must lie in [0, 1]");
    }
    if (p.targets.empty()) {
        throw config_error("allocation policy has empty targets");
    }
    std::set<std::string> seen;
    for (const auto & t : p.targets) {
        if (t.is_english() || !is_registered_language(t.code)) {
            throw config_error("allocation target '" + t.code + "' must be a non-English registry language");
        }
        if (!seen.insert(t.code).second) {
            throw config_error("allocation target '" + t.code + "' listed twice");
        }
    }
}

inline std::uint64_t english_quota(std::uint64_t n, const Fraction & f) {
    // ceil(n * num / den) without overflow for realistic n
    const unsigned __int128 prod = static_cast<unsigned __int128>(n) * f.num;
    return static_cast<std::uint64_t>((prod + f.den - 1) / f.den);
}

// Seeded shuffle of the sorted ids, then contiguous slices: the first
// ceil(fraction * n) go to English, the rest are split across targets with
// the earlier targets taking the remainder.
inline std::map<std::string, LanguageTag> allocate_languages(std::span<const std::string> ids,
                                                             const AllocationPolicy & policy) {
    validate_policy(policy);
    std::vector<std::string> order(ids.begin(), ids.end());
    std::sort(order.begin(), order.end());
    if (std::adjacent_find(order.begin(), order.end()) != order.end()) {
        throw duplicate_id_error(*std::adjacent_find(order.begin(), order.end()));
    }

    rng_engine rng(policy.seed);
    seeded_shuffle(std::span<std::string>(order), rng);

    const std::uint64_t n = order.size();
    const std::uint64_t n_en = english_quota(n, policy.english_fraction);
    const std::uint64_t rest = n - n_en;
    const std::uint64_t t = policy.targets.size();

    std::map<std::string, LanguageTag> out;
    const LanguageTag english = parse_language_tag("en");
    std::size_t i = 0;
    for (; i < n_en; ++i) {
        out.emplace(order[i], english);
    }
    for (std::uint64_t k = 0; k < t; ++k) {
        const std::uint64_t share = rest / t + (k < rest % t ? 1 : 0);
        for (std::uint64_t j = 0; j < share; ++j, ++i) {
            out.emplace(order[i], policy.targets[k]);
        }
    }
    return out;
}

// Captioning prompt pools keyed by registry code.
inline const std::map<std::string, std::vector<std::string>> & template_pools() {
    static const std::map<std::string, std::vector<std::string>> pools = {
        {"en", {
            "Describe this image.",
            "What can you see in this picture?",
            "Tell me what's in this image.",
            "Explain what this image shows.",
            "Caption this image.",
            "What's happening in this picture?",
            "Provide a description of this image.",
        }},
        {"pt-PT", {
            "Descreva esta imagem.",
            "O que consegue ver nesta fotografia?",
            "Diga-me o que está nesta imagem.",
            "Explique o que esta imagem mostra.",
            "Legende esta imagem.",
            "O que se passa nesta fotografia?",
            "Forneça uma descrição desta imagem.",
        }},
        {"fr", {
            "Décrivez cette image.",
            "Que pouvez-vous voir sur cette photo?",
            "Dites-moi ce qu'il y a dans cette image.",
            "Expliquez ce que cette image montre.",
            "Légendez cette image.",
            "Que se passe-t-il sur cette photo?",
            "Fournissez une description de cette image.",
        }},
        {"nl", {
            "Beschrijf deze afbeelding.",
            "Wat zie je op deze foto?",
            "Vertel me wat er op deze afbeelding staat.",
            "Leg uit wat deze afbeelding laat zien.",
            "Onderschrift deze afbeelding.",
            "Wat gebeurt er op deze foto?",
            "Geef een beschrijving van deze afbeelding.",
        }},
        {"de", {
            "Beschreiben Sie dieses Bild.",
            "Was können Sie auf diesem Foto sehen?",
            "Sagen Sie mir, was auf diesem Bild zu sehen ist.",
            "Erklären Sie, was dieses Bild zeigt.",
            "Beschriften Sie dieses Bild.",
            "Was passiert auf diesem Foto?",
            "Geben Sie eine Beschreibung dieses Bildes.",
        }},
        {"es", {
            "Describe esta imagen.",
            "¿Qué puedes ver en esta foto?",
            "Dime qué hay en esta imagen.",
            "Explica qué muestra esta imagen.",
            "Pon un título a esta imagen.",
            "¿Qué está pasando en esta foto?",
            "Proporciona una descripción de esta imagen.",
        }},
        {"it", {
            "Descrivi questa immagine.",
            "Cosa puoi vedere in questa foto?",
            "Dimmi cosa c'è in questa immagine.",
            "Spiega cosa mostra questa immagine.",
            "Dai un titolo a questa immagine.",
            "Cosa sta succedendo in questa foto?",
            "Fornisci una descrizione di questa immagine.",
        }},
        {"ko", {
            "이 이미지를 설명해주세요.",
            "이 사진에서 무엇을 볼 수 있나요?",
            "이 이미지에 무엇이 있는지 알려주세요.",
            "이 이미지가 보여주는 것을 설명해주세요.",
            "이 이미지에 캡션을 달아주세요.",
            "이 사진에서 무슨 일이 일어나고 있나요?",
            "이 이미지에 대한 설명을 제공해주세요.",
        }},
        {"zh-Hans", {
            "描述这张图片。",
            "你能在这张照片中看到什么？",
            "告诉我这张图片里有什么。",
            "解释这张图片展示了什么。",
            "为这张图片添加说明。",
            "这张照片中发生了什么？",
            "提供这张图片的描述。",
        }},
    };
    return pools;
}

inline const std::vector<std::string> & template_pool(const LanguageTag & lang) {
    const auto & pools = template_pools();
    auto it = pools.find(lang.code);
    if (it == pools.end()) {
        throw missing_pool_error(lang.code);
    }
    return it->second;
}

inline const std::string & sample_template(const LanguageTag & lang, rng_engine & rng) {
    const auto & pool = template_pool(lang);
    return pool[static_cast<std::size_t>(uniform_below(rng, pool.size()))];
}

struct TranslationRequest {
    std::string source_text;
    std::string source_lang;
    std::string target_lang;
};

struct TranslationResult {
    std::string translated_text;
    std::optional<std::string> model;
    std::string language;
};

// A translator either returns a result or a per-item failure reason. Endpoint
// outages surface as endpoint_error.
struct TranslationReply {
    std::optional<TranslationResult> result;
    std::string failure;
};

class TranslatorClient {
public:
    virtual ~TranslatorClient() = default;
    virtual TranslationReply translate(const TranslationRequest & req) = 0;
    virtual std::string describe() const = 0;
};

// Offline translator: prefixes the text with the target code, "[de] text".
class StubTranslator : public TranslatorClient {
public:
    TranslationReply translate(const TranslationRequest & req) override {
        return {TranslationResult{tag(req.target_lang, req.source_text), "stub-translator", req.target_lang}, {}};
    }
    std::string describe() const override { return "stub"; }

    static std::string tag(std::string_view lang, std::string_view text) {
        return "[" + std::string(lang) + "] " + std::string(text);
    }
    // Inverse of tag(); nullopt when the text carries no marker.
    static std::optional<std::string> untag(std::string_view text) {
        if (text.empty() || text.front() != '[') {
            return std::nullopt;
        }
        auto close = text.find("] ");
        if (close == std::string_view::npos) {
            return std::nullopt;
        }
        return std::string(text.substr(close + 2));
    }
};

struct TranslateOptions {
    std::set<std::string> caption_blocks;
    std::uint64_t seed = 0;
    std::size_t workers = 1;
};

struct TranslatedSample {
    Sample sample;
    TranslationResult result;
    std::string source_text; // joined assistant text before translation
    bool passthrough = false;
};

struct DroppedSample {
    Sample sample;
    std::string reason;
};

struct TranslateBatchResult {
    std::vector<TranslatedSample> translated;
    std::vector<DroppedSample> dropped;
};

namespace detail {

inline std::string join_assistant(const Sample & s) {
    std::string out;
    for (const auto & t : s.turns) {
        if (t.role == Role::assistant) {
            if (!out.empty()) out.push_back('\n');
            out += t.text;
        }
    }
    return out;
}

} // namespace detail

inline std::uint64_t template_seed(std::uint64_t seed, std::string_view sample_id) {
    return derive_seed(seed, std::string("template:") + std::string(sample_id));
}

// Output order follows the input order. English-assigned samples pass through
// without a service call; caption samples get a pooled prompt as user turn.
inline TranslateBatchResult translate_batch(TranslatorClient & client, std::span<const Sample> samples,
                                            const std::map<std::string, LanguageTag> & assignment,
                                            const TranslateOptions & opts) {
    for (const auto & s : samples) {
        if (!assignment.count(s.id)) {
            throw config_error("sample " + s.id + " has no language assignment");
        }
    }

    struct Slot {
        std::optional<TranslatedSample> ok;
        std::optional<DroppedSample> dropped;
    };
    std::vector<Slot> slots(samples.size());

    parallel_for(samples.size(), opts.workers, [&](std::size_t i) {
        const Sample & src = samples[i];
        const LanguageTag & target = assignment.at(src.id);
        const std::string source_text = detail::join_assistant(src);
        if (target.is_english()) {
            slots[i].ok = TranslatedSample{src, {source_text, std::nullopt, target.code}, source_text, true};
            return;
        }

        Sample out = src;
        const bool caption = opts.caption_blocks.count(src.block) > 0;
        if (caption) {
            try {
                rng_engine rng(template_seed(opts.seed, src.id));
                const std::string & prompt = sample_template(target, rng);
                for (auto & t : out.turns) {
                    if (t.role == Role::user) {
                        t.text = prompt;
                    }
                }
            } catch (const missing_pool_error & e) {
                slots[i].dropped = DroppedSample{src, e.what()};
                return;
            }
        }

        std::optional<std::string> model;
        for (auto & t : out.turns) {
            const bool wanted = t.role == Role::assistant || (!caption && t.role == Role::user);
            if (!wanted) {
                continue;
            }
            TranslationReply reply = client.translate({t.text, src.language.code, target.code});
            if (!reply.result) {
                slots[i].dropped = DroppedSample{src, "translation failed: " + reply.failure};
                return;
            }
            if (reply.result->language != target.code) {
                slots[i].dropped = DroppedSample{src, "translator answered in '" + reply.result->language +
                                                          "', requested '" + target.code + "'"};
                return;
            }
            if (is_blank(reply.result->translated_text)) {
                slots[i].dropped = DroppedSample{src, "translation failed: empty text"};
                return;
            }
            t.text = reply.result->translated_text;
            model = reply.result->model;
        }
        out.language = target;
        out.qe_score.reset();
        slots[i].ok = TranslatedSample{out, {detail::join_assistant(out), model, target.code}, source_text, false};
    });

    TranslateBatchResult res;
    for (auto & s : slots) {
        if (s.ok) {
            res.translated.push_back(std::move(*s.ok));
        } else {
            res.dropped.push_back(std::move(*s.dropped));
        }
    }
    return res;
}

} // namespace vbforge
