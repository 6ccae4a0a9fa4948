#pragma once

// Corpus composition against per-block quotas and a text-only share, and the
// composition statistics report (per block, per category, English vs
// multilingual subsets).

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "vbforge/corpus_model.hpp"
#include "vbforge/digest.hpp"
#include "vbforge/errors.hpp"
#include "vbforge/ingest.hpp"
#include "vbforge/parallel.hpp"
#include "vbforge/random.hpp"

namespace vbforge {

struct MixtureSpec {
    // Missing blocks and nullopt quotas mean "take all".
    std::map<std::string, std::optional<std::uint64_t>> block_quotas;
    // nullopt disables text-only balancing.
    std::optional<double> text_only_fraction_target = 0.20;
    std::uint64_t seed = 0;
};

inline void validate_mixture_spec(const MixtureSpec & spec) {
    if (spec.text_only_fraction_target) {
        const double f = *spec.text_only_fraction_target;
        if (!(f >= 0.0 && f <= 1.0)) {
            throw config_error("text_only_fraction_target must lie in [0, 1]");
        }
    }
}

inline ordered_json mixture_spec_to_json(const MixtureSpec & spec) {
    ordered_json j;
    ordered_json quotas = ordered_json::object();
    for (const auto & [name, q] : spec.block_quotas) {
        quotas[name] = q ? ordered_json(*q) : ordered_json("all");
    }
    j["block_quotas"] = std::move(quotas);
    j["text_only_fraction_target"] =
        spec.text_only_fraction_target ? ordered_json(*spec.text_only_fraction_target) : ordered_json(nullptr);
    j["seed"] = spec.seed;
    j["ratio_unit"] = "samples";
    return j;
}

template <typename Json>
MixtureSpec mixture_spec_from_json(const Json & j) {
    MixtureSpec spec;
    try {
        if (j.contains("block_quotas")) {
            for (auto it = j.at("block_quotas").begin(); it != j.at("block_quotas").end(); ++it) {
                if (it.value().is_string() && it.value().template get<std::string>() == "all") {
                    spec.block_quotas[it.key()] = std::nullopt;
                } else if (it.value().is_number_unsigned()) {
                    spec.block_quotas[it.key()] = it.value().template get<std::uint64_t>();
                } else {
                    throw config_error("quota for '" + it.key() + "' must be a nonnegative integer or \"all\"");
                }
            }
        }
        if (j.contains("text_only_fraction_target")) {
            const auto & f = j.at("text_only_fraction_target");
            spec.text_only_fraction_target =
                f.is_null() ? std::nullopt : std::optional<double>(f.template get<double>());
        }
        spec.seed = j.value("seed", std::uint64_t{0});
    } catch (const nlohmann::json::exception & e) {
        throw config_error(std::string("bad mixture spec: ") + e.what());
    }
    validate_mixture_spec(spec);
    return spec;
}

struct BlockPool {
    BlockDescriptor descriptor;
    std::vector<Sample> samples;
};

struct BlockSelection {
    BlockDescriptor descriptor;
    std::uint64_t available = 0;
    std::optional<std::uint64_t> quota;
    std::vector<std::string> selected_ids; // sorted
};

struct MixturePlan {
    std::vector<BlockSelection> blocks; // sorted by block name
    std::uint64_t multimodal_count = 0;
    std::uint64_t text_only_count = 0;
    std::optional<std::uint64_t> text_only_target_count;
    bool feasible = true;
    std::vector<std::string> warnings;

    std::uint64_t total() const { return multimodal_count + text_only_count; }
    double text_only_fraction() const {
        return total() == 0 ? 0.0 : static_cast<double>(text_only_count) / static_cast<double>(total());
    }
};

inline std::string format_percent(double fraction, int decimals) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.*f%%", decimals, fraction * 100.0);
    return buf;
}

namespace detail {

// Integer t nearest to target * m / (1 - target) measured on t / (m + t);
// ties go to the smaller t.
inline std::uint64_t balanced_text_only_count(std::uint64_t m, double target) {
    if (target <= 0.0) {
        return 0;
    }
    const double exact = target * static_cast<double>(m) / (1.0 - target);
    const auto lo = static_cast<std::uint64_t>(std::floor(exact));
    const std::uint64_t hi = lo + 1;
    auto gap = [&](std::uint64_t t) {
        const double total = static_cast<double>(m + t);
        return total == 0.0 ? target : std::fabs(static_cast<double>(t) / total - target);
    };
    return gap(hi) < gap(lo) ? hi : lo;
}

// Largest-remainder split of `total` in proportion to `caps` (sum(caps) > 0,
// total <= sum(caps)); ties go to the earlier entry.
inline std::vector<std::uint64_t> proportional_split(std::uint64_t total, const std::vector<std::uint64_t> & caps) {
    unsigned __int128 cap_sum = 0;
    for (auto c : caps) cap_sum += c;
    std::vector<std::uint64_t> out(caps.size(), 0);
    std::vector<std::pair<unsigned __int128, std::size_t>> rema;
    std::uint64_t assigned = 0;
    for (std::size_t i = 0; i < caps.size(); ++i) {
        const unsigned __int128 prod = static_cast<unsigned __int128>(total) * caps[i];
        out[i] = static_cast<std::uint64_t>(prod / cap_sum);
        assigned += out[i];
        rema.emplace_back(prod % cap_sum, i);
    }
    std::stable_sort(rema.begin(), rema.end(), [](const auto & a, const auto & b) { return a.first > b.first; });
    for (std::size_t k = 0; assigned < total; ++k) {
        const std::size_t i = rema[k % rema.size()].second;
        if (out[i] < caps[i]) {
            ++out[i];
            ++assigned;
        }
    }
    return out;
}

inline std::vector<std::string> seeded_subsample(std::vector<std::string> ids, std::uint64_t k, std::uint64_t seed) {
    std::sort(ids.begin(), ids.end());
    if (k < ids.size()) {
        rng_engine rng(seed);
        seeded_shuffle(std::span<std::string>(ids), rng);
        ids.resize(k);
        std::sort(ids.begin(), ids.end());
    }
    return ids;
}

} // namespace detail

// Multimodal blocks take min(quota, available). Text-only blocks are then
// sized so the text-only share hits the target; multimodal blocks are never
// downsampled to make room.
inline MixturePlan compose(std::vector<BlockPool> pools, const MixtureSpec & spec, std::size_t workers = 1) {
    validate_mixture_spec(spec);
    std::sort(pools.begin(), pools.end(),
              [](const BlockPool & a, const BlockPool & b) { return a.descriptor.name < b.descriptor.name; });
    for (std::size_t i = 1; i < pools.size(); ++i) {
        if (pools[i].descriptor.name == pools[i - 1].descriptor.name) {
            throw config_error("block '" + pools[i].descriptor.name + "' supplied twice");
        }
    }
    std::uint64_t grand = 0;
    for (const auto & p : pools) grand += p.samples.size();
    if (pools.empty() || grand == 0) {
        throw empty_input_error("compose: no samples in input");
    }

    MixturePlan plan;
    std::vector<std::uint64_t> take(pools.size(), 0);
    std::vector<std::size_t> text_blocks;
    std::vector<std::uint64_t> text_caps;
    for (std::size_t i = 0; i < pools.size(); ++i) {
        const auto & p = pools[i];
        const std::uint64_t available = p.samples.size();
        std::optional<std::uint64_t> quota;
        if (auto it = spec.block_quotas.find(p.descriptor.name); it != spec.block_quotas.end()) {
            quota = it->second;
        }
        if (quota && *quota > available) {
            plan.warnings.push_back("block '" + p.descriptor.name + "': quota " + std::to_string(*quota) +
                                    " exceeds available " + std::to_string(available) + ", taking all");
        }
        const std::uint64_t cap = quota ? std::min(*quota, available) : available;
        take[i] = cap;
        if (p.descriptor.modality == Modality::text_only) {
            text_blocks.push_back(i);
            text_caps.push_back(cap);
        } else {
            plan.multimodal_count += cap;
        }
    }
    for (const auto & [name, q] : spec.block_quotas) {
        bool known = std::any_of(pools.begin(), pools.end(),
                                 [&](const BlockPool & p) { return p.descriptor.name == name; });
        if (!known) {
            plan.warnings.push_back("quota names unknown block '" + name + "'");
        }
    }

    std::uint64_t text_cap_total = 0;
    for (auto c : text_caps) text_cap_total += c;

    if (spec.text_only_fraction_target) {
        const double f = *spec.text_only_fraction_target;
        std::uint64_t wanted;
        if (f >= 1.0) {
            wanted = text_cap_total;
            plan.feasible = plan.multimodal_count == 0;
        } else {
            wanted = detail::balanced_text_only_count(plan.multimodal_count, f);
            plan.feasible = wanted <= text_cap_total;
        }
        plan.text_only_target_count = wanted;
        const std::uint64_t t = std::min(wanted, text_cap_total);
        if (text_cap_total > 0) {
            auto shares = detail::proportional_split(t, text_caps);
            for (std::size_t k = 0; k < text_blocks.size(); ++k) {
                take[text_blocks[k]] = shares[k];
            }
        }
        plan.text_only_count = t;
        if (!plan.feasible) {
            const double realized = plan.total() == 0 ? 0.0
                                                      : static_cast<double>(t) / static_cast<double>(plan.total());
            plan.warnings.push_back("text-only pool too small: realized " + format_percent(realized, 1) +
                                    " against target " + format_percent(f, 1) + " (gap " +
                                    format_percent(f - realized, 1) + ")");
        }
    } else {
        plan.text_only_count = text_cap_total;
    }

    plan.blocks.resize(pools.size());
    parallel_for(pools.size(), workers, [&](std::size_t i) {
        auto & p = pools[i];
        std::vector<std::string> ids;
        ids.reserve(p.samples.size());
        for (const auto & s : p.samples) ids.push_back(s.id);
        auto & sel = plan.blocks[i];
        sel.descriptor = p.descriptor;
        sel.available = p.samples.size();
        if (auto it = spec.block_quotas.find(p.descriptor.name); it != spec.block_quotas.end()) {
            sel.quota = it->second;
        }
        sel.selected_ids = detail::seeded_subsample(std::move(ids), take[i],
                                                    derive_seed(spec.seed, "mixture:" + p.descriptor.name));
    });
    return plan;
}

inline ordered_json mixture_plan_to_json(const MixturePlan & plan, const MixtureSpec & spec) {
    ordered_json j;
    j["spec"] = mixture_spec_to_json(spec);
    ordered_json blocks = ordered_json::array();
    for (const auto & b : plan.blocks) {
        ordered_json bj;
        bj["name"]      = b.descriptor.name;
        bj["available"] = b.available;
        bj["quota"]     = b.quota ? ordered_json(*b.quota) : ordered_json("all");
        bj["realized"]  = b.selected_ids.size();
        blocks.push_back(std::move(bj));
    }
    j["blocks"] = std::move(blocks);
    ordered_json realized;
    realized["multimodal_count"] = plan.multimodal_count;
    realized["text_only_count"]  = plan.text_only_count;
    realized["text_only_target_count"] =
        plan.text_only_target_count ? ordered_json(*plan.text_only_target_count) : ordered_json(nullptr);
    realized["text_only_fraction"] = plan.text_only_fraction();
    realized["feasible"]           = plan.feasible;
    j["realized"] = std::move(realized);
    return j;
}

struct ComposeOutput {
    MixturePlan plan;
    ShardManifest manifest;
};

// Composes in-memory pools and writes the selected samples as shards. The
// manifest carries the MixtureSpec echo and realized ratios under config.mixture.
inline ComposeOutput compose_to_shards(std::vector<BlockPool> pools, const MixtureSpec & spec,
                                       const fs::path & out_dir, const ShardOptions & opts) {
    std::vector<BlockDescriptor> registry;
    std::map<std::string, const Sample *> by_id;
    for (const auto & p : pools) {
        registry.push_back(p.descriptor);
        for (const auto & s : p.samples) {
            if (s.block != p.descriptor.name) {
                throw schema_error("sample " + s.id + " of block '" + s.block + "' pooled under '" +
                                   p.descriptor.name + "'");
            }
            if (!by_id.emplace(s.id, &s).second) {
                throw duplicate_id_error(s.id);
            }
        }
    }
    std::sort(registry.begin(), registry.end(),
              [](const BlockDescriptor & a, const BlockDescriptor & b) { return a.name < b.name; });

    ComposeOutput out;
    // pools stay alive here, compose() gets its own copy
    out.plan = compose(pools, spec, opts.workers);
    std::vector<Sample> chosen;
    chosen.reserve(out.plan.total());
    for (const auto & b : out.plan.blocks) {
        for (const auto & id : b.selected_ids) {
            chosen.push_back(*by_id.at(id));
        }
    }
    out.manifest = write_shards(std::move(chosen), registry, out_dir, opts);
    out.manifest.config["mixture"] = mixture_plan_to_json(out.plan, spec);
    out.manifest.warnings = out.plan.warnings;
    return out;
}

struct ManifestInput {
    ShardManifest manifest;
    fs::path dir;
};

// compose() over shard manifests: every sample of every input joins the pool
// of its block.
inline ComposeOutput compose_manifests(const std::vector<ManifestInput> & inputs, const MixtureSpec & spec,
                                       const fs::path & out_dir, const ShardOptions & opts) {
    if (inputs.empty()) {
        throw empty_input_error("compose: no input manifests");
    }
    std::map<std::string, BlockPool> pools;
    for (const auto & in : inputs) {
        for (const auto & b : in.manifest.blocks) {
            pools[b.descriptor.name].descriptor = b.descriptor;
        }
        for (auto & s : read_shards(in.manifest, in.dir)) {
            auto it = pools.find(s.block);
            if (it == pools.end()) {
                throw unregistered_block_error(s.block);
            }
            it->second.samples.push_back(std::move(s));
        }
    }
    std::vector<BlockPool> list;
    for (auto & [name, p] : pools) list.push_back(std::move(p));
    return compose_to_shards(std::move(list), spec, out_dir, opts);
}

// ---------------------------------------------------------------------------
// statistics

struct BlockTally {
    BlockDescriptor descriptor;
    std::uint64_t count = 0;
    std::uint64_t english_count = 0;
    std::uint64_t multilingual_count = 0;
};

inline std::pair<std::uint64_t, std::uint64_t>
classify_english_vs_multilingual(const BlockDescriptor & /*block*/,
                                 const std::map<std::string, std::uint64_t> & language_counts) {
    std::uint64_t en = 0;
    std::uint64_t multi = 0;
    for (const auto & [code, n] : language_counts) {
        (code == "en" ? en : multi) += n;
    }
    return {en, multi};
}

// Registry-only tallies: declared counts, subset from the descriptor.
inline std::vector<BlockTally> tally_registry(std::span<const BlockDescriptor> registry) {
    std::vector<BlockTally> out;
    for (const auto & b : registry) {
        const bool en = b.subset == Subset::english;
        out.push_back({b, b.declared_count, en ? b.declared_count : 0, en ? 0 : b.declared_count});
    }
    return out;
}

inline std::vector<BlockTally> tally_manifest(const ShardManifest & m) {
    std::vector<BlockTally> out;
    for (const auto & b : m.blocks) {
        auto [en, multi] = classify_english_vs_multilingual(b.descriptor, b.language_counts);
        out.push_back({b.descriptor, b.realized_count, en, multi});
    }
    return out;
}

// Exact half-up rounding of 100 * count / total at `decimals` places, returned
// as an integer in units of 10^-decimals percent.
inline std::uint64_t percent_units(std::uint64_t count, std::uint64_t total, int decimals) {
    if (total == 0) {
        return 0;
    }
    unsigned __int128 scale = 100;
    for (int i = 0; i < decimals; ++i) scale *= 10;
    const unsigned __int128 num = static_cast<unsigned __int128>(count) * scale;
    return static_cast<std::uint64_t>((2 * num + total) / (2 * static_cast<unsigned __int128>(total)));
}

struct StatsRow {
    std::string name;
    std::string category;
    CollectionTag tag = CollectionTag::public_data;
    std::uint64_t count = 0;
    std::uint64_t percent_centi = 0; // hundredths of a percent
};

struct CategoryTotal {
    std::string category;
    std::uint64_t count = 0;
    std::uint64_t percent_centi = 0;
};

struct StatsReport {
    std::vector<StatsRow> rows;            // input order
    std::vector<CategoryTotal> categories; // first-appearance order
    std::uint64_t english_total = 0;
    std::uint64_t multilingual_total = 0;
    std::uint64_t overall_total = 0;
    std::uint64_t english_percent_deci = 0;      // tenths of a percent
    std::uint64_t multilingual_percent_deci = 0;
    std::uint64_t text_only_count = 0;
    double text_only_fraction = 0.0;
};

inline StatsReport report_stats(std::span<const BlockTally> tallies, std::span<const BlockDescriptor> registry) {
    StatsReport r;
    for (const auto & t : tallies) {
        bool known = std::any_of(registry.begin(), registry.end(),
                                 [&](const BlockDescriptor & b) { return b.name == t.descriptor.name; });
        if (!known) {
            throw unregistered_block_error(t.descriptor.name);
        }
        if (t.english_count + t.multilingual_count != t.count) {
            throw schema_error("block '" + t.descriptor.name + "': English + multilingual counts != block count");
        }
        r.overall_total      += t.count;
        r.english_total      += t.english_count;
        r.multilingual_total += t.multilingual_count;
        if (t.descriptor.modality == Modality::text_only) {
            r.text_only_count += t.count;
        }
    }
    for (const auto & t : tallies) {
        r.rows.push_back({t.descriptor.name, t.descriptor.category, t.descriptor.tag, t.count,
                          percent_units(t.count, r.overall_total, 2)});
        auto it = std::find_if(r.categories.begin(), r.categories.end(),
                               [&](const CategoryTotal & c) { return c.category == t.descriptor.category; });
        if (it == r.categories.end()) {
            r.categories.push_back({t.descriptor.category, t.count, 0});
        } else {
            it->count += t.count;
        }
    }
    for (auto & c : r.categories) {
        c.percent_centi = percent_units(c.count, r.overall_total, 2);
    }
    r.english_percent_deci      = percent_units(r.english_total, r.overall_total, 1);
    r.multilingual_percent_deci = percent_units(r.multilingual_total, r.overall_total, 1);
    r.text_only_fraction = r.overall_total == 0
                               ? 0.0
                               : static_cast<double>(r.text_only_count) / static_cast<double>(r.overall_total);
    return r;
}

inline std::string with_thousands(std::uint64_t n) {
    std::string digits = std::to_string(n);
    std::string out;
    for (std::size_t i = 0; i < digits.size(); ++i) {
        if (i != 0 && (digits.size() - i) % 3 == 0) {
            out.push_back(',');
        }
        out.push_back(digits[i]);
    }
    return out;
}

inline std::string fixed_units(std::uint64_t units, int decimals) {
    std::uint64_t scale = 1;
    for (int i = 0; i < decimals; ++i) scale *= 10;
    std::string frac = std::to_string(units % scale);
    frac.insert(0, static_cast<std::size_t>(decimals) - frac.size(), '0');
    return std::to_string(units / scale) + "." + frac;
}

inline std::string render_stats_text(const StatsReport & r) {
    std::vector<std::array<std::string, 4>> lines;
    lines.push_back({"Category", "Dataset", "Samples (%)", "Tag"});
    std::string last_category;
    for (const auto & row : r.rows) {
        lines.push_back({row.category == last_category ? "" : row.category, row.name,
                         with_thousands(row.count) + " (" + fixed_units(row.percent_centi, 2) + "%)",
                         std::string(to_string(row.tag))});
        last_category = row.category;
    }
    lines.push_back({"", "Total (English)",
                     with_thousands(r.english_total) + " (" + fixed_units(r.english_percent_deci, 1) + "%)", ""});
    lines.push_back({"", "Total (Multilingual)",
                     with_thousands(r.multilingual_total) + " (" + fixed_units(r.multilingual_percent_deci, 1) + "%)",
                     ""});
    lines.push_back({"", "Overall Total",
                     with_thousands(r.overall_total) + (r.overall_total ? " (100%)" : " (0%)"), ""});

    std::array<std::size_t, 4> width{};
    for (const auto & l : lines) {
        for (std::size_t c = 0; c < 4; ++c) {
            width[c] = std::max(width[c], l[c].size());
        }
    }
    auto emit = [&](const std::array<std::string, 4> & l) {
        std::string s = l[0] + std::string(width[0] - l[0].size() + 2, ' ');
        s += l[1] + std::string(width[1] - l[1].size() + 2, ' ');
        s += std::string(width[2] - l[2].size(), ' ') + l[2] + "  ";
        s += l[3];
        while (!s.empty() && s.back() == ' ') s.pop_back();
        return s + "\n";
    };
    const std::size_t rule_len = width[0] + width[1] + width[2] + width[3] + 6;
    std::string out = emit(lines[0]) + std::string(rule_len, '-') + "\n";
    for (std::size_t i = 1; i + 3 < lines.size(); ++i) out += emit(lines[i]);
    out += std::string(rule_len, '-') + "\n";
    for (std::size_t i = lines.size() - 3; i < lines.size(); ++i) out += emit(lines[i]);
    out += "Text-only share: " + with_thousands(r.text_only_count) + " samples (" +
           format_percent(r.text_only_fraction, 2) + ")\n";
    return out;
}

inline ordered_json stats_to_json(const StatsReport & r) {
    ordered_json j;
    ordered_json rows = ordered_json::array();
    for (const auto & row : r.rows) {
        ordered_json rj;
        rj["name"]     = row.name;
        rj["category"] = row.category;
        rj["tag"]      = to_string(row.tag);
        rj["count"]    = row.count;
        rj["percent"]  = fixed_units(row.percent_centi, 2);
        rows.push_back(std::move(rj));
    }
    j["blocks"] = std::move(rows);
    ordered_json cats = ordered_json::array();
    for (const auto & c : r.categories) {
        cats.push_back({{"category", c.category}, {"count", c.count}, {"percent", fixed_units(c.percent_centi, 2)}});
    }
    j["categories"]           = std::move(cats);
    j["english_total"]        = r.english_total;
    j["english_percent"]      = fixed_units(r.english_percent_deci, 1);
    j["multilingual_total"]   = r.multilingual_total;
    j["multilingual_percent"] = fixed_units(r.multilingual_percent_deci, 1);
    j["overall_total"]        = r.overall_total;
    j["text_only_count"]      = r.text_only_count;
    j["text_only_fraction"]   = r.text_only_fraction;
    return j;
}

} // namespace vbforge
