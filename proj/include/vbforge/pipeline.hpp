#pragma once

// Pipeline configuration and the per-stage commands behind the CLI:
// ingest -> allocate -> translate -> filter -> compose -> stats.
//
// Every stage reads its predecessor's outputs from the output directory, so
// each one can be rerun on its own. Stage directories hold the shards, a
// manifest.json and the effective configuration that produced them.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "vbforge/corpus_model.hpp"
#include "vbforge/endpoints.hpp"
#include "vbforge/errors.hpp"
#include "vbforge/ingest.hpp"
#include "vbforge/langalloc.hpp"
#include "vbforge/mixture.hpp"
#include "vbforge/parallel.hpp"
#include "vbforge/qe_filter.hpp"
#include "vbforge/recipe.hpp"
#include "vbforge/version.hpp"
#include "vbforge/visionblocks.hpp"
#include "vbforge/visprep.hpp"

namespace vbforge {

enum exit_code : int { exit_ok = 0, exit_data_failure = 1, exit_usage = 2 };

struct BlockSource {
    BlockDescriptor descriptor;
    std::string path;     // as written in the registry
    fs::path resolved;    // absolute
};

struct PipelineConfig {
    std::string registry;                 // registry file as written, empty if inline
    std::vector<BlockSource> blocks;
    std::vector<std::string> exclusions = default_exclusions();
    ParseMode mode = ParseMode::strict;
    std::uint64_t shard_size = 1000;

    std::vector<std::string> allocation_blocks;
    Fraction english_fraction{1, 2};
    std::vector<LanguageTag> targets = all_non_english_targets();

    std::vector<std::string> caption_blocks;
    std::string translator = "stub";
    std::string scorer = "stub:length";
    int max_retries = 2;

    FilterSpec filter;
    MixtureSpec mixture;

    EncoderSpec encoder{384, 14};
    std::int64_t max_tiles = 6;
    bool core_langs_only = false;
    bool projector_multilingual = false;
    bool stage2_exclude_pixmo_cap = false;

    std::uint64_t seed = 0;
    bool mixture_seed_explicit = false; // otherwise the mixture follows `seed`
    std::size_t workers = 1;
    fs::path out = "out";

    void set_seed(std::uint64_t s) {
        seed = s;
        if (!mixture_seed_explicit) mixture.seed = s;
    }
};

namespace detail {

inline void reject_unknown_keys(const ordered_json & j, std::initializer_list<std::string_view> allowed,
                                const std::string & where) {
    for (auto it = j.begin(); it != j.end(); ++it) {
        if (std::find(allowed.begin(), allowed.end(), it.key()) == allowed.end()) {
            throw config_error("unknown key '" + it.key() + "' in " + where);
        }
    }
}

inline std::vector<BlockSource> parse_block_sources(const ordered_json & arr, const fs::path & base) {
    if (!arr.is_array()) {
        throw config_error("'blocks' must be an array");
    }
    std::vector<BlockSource> out;
    std::set<std::string> names;
    for (const auto & bj : arr) {
        BlockSource src;
        try {
            src.descriptor = block_from_json(bj);
        } catch (const schema_error & e) {
            throw config_error(e.what());
        }
        if (!names.insert(src.descriptor.name).second) {
            throw config_error("block '" + src.descriptor.name + "' registered twice");
        }
        if (bj.contains("path")) {
            src.path = bj.at("path").get<std::string>();
            src.resolved = fs::absolute(base / src.path).lexically_normal();
        }
        out.push_back(std::move(src));
    }
    return out;
}

} // namespace detail

// Block registry file: {"blocks": [{name, category, tag, declared_count,
// modality, subset, path?}, ...]}; paths are relative to the file.
inline std::vector<BlockSource> load_registry(const fs::path & path) {
    ordered_json j;
    try {
        j = read_json_file(path);
    } catch (const error & e) {
        throw config_error(e.what());
    }
    if (!j.is_object() || !j.contains("blocks")) {
        throw config_error(path.string() + ": registry needs a 'blocks' array");
    }
    return detail::parse_block_sources(j.at("blocks"), path.parent_path());
}

inline PipelineConfig config_from_json(const ordered_json & j, const fs::path & base) {
    if (!j.is_object()) {
        throw config_error("config must be a JSON object");
    }
    detail::reject_unknown_keys(j,
                                {"registry", "blocks", "exclusions", "mode", "shard_size", "allocation", "translation",
                                 "filter", "mixture", "encoder", "max_tiles", "recipe", "seed", "workers", "out"},
                                "config");
    PipelineConfig c;
    try {
        if (j.contains("registry") && j.contains("blocks")) {
            throw config_error("config takes either 'registry' or 'blocks', not both");
        }
        if (j.contains("registry")) {
            c.registry = j.at("registry").get<std::string>();
            c.blocks = load_registry(base / c.registry);
        } else if (j.contains("blocks")) {
            c.blocks = detail::parse_block_sources(j.at("blocks"), base);
        }
        if (j.contains("exclusions")) c.exclusions = j.at("exclusions").get<std::vector<std::string>>();
        if (j.contains("mode")) {
            const auto m = j.at("mode").get<std::string>();
            if (m != "strict" && m != "lenient") throw config_error("mode must be strict or lenient");
            c.mode = m == "strict" ? ParseMode::strict : ParseMode::lenient;
        }
        if (j.contains("shard_size")) c.shard_size = j.at("shard_size").get<std::uint64_t>();
        if (c.shard_size < 1) throw config_error("shard_size must be >= 1");

        if (j.contains("allocation")) {
            const auto & a = j.at("allocation");
            detail::reject_unknown_keys(a, {"blocks", "english_fraction", "targets"}, "allocation");
            if (a.contains("blocks")) c.allocation_blocks = a.at("blocks").get<std::vector<std::string>>();
            if (a.contains("english_fraction")) {
                const auto & f = a.at("english_fraction");
                c.english_fraction = parse_fraction(f.is_string() ? f.get<std::string>() : f.dump());
            }
            if (a.contains("targets")) {
                const auto & t = a.at("targets");
                if (t.is_string() && t.get<std::string>() == "all") {
                    c.targets = all_non_english_targets();
                } else if (t.is_string() && t.get<std::string>() == "core") {
                    c.targets.clear();
                    for (const auto & code : core_language_codes()) {
                        if (code != "en") c.targets.push_back(parse_language_tag(code));
                    }
                } else {
                    c.targets.clear();
                    for (const auto & code : t.get<std::vector<std::string>>()) {
                        c.targets.push_back(parse_language_tag(code));
                    }
                }
            }
        }
        if (j.contains("translation")) {
            const auto & t = j.at("translation");
            detail::reject_unknown_keys(t, {"caption_blocks", "translator", "max_retries"}, "translation");
            if (t.contains("caption_blocks")) c.caption_blocks = t.at("caption_blocks").get<std::vector<std::string>>();
            if (t.contains("translator")) c.translator = t.at("translator").get<std::string>();
            if (t.contains("max_retries")) c.max_retries = t.at("max_retries").get<int>();
        }
        if (j.contains("filter")) {
            const auto & f = j.at("filter");
            detail::reject_unknown_keys(f, {"threshold", "scorer"}, "filter");
            if (f.contains("threshold")) c.filter = make_filter_spec(f.at("threshold").get<double>());
            if (f.contains("scorer")) c.scorer = f.at("scorer").get<std::string>();
        }
        if (j.contains("mixture")) {
            const auto & m = j.at("mixture");
            detail::reject_unknown_keys(m, {"block_quotas", "text_only_fraction_target", "seed"}, "mixture");
            c.mixture = mixture_spec_from_json(m);
        }
        if (j.contains("encoder")) c.encoder = parse_encoder(j.at("encoder").get<std::string>());
        if (j.contains("max_tiles")) c.max_tiles = j.at("max_tiles").get<std::int64_t>();
        if (j.contains("recipe")) {
            const auto & r = j.at("recipe");
            detail::reject_unknown_keys(r, {"core_langs_only", "projector_multilingual", "stage2_exclude_pixmo_cap"},
                                        "recipe");
            c.core_langs_only = r.value("core_langs_only", false);
            c.projector_multilingual = r.value("projector_multilingual", false);
            c.stage2_exclude_pixmo_cap = r.value("stage2_exclude_pixmo_cap", false);
        }
        if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
        if (j.contains("workers")) c.workers = j.at("workers").get<std::size_t>();
        if (j.contains("out")) c.out = base / j.at("out").get<std::string>();
        c.mixture_seed_explicit = j.contains("mixture") && j.at("mixture").contains("seed");
        c.set_seed(c.seed);
    } catch (const nlohmann::json::exception & e) {
        throw config_error(std::string("bad config: ") + e.what());
    } catch (const unsupported_language_error & e) {
        throw config_error(e.what());
    } catch (const schema_error & e) {
        throw config_error(e.what());
    }
    return c;
}

inline PipelineConfig load_config(const fs::path & path) {
    ordered_json j;
    try {
        j = read_json_file(path);
    } catch (const error & e) {
        throw config_error(e.what());
    }
    return config_from_json(j, fs::absolute(path).parent_path());
}

// Cross-field checks that need the whole config.
inline void validate_config(const PipelineConfig & c) {
    if (c.max_tiles < 1) throw config_error("max_tiles must be >= 1");
    if (c.workers < 1) throw config_error("workers must be >= 1");
    if (c.max_retries < 0) throw config_error("max_retries must be >= 0");
    auto registered = [&](const std::string & n) {
        return std::any_of(c.blocks.begin(), c.blocks.end(),
                           [&](const BlockSource & b) { return b.descriptor.name == n; });
    };
    for (const auto & n : c.allocation_blocks) {
        if (!registered(n)) throw config_error("allocation block '" + n + "' is not registered");
    }
    for (const auto & n : c.caption_blocks) {
        if (!registered(n)) throw config_error("caption block '" + n + "' is not registered");
    }
    AllocationPolicy p{c.english_fraction, c.targets, c.seed};
    validate_policy(p);
    validate_mixture_spec(c.mixture);
}

// Endpoints given by environment win over the config file.
inline void apply_environment(PipelineConfig & c) {
    if (const char * t = std::getenv("VBFORGE_TRANSLATOR_URL"); t && *t) c.translator = t;
    if (const char * s = std::getenv("VBFORGE_SCORER_URL"); s && *s) c.scorer = s;
}

// Every spec and the seed; leaves out worker count and output location so
// manifests do not depend on how the run was scheduled.
inline ordered_json config_echo(const PipelineConfig & c) {
    ordered_json j;
    j["registry"] = c.registry;
    ordered_json blocks = ordered_json::array();
    for (const auto & b : c.blocks) {
        ordered_json bj = block_to_json(b.descriptor);
        bj["path"] = b.path;
        blocks.push_back(std::move(bj));
    }
    j["blocks"] = std::move(blocks);
    j["exclusions"] = c.exclusions;
    j["mode"] = c.mode == ParseMode::strict ? "strict" : "lenient";
    j["shard_size"] = c.shard_size;
    ordered_json targets = ordered_json::array();
    for (const auto & t : c.targets) targets.push_back(t.code);
    j["allocation"] = {{"blocks", c.allocation_blocks},
                       {"english_fraction", to_string(c.english_fraction)},
                       {"english_rounding", "ceil"},
                       {"targets", std::move(targets)}};
    j["translation"] = {{"caption_blocks", c.caption_blocks},
                        {"translator", c.translator},
                        {"max_retries", c.max_retries},
                        {"template_pairing", "seeded per sample id; QE scores assistant text only, so templates reach the mixture only on survivors"}};
    j["filter"] = {{"threshold", c.filter.threshold}, {"comparison", ">="}, {"scorer", c.scorer}};
    j["mixture"] = mixture_spec_to_json(c.mixture);
    j["encoder"] = std::to_string(c.encoder.resolution) + "/" + std::to_string(c.encoder.patch);
    j["max_tiles"] = c.max_tiles;
    j["recipe"] = {{"core_langs_only", c.core_langs_only},
                   {"projector_multilingual", c.projector_multilingual},
                   {"stage2_exclude_pixmo_cap", c.stage2_exclude_pixmo_cap}};
    j["seed"] = c.seed;
    return j;
}

inline ordered_json effective_config(const PipelineConfig & c) {
    ordered_json j = config_echo(c);
    j["workers"] = c.workers;
    j["out"] = c.out.string();
    j["tool_version"] = k_tool_version;
    return j;
}

inline std::unique_ptr<TranslatorClient> make_translator(const PipelineConfig & c) {
    if (c.translator == "stub") {
        return std::make_unique<StubTranslator>();
    }
    return std::make_unique<HttpTranslator>(c.translator, RetryPolicy{c.max_retries});
}

inline std::unique_ptr<ScorerClient> make_scorer(const PipelineConfig & c) {
    const std::string & s = c.scorer;
    if (s == "stub:length") return std::make_unique<StubScorer>(StubScorer::by_length());
    if (s == "stub:digest") return std::make_unique<StubScorer>(StubScorer::by_digest());
    if (s.rfind("stub:fixed:", 0) == 0) {
        try {
            return std::make_unique<StubScorer>(StubScorer::fixed(std::stod(s.substr(11))));
        } catch (const std::logic_error &) {
            throw config_error("bad fixed stub scorer '" + s + "'");
        }
    }
    if (s.rfind("http://", 0) == 0) {
        return std::make_unique<HttpScorer>(s, RetryPolicy{c.max_retries});
    }
    throw config_error("unknown scorer '" + s + "'");
}

struct StagePaths {
    fs::path ingest, allocate, translate, filter_kept, filter_dropped, compose, stats;

    explicit StagePaths(const fs::path & out)
        : ingest(out / "ingest"), allocate(out / "allocate"), translate(out / "translate"),
          filter_kept(out / "filter" / "kept"), filter_dropped(out / "filter" / "dropped"),
          compose(out / "compose"), stats(out / "stats") {}
};

namespace detail {

inline void prepare_stage_dir(const fs::path & dir, const PipelineConfig & c) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw io_error("cannot create " + dir.string() + ": " + ec.message());
    write_json_file(dir / "effective_config.json", effective_config(c));
}

inline void write_text_file(const fs::path & path, const std::string & body) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << body;
    if (!out) throw io_error("cannot write " + path.string());
}

inline std::vector<BlockDescriptor> descriptors(const std::vector<BlockSource> & blocks) {
    std::vector<BlockDescriptor> out;
    for (const auto & b : blocks) out.push_back(b.descriptor);
    return out;
}

inline std::vector<BlockDescriptor> select_blocks(const ShardManifest & m, const std::vector<std::string> & names) {
    std::vector<BlockDescriptor> out;
    for (const auto & b : m.blocks) {
        if (std::find(names.begin(), names.end(), b.descriptor.name) != names.end()) {
            out.push_back(b.descriptor);
        }
    }
    return out;
}

inline bool in_list(const std::vector<std::string> & names, const std::string & n) {
    return std::find(names.begin(), names.end(), n) != names.end();
}

} // namespace detail

// ---------------------------------------------------------------------------
// stages; each throws on failure and returns its warnings

inline std::vector<std::string> stage_ingest(const PipelineConfig & c, std::ostream & log) {
    const StagePaths paths(c.out);
    detail::prepare_stage_dir(paths.ingest, c);

    const auto all = detail::descriptors(c.blocks);
    auto excl = apply_exclusions(all, c.exclusions);
    std::vector<const BlockSource *> sources;
    for (const auto & b : c.blocks) {
        if (!detail::in_list(c.exclusions, b.descriptor.name)) {
            if (b.resolved.empty()) throw config_error("block '" + b.descriptor.name + "' has no path");
            sources.push_back(&b);
        }
    }

    std::vector<BlockReadResult> reads(sources.size());
    parallel_for(sources.size(), c.workers, [&](std::size_t i) {
        reads[i] = read_block(sources[i]->resolved, sources[i]->descriptor, c.mode);
    });

    std::vector<std::string> warnings = excl.warnings;
    std::vector<Sample> samples;
    for (auto & r : reads) {
        warnings.insert(warnings.end(), r.warnings.begin(), r.warnings.end());
        std::move(r.samples.begin(), r.samples.end(), std::back_inserter(samples));
    }
    auto m = write_shards(std::move(samples), excl.registry, paths.ingest,
                          {"ingest", c.shard_size, c.seed, c.workers});
    m.config = config_echo(c);
    m.warnings = warnings;
    write_json_file(paths.ingest / "manifest.json", manifest_to_json(m));
    log << "ingest: " << m.total_count << " samples in " << m.shards.size() << " shards\n";
    return warnings;
}

inline std::vector<Sample> load_stage_samples(const fs::path & dir, ShardManifest * manifest_out = nullptr) {
    auto m = read_manifest(dir / "manifest.json");
    if (!m.complete) throw io_error(dir.string() + " holds an incomplete stage output");
    auto samples = read_shards(m, dir);
    if (manifest_out) *manifest_out = std::move(m);
    return samples;
}

inline std::map<std::string, LanguageTag> read_assignments(const fs::path & path) {
    auto j = read_json_file(path);
    std::map<std::string, LanguageTag> out;
    try {
        for (auto it = j.at("assignments").begin(); it != j.at("assignments").end(); ++it) {
            out.emplace(it.key(), parse_language_tag(it.value().get<std::string>()));
        }
    } catch (const nlohmann::json::exception & e) {
        throw schema_error(path.string() + ": " + e.what());
    }
    return out;
}

inline std::vector<std::string> stage_allocate(const PipelineConfig & c, std::ostream & log) {
    const StagePaths paths(c.out);
    auto samples = load_stage_samples(paths.ingest);
    detail::prepare_stage_dir(paths.allocate, c);

    std::vector<std::string> ids;
    for (const auto & s : samples) {
        if (detail::in_list(c.allocation_blocks, s.block)) ids.push_back(s.id);
    }
    AllocationPolicy policy{c.english_fraction, c.targets, c.seed};
    auto assignment = allocate_languages(ids, policy);

    ordered_json j;
    ordered_json targets = ordered_json::array();
    for (const auto & t : policy.targets) targets.push_back(t.code);
    j["policy"] = {{"english_fraction", to_string(policy.english_fraction)},
                   {"targets", std::move(targets)},
                   {"seed", policy.seed},
                   {"blocks", c.allocation_blocks}};
    std::map<std::string, std::uint64_t> counts;
    ordered_json a = ordered_json::object();
    for (const auto & [id, lang] : assignment) {
        a[id] = lang.code;
        ++counts[lang.code];
    }
    j["counts"] = counts;
    j["assignments"] = std::move(a);
    write_json_file(paths.allocate / "assignments.json", j);
    log << "allocate: " << assignment.size() << " samples assigned\n";
    return {};
}

inline std::vector<std::string> stage_translate(const PipelineConfig & c, std::ostream & log) {
    const StagePaths paths(c.out);
    ShardManifest ingest;
    auto samples = load_stage_samples(paths.ingest, &ingest);
    auto assignment = read_assignments(paths.allocate / "assignments.json");
    detail::prepare_stage_dir(paths.translate, c);

    std::vector<Sample> todo;
    for (auto & s : samples) {
        if (detail::in_list(c.allocation_blocks, s.block)) todo.push_back(std::move(s));
    }
    auto client = make_translator(c);
    TranslateOptions opts{std::set<std::string>(c.caption_blocks.begin(), c.caption_blocks.end()), c.seed, c.workers};
    auto res = translate_batch(*client, todo, assignment, opts);

    std::vector<Sample> out;
    std::map<std::string, ordered_json> pairs;
    for (auto & t : res.translated) {
        if (!t.passthrough) {
            ordered_json p;
            p["sample_id"] = t.sample.id;
            p["source_text"] = t.source_text;
            p["translated_text"] = t.result.translated_text;
            p["lang"] = t.result.language;
            if (t.result.model) p["model"] = *t.result.model;
            pairs.emplace(t.sample.id, std::move(p));
        }
        out.push_back(std::move(t.sample));
    }
    std::string pair_lines;
    for (const auto & [id, p] : pairs) pair_lines += p.dump() + "\n";
    detail::write_text_file(paths.translate / "pairs.jsonl", pair_lines);

    std::map<std::string, std::string> dropped;
    for (const auto & d : res.dropped) dropped.emplace(d.sample.id, d.reason);
    std::string drop_lines;
    for (const auto & [id, reason] : dropped) drop_lines += ordered_json({{"id", id}, {"reason", reason}}).dump() + "\n";
    detail::write_text_file(paths.translate / "dropped.jsonl", drop_lines);

    auto m = write_shards(std::move(out), detail::select_blocks(ingest, c.allocation_blocks), paths.translate,
                          {"translate", c.shard_size, c.seed, c.workers});
    m.config = config_echo(c);
    std::vector<std::string> warnings;
    if (!dropped.empty()) {
        warnings.push_back(std::to_string(dropped.size()) + " samples dropped during translation (see dropped.jsonl)");
    }
    m.warnings = warnings;
    write_json_file(paths.translate / "manifest.json", manifest_to_json(m));
    log << "translate: " << pairs.size() << " translated, " << (m.total_count - pairs.size()) << " kept in English, "
        << dropped.size() << " dropped\n";
    return warnings;
}

inline std::vector<std::string> stage_filter(const PipelineConfig & c, std::ostream & log) {
    const StagePaths paths(c.out);
    ShardManifest tm;
    auto samples = load_stage_samples(paths.translate, &tm);

    std::vector<ScoreInput> inputs;
    {
        std::ifstream in(paths.translate / "pairs.jsonl");
        if (!in) throw io_error("cannot open " + (paths.translate / "pairs.jsonl").string());
        std::string line;
        while (std::getline(in, line)) {
            if (is_blank(line)) continue;
            json p = json::parse(line, nullptr, false);
            if (p.is_discarded()) throw schema_error("malformed pairs.jsonl line");
            inputs.push_back({p.at("sample_id").get<std::string>(), p.at("source_text").get<std::string>(),
                              p.at("translated_text").get<std::string>(), p.at("lang").get<std::string>()});
        }
    }
    detail::prepare_stage_dir(paths.filter_kept, c);
    detail::prepare_stage_dir(paths.filter_dropped, c);

    auto scorer = make_scorer(c);
    auto scored = score_pairs(*scorer, inputs, c.workers);
    auto split = filter_by_threshold(scored, c.filter);

    std::map<std::string, double> kept_scores, dropped_scores;
    for (const auto & p : split.kept) kept_scores[p.sample_id] = p.score;
    for (const auto & p : split.dropped) dropped_scores[p.sample_id] = p.score;

    std::vector<Sample> kept, dropped;
    for (auto & s : samples) {
        if (auto it = dropped_scores.find(s.id); it != dropped_scores.end()) {
            s.qe_score = it->second;
            dropped.push_back(std::move(s));
        } else {
            if (auto k = kept_scores.find(s.id); k != kept_scores.end()) s.qe_score = k->second;
            kept.push_back(std::move(s));
        }
    }
    std::vector<BlockDescriptor> reg;
    for (const auto & b : tm.blocks) reg.push_back(b.descriptor);

    auto km = write_shards(std::move(kept), reg, paths.filter_kept, {"kept", c.shard_size, c.seed, c.workers});
    auto dm = write_shards(std::move(dropped), reg, paths.filter_dropped, {"dropped", c.shard_size, c.seed, c.workers});
    km.config = dm.config = config_echo(c);
    write_json_file(paths.filter_kept / "manifest.json", manifest_to_json(km));
    write_json_file(paths.filter_dropped / "manifest.json", manifest_to_json(dm));
    log << "filter: scored " << scored.size() << ", kept " << split.kept.size() << ", dropped " << split.dropped.size()
        << " at threshold " << c.filter.threshold << "\n";
    return {};
}

inline std::vector<std::string> stage_compose(const PipelineConfig & c, std::ostream & log) {
    const StagePaths paths(c.out);
    ShardManifest im;
    auto ingested = load_stage_samples(paths.ingest, &im);
    std::vector<Sample> kept;
    if (!c.allocation_blocks.empty()) {
        kept = load_stage_samples(paths.filter_kept);
    }
    detail::prepare_stage_dir(paths.compose, c);

    std::map<std::string, BlockPool> pools;
    for (const auto & b : im.blocks) pools[b.descriptor.name].descriptor = b.descriptor;
    for (auto & s : ingested) {
        if (!detail::in_list(c.allocation_blocks, s.block)) pools.at(s.block).samples.push_back(std::move(s));
    }
    for (auto & s : kept) {
        auto it = pools.find(s.block);
        if (it == pools.end()) throw unregistered_block_error(s.block);
        it->second.samples.push_back(std::move(s));
    }
    std::vector<BlockPool> list;
    for (auto & [name, p] : pools) list.push_back(std::move(p));

    auto out = compose_to_shards(std::move(list), c.mixture, paths.compose,
                                 {"mixture", c.shard_size, c.mixture.seed, c.workers});
    ordered_json mixture = out.manifest.config["mixture"];
    out.manifest.config = config_echo(c);
    out.manifest.config["mixture_realized"] = mixture;
    write_json_file(paths.compose / "manifest.json", manifest_to_json(out.manifest));
    log << "compose: " << out.manifest.total_count << " samples, text-only share "
        << format_percent(out.plan.text_only_fraction(), 2) << "\n";
    for (const auto & w : out.plan.warnings) log << "warning: " << w << "\n";
    return out.plan.warnings;
}

inline StatsReport stats_for_manifest(const ShardManifest & m) {
    auto tallies = tally_manifest(m);
    std::vector<BlockDescriptor> reg;
    for (const auto & b : m.blocks) reg.push_back(b.descriptor);
    return report_stats(tallies, reg);
}

inline void write_stats(const StatsReport & r, const fs::path & dir) {
    detail::write_text_file(dir / "stats.txt", render_stats_text(r));
    write_json_file(dir / "stats.json", stats_to_json(r));
}

inline std::vector<std::string> stage_stats(const PipelineConfig & c, std::ostream & log) {
    const StagePaths paths(c.out);
    auto m = read_manifest(paths.compose / "manifest.json");
    detail::prepare_stage_dir(paths.stats, c);
    auto report = stats_for_manifest(m);
    write_stats(report, paths.stats);
    log << render_stats_text(report);
    return {};
}

// Loads either a shard manifest or a block registry (declared counts).
inline StatsReport stats_from_file(const fs::path & path) {
    auto j = read_json_file(path);
    if (j.contains("shards")) {
        return stats_for_manifest(manifest_from_json(j));
    }
    if (j.contains("blocks")) {
        auto sources = detail::parse_block_sources(j.at("blocks"), path.parent_path());
        auto reg = detail::descriptors(sources);
        auto tallies = tally_registry(reg);
        return report_stats(tallies, reg);
    }
    throw schema_error(path.string() + ": neither a manifest nor a block registry");
}

// Marks a stage output incomplete when the stage fails part way.
inline void mark_incomplete(const fs::path & dir, const PipelineConfig & c, const std::string & why) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) return;
    ShardManifest m;
    m.complete = false;
    m.seed = c.seed;
    m.config = config_echo(c);
    m.warnings = {why};
    try {
        write_json_file(dir / "manifest.json", manifest_to_json(m));
    } catch (const error &) {
    }
}

inline int exit_code_for(const std::exception & e) {
    if (dynamic_cast<const config_error *>(&e) || dynamic_cast<const unknown_stage_error *>(&e)) {
        return exit_usage;
    }
    return exit_data_failure;
}

enum class Stage { ingest, allocate, translate, filter, compose, stats };

inline fs::path stage_dir(const PipelineConfig & c, Stage s) {
    const StagePaths p(c.out);
    switch (s) {
        case Stage::ingest:    return p.ingest;
        case Stage::allocate:  return p.allocate;
        case Stage::translate: return p.translate;
        case Stage::filter:    return p.filter_kept.parent_path();
        case Stage::compose:   return p.compose;
        case Stage::stats:     return p.stats;
    }
    return c.out;
}

inline int run_stage(Stage s, const PipelineConfig & c, std::ostream & log, std::ostream & err) {
    try {
        switch (s) {
            case Stage::ingest:    stage_ingest(c, log); break;
            case Stage::allocate:  stage_allocate(c, log); break;
            case Stage::translate: stage_translate(c, log); break;
            case Stage::filter:    stage_filter(c, log); break;
            case Stage::compose:   stage_compose(c, log); break;
            case Stage::stats:     stage_stats(c, log); break;
        }
        return exit_ok;
    } catch (const std::exception & e) {
        const int code = exit_code_for(e);
        err << "error: " << e.what() << "\n";
        if (code == exit_data_failure) {
            fs::path dir = stage_dir(c, s);
            if (s == Stage::filter) dir = StagePaths(c.out).filter_kept;
            mark_incomplete(dir, c, e.what());
        }
        return code;
    }
}

inline int run_pipeline(const PipelineConfig & c, std::ostream & log, std::ostream & err) {
    for (auto s : {Stage::ingest, Stage::allocate, Stage::translate, Stage::filter, Stage::compose, Stage::stats}) {
        if (c.allocation_blocks.empty() && (s == Stage::translate || s == Stage::filter)) {
            continue;
        }
        if (int rc = run_stage(s, c, log, err); rc != exit_ok) {
            return rc;
        }
    }
    return exit_ok;
}

} // namespace vbforge
