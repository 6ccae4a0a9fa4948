// vbforge: corpus pipeline driver.
//
//   vbforge run --config pipeline.json [--workers 8] [--out DIR]
//   vbforge stats out/compose/manifest.json
//   vbforge tileplan 1024 1024 --encoder 512/16 --max-tiles 4
//   vbforge recipe all --out plans/

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "vbforge/pipeline.hpp"

namespace fs = std::filesystem;
using namespace vbforge;

namespace {

struct Flags {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> workers;
    bool strict = false;
    bool lenient = false;
    std::string encoder;
    std::optional<std::int64_t> max_tiles;
    bool core_langs_only = false;
    bool projector_multilingual = false;
    std::string out;
};

PipelineConfig resolve_config(const Flags & f) {
    if (f.config.empty()) {
        throw config_error("--config is required for this command");
    }
    PipelineConfig c = load_config(f.config);
    if (f.seed) c.set_seed(*f.seed);
    if (f.workers) c.workers = *f.workers;
    if (f.strict) c.mode = ParseMode::strict;
    if (f.lenient) c.mode = ParseMode::lenient;
    if (!f.encoder.empty()) c.encoder = parse_encoder(f.encoder);
    if (f.max_tiles) c.max_tiles = *f.max_tiles;
    if (f.core_langs_only) c.core_langs_only = true;
    if (f.projector_multilingual) c.projector_multilingual = true;
    if (!f.out.empty()) c.out = f.out;
    apply_environment(c);
    validate_config(c);
    return c;
}

int guarded(const std::function<int()> & fn) {
    try {
        return fn();
    } catch (const std::exception & e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_code_for(e);
    }
}

std::string tile_plan_text(const TilePlan & p, std::int64_t w, std::int64_t h, const EncoderSpec & enc) {
    std::ostringstream os;
    os << "image " << w << "x" << h << ", encoder " << enc.resolution << "/" << enc.patch << "\n";
    os << "grid " << p.rows << "x" << p.cols << ", scaled " << p.scaled_size.width << "x" << p.scaled_size.height
       << " on canvas " << p.canvas_size.width << "x" << p.canvas_size.height << "\n";
    for (std::size_t i = 0; i < p.tile_boxes.size(); ++i) {
        const auto & b = p.tile_boxes[i];
        os << "  tile " << i << ": x=" << b.x << " y=" << b.y << " w=" << b.w << " h=" << b.h << "\n";
    }
    os << "thumbnail " << (p.include_thumbnail ? "yes" : "no") << "\n";
    os << "tokens " << p.tokens_per_tile << " per tile, " << p.total_tokens << " total\n";
    return os.str();
}

} // namespace

int main(int argc, char ** argv) {
    CLI::App app{"vbforge: multilingual vision-language corpus pipeline"};
    app.require_subcommand(1);
    app.fallthrough();

    Flags f;
    app.add_option("--config", f.config, "pipeline config file (JSON)");
    app.add_option("--seed", f.seed, "base seed for every seeded step");
    app.add_option("--workers", f.workers, "worker threads")->check(CLI::PositiveNumber);
    auto * strict = app.add_flag("--strict", f.strict, "reject malformed records");
    auto * lenient = app.add_flag("--lenient", f.lenient, "skip and count malformed records");
    strict->excludes(lenient);
    app.add_option("--encoder", f.encoder, "vision encoder as RES/PATCH");
    app.add_option("--max-tiles", f.max_tiles, "tile budget per image");
    app.add_flag("--core-langs-only", f.core_langs_only, "restrict stage 2 data to the core languages");
    app.add_flag("--projector-multilingual", f.projector_multilingual, "add translated captions to stage 1");
    app.add_option("--out", f.out, "output directory");

    int rc = exit_ok;
    auto stage_cmd = [&](const char * name, const char * help, Stage s) {
        app.add_subcommand(name, help)->callback([&, s] {
            rc = guarded([&] { return run_stage(s, resolve_config(f), std::cout, std::cerr); });
        });
    };
    stage_cmd("ingest", "read, validate and shard the registered blocks", Stage::ingest);
    stage_cmd("allocate", "assign target languages to the translation blocks", Stage::allocate);
    stage_cmd("translate", "translate allocated samples", Stage::translate);
    stage_cmd("filter", "score translations and gate them on the QE threshold", Stage::filter);
    stage_cmd("compose", "compose the final mixture", Stage::compose);

    app.add_subcommand("run", "run every stage in order")->callback([&] {
        rc = guarded([&] { return run_pipeline(resolve_config(f), std::cout, std::cerr); });
    });

    std::string stats_path;
    bool stats_json = false;
    auto * stats = app.add_subcommand("stats", "corpus statistics for a manifest or block registry");
    stats->add_option("path", stats_path, "manifest.json or registry file");
    stats->add_flag("--json", stats_json, "print JSON instead of the text table");
    stats->callback([&] {
        rc = guarded([&] {
            std::optional<PipelineConfig> c;
            if (stats_path.empty()) {
                c = resolve_config(f);
                return run_stage(Stage::stats, *c, std::cout, std::cerr);
            }
            auto report = stats_from_file(stats_path);
            std::cout << (stats_json ? stats_to_json(report).dump(2) + "\n" : render_stats_text(report));
            if (!f.out.empty()) {
                fs::create_directories(f.out);
                write_stats(report, f.out);
                write_json_file(fs::path(f.out) / "effective_config.json",
                                {{"command", "stats"}, {"input", stats_path}, {"tool_version", k_tool_version}});
            }
            return int(exit_ok);
        });
    });

    std::int64_t tw = 0, th = 0;
    bool tile_text = false;
    auto * tile = app.add_subcommand("tileplan", "print the tile plan for one image size");
    tile->add_option("width", tw)->required();
    tile->add_option("height", th)->required();
    tile->add_flag("--text", tile_text, "human-readable output");
    tile->callback([&] {
        rc = guarded([&] {
            const EncoderSpec enc = f.encoder.empty() ? EncoderSpec{384, 14} : parse_encoder(f.encoder);
            const std::int64_t max_tiles = f.max_tiles.value_or(6);
            const auto plan = plan_tiles(tw, th, enc, max_tiles);
            if (tile_text) {
                std::cout << tile_plan_text(plan, tw, th, enc);
            } else {
                ordered_json j;
                j["effective_config"] = {{"width", tw},
                                         {"height", th},
                                         {"encoder", std::to_string(enc.resolution) + "/" + std::to_string(enc.patch)},
                                         {"max_tiles", max_tiles}};
                j["plan"] = tile_plan_to_json(plan);
                std::cout << j.dump(2) << "\n";
            }
            return int(exit_ok);
        });
    });

    std::string stage_arg = "all";
    auto * recipe = app.add_subcommand("recipe", "emit training stage plans");
    recipe->add_option("stage", stage_arg, "1, 2, 3 or all");
    recipe->callback([&] {
        rc = guarded([&] {
            RecipeOptions opts;
            if (!f.config.empty()) {
                const auto c = resolve_config(f);
                opts.encoder = c.encoder;
                opts.max_tiles = c.max_tiles;
                opts.core_languages_only = c.core_langs_only;
                opts.projector_multilingual = c.projector_multilingual;
                opts.stage2_exclude_pixmo_cap = c.stage2_exclude_pixmo_cap;
            } else {
                if (!f.encoder.empty()) opts.encoder = parse_encoder(f.encoder);
                if (f.max_tiles) opts.max_tiles = *f.max_tiles;
                opts.core_languages_only = f.core_langs_only;
                opts.projector_multilingual = f.projector_multilingual;
            }
            if (opts.max_tiles < 1) throw config_error("max_tiles must be >= 1");

            std::vector<int> ids;
            if (stage_arg == "all") {
                ids = {1, 2, 3};
            } else {
                try {
                    std::size_t used = 0;
                    ids = {std::stoi(stage_arg, &used)};
                    if (used != stage_arg.size()) throw std::invalid_argument(stage_arg);
                } catch (const std::logic_error &) {
                    throw config_error("stage must be 1, 2, 3 or all, got '" + stage_arg + "'");
                }
            }
            std::vector<StagePlan> plans;
            for (int id : ids) plans.push_back(emit_stage_plan(id, opts));

            const auto & reg = visionblocks_registry();
            const auto violations = validate_sequence(plans, reg);
            for (const auto & v : violations) std::cerr << "violation: " << v << "\n";

            ordered_json eff;
            eff["stages"] = ids;
            eff["encoder"] = std::to_string(opts.encoder.resolution) + "/" + std::to_string(opts.encoder.patch);
            eff["max_tiles"] = opts.max_tiles;
            eff["video_frames"] = opts.video_frames;
            eff["core_langs_only"] = opts.core_languages_only;
            eff["projector_multilingual"] = opts.projector_multilingual;
            eff["stage2_exclude_pixmo_cap"] = opts.stage2_exclude_pixmo_cap;
            eff["tool_version"] = k_tool_version;

            if (f.out.empty()) {
                ordered_json all = ordered_json::array();
                for (const auto & p : plans) all.push_back(stage_plan_to_json(p));
                std::cout << ordered_json({{"effective_config", eff}, {"stages", all}}).dump(2) << "\n";
            } else {
                fs::create_directories(f.out);
                for (const auto & p : plans) {
                    const auto file = fs::path(f.out) / ("stage" + std::to_string(p.stage_id) + ".json");
                    write_json_file(file, stage_plan_to_json(p));
                    std::cout << file.string() << "\n";
                }
                write_json_file(fs::path(f.out) / "effective_config.json", eff);
            }
            return violations.empty() ? int(exit_ok) : int(exit_data_failure);
        });
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp & e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp & e) {
        return app.exit(e);
    } catch (const CLI::ParseError & e) {
        app.exit(e);
        return exit_usage;
    }
    return rc;
}
