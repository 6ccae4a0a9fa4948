#pragma once

// Source block ingestion, deterministic sample ids, and checksummed shards.

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "vbforge/corpus_model.hpp"
#include "vbforge/digest.hpp"
#include "vbforge/errors.hpp"
#include "vbforge/parallel.hpp"
#include "vbforge/version.hpp"

namespace vbforge {

namespace fs = std::filesystem;

// Hex width of sample ids (128 bits of the digest).
inline constexpr std::size_t k_sample_id_hex_width = 32;

inline std::string assign_id(std::string_view block_name, std::uint64_t ordinal) {
    std::string buf(block_name);
    buf.push_back('\0');
    buf.append(std::to_string(ordinal));
    return sha256_hex(buf).substr(0, k_sample_id_hex_width);
}

// Streams validated samples out of one JSONL block file, in file order.
class BlockReader {
public:
    BlockReader(const fs::path & path, BlockDescriptor desc, ParseMode mode)
        : in_(path), path_(path), desc_(std::move(desc)), mode_(mode) {
        if (!in_) {
            throw io_error("cannot open block file " + path.string());
        }
    }

    std::optional<Sample> next() {
        std::string line;
        while (std::getline(in_, line)) {
            ++line_no_;
            if (is_blank(line)) {
                continue;
            }
            const std::uint64_t ordinal = ordinal_++;
            try {
                SampleDefaults defaults{assign_id(desc_.name, ordinal), desc_.name, desc_.modality};
                Sample s = parse_sample(line, mode_, &defaults);
                s.id = defaults.id;
                if (s.block != desc_.name) {
                    throw schema_error("record block '" + s.block + "' does not match '" + desc_.name + "'");
                }
                if (s.modality != desc_.modality) {
                    throw schema_error("record modality '" + std::string(to_string(s.modality)) +
                                       "' does not match block modality");
                }
                auto violations = validate_sample(s);
                if (!violations.empty()) {
                    throw schema_error("invalid sample: " + violations.front());
                }
                ++realized_;
                return s;
            } catch (const schema_error & e) {
                if (mode_ == ParseMode::strict) {
                    throw schema_error(path_.string() + ": " + e.what(), line_no_);
                }
                ++skipped_;
            }
        }
        if (in_.bad()) {
            throw io_error("read failure on " + path_.string());
        }
        return std::nullopt;
    }

    std::uint64_t realized_count() const { return realized_; }
    std::uint64_t skipped_count() const { return skipped_; }
    const BlockDescriptor & descriptor() const { return desc_; }

    // Meaningful once the stream is exhausted.
    std::optional<std::string> count_warning() const {
        if (realized_ == desc_.declared_count) {
            return std::nullopt;
        }
        return "block '" + desc_.name + "': realized " + std::to_string(realized_) + " samples, declared " +
               std::to_string(desc_.declared_count);
    }

private:
    std::ifstream in_;
    fs::path path_;
    BlockDescriptor desc_;
    ParseMode mode_;
    std::size_t line_no_ = 0;
    std::uint64_t ordinal_ = 0;
    std::uint64_t realized_ = 0;
    std::uint64_t skipped_ = 0;
};

struct BlockReadResult {
    std::vector<Sample> samples;
    std::uint64_t skipped = 0;
    std::vector<std::string> warnings;
};

inline BlockReadResult read_block(const fs::path & path, const BlockDescriptor & desc, ParseMode mode) {
    BlockReader reader(path, desc, mode);
    BlockReadResult out;
    while (auto s = reader.next()) {
        out.samples.push_back(std::move(*s));
    }
    out.skipped = reader.skipped_count();
    if (auto w = reader.count_warning()) {
        out.warnings.push_back(*w);
    }
    if (out.skipped) {
        out.warnings.push_back("block '" + desc.name + "': skipped " + std::to_string(out.skipped) +
                               " malformed records");
    }
    return out;
}

inline const std::vector<std::string> & default_exclusions() {
    static const std::vector<std::string> names = {"AndroidControl", "Points", "PointQA"};
    return names;
}

struct ExclusionResult {
    std::vector<BlockDescriptor> registry;
    std::vector<std::string> warnings;
};

inline ExclusionResult apply_exclusions(std::span<const BlockDescriptor> registry,
                                        std::span<const std::string> exclusions) {
    ExclusionResult out;
    for (const auto & b : registry) {
        if (std::find(exclusions.begin(), exclusions.end(), b.name) == exclusions.end()) {
            out.registry.push_back(b);
        }
    }
    for (const auto & name : exclusions) {
        bool present = std::any_of(registry.begin(), registry.end(),
                                   [&](const BlockDescriptor & b) { return b.name == name; });
        if (!present) {
            out.warnings.push_back("exclusion '" + name + "' names no registered block");
        }
    }
    return out;
}

struct BlockCount {
    BlockDescriptor descriptor;
    std::uint64_t realized_count = 0;
    std::map<std::string, std::uint64_t> language_counts;

    friend bool operator==(const BlockCount &, const BlockCount &) = default;
};

struct ShardInfo {
    std::string path; // relative to the manifest directory
    std::uint64_t sample_count = 0;
    std::string digest;

    friend bool operator==(const ShardInfo &, const ShardInfo &) = default;
};

struct ShardManifest {
    std::vector<BlockCount> blocks;
    std::vector<ShardInfo> shards;
    std::uint64_t total_count = 0;
    std::uint64_t seed = 0;
    std::string tool_version{k_tool_version};
    std::string digest_algorithm{k_digest_algorithm};
    bool complete = true;
    std::vector<std::string> warnings;
    // Free-form echo of the specs that produced this manifest.
    ordered_json config = ordered_json::object();
};

// Checks total_count = sum of realized counts = sum of shard counts.
inline bool manifest_counts_consistent(const ShardManifest & m) {
    std::uint64_t by_block = 0;
    std::uint64_t by_shard = 0;
    for (const auto & b : m.blocks) {
        by_block += b.realized_count;
    }
    for (const auto & s : m.shards) {
        by_shard += s.sample_count;
    }
    return by_block == m.total_count && by_shard == m.total_count;
}

struct ShardOptions {
    std::string name = "shard";
    std::uint64_t shard_size = 1000;
    std::uint64_t seed = 0;
    std::size_t workers = 1;
};

inline std::string shard_file_name(std::string_view name, std::size_t index) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "-%05zu", index);
    return std::string(name) + buf + ".jsonl";
}

// Sorts samples by id and writes consecutive runs of at most shard_size into
// <name>-NNNNN.jsonl. Every sample's block must be in `registry`; the
// manifest lists the registry blocks in the given order.
inline ShardManifest write_shards(std::vector<Sample> samples, std::span<const BlockDescriptor> registry,
                                  const fs::path & out_dir, const ShardOptions & opts) {
    if (opts.shard_size < 1) {
        throw config_error("shard_size must be >= 1");
    }
    std::sort(samples.begin(), samples.end(), [](const Sample & a, const Sample & b) { return a.id < b.id; });
    for (std::size_t i = 1; i < samples.size(); ++i) {
        if (samples[i].id == samples[i - 1].id) {
            throw duplicate_id_error(samples[i].id);
        }
    }

    ShardManifest m;
    m.seed = opts.seed;
    std::unordered_map<std::string, std::size_t> slot;
    for (const auto & b : registry) {
        slot.emplace(b.name, m.blocks.size());
        m.blocks.push_back({b, 0, {}});
    }
    for (const auto & s : samples) {
        auto it = slot.find(s.block);
        if (it == slot.end()) {
            throw unregistered_block_error(s.block);
        }
        auto & bc = m.blocks[it->second];
        ++bc.realized_count;
        ++bc.language_counts[s.language.code];
    }
    m.total_count = samples.size();

    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) {
        throw io_error("cannot create " + out_dir.string() + ": " + ec.message());
    }

    const std::size_t n_shards = (samples.size() + opts.shard_size - 1) / opts.shard_size;
    m.shards.resize(n_shards);
    parallel_for(n_shards, opts.workers, [&](std::size_t k) {
        const std::size_t begin = k * opts.shard_size;
        const std::size_t end   = std::min<std::size_t>(begin + opts.shard_size, samples.size());
        std::string body;
        for (std::size_t i = begin; i < end; ++i) {
            body += serialize_sample(samples[i]);
            body.push_back('\n');
        }
        const std::string file = shard_file_name(opts.name, k);
        std::ofstream out(out_dir / file, std::ios::binary | std::ios::trunc);
        out.write(body.data(), static_cast<std::streamsize>(body.size()));
        if (!out) {
            throw io_error("cannot write shard " + (out_dir / file).string());
        }
        m.shards[k] = {file, end - begin, sha256_hex(body)};
    });
    return m;
}

inline ordered_json manifest_to_json(const ShardManifest & m) {
    ordered_json j;
    ordered_json blocks = ordered_json::array();
    for (const auto & b : m.blocks) {
        ordered_json bj;
        bj["descriptor"]     = block_to_json(b.descriptor);
        bj["realized_count"] = b.realized_count;
        ordered_json langs   = ordered_json::object();
        for (const auto & [code, n] : b.language_counts) {
            langs[code] = n;
        }
        bj["language_counts"] = std::move(langs);
        blocks.push_back(std::move(bj));
    }
    j["blocks"] = std::move(blocks);
    ordered_json shards = ordered_json::array();
    for (const auto & s : m.shards) {
        ordered_json sj;
        sj["path"]           = s.path;
        sj["sample_count"]   = s.sample_count;
        sj["content_digest"] = s.digest;
        shards.push_back(std::move(sj));
    }
    j["shards"]           = std::move(shards);
    j["total_count"]      = m.total_count;
    j["seed"]             = m.seed;
    j["tool_version"]     = m.tool_version;
    j["digest_algorithm"] = m.digest_algorithm;
    j["complete"]         = m.complete;
    j["warnings"]         = m.warnings;
    j["config"]           = m.config;
    return j;
}

inline ShardManifest manifest_from_json(const ordered_json & j) {
    ShardManifest m;
    try {
        for (const auto & bj : j.at("blocks")) {
            BlockCount bc;
            bc.descriptor     = block_from_json(bj.at("descriptor"));
            bc.realized_count = bj.at("realized_count").get<std::uint64_t>();
            if (bj.contains("language_counts")) {
                for (auto it = bj.at("language_counts").begin(); it != bj.at("language_counts").end(); ++it) {
                    bc.language_counts[it.key()] = it.value().get<std::uint64_t>();
                }
            }
            m.blocks.push_back(std::move(bc));
        }
        for (const auto & sj : j.at("shards")) {
            m.shards.push_back({sj.at("path").get<std::string>(), sj.at("sample_count").get<std::uint64_t>(),
                                sj.at("content_digest").get<std::string>()});
        }
        m.total_count      = j.at("total_count").get<std::uint64_t>();
        m.seed             = j.at("seed").get<std::uint64_t>();
        m.tool_version     = j.at("tool_version").get<std::string>();
        m.digest_algorithm = j.value("digest_algorithm", std::string(k_digest_algorithm));
        m.complete         = j.value("complete", true);
        if (j.contains("warnings")) {
            m.warnings = j.at("warnings").get<std::vector<std::string>>();
        }
        if (j.contains("config")) {
            m.config = j.at("config");
        }
    } catch (const nlohmann::json::exception & e) {
        throw schema_error(std::string("bad manifest: ") + e.what());
    }
    return m;
}

inline void write_json_file(const fs::path & path, const ordered_json & j) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << j.dump(2) << '\n';
    if (!out) {
        throw io_error("cannot write " + path.string());
    }
}

inline ordered_json read_json_file(const fs::path & path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw io_error("cannot open " + path.string());
    }
    try {
        return ordered_json::parse(in);
    } catch (const nlohmann::json::parse_error & e) {
        throw schema_error(path.string() + ": " + e.what());
    }
}

inline ShardManifest read_manifest(const fs::path & path) {
    return manifest_from_json(read_json_file(path));
}

// Loads every shard of a manifest, verifying digests and counts.
inline std::vector<Sample> read_shards(const ShardManifest & m, const fs::path & dir) {
    std::vector<Sample> out;
    out.reserve(m.total_count);
    for (const auto & shard : m.shards) {
        std::ifstream in(dir / shard.path, std::ios::binary);
        if (!in) {
            throw io_error("cannot open shard " + (dir / shard.path).string());
        }
        std::string body((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        if (sha256_hex(body) != shard.digest) {
            throw io_error("digest mismatch for shard " + shard.path);
        }
        std::size_t count = 0;
        std::size_t line_no = 0;
        std::size_t pos = 0;
        while (pos < body.size()) {
            std::size_t nl = body.find('\n', pos);
            if (nl == std::string::npos) {
                nl = body.size();
            }
            ++line_no;
            std::string_view line(body.data() + pos, nl - pos);
            if (!is_blank(line)) {
                try {
                    out.push_back(parse_sample(line, ParseMode::lenient));
                } catch (const schema_error & e) {
                    throw schema_error(shard.path + ": " + e.what(), line_no);
                }
                ++count;
            }
            pos = nl + 1;
        }
        if (count != shard.sample_count) {
            throw io_error("shard " + shard.path + " holds " + std::to_string(count) + " samples, manifest says " +
                           std::to_string(shard.sample_count));
        }
    }
    return out;
}

} // namespace vbforge
