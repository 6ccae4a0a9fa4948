#pragma once

#include <atomic>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "vbforge/corpus_model.hpp"
#include "vbforge/ingest.hpp"

namespace test_support {

namespace fs = std::filesystem;
using namespace vbforge;

// Fresh directory under the build tree, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string & tag = "t") {
        static std::atomic<int> counter{0};
        path_ = fs::temp_directory_path() /
                ("vbforge-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
        fs::remove_all(path_);
        fs::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path_, ec);
    }
    TempDir(const TempDir &) = delete;
    TempDir & operator=(const TempDir &) = delete;

    const fs::path & path() const { return path_; }
    fs::path operator/(const std::string & p) const { return path_ / p; }

private:
    fs::path path_;
};

inline void write_file(const fs::path & p, const std::string & body) {
    fs::create_directories(p.parent_path());
    std::ofstream out(p, std::ios::binary);
    out << body;
}

inline std::string read_file(const fs::path & p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline Sample make_sample(const std::string & block, std::uint64_t ordinal, Modality m = Modality::image_text,
                          const std::string & lang = "en") {
    Sample s;
    s.id = assign_id(block, ordinal);
    s.block = block;
    s.modality = m;
    s.language = parse_language_tag(lang);
    s.turns = {{Role::user, "What is shown in item " + std::to_string(ordinal) + "?"},
               {Role::assistant, "A detailed answer about item " + std::to_string(ordinal) + " of " + block + "."}};
    if (m != Modality::text_only) {
        s.media_ref = "media/" + block + "/" + std::to_string(ordinal) + (m == Modality::video_text ? ".mp4" : ".jpg");
    }
    return s;
}

// Source-file line for a sample: ids are assigned by ingest, so none is written.
inline std::string source_line(const Sample & s) {
    auto j = sample_to_json(s);
    j.erase("id");
    return j.dump();
}

struct FixtureBlock {
    std::string name;
    Modality modality;
    Subset subset;
    std::uint64_t count;
    std::string lang = "en";
};

// Writes one JSONL file per block plus registry.json; returns the registry path.
inline fs::path write_fixture(const fs::path & dir, const std::vector<FixtureBlock> & blocks) {
    ordered_json reg;
    reg["blocks"] = ordered_json::array();
    for (const auto & b : blocks) {
        std::string body;
        for (std::uint64_t i = 0; i < b.count; ++i) {
            body += source_line(make_sample(b.name, i, b.modality, b.lang)) + "\n";
        }
        write_file(dir / "blocks" / (b.name + ".jsonl"), body);
        BlockDescriptor d{b.name, "Synthetic", CollectionTag::public_data, b.count, b.modality, b.subset};
        auto bj = block_to_json(d);
        bj["path"] = "blocks/" + b.name + ".jsonl";
        reg["blocks"].push_back(bj);
    }
    write_json_file(dir / "registry.json", reg);
    return dir / "registry.json";
}

// The 1,000-sample pipeline fixture: captions and video get translated, chat
// is the text-only pool.
inline std::vector<FixtureBlock> standard_blocks() {
    return {
        {"captions", Modality::image_text, Subset::english, 300},
        {"vqa", Modality::image_text, Subset::english, 250},
        {"chat", Modality::text_only, Subset::english, 300},
        {"video", Modality::video_text, Subset::english, 150},
    };
}

inline ordered_json standard_config(const std::string & out = "out") {
    ordered_json c;
    c["registry"] = "registry.json";
    c["exclusions"] = ordered_json::array();
    c["shard_size"] = 128;
    c["allocation"] = {{"blocks", {"captions", "video"}}, {"english_fraction", "1/2"}, {"targets", "all"}};
    c["translation"] = {{"caption_blocks", {"captions"}}, {"translator", "stub"}};
    c["filter"] = {{"threshold", 0.85}, {"scorer", "stub:digest"}};
    c["mixture"] = {{"text_only_fraction_target", 0.2}};
    c["seed"] = 1234;
    c["out"] = out;
    return c;
}

} // namespace test_support
