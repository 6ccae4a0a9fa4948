#pragma once

// Quality-estimation scoring of (source, translation) pairs through a
// pluggable scorer and the threshold gate applied to translated data.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "vbforge/digest.hpp"
#include "vbforge/errors.hpp"
#include "vbforge/parallel.hpp"

namespace vbforge {

struct FilterSpec {
    double threshold = 0.85; // kept iff score >= threshold
};

inline FilterSpec make_filter_spec(double threshold) {
    if (!(threshold >= 0.0 && threshold <= 1.0)) {
        throw config_error("QE threshold must lie in [0, 1]");
    }
    return {threshold};
}

struct ScoreInput {
    std::string sample_id;
    std::string source_text;
    std::string translated_text;
    std::string lang;
};

struct ScoredPair {
    std::string sample_id;
    std::string source_text;
    std::string translated_text;
    double score = 0.0;

    friend bool operator==(const ScoredPair &, const ScoredPair &) = default;
};

struct ScoreRequest {
    std::string source_text;
    std::string translated_text;
    std::string target_lang;
};

class ScorerClient {
public:
    virtual ~ScorerClient() = default;
    // Raw score as reported by the service; range checks happen in score_pairs.
    virtual double score(const ScoreRequest & req) = 0;
    virtual std::string describe() const = 0;
};

class StubScorer : public ScorerClient {
public:
    enum class Mode { fixed, by_length, by_digest };

    static StubScorer fixed(double value) { return StubScorer(Mode::fixed, value); }
    // shorter / longer text length
    static StubScorer by_length() { return StubScorer(Mode::by_length, 0.0); }
    // pseudo-random but reproducible score in [0, 1] from the pair contents
    static StubScorer by_digest() { return StubScorer(Mode::by_digest, 0.0); }

    double score(const ScoreRequest & req) override {
        switch (mode_) {
            case Mode::fixed:
                return value_;
            case Mode::by_length: {
                const double a = static_cast<double>(req.source_text.size());
                const double b = static_cast<double>(req.translated_text.size());
                const double hi = std::max(a, b);
                return hi == 0.0 ? 1.0 : std::min(a, b) / hi;
            }
            case Mode::by_digest: {
                std::string buf = req.source_text;
                buf.push_back('\0');
                buf += req.translated_text;
                buf.push_back('\0');
                buf += req.target_lang;
                const auto d = sha256(buf);
                const std::uint32_t v = (std::uint32_t(d[0]) << 8) | d[1];
                return static_cast<double>(v) / 65535.0;
            }
        }
        return 0.0;
    }

    std::string describe() const override {
        switch (mode_) {
            case Mode::fixed:     return "stub:fixed:" + std::to_string(value_);
            case Mode::by_length: return "stub:length";
            case Mode::by_digest: return "stub:digest";
        }
        return "stub";
    }

private:
    StubScorer(Mode m, double v) : mode_(m), value_(v) {}
    Mode mode_;
    double value_;
};

inline std::vector<ScoredPair> score_pairs(ScorerClient & client, const std::vector<ScoreInput> & pairs,
                                           std::size_t workers = 1) {
    for (const auto & p : pairs) {
        if (p.source_text.empty() || p.translated_text.empty()) {
            throw config_error("score_pairs: empty text for sample " + p.sample_id);
        }
    }
    std::vector<ScoredPair> out(pairs.size());
    parallel_for(pairs.size(), workers, [&](std::size_t i) {
        const auto & p = pairs[i];
        const double s = client.score({p.source_text, p.translated_text, p.lang});
        if (std::isnan(s) || s < 0.0 || s > 1.0) {
            throw protocol_error("scorer returned out-of-range score " + std::to_string(s) + " for sample " +
                                 p.sample_id);
        }
        out[i] = {p.sample_id, p.source_text, p.translated_text, s};
    });
    return out;
}

struct FilterResult {
    std::vector<ScoredPair> kept;
    std::vector<ScoredPair> dropped;
};

inline FilterResult filter_by_threshold(const std::vector<ScoredPair> & scored, const FilterSpec & spec) {
    FilterResult r;
    for (const auto & p : scored) {
        (p.score >= spec.threshold ? r.kept : r.dropped).push_back(p);
    }
    return r;
}

} // namespace vbforge
