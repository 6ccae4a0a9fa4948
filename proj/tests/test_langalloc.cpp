#include <gtest/gtest.h>

#include <atomic>
#include <random>
#include <set>

#include "test_support.hpp"
#include "vbforge/langalloc.hpp"

using namespace vbforge;
using test_support::make_sample;

namespace {

std::vector<std::string> make_ids(std::size_t n, const std::string & block = "pixmo") {
    std::vector<std::string> ids;
    for (std::size_t i = 0; i < n; ++i) ids.push_back(assign_id(block, i));
    return ids;
}

AllocationPolicy default_policy(std::uint64_t seed = 42) {
    return {{1, 2}, all_non_english_targets(), seed};
}

std::map<std::string, std::uint64_t> tally(const std::map<std::string, LanguageTag> & a) {
    std::map<std::string, std::uint64_t> c;
    for (const auto & [id, lang] : a) ++c[lang.code];
    return c;
}

// Counts calls; optionally misbehaves for one target language.
class CountingTranslator : public TranslatorClient {
public:
    std::atomic<int> calls{0};
    std::string fail_lang;
    std::string wrong_lang_for;
    std::string empty_for;

    TranslationReply translate(const TranslationRequest & r) override {
        ++calls;
        if (r.target_lang == fail_lang) return {std::nullopt, "service refused"};
        if (r.target_lang == wrong_lang_for) return {TranslationResult{"text", std::nullopt, "fr"}, {}};
        if (r.target_lang == empty_for) return {TranslationResult{"  ", std::nullopt, r.target_lang}, {}};
        return {TranslationResult{StubTranslator::tag(r.target_lang, r.source_text), "m1", r.target_lang}, {}};
    }
    std::string describe() const override { return "counting"; }
};

} // namespace

TEST(Fraction, Parsing) {
    EXPECT_EQ(parse_fraction("1/2"), (Fraction{1, 2}));
    EXPECT_EQ(parse_fraction("0.5"), (Fraction{5, 10}));
    EXPECT_EQ(parse_fraction("1"), (Fraction{1, 1}));
    EXPECT_EQ(parse_fraction("0"), (Fraction{0, 1}));
    EXPECT_THROW(parse_fraction("3/2"), config_error);
    EXPECT_THROW(parse_fraction("1/0"), config_error);
    EXPECT_THROW(parse_fraction("-1/2"), config_error);
    EXPECT_THROW(parse_fraction("abc"), config_error);
}

TEST(Allocation, TargetsDefaultToNineteen) {
    const auto t = all_non_english_targets();
    EXPECT_EQ(t.size(), 19u);
    for (const auto & l : t) EXPECT_FALSE(l.is_english());
}

TEST(Allocation, EmptyInput) {
    EXPECT_TRUE(allocate_languages({}, default_policy()).empty());
}

TEST(Allocation, FortyIdsNineteenTargets) {
    const auto ids = make_ids(40);
    const auto a = allocate_languages(ids, default_policy());
    ASSERT_EQ(a.size(), 40u);
    auto c = tally(a);
    EXPECT_EQ(c["en"], 20u);
    c.erase("en");
    std::vector<std::uint64_t> counts;
    for (const auto & t : all_non_english_targets()) counts.push_back(c[t.code]);
    std::sort(counts.begin(), counts.end());
    std::vector<std::uint64_t> expect(19, 1);
    expect.back() = 2;
    EXPECT_EQ(counts, expect);
}

TEST(Allocation, FourIdsOneTarget) {
    AllocationPolicy p{{1, 2}, {parse_language_tag("de")}, 1};
    auto c = tally(allocate_languages(make_ids(4), p));
    EXPECT_EQ(c["en"], 2u);
    EXPECT_EQ(c["de"], 2u);
}

TEST(Allocation, EnglishIsCeilingAndTargetsBalanced) {
    for (std::uint64_t n : {0, 1, 2, 3, 19, 20, 39, 40, 41, 57, 1000, 1001}) {
        for (const Fraction f : {Fraction{1, 2}, Fraction{1, 3}, Fraction{0, 1}, Fraction{1, 1}, Fraction{7, 10}}) {
            AllocationPolicy p{f, all_non_english_targets(), n};
            auto c = tally(allocate_languages(make_ids(n), p));
            EXPECT_EQ(c["en"], (n * f.num + f.den - 1) / f.den) << n;
            std::uint64_t lo = UINT64_MAX, hi = 0;
            for (const auto & t : p.targets) {
                lo = std::min(lo, c[t.code]);
                hi = std::max(hi, c[t.code]);
            }
            EXPECT_LE(hi - lo, 1u) << n;
        }
    }
}

TEST(Allocation, InvariantUnderPermutation) {
    auto ids = make_ids(500);
    const auto ref = allocate_languages(ids, default_policy(9));
    std::mt19937_64 rng(1);
    for (int k = 0; k < 10; ++k) {
        std::shuffle(ids.begin(), ids.end(), rng);
        EXPECT_EQ(allocate_languages(ids, default_policy(9)), ref);
    }
}

TEST(Allocation, SeedMatters) {
    const auto ids = make_ids(200);
    EXPECT_EQ(allocate_languages(ids, default_policy(1)), allocate_languages(ids, default_policy(1)));
    EXPECT_NE(allocate_languages(ids, default_policy(1)), allocate_languages(ids, default_policy(2)));
}

TEST(Allocation, Errors) {
    AllocationPolicy empty{{1, 2}, {}, 0};
    EXPECT_THROW(allocate_languages(make_ids(3), empty), config_error);
    AllocationPolicy with_en{{1, 2}, {parse_language_tag("en")}, 0};
    EXPECT_THROW(allocate_languages(make_ids(3), with_en), config_error);
    auto ids = make_ids(3);
    ids.push_back(ids[0]);
    EXPECT_THROW(allocate_languages(ids, default_policy()), duplicate_id_error);
}

TEST(Templates, PoolsMatchPublishedPrompts) {
    const auto fixture =
        nlohmann::json::parse(test_support::read_file(VBFORGE_FIXTURE_DIR "/template_pools.json"));
    const auto & pools = template_pools();
    ASSERT_EQ(pools.size(), fixture.size());
    for (auto it = fixture.begin(); it != fixture.end(); ++it) {
        ASSERT_TRUE(pools.count(it.key())) << it.key();
        EXPECT_EQ(pools.at(it.key()), it.value().get<std::vector<std::string>>()) << it.key();
    }
    EXPECT_EQ(pools.at("en").front(), "Describe this image.");
}

TEST(Templates, DrawsStayInPoolAndCoverIt) {
    for (const auto & [code, pool] : template_pools()) {
        const auto lang = parse_language_tag(code);
        rng_engine rng(derive_seed(5, code));
        std::set<std::string> seen;
        for (int i = 0; i < 10000; ++i) {
            const auto & t = sample_template(lang, rng);
            ASSERT_NE(std::find(pool.begin(), pool.end(), t), pool.end());
            seen.insert(t);
        }
        EXPECT_EQ(seen.size(), pool.size()) << code;
    }
}

TEST(Templates, ReproducibleFromSeed) {
    const auto ko = parse_language_tag("ko");
    rng_engine a(77), b(77);
    for (int i = 0; i < 100; ++i) EXPECT_EQ(sample_template(ko, a), sample_template(ko, b));
}

TEST(Templates, MissingPool) {
    rng_engine rng(1);
    EXPECT_THROW(sample_template(parse_language_tag("uk"), rng), missing_pool_error);
    EXPECT_THROW(sample_template(parse_language_tag("pt-BR"), rng), missing_pool_error);
}

TEST(StubTranslator, ReversibleMarker) {
    StubTranslator t;
    auto r = t.translate({"hello", "en", "de"});
    ASSERT_TRUE(r.result);
    EXPECT_EQ(r.result->translated_text, "[de] hello");
    EXPECT_EQ(r.result->language, "de");
    EXPECT_EQ(StubTranslator::untag(r.result->translated_text), "hello");
    EXPECT_FALSE(StubTranslator::untag("hello"));
}

TEST(TranslateBatch, EnglishPassesThroughWithoutServiceCall) {
    CountingTranslator client;
    std::vector<Sample> samples = {make_sample("cap", 0)};
    std::map<std::string, LanguageTag> assign = {{samples[0].id, parse_language_tag("en")}};
    auto r = translate_batch(client, samples, assign, {{"cap"}, 1, 1});
    EXPECT_EQ(client.calls, 0);
    ASSERT_EQ(r.translated.size(), 1u);
    EXPECT_TRUE(r.translated[0].passthrough);
    EXPECT_EQ(r.translated[0].sample, samples[0]);
}

TEST(TranslateBatch, CaptionGetsTemplateAndTranslation) {
    CountingTranslator client;
    std::vector<Sample> samples = {make_sample("cap", 0)};
    std::map<std::string, LanguageTag> assign = {{samples[0].id, parse_language_tag("pt-PT")}};
    auto r = translate_batch(client, samples, assign, {{"cap"}, 1, 1});
    ASSERT_EQ(r.translated.size(), 1u);
    const auto & s = r.translated[0].sample;
    const auto & pool = template_pools().at("pt-PT");
    EXPECT_NE(std::find(pool.begin(), pool.end(), s.turns[0].text), pool.end());
    EXPECT_EQ(s.turns[1].text, "[pt-PT] " + samples[0].turns[1].text);
    EXPECT_EQ(s.language.code, "pt-PT");
    EXPECT_EQ(client.calls, 1); // the template is not translated
    EXPECT_EQ(r.translated[0].source_text, samples[0].turns[1].text);
    EXPECT_EQ(r.translated[0].result.model, "m1");
    EXPECT_TRUE(validate_sample(s).empty());
}

TEST(TranslateBatch, NonCaptionTranslatesEveryTurn) {
    CountingTranslator client;
    std::vector<Sample> samples = {make_sample("vid", 0, Modality::video_text)};
    std::map<std::string, LanguageTag> assign = {{samples[0].id, parse_language_tag("uk")}};
    auto r = translate_batch(client, samples, assign, {{"cap"}, 1, 1});
    ASSERT_EQ(r.translated.size(), 1u);
    EXPECT_EQ(client.calls, 2);
    EXPECT_EQ(r.translated[0].sample.turns[0].text, "[uk] " + samples[0].turns[0].text);
}

TEST(TranslateBatch, FailuresAreDroppedWithReasons) {
    CountingTranslator client;
    client.fail_lang = "de";
    client.wrong_lang_for = "es";
    client.empty_for = "it";
    std::vector<Sample> samples;
    std::map<std::string, LanguageTag> assign;
    const char * langs[] = {"de", "es", "it", "uk", "nl"};
    for (int i = 0; i < 5; ++i) {
        samples.push_back(make_sample(i == 3 ? "cap" : "vqa", i));
        assign[samples.back().id] = parse_language_tag(langs[i]);
    }
    auto r = translate_batch(client, samples, assign, {{"cap"}, 1, 1});
    ASSERT_EQ(r.dropped.size(), 4u); // de, es, it fail; uk caption has no pool
    EXPECT_EQ(r.translated.size(), 1u);
    EXPECT_EQ(r.translated[0].sample.language.code, "nl");
    EXPECT_NE(r.dropped[0].reason.find("service refused"), std::string::npos);
    EXPECT_NE(r.dropped[1].reason.find("answered in 'fr'"), std::string::npos);
    EXPECT_NE(r.dropped[2].reason.find("empty"), std::string::npos);
    EXPECT_NE(r.dropped[3].reason.find("uk"), std::string::npos);
}

TEST(TranslateBatch, MissingAssignmentIsConfigError) {
    StubTranslator client;
    std::vector<Sample> samples = {make_sample("vqa", 0)};
    EXPECT_THROW(translate_batch(client, samples, {}, {}), config_error);
}

TEST(TranslateBatch, OrderAndContentIndependentOfWorkers) {
    std::vector<Sample> samples;
    for (int i = 0; i < 300; ++i) samples.push_back(make_sample(i % 2 ? "cap" : "vqa", i));
    std::vector<std::string> ids;
    for (const auto & s : samples) ids.push_back(s.id);
    const auto assign = allocate_languages(ids, default_policy(3));
    StubTranslator client;
    const auto a = translate_batch(client, samples, assign, {{"cap"}, 3, 1});
    const auto b = translate_batch(client, samples, assign, {{"cap"}, 3, 8});
    ASSERT_EQ(a.translated.size(), b.translated.size());
    ASSERT_EQ(a.dropped.size(), b.dropped.size());
    for (std::size_t i = 0; i < a.translated.size(); ++i) {
        EXPECT_EQ(a.translated[i].sample, b.translated[i].sample);
    }
    for (std::size_t i = 0; i < a.dropped.size(); ++i) {
        EXPECT_EQ(a.dropped[i].sample.id, b.dropped[i].sample.id);
    }
}
