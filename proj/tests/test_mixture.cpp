#include <gtest/gtest.h>

#include <random>
#include <set>

#include "test_support.hpp"
#include "vbforge/mixture.hpp"
#include "vbforge/visionblocks.hpp"

using namespace vbforge;
using namespace test_support;

namespace {

BlockPool pool(const std::string & name, Modality m, std::size_t n) {
    BlockPool p;
    p.descriptor = {name, "Test", CollectionTag::public_data, n, m, Subset::english};
    for (std::size_t i = 0; i < n; ++i) p.samples.push_back(make_sample(name, i, m));
    return p;
}

std::uint64_t selected(const MixturePlan & plan, const std::string & name) {
    for (const auto & b : plan.blocks) {
        if (b.descriptor.name == name) return b.selected_ids.size();
    }
    return 0;
}

using U64Pair = std::pair<std::uint64_t, std::uint64_t>;

bool has_warning(const MixturePlan & plan, const std::string & needle) {
    return std::any_of(plan.warnings.begin(), plan.warnings.end(),
                       [&](const std::string & w) { return w.find(needle) != std::string::npos; });
}

} // namespace

TEST(Compose, AllQuotasIsUnion) {
    MixtureSpec spec;
    spec.text_only_fraction_target.reset();
    const auto plan = compose({pool("a", Modality::image_text, 30), pool("b", Modality::text_only, 20),
                               pool("c", Modality::video_text, 10)},
                              spec);
    EXPECT_EQ(plan.total(), 60u);
    EXPECT_EQ(selected(plan, "a"), 30u);
    EXPECT_EQ(selected(plan, "b"), 20u);
    EXPECT_EQ(selected(plan, "c"), 10u);
    EXPECT_TRUE(plan.warnings.empty());
}

TEST(Compose, EightHundredMultimodalTargetsTwoHundredTextOnly) {
    MixtureSpec spec;
    spec.text_only_fraction_target = 0.20;
    const auto plan = compose({pool("mm", Modality::image_text, 800), pool("txt", Modality::text_only, 400)}, spec);
    EXPECT_EQ(plan.multimodal_count, 800u);
    EXPECT_EQ(plan.text_only_count, 200u);
    EXPECT_EQ(selected(plan, "txt"), 200u);
    EXPECT_DOUBLE_EQ(plan.text_only_fraction(), 0.2);
    EXPECT_TRUE(plan.feasible);
    EXPECT_TRUE(plan.warnings.empty());
}

TEST(Compose, InfeasibleTakesAllAndWarns) {
    MixtureSpec spec;
    const auto plan = compose({pool("mm", Modality::image_text, 800), pool("txt", Modality::text_only, 50)}, spec);
    EXPECT_EQ(plan.text_only_count, 50u);
    EXPECT_FALSE(plan.feasible);
    EXPECT_EQ(format_percent(plan.text_only_fraction(), 1), "5.9%");
    EXPECT_TRUE(has_warning(plan, "realized 5.9%"));
    EXPECT_TRUE(has_warning(plan, "target 20.0%"));
}

TEST(Compose, QuotaExactnessAndShortfall) {
    MixtureSpec spec;
    spec.text_only_fraction_target.reset();
    spec.block_quotas = {{"a", 10}, {"b", 500}, {"ghost", 3}};
    const auto plan = compose({pool("a", Modality::image_text, 30), pool("b", Modality::image_text, 40)}, spec);
    EXPECT_EQ(selected(plan, "a"), 10u);
    EXPECT_EQ(selected(plan, "b"), 40u);
    EXPECT_TRUE(has_warning(plan, "quota 500 exceeds available 40"));
    EXPECT_TRUE(has_warning(plan, "unknown block 'ghost'"));
}

TEST(Compose, SubsampleIsDeterministicAndSeeded) {
    MixtureSpec spec;
    spec.text_only_fraction_target.reset();
    spec.block_quotas = {{"a", 25}};
    spec.seed = 5;
    const auto p1 = compose({pool("a", Modality::image_text, 100)}, spec);
    const auto p2 = compose({pool("a", Modality::image_text, 100)}, spec, 8);
    EXPECT_EQ(p1.blocks[0].selected_ids, p2.blocks[0].selected_ids);
    spec.seed = 6;
    const auto p3 = compose({pool("a", Modality::image_text, 100)}, spec);
    EXPECT_NE(p1.blocks[0].selected_ids, p3.blocks[0].selected_ids);
    // selections are members of the pool
    auto src = pool("a", Modality::image_text, 100);
    std::set<std::string> ids;
    for (const auto & s : src.samples) ids.insert(s.id);
    for (const auto & id : p1.blocks[0].selected_ids) EXPECT_TRUE(ids.count(id));
}

TEST(Compose, TextOnlySplitAcrossBlocksIsProportional) {
    MixtureSpec spec;
    const auto plan = compose({pool("mm", Modality::image_text, 800), pool("t1", Modality::text_only, 300),
                               pool("t2", Modality::text_only, 100)},
                              spec);
    EXPECT_EQ(selected(plan, "t1"), 150u);
    EXPECT_EQ(selected(plan, "t2"), 50u);
    EXPECT_EQ(selected(plan, "mm"), 800u);
}

TEST(Compose, RatioBoundProperty) {
    std::mt19937_64 rng(99);
    for (int trial = 0; trial < 300; ++trial) {
        const std::uint64_t m = 1 + rng() % 3000;
        const double target = static_cast<double>(rng() % 95) / 100.0;
        const std::uint64_t exact_ceil =
            static_cast<std::uint64_t>(std::ceil(target * static_cast<double>(m) / (1.0 - target)));
        const std::uint64_t text = exact_ceil + rng() % 50;
        const auto t = detail::balanced_text_only_count(m, target);
        const double realized = static_cast<double>(t) / static_cast<double>(m + t);
        ASSERT_LE(std::fabs(realized - target), 1.0 / static_cast<double>(m + t) + 1e-12)
            << m << " " << target;
        ASSERT_LE(t, text);
    }
}

TEST(Compose, RatioBoundThroughCompose) {
    for (std::size_t m : {7u, 100u, 333u, 1000u}) {
        MixtureSpec spec;
        spec.text_only_fraction_target = 0.2;
        const auto plan = compose({pool("mm", Modality::image_text, m), pool("t", Modality::text_only, m)}, spec);
        EXPECT_LE(std::fabs(plan.text_only_fraction() - 0.2), 1.0 / static_cast<double>(plan.total()));
    }
}

TEST(Compose, Errors) {
    EXPECT_THROW(compose({}, {}), empty_input_error);
    EXPECT_THROW(compose({pool("a", Modality::image_text, 0)}, {}), empty_input_error);
    EXPECT_THROW(compose({pool("a", Modality::image_text, 2), pool("a", Modality::image_text, 2)}, {}),
                 config_error);
    MixtureSpec bad;
    bad.text_only_fraction_target = 1.5;
    EXPECT_THROW(compose({pool("a", Modality::image_text, 2)}, bad), config_error);
}

TEST(Compose, ProportionalSplitSumsExactly) {
    std::mt19937_64 rng(4);
    for (int i = 0; i < 500; ++i) {
        std::vector<std::uint64_t> caps(1 + rng() % 6);
        std::uint64_t sum = 0;
        for (auto & c : caps) sum += (c = rng() % 200);
        if (sum == 0) continue;
        const std::uint64_t total = rng() % (sum + 1);
        const auto out = detail::proportional_split(total, caps);
        std::uint64_t got = 0;
        for (std::size_t k = 0; k < caps.size(); ++k) {
            ASSERT_LE(out[k], caps[k]);
            got += out[k];
        }
        ASSERT_EQ(got, total);
    }
}

TEST(Compose, SpecJsonRoundTrip) {
    MixtureSpec spec;
    spec.block_quotas = {{"a", 10}, {"b", std::nullopt}};
    spec.text_only_fraction_target = 0.25;
    spec.seed = 17;
    const auto back = mixture_spec_from_json(mixture_spec_to_json(spec));
    EXPECT_EQ(back.block_quotas, spec.block_quotas);
    EXPECT_EQ(back.text_only_fraction_target, spec.text_only_fraction_target);
    EXPECT_EQ(back.seed, 17u);
    EXPECT_THROW(mixture_spec_from_json(nlohmann::json{{"block_quotas", {{"a", -1}}}}), config_error);
}

TEST(Compose, WritesShardsWithRealizedMixture) {
    TempDir d("compose");
    MixtureSpec spec;
    spec.seed = 3;
    auto out = compose_to_shards({pool("mm", Modality::image_text, 80), pool("txt", Modality::text_only, 60)}, spec,
                                 d.path(), {"mixture", 50, 3, 2});
    EXPECT_EQ(out.manifest.total_count, 100u);
    EXPECT_TRUE(manifest_counts_consistent(out.manifest));
    EXPECT_EQ(out.manifest.config["mixture"]["realized"]["text_only_count"], 20);
    const auto back = read_shards(out.manifest, d.path());
    EXPECT_EQ(back.size(), 100u);
}

TEST(Classify, Examples) {
    BlockDescriptor b{"x", "c", CollectionTag::public_data, 0, Modality::image_text, Subset::english};
    EXPECT_EQ(classify_english_vs_multilingual(b, {{"en", 12}}), (U64Pair{12, 0}));
    EXPECT_EQ(classify_english_vs_multilingual(b, {}), (U64Pair{0, 0}));
    EXPECT_EQ(classify_english_vs_multilingual(b, {{"en", 697618}, {"de", 400000}, {"ko", 297617}}),
              (U64Pair{697618, 697617}));
}

TEST(Stats, PercentUnitsHalfUp) {
    EXPECT_EQ(percent_units(199995, 6313286, 2), 317u);
    EXPECT_EQ(percent_units(1094265, 6313286, 2), 1733u);
    EXPECT_EQ(percent_units(1, 8, 2), 1250u);
    EXPECT_EQ(percent_units(1, 800, 2), 13u);   // 0.125 rounds up
    EXPECT_EQ(percent_units(1, 3, 1), 333u);
    EXPECT_EQ(percent_units(5, 0, 2), 0u);
    EXPECT_EQ(fixed_units(317, 2), "3.17");
    EXPECT_EQ(fixed_units(5, 2), "0.05");
    EXPECT_EQ(with_thousands(6313286), "6,313,286");
    EXPECT_EQ(with_thousands(758), "758");
    EXPECT_EQ(with_thousands(83), "83");
    EXPECT_EQ(with_thousands(0), "0");
    EXPECT_EQ(with_thousands(12345), "12,345");
    EXPECT_EQ(with_thousands(1094265), "1,094,265");
    EXPECT_EQ(with_thousands(100000), "100,000");
}

TEST(Stats, RegistryFixtureMatchesBuiltIn) {
    const auto j = read_json_file(VBFORGE_DATA_DIR "/visionblocks_table6.json");
    const auto & reg = visionblocks_registry();
    ASSERT_EQ(j["blocks"].size(), reg.size());
    for (std::size_t i = 0; i < reg.size(); ++i) {
        EXPECT_EQ(block_from_json(j["blocks"][i]), reg[i]) << i;
    }
}

TEST(Stats, RegistryConservation) {
    const auto & reg = visionblocks_registry();
    const auto report = report_stats(tally_registry(reg), reg);
    EXPECT_EQ(report.rows.size(), 30u);
    std::uint64_t sum = 0;
    for (const auto & r : report.rows) sum += r.count;
    EXPECT_EQ(report.overall_total, sum);
    EXPECT_EQ(report.english_total + report.multilingual_total, report.overall_total);
    // the rows as printed sum to this figure
    EXPECT_EQ(report.overall_total, 6351515u);
    EXPECT_EQ(report.text_only_count, 1094265u);
    std::uint64_t cat_sum = 0;
    for (const auto & c : report.categories) cat_sum += c.count;
    EXPECT_EQ(cat_sum, report.overall_total);
    EXPECT_EQ(report.categories.size(), 9u);
}

TEST(Stats, VideoSubsetRows) {
    const auto & reg = visionblocks_registry();
    const auto report = report_stats(tally_registry(reg), reg);
    const auto & a = report.rows[28];
    const auto & b = report.rows[29];
    EXPECT_EQ(a.name, "LLaVA-Video-178k-subset");
    EXPECT_EQ(a.count, 697618u);
    EXPECT_EQ(b.count, 697617u);
    EXPECT_EQ(a.count + b.count, 1395235u);
}

TEST(Stats, UnregisteredBlock) {
    std::vector<BlockDescriptor> reg = {
        {"a", "c", CollectionTag::public_data, 1, Modality::image_text, Subset::english}};
    std::vector<BlockTally> t = {
        {{"zzz", "c", CollectionTag::public_data, 1, Modality::image_text, Subset::english}, 1, 1, 0}};
    EXPECT_THROW(report_stats(t, reg), unregistered_block_error);
}

TEST(Stats, TextTableAndJson) {
    std::vector<BlockDescriptor> reg = {
        {"A", "Cat1", CollectionTag::public_data, 750, Modality::image_text, Subset::english},
        {"B", "Cat1", CollectionTag::synthetic_generated, 125, Modality::text_only, Subset::english},
        {"C", "Cat2", CollectionTag::translated_augmented, 125, Modality::image_text, Subset::multilingual},
    };
    const auto r = report_stats(tally_registry(reg), reg);
    const auto text = render_stats_text(r);
    EXPECT_NE(text.find("Overall Total"), std::string::npos);
    EXPECT_NE(text.find("1,000 (100%)"), std::string::npos);
    EXPECT_NE(text.find("875 (87.5%)"), std::string::npos);
    EXPECT_NE(text.find("125 (12.50%)"), std::string::npos);
    EXPECT_NE(text.find("Text-only share: 125 samples (12.50%)"), std::string::npos);
    const auto j = stats_to_json(r);
    EXPECT_EQ(j["overall_total"], 1000);
    EXPECT_EQ(j["english_percent"], "87.5");
    EXPECT_EQ(j["multilingual_percent"], "12.5");
    EXPECT_EQ(j["blocks"][0]["percent"], "75.00");
    EXPECT_EQ(j["categories"][0]["count"], 875);
}

TEST(Stats, ManifestTalliesUseLanguageCounts) {
    ShardManifest m;
    BlockDescriptor d{"vid", "Video/Text", CollectionTag::public_data, 10, Modality::video_text, Subset::english};
    m.blocks.push_back({d, 10, {{"en", 6}, {"de", 4}}});
    m.total_count = 10;
    const auto t = tally_manifest(m);
    ASSERT_EQ(t.size(), 1u);
    EXPECT_EQ(t[0].english_count, 6u);
    EXPECT_EQ(t[0].multilingual_count, 4u);
}
