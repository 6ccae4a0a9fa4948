#pragma once

// The published VisionBlocks composition: one descriptor per source block
// with its category, collection tag, modality, reporting subset, and sample
// count as printed in the dataset overview table.

#include <vector>

#include "vbforge/corpus_model.hpp"

namespace vbforge {

inline const std::vector<BlockDescriptor> & visionblocks_registry() {
    using C = CollectionTag;
    using M = Modality;
    using S = Subset;
    static const std::vector<BlockDescriptor> registry = {
        {"DVQA",                        "Chart/Plot",            C::public_data,          199995,  M::image_text, S::english},
        {"ChartQA",                     "Chart/Plot",            C::synthetic_generated,  25055,   M::image_text, S::english},
        {"PlotQA",                      "Chart/Plot",            C::public_data,          157070,  M::image_text, S::english},
        {"TabMWP",                      "Chart/Plot",            C::public_data,          22717,   M::image_text, S::english},
        {"VQAv2",                       "General VQA",           C::public_data,          428708,  M::image_text, S::english},
        {"RLAIF-4V",                    "General VQA",           C::synthetic_generated,  59408,   M::image_text, S::english},
        {"DocVQA",                      "Doc VQA",               C::synthetic_generated,  9664,    M::image_text, S::english},
        {"TextVQA",                     "Doc VQA",               C::synthetic_generated,  15690,   M::image_text, S::english},
        {"ST-VQA",                      "Doc VQA",               C::public_data,          17242,   M::image_text, S::english},
        {"PixMo-Docs",                  "Doc VQA",               C::public_data,          3634,    M::image_text, S::english},
        {"A-OKVQA",                     "Reasoning/Knowledge",   C::synthetic_generated,  11853,   M::image_text, S::english},
        {"OKVQA",                       "Reasoning/Knowledge",   C::public_data,          9009,    M::image_text, S::english},
        {"AI2D",                        "Reasoning/Knowledge",   C::public_data,          7791,    M::image_text, S::english},
        {"ScienceQA",                   "Reasoning/Knowledge",   C::public_data,          758,     M::image_text, S::english},
        {"Pangea-Cultural",             "Multilingual/Cultural", C::public_data,          55438,   M::image_text, S::multilingual},
        {"Pangea-Multi",                "Multilingual/Cultural", C::public_data,          428838,  M::image_text, S::multilingual},
        {"PixMo-Cap-Translated",        "Multilingual/Cultural", C::translated_augmented, 367779,  M::image_text, S::multilingual},
        {"CulturalGround-OE",           "Multilingual/Cultural", C::public_data,          401149,  M::image_text, S::multilingual},
        {"CulturalGround-MCQs",         "Multilingual/Cultural", C::public_data,          379834,  M::image_text, S::multilingual},
        {"IconQA",                      "Specialized VQA",       C::synthetic_generated,  19543,   M::image_text, S::english},
        {"InfographicVQA",              "Specialized VQA",       C::synthetic_generated,  2049,    M::image_text, S::english},
        {"Stratos",                     "Specialized VQA",       C::public_data,          12585,   M::image_text, S::english},
        {"TallyQA",                     "Counting/Math",         C::public_data,          98675,   M::image_text, S::english},
        {"PixMo-Count",                 "Counting/Math",         C::public_data,          8128,    M::image_text, S::english},
        {"VBlocks-PixMo-AMA",           "Vision/Text",           C::public_data,          154336,  M::image_text, S::english},
        {"VBlocks-PixMo-Cap",           "Vision/Text",           C::public_data,          702205,  M::image_text, S::english},
        {"VBlocks-PixMo-CapQA",         "Vision/Text",           C::public_data,          262862,  M::image_text, S::english},
        {"EuroBlocks-SFT",              "Vision/Text",           C::public_data,          1094265, M::text_only,  S::english},
        {"LLaVA-Video-178k-subset",     "Video/Text",            C::public_data,          697618,  M::video_text, S::english},
        {"LLaVA-Video-178k-translated", "Video/Text",            C::translated_augmented, 697617,  M::video_text, S::multilingual},
    };
    return registry;
}

} // namespace vbforge
