// Compose a small synthetic mixture and print the realized text-only share.

#include <iostream>

#include "vbforge/ingest.hpp"
#include "vbforge/mixture.hpp"

int main() {
    using namespace vbforge;
    auto make_pool = [](std::string name, Modality m, Subset subset, int n) {
        BlockPool p;
        p.descriptor = {name, "Demo", CollectionTag::public_data, static_cast<std::uint64_t>(n), m, subset};
        for (int i = 0; i < n; ++i) {
            Sample s;
            s.id = assign_id(name, static_cast<std::uint64_t>(i));
            s.block = name;
            s.modality = m;
            s.language = parse_language_tag("en");
            s.turns = {{Role::user, "question " + std::to_string(i)}, {Role::assistant, "answer"}};
            if (m != Modality::text_only) s.media_ref = "media/" + std::to_string(i) + ".jpg";
            p.samples.push_back(std::move(s));
        }
        return p;
    };

    std::vector<BlockPool> pools;
    pools.push_back(make_pool("captions", Modality::image_text, Subset::english, 800));
    pools.push_back(make_pool("chat", Modality::text_only, Subset::english, 400));

    MixtureSpec spec;
    spec.text_only_fraction_target = 0.20;
    spec.seed = 7;
    const auto plan = compose(pools, spec);
    std::cout << "multimodal " << plan.multimodal_count << ", text-only " << plan.text_only_count << " ("
              << format_percent(plan.text_only_fraction(), 1) << ")\n";
    for (const auto & w : plan.warnings) std::cout << "warning: " << w << "\n";
}
