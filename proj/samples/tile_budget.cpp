// Visual token budget for a few image shapes under two encoders.

#include <iostream>

#include "vbforge/visprep.hpp"

int main() {
    using namespace vbforge;
    const EncoderSpec encoders[] = {{384, 14}, {512, 16}};
    const std::pair<int, int> sizes[] = {{640, 480}, {1024, 1024}, {1920, 1080}, {4000, 500}, {300, 2400}};
    for (const auto & enc : encoders) {
        std::cout << "encoder " << enc.resolution << "/" << enc.patch << " (" << visual_token_count(enc)
                  << " tokens per tile)\n";
        for (auto [w, h] : sizes) {
            const auto plan = plan_tiles(w, h, enc, 6);
            std::cout << "  " << w << "x" << h << " -> grid " << plan.rows << "x" << plan.cols
                      << (plan.include_thumbnail ? " + thumbnail" : "") << ", " << plan.total_tokens << " tokens\n";
        }
    }
}
