#include <doctest.h>

#include "support/gradcheck.hpp"

using namespace csdis;
using namespace csdis::testing;

TEST_CASE("layer gradients match central differences") {
    std::uint64_t seed = 11;
    for (auto kind : all_layer_kinds()) {
        const auto cases = gradient_cases(kind);
        CHECK(cases.size() >= 5);
        for (const auto& c : cases) {
            const auto r = check_layer_gradients(c, seed++);
            INFO(nn::to_string(kind), " input ", to_string(c.input));
            CHECK(r.input_error < 1e-4);
            CHECK(r.param_error < 1e-4);
        }
    }
}
