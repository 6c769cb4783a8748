#include <doctest.h>

#include "unloc/gradcheck_registry.hpp"

#include <set>

using namespace unloc;

TEST_CASE("gradcheck registry") {
    const auto& reg = gradcheck_registry();
    CHECK(reg.size() >= 12);
    std::set<std::string> names;
    for (const GradCheckEntry& e : reg) names.insert(e.name);
    CHECK(names.size() == reg.size());
    for (const GradCheckEntry& e : reg) {
        const GradCheckRecord rec = run_gradcheck(e);
        INFO(format_record(rec));
        CHECK(rec.passed);
        CHECK(rec.result.coords_checked > 0);
    }
}

TEST_CASE("sign-flip fixture fails and names its module") {
    const GradCheckRecord rec = run_gradcheck(sign_flip_fixture());
    CHECK_FALSE(rec.passed);
    CHECK(rec.result.max_rel_error > 1.0);
    CHECK(rec.name.find("linear") != std::string::npos);
    CHECK(format_record(rec).rfind("FAIL", 0) == 0);
}

TEST_CASE("entries are deterministic") {
    const GradCheckEntry& e = gradcheck_registry()[1];
    CHECK(run_gradcheck(e).result.max_rel_error == run_gradcheck(e).result.max_rel_error);
}
