#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "modrwkv/core/rng.hpp"
#include "modrwkv/eval/metrics.hpp"

using namespace modrwkv;

namespace {

// exhaustive edit-script search by iterative deepening: try larger budgets
// until a script converting ref into hyp fits
bool script_exists(const std::vector<std::string>& ref, const std::vector<std::string>& hyp,
                   std::size_t i, std::size_t j, int budget) {
    while (i < ref.size() && j < hyp.size() && ref[i] == hyp[j]) {
        ++i;
        ++j;
    }
    if (i == ref.size() && j == hyp.size()) return true;
    if (budget == 0) return false;
    if (i < ref.size() && j < hyp.size() &&
        script_exists(ref, hyp, i + 1, j + 1, budget - 1))
        return true;                                                      // substitute
    if (i < ref.size() && script_exists(ref, hyp, i + 1, j, budget - 1)) return true;  // delete
    if (j < hyp.size() && script_exists(ref, hyp, i, j + 1, budget - 1)) return true;  // insert
    return false;
}

std::size_t edit_distance_oracle(const std::vector<std::string>& ref,
                                 const std::vector<std::string>& hyp) {
    for (int budget = 0;; ++budget)
        if (script_exists(ref, hyp, 0, 0, budget)) return static_cast<std::size_t>(budget);
}

std::vector<std::string> nth_string(std::size_t code, std::size_t len) {
    static const std::vector<std::string> alphabet{"a", "b", "c"};
    std::vector<std::string> s;
    for (std::size_t i = 0; i < len; ++i) {
        s.push_back(alphabet[code % 3]);
        code /= 3;
    }
    return s;
}

}  // namespace

TEST_CASE("edit distance basics") {
    std::vector<std::string> x{"a", "b", "c"};
    CHECK(edit_distance(x, x).distance == 0);

    EditCounts sub = edit_distance({"a", "b", "c"}, {"a", "x", "c"});
    CHECK(sub.distance == 1);
    CHECK(sub.substitutions == 1);
    CHECK(sub.insertions == 0);
    CHECK(sub.deletions == 0);

    EditCounts del = edit_distance({"a", "b", "c"}, {"a", "c"});
    CHECK(del.distance == 1);
    CHECK(del.deletions == 1);

    EditCounts ins = edit_distance({"a", "c"}, {"a", "b", "c"});
    CHECK(ins.distance == 1);
    CHECK(ins.insertions == 1);

    CHECK(edit_distance({}, {"a", "b"}).distance == 2);
    CHECK(edit_distance({"a", "b"}, {}).distance == 2);
    CHECK(edit_distance({}, {}).distance == 0);
}

TEST_CASE("edit distance equals exhaustive edit-script search on short pairs") {
    RngStream rng(80);
    for (int trial = 0; trial < 300; ++trial) {
        const std::size_t lm = rng.uniform_index(7), ln = rng.uniform_index(7);
        std::vector<std::string> ref, hyp;
        for (std::size_t i = 0; i < lm; ++i)
            ref.push_back(std::string(1, static_cast<char>('a' + rng.uniform_index(3))));
        for (std::size_t i = 0; i < ln; ++i)
            hyp.push_back(std::string(1, static_cast<char>('a' + rng.uniform_index(3))));
        CHECK(edit_distance(ref, hyp).distance == edit_distance_oracle(ref, hyp));
    }
}

TEST_CASE("edit distance decomposition accounts for the whole distance") {
    RngStream rng(81);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<std::string> ref, hyp;
        for (std::size_t i = 0; i < rng.uniform_index(9); ++i)
            ref.push_back(std::string(1, static_cast<char>('a' + rng.uniform_index(3))));
        for (std::size_t i = 0; i < rng.uniform_index(9); ++i)
            hyp.push_back(std::string(1, static_cast<char>('a' + rng.uniform_index(3))));
        EditCounts c = edit_distance(ref, hyp);
        CHECK(c.substitutions + c.insertions + c.deletions == c.distance);
    }
}

TEST_CASE("edit distance properties: symmetry and triangle inequality") {
    RngStream rng(82);
    for (int trial = 0; trial < 100; ++trial) {
        auto mk = [&rng]() {
            std::vector<std::string> s;
            for (std::size_t i = 0; i < rng.uniform_index(8); ++i)
                s.push_back(std::string(1, static_cast<char>('a' + rng.uniform_index(3))));
            return s;
        };
        const auto a = mk(), b = mk(), c = mk();
        CHECK(edit_distance(a, b).distance == edit_distance(b, a).distance);
        CHECK(edit_distance(a, c).distance <=
              edit_distance(a, b).distance + edit_distance(b, c).distance);
    }
}

TEST_CASE("exhaustive all-pairs check over the 3-symbol alphabet, length <= 4") {
    // lengths to 4 keep this subsecond; the acceptance suite extends to 5
    std::vector<std::vector<std::string>> strings;
    for (std::size_t len = 0; len <= 4; ++len) {
        std::size_t count = 1;
        for (std::size_t i = 0; i < len; ++i) count *= 3;
        for (std::size_t code = 0; code < count; ++code) strings.push_back(nth_string(code, len));
    }
    for (const auto& a : strings)
        for (const auto& b : strings)
            REQUIRE(edit_distance(a, b).distance == edit_distance_oracle(a, b));
}

TEST_CASE("word error rate examples") {
    CHECK(word_error_rate({"the cat sat"}, {"the cat sat"}, ErrorUnit::word) == 0.0);
    CHECK(word_error_rate({"a b c d"}, {"a x c d"}, ErrorUnit::word) == 25.0);
    CHECK(word_error_rate({"abc"}, {"abd"}, ErrorUnit::chr) == doctest::Approx(100.0 / 3.0));
    CHECK_THROWS_AS(word_error_rate({""}, {"a"}, ErrorUnit::word), DomainError);
    CHECK_THROWS_AS(word_error_rate({"a", "b"}, {"a"}, ErrorUnit::word), ShapeError);
}

TEST_CASE("aggregate WER is the length-weighted mean of per-pair rates") {
    std::vector<std::string> refs{"a b c d", "x y", "p q r"};
    std::vector<std::string> hyps{"a b c d", "x z", "p q q r"};
    const double agg = word_error_rate(refs, hyps, ErrorUnit::word);
    double dist = 0.0, len = 0.0;
    for (std::size_t i = 0; i < refs.size(); ++i) {
        const auto r = tokenize(refs[i], ErrorUnit::word);
        const auto h = tokenize(hyps[i], ErrorUnit::word);
        dist += static_cast<double>(edit_distance(r, h).distance);
        len += static_cast<double>(r.size());
    }
    CHECK(agg == doctest::Approx(100.0 * dist / len).epsilon(1e-12));
}

TEST_CASE("sign test probability: identities and enumeration oracle") {
    CHECK(sign_test_probability(1, 0) == 0.0);  // the sum covers every outcome
    for (int n = 1; n <= 12; ++n) CHECK(sign_test_probability(n, 0) == 0.0);
    CHECK(sign_test_probability(2, 2) == doctest::Approx(0.75).epsilon(1e-15));

    // enumerate all 2^n sign vectors
    for (int n = 1; n <= 12; ++n) {
        for (int m = 0; m <= n; ++m) {
            std::size_t below = 0;
            for (std::size_t bits = 0; bits < (std::size_t{1} << n); ++bits) {
                int wins = 0;
                for (int i = 0; i < n; ++i)
                    if (bits & (std::size_t{1} << i)) ++wins;
                if (wins < m) ++below;
            }
            const double expect =
                static_cast<double>(below) / static_cast<double>(std::size_t{1} << n);
            CHECK(sign_test_probability(n, m) == doctest::Approx(expect).epsilon(1e-12));
        }
    }
}

TEST_CASE("sign test probability is monotone non-decreasing in m") {
    for (int n : {3, 10, 40, 63}) {
        double prev = -1.0;
        for (int m = 0; m <= n; ++m) {
            const double p = sign_test_probability(n, m);
            CHECK(p >= prev);
            prev = p;
        }
    }
    CHECK_THROWS_AS(sign_test_probability(5, 6), DomainError);
    CHECK_THROWS_AS(sign_test_probability(64, 0), DomainError);
}
