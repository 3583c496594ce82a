#include "modrwkv/eval/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "modrwkv/core/errors.hpp"

namespace modrwkv {

EditCounts edit_distance(const std::vector<std::string>& ref, const std::vector<std::string>& hyp) {
    const std::size_t m = ref.size(), n = hyp.size();
    std::vector<std::vector<std::size_t>> dp(m + 1, std::vector<std::size_t>(n + 1, 0));
    for (std::size_t i = 0; i <= m; ++i) dp[i][0] = i;
    for (std::size_t j = 0; j <= n; ++j) dp[0][j] = j;
    for (std::size_t i = 1; i <= m; ++i)
        for (std::size_t j = 1; j <= n; ++j) {
            const std::size_t sub = dp[i - 1][j - 1] + (ref[i - 1] == hyp[j - 1] ? 0 : 1);
            const std::size_t del = dp[i - 1][j] + 1;
            const std::size_t ins = dp[i][j - 1] + 1;
            dp[i][j] = std::min({sub, del, ins});
        }

    EditCounts out;
    out.distance = dp[m][n];
    // traceback; ties prefer substitution, then deletion, then insertion
    std::size_t i = m, j = n;
    while (i > 0 || j > 0) {
        if (i > 0 && j > 0 &&
            dp[i][j] == dp[i - 1][j - 1] + (ref[i - 1] == hyp[j - 1] ? 0 : 1)) {
            if (ref[i - 1] != hyp[j - 1]) ++out.substitutions;
            --i;
            --j;
        } else if (i > 0 && dp[i][j] == dp[i - 1][j] + 1) {
            ++out.deletions;
            --i;
        } else {
            ++out.insertions;
            --j;
        }
    }
    return out;
}

std::vector<std::string> tokenize(const std::string& text, ErrorUnit unit) {
    std::vector<std::string> tokens;
    if (unit == ErrorUnit::word) {
        std::istringstream is(text);
        std::string tok;
        while (is >> tok) tokens.push_back(tok);
    } else {
        for (char c : text) {
            if (c == ' ' || c == '\t' || c == '\n' || c == '\r') continue;
            tokens.emplace_back(1, c);
        }
    }
    return tokens;
}

double word_error_rate(const std::vector<std::string>& refs, const std::vector<std::string>& hyps,
                       ErrorUnit unit) {
    if (refs.size() != hyps.size())
        throw ShapeError("reference and hypothesis counts differ: " + std::to_string(refs.size()) +
                         " vs " + std::to_string(hyps.size()));
    std::size_t total_dist = 0, total_len = 0;
    for (std::size_t i = 0; i < refs.size(); ++i) {
        const auto r = tokenize(refs[i], unit);
        const auto h = tokenize(hyps[i], unit);
        total_dist += edit_distance(r, h).distance;
        total_len += r.size();
    }
    if (total_len == 0) throw DomainError("word_error_rate undefined for empty total reference");
    return 100.0 * static_cast<double>(total_dist) / static_cast<double>(total_len);
}

double sign_test_probability(int n, int m) {
    if (n < 0 || m < 0 || m > n) throw DomainError("sign test requires 0 <= m <= n");
    if (n > 63) throw DomainError("sign test limited to n <= 63 for exact integer arithmetic");
    // Pascal row: C(n, i) fits in uint64 for n <= 63
    std::vector<std::uint64_t> binom(static_cast<std::size_t>(n) + 1, 0);
    binom[0] = 1;
    for (int row = 1; row <= n; ++row)
        for (int i = row; i >= 1; --i) binom[static_cast<std::size_t>(i)] += binom[static_cast<std::size_t>(i - 1)];
    std::uint64_t tail = 0;
    for (int i = m; i <= n; ++i) tail += binom[static_cast<std::size_t>(i)];
    const double denom = std::ldexp(1.0, n);  // 2^n
    return 1.0 - static_cast<double>(tail) / denom;
}

}  // namespace modrwkv
