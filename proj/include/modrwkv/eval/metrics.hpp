#pragma once

#include <string>
#include <vector>

#include "modrwkv/core/errors.hpp"

namespace modrwkv {

struct EditCounts {
    std::size_t distance = 0;
    std::size_t substitutions = 0;
    std::size_t insertions = 0;
    std::size_t deletions = 0;
};

// Levenshtein distance with unit costs, decomposed by traceback. Cost ties
// prefer substitution, then deletion, then insertion.
EditCounts edit_distance(const std::vector<std::string>& ref, const std::vector<std::string>& hyp);

enum class ErrorUnit { word, chr };

std::vector<std::string> tokenize(const std::string& text, ErrorUnit unit);

// 100 · Σ edit distance / Σ reference length over paired transcripts.
// unit=word gives WER over whitespace tokens, unit=chr gives CER.
double word_error_rate(const std::vector<std::string>& refs, const std::vector<std::string>& hyps,
                       ErrorUnit unit);

// p = 1 - (Σ_{i=m}^{n} C(n,i)) / 2^n, exact for n <= 63: the probability that
// fewer than m of n fair coin flips succeed.
double sign_test_probability(int n, int m);

}  // namespace modrwkv
