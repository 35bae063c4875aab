#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "vaxpulse/common.hpp"

namespace vaxpulse::text {

using TokenList = std::vector<std::string>;

// Deterministic tokenization pipeline, applied in order:
//   1. UTF-8 decode (invalid bytes -> U+FFFD) and compose combining accents
//      over Latin base letters (covers Italian and western-European text;
//      other combining marks pass through and fall away at the split step)
//   2. lowercase (ASCII, Latin-1 supplement, Latin Extended-A)
//   3. remove URL-shaped spans (scheme:// or leading www.)
//   4. remove mentions: '@' followed by the maximal [a-z0-9_] word
//   5. split on non-alphanumeric codepoints; '#' immediately before a word
//      starts a hashtag token and is kept as its prefix
// Letters outside ASCII are recognised in the Latin/Greek/Cyrillic ranges;
// symbols and emoji act as separators.
TokenList tokenize(std::string_view text);

// Frozen term -> index map over unigrams and adjacent bigrams. Bigram terms
// join the two unigrams with a single space, which never survives
// tokenization. Indices are dense and assigned in lexicographic term order,
// so construction is independent of document order.
class Vocabulary {
public:
    static constexpr char kBigramSep = ' ';

    Vocabulary() = default;
    explicit Vocabulary(std::vector<std::string> sorted_terms);

    std::size_t size() const { return terms_.size(); }
    std::optional<std::uint32_t> index_of(std::string_view term) const;
    const std::vector<std::string>& terms() const { return terms_; }

    std::string to_json() const;
    static Vocabulary from_json(std::string_view payload);

private:
    std::vector<std::string> terms_;
    std::unordered_map<std::string_view, std::uint32_t> index_;
};

Vocabulary build_vocabulary(const std::vector<TokenList>& docs, std::size_t min_count = 2);

// Sparse counts over a frozen vocabulary; indices strictly increasing.
struct FeatureVector {
    std::vector<std::pair<std::uint32_t, std::uint32_t>> entries;

    std::uint64_t total_count() const;
    double norm() const;
};

FeatureVector featurize(const TokenList& tokens, const Vocabulary& vocab);

}  // namespace vaxpulse::text
