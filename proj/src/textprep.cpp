#include "vaxpulse/textprep.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include <json.hpp>

namespace vaxpulse::text {

namespace {

using Codepoints = std::vector<char32_t>;

Codepoints decode_utf8(std::string_view s) {
    Codepoints out;
    out.reserve(s.size());
    std::size_t i = 0;
    while (i < s.size()) {
        unsigned char c = s[i];
        char32_t cp = 0xFFFD;
        std::size_t len = 1;
        if (c < 0x80) {
            cp = c;
        } else if ((c & 0xE0) == 0xC0 && i + 1 < s.size() && (s[i + 1] & 0xC0) == 0x80) {
            cp = (c & 0x1Fu) << 6 | (s[i + 1] & 0x3Fu);
            len = 2;
            if (cp < 0x80) cp = 0xFFFD;
        } else if ((c & 0xF0) == 0xE0 && i + 2 < s.size() && (s[i + 1] & 0xC0) == 0x80 &&
                   (s[i + 2] & 0xC0) == 0x80) {
            cp = (c & 0x0Fu) << 12 | (s[i + 1] & 0x3Fu) << 6 | (s[i + 2] & 0x3Fu);
            len = 3;
            if (cp < 0x800) cp = 0xFFFD;
        } else if ((c & 0xF8) == 0xF0 && i + 3 < s.size() && (s[i + 1] & 0xC0) == 0x80 &&
                   (s[i + 2] & 0xC0) == 0x80 && (s[i + 3] & 0xC0) == 0x80) {
            cp = (c & 0x07u) << 18 | (s[i + 1] & 0x3Fu) << 12 | (s[i + 2] & 0x3Fu) << 6 |
                 (s[i + 3] & 0x3Fu);
            len = 4;
            if (cp < 0x10000 || cp > 0x10FFFF) cp = 0xFFFD;
        }
        out.push_back(cp);
        i += len;
    }
    return out;
}

void encode_utf8(char32_t cp, std::string& out) {
    if (cp < 0x80) {
        out.push_back(static_cast<char>(cp));
    } else if (cp < 0x800) {
        out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else if (cp < 0x10000) {
        out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else {
        out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    }
}

// Composition of base letter + combining mark for the Latin-1 / Latin-A
// precomposed range. Enough for Italian and neighbouring languages; anything
// uncovered keeps the combining mark, which later acts as a separator.
char32_t compose(char32_t base, char32_t mark) {
    struct Entry {
        char32_t base, mark, composed;
    };
    static constexpr Entry kTable[] = {
        {'a', 0x300, 0xE0}, {'a', 0x301, 0xE1}, {'a', 0x302, 0xE2}, {'a', 0x303, 0xE3},
        {'a', 0x308, 0xE4}, {'a', 0x30A, 0xE5}, {'c', 0x327, 0xE7}, {'e', 0x300, 0xE8},
        {'e', 0x301, 0xE9}, {'e', 0x302, 0xEA}, {'e', 0x308, 0xEB}, {'i', 0x300, 0xEC},
        {'i', 0x301, 0xED}, {'i', 0x302, 0xEE}, {'i', 0x308, 0xEF}, {'n', 0x303, 0xF1},
        {'o', 0x300, 0xF2}, {'o', 0x301, 0xF3}, {'o', 0x302, 0xF4}, {'o', 0x303, 0xF5},
        {'o', 0x308, 0xF6}, {'u', 0x300, 0xF9}, {'u', 0x301, 0xFA}, {'u', 0x302, 0xFB},
        {'u', 0x308, 0xFC}, {'y', 0x301, 0xFD}, {'y', 0x308, 0xFF},
        {'A', 0x300, 0xC0}, {'A', 0x301, 0xC1}, {'A', 0x302, 0xC2}, {'A', 0x303, 0xC3},
        {'A', 0x308, 0xC4}, {'A', 0x30A, 0xC5}, {'C', 0x327, 0xC7}, {'E', 0x300, 0xC8},
        {'E', 0x301, 0xC9}, {'E', 0x302, 0xCA}, {'E', 0x308, 0xCB}, {'I', 0x300, 0xCC},
        {'I', 0x301, 0xCD}, {'I', 0x302, 0xCE}, {'I', 0x308, 0xCF}, {'N', 0x303, 0xD1},
        {'O', 0x300, 0xD2}, {'O', 0x301, 0xD3}, {'O', 0x302, 0xD4}, {'O', 0x303, 0xD5},
        {'O', 0x308, 0xD6}, {'U', 0x300, 0xD9}, {'U', 0x301, 0xDA}, {'U', 0x302, 0xDB},
        {'U', 0x308, 0xDC}, {'Y', 0x301, 0xDD},
    };
    for (const auto& e : kTable)
        if (e.base == base && e.mark == mark) return e.composed;
    return 0;
}

char32_t to_lower_cp(char32_t cp) {
    if (cp >= 'A' && cp <= 'Z') return cp + 0x20;
    if (cp >= 0xC0 && cp <= 0xDE && cp != 0xD7) return cp + 0x20;  // Latin-1 supplement
    if (cp >= 0x100 && cp <= 0x137 && cp % 2 == 0) return cp + 1;  // Latin Extended-A
    if (cp >= 0x139 && cp <= 0x148 && cp % 2 == 1) return cp + 1;
    if (cp >= 0x14A && cp <= 0x177 && cp % 2 == 0) return cp + 1;
    if (cp == 0x178) return 0xFF;
    if (cp >= 0x179 && cp <= 0x17E && cp % 2 == 1) return cp + 1;
    if (cp >= 0x391 && cp <= 0x3A9 && cp != 0x3A2) return cp + 0x20;  // Greek
    if (cp >= 0x410 && cp <= 0x42F) return cp + 0x20;                 // Cyrillic
    if (cp >= 0x400 && cp <= 0x40F) return cp + 0x50;
    return cp;
}

bool is_ascii_alnum(char32_t cp) {
    return (cp >= 'a' && cp <= 'z') || (cp >= '0' && cp <= '9');
}

// Word characters: lowercase ASCII alphanumerics plus letters in the Latin,
// Greek and Cyrillic ranges. Symbols, punctuation and emoji separate tokens.
bool is_word(char32_t cp) {
    if (is_ascii_alnum(cp)) return true;
    if (cp >= 0xC0 && cp <= 0x24F && cp != 0xD7 && cp != 0xF7) return true;
    if (cp >= 0x370 && cp <= 0x3FF) return true;
    if (cp >= 0x400 && cp <= 0x4FF) return true;
    return false;
}

bool is_space(char32_t cp) {
    return cp == ' ' || cp == '\t' || cp == '\n' || cp == '\r' || cp == '\f' || cp == '\v' ||
           cp == 0xA0 || (cp >= 0x2000 && cp <= 0x200A) || cp == 0x2028 || cp == 0x2029 ||
           cp == 0x3000;
}

bool is_scheme_char(char32_t cp) {
    return (cp >= 'a' && cp <= 'z') || (cp >= '0' && cp <= '9') || cp == '+' || cp == '.' ||
           cp == '-';
}

// Erase URL-shaped spans in place: a scheme followed by "://" wipes from the
// scheme start to the next whitespace; so does "www." at a word boundary.
void remove_urls(Codepoints& cps) {
    Codepoints out;
    out.reserve(cps.size());
    std::size_t i = 0;
    auto boundary = [&](std::size_t pos) { return pos == 0 || !is_word(cps[pos - 1]); };
    while (i < cps.size()) {
        bool url = false;
        if (cps[i] == ':' && i + 2 < cps.size() && cps[i + 1] == '/' && cps[i + 2] == '/') {
            // walk back over the scheme in what we already emitted
            std::size_t k = out.size();
            while (k > 0 && is_scheme_char(out[k - 1])) --k;
            if (k < out.size() && out[k] >= 'a' && out[k] <= 'z' &&
                (k == 0 || !is_word(out[k - 1]))) {
                out.resize(k);
                url = true;
            }
        } else if (cps[i] == 'w' && boundary(i) && i + 3 < cps.size() && cps[i + 1] == 'w' &&
                   cps[i + 2] == 'w' && cps[i + 3] == '.') {
            url = true;
        }
        if (url) {
            while (i < cps.size() && !is_space(cps[i])) ++i;
        } else {
            out.push_back(cps[i]);
            ++i;
        }
    }
    cps = std::move(out);
}

void remove_mentions(Codepoints& cps) {
    Codepoints out;
    out.reserve(cps.size());
    std::size_t i = 0;
    while (i < cps.size()) {
        if (cps[i] == '@') {
            ++i;
            while (i < cps.size() && (is_ascii_alnum(cps[i]) || cps[i] == '_')) ++i;
        } else {
            out.push_back(cps[i]);
            ++i;
        }
    }
    cps = std::move(out);
}

}  // namespace

TokenList tokenize(std::string_view textin) {
    Codepoints cps = decode_utf8(textin);

    // compose combining accents, then lowercase
    Codepoints composed;
    composed.reserve(cps.size());
    for (char32_t cp : cps) {
        if (!composed.empty() && cp >= 0x300 && cp <= 0x36F) {
            if (char32_t c = compose(composed.back(), cp)) {
                composed.back() = c;
                continue;
            }
        }
        composed.push_back(cp);
    }
    for (auto& cp : composed) cp = to_lower_cp(cp);

    remove_urls(composed);
    remove_mentions(composed);

    TokenList tokens;
    std::string cur;
    bool in_token = false;
    auto flush = [&] {
        if (in_token && !cur.empty() && cur != "#") tokens.push_back(cur);
        cur.clear();
        in_token = false;
    };
    for (std::size_t i = 0; i < composed.size(); ++i) {
        char32_t cp = composed[i];
        if (is_word(cp)) {
            if (!in_token) in_token = true;
            encode_utf8(cp, cur);
        } else if (cp == '#' && i + 1 < composed.size() && is_word(composed[i + 1])) {
            flush();
            in_token = true;
            cur = "#";
        } else {
            flush();
        }
    }
    flush();
    return tokens;
}

Vocabulary::Vocabulary(std::vector<std::string> sorted_terms) : terms_(std::move(sorted_terms)) {
    index_.reserve(terms_.size());
    for (std::uint32_t i = 0; i < terms_.size(); ++i) index_.emplace(terms_[i], i);
}

std::optional<std::uint32_t> Vocabulary::index_of(std::string_view term) const {
    auto it = index_.find(term);
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

std::string Vocabulary::to_json() const {
    nlohmann::json j = nlohmann::json::object();
    for (std::uint32_t i = 0; i < terms_.size(); ++i) j[terms_[i]] = i;
    return j.dump();
}

Vocabulary Vocabulary::from_json(std::string_view payload) {
    nlohmann::json j = nlohmann::json::parse(payload);
    // non-integer entries (e.g. an embedded manifest hash) are not terms
    std::vector<std::pair<std::string, std::uint32_t>> pairs;
    for (auto& [term, idx] : j.items())
        if (idx.is_number_unsigned() || idx.is_number_integer())
            pairs.emplace_back(term, idx.get<std::uint32_t>());
    std::vector<std::string> terms(pairs.size());
    for (auto& [term, i] : pairs) {
        if (i >= terms.size() || !terms[i].empty())
            throw ContractViolation("vocabulary indices not dense");
        terms[i] = term;
    }
    return Vocabulary(std::move(terms));
}

Vocabulary build_vocabulary(const std::vector<TokenList>& docs, std::size_t min_count) {
    std::map<std::string, std::size_t> counts;
    bool any = false;
    for (const auto& doc : docs) {
        if (!doc.empty()) any = true;
        for (std::size_t i = 0; i < doc.size(); ++i) {
            ++counts[doc[i]];
            if (i + 1 < doc.size()) ++counts[doc[i] + Vocabulary::kBigramSep + doc[i + 1]];
        }
    }
    if (!any) throw EmptyInput("build_vocabulary: no nonempty documents");
    std::vector<std::string> terms;
    for (auto& [term, c] : counts)
        if (c >= min_count) terms.push_back(term);
    return Vocabulary(std::move(terms));  // std::map iterates sorted
}

std::uint64_t FeatureVector::total_count() const {
    std::uint64_t t = 0;
    for (auto [i, c] : entries) t += c;
    return t;
}

double FeatureVector::norm() const {
    double s = 0;
    for (auto [i, c] : entries) s += static_cast<double>(c) * c;
    return std::sqrt(s);
}

FeatureVector featurize(const TokenList& tokens, const Vocabulary& vocab) {
    std::map<std::uint32_t, std::uint32_t> counts;
    auto add = [&](const std::string& term) {
        if (auto idx = vocab.index_of(term)) ++counts[*idx];
    };
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        add(tokens[i]);
        if (i + 1 < tokens.size()) add(tokens[i] + Vocabulary::kBigramSep + tokens[i + 1]);
    }
    FeatureVector fv;
    fv.entries.assign(counts.begin(), counts.end());
    return fv;
}

}  // namespace vaxpulse::text
