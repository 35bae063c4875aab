#include <doctest.h>

#include <algorithm>
#include <map>
#include <random>

#include "vaxpulse/textprep.hpp"

using namespace vaxpulse;
using namespace vaxpulse::text;

TEST_SUITE_BEGIN("textprep");

TEST_CASE("tokenize applies the documented pipeline") {
    CHECK(tokenize("@user Vaccini sicuri! #Vaccino http://t.co/x") ==
          TokenList{"vaccini", "sicuri", "#vaccino"});
    CHECK(tokenize("").empty());
    CHECK(tokenize("@solo_mention").empty());
    CHECK(tokenize("#NoVax #novax") == TokenList{"#novax", "#novax"});
}

TEST_CASE("tokenize handles urls, accents and separators") {
    CHECK(tokenize("vedi https://example.com/a?b=1 ora") == TokenList{"vedi", "ora"});
    CHECK(tokenize("www.example.com e poi") == TokenList{"e", "poi"});
    CHECK(tokenize("però è perché") == TokenList{"però", "è", "perché"});
    // combining accent composes to the precomposed form before lowercasing
    CHECK(tokenize("PERCHÉ") == TokenList{"perché"});
    CHECK(tokenize("foo-bar_baz") == TokenList{"foo", "bar", "baz"});
    CHECK(tokenize("ciao\xF0\x9F\x98\x80mondo") == TokenList{"ciao", "mondo"});  // emoji splits
    CHECK(tokenize("abc#def") == TokenList{"abc", "#def"});
    CHECK(tokenize("# non-tag") == TokenList{"non", "tag"});
}

TEST_CASE("tokenize is idempotent on its own output") {
    const std::vector<std::string> samples = {
        "@user Vaccini sicuri! #Vaccino http://t.co/x",
        "però È PERCHÉ www.sito.it #NoVax!!!",
        "RT @x: vaccino? vaccini... #iovaccino grazie",
        "123 numeri 456 e_parole #tag2018",
    };
    for (const auto& s : samples) {
        auto once = tokenize(s);
        std::string joined;
        for (const auto& t : once) joined += (joined.empty() ? "" : " ") + t;
        CHECK(tokenize(joined) == once);
    }
}

TEST_CASE("vocabulary over unigrams and bigrams") {
    Vocabulary v = build_vocabulary({{"a", "b"}}, 1);
    CHECK(v.size() == 3);  // a, b, "a b"
    CHECK(v.index_of("a").has_value());
    CHECK(v.index_of("b").has_value());
    CHECK(v.index_of("a b").has_value());
    CHECK(!v.index_of("z").has_value());
}

TEST_CASE("vocabulary frequency threshold") {
    Vocabulary v = build_vocabulary({{"a"}, {"a"}}, 2);
    CHECK(v.size() == 1);
    CHECK(v.index_of("a").has_value());
}

TEST_CASE("vocabulary rejects all-empty corpus") {
    CHECK_THROWS_AS(build_vocabulary({{}, {}}, 1), EmptyInput);
}

TEST_CASE("vocabulary matches a brute-force frequency table") {
    std::mt19937_64 rng(2024);
    std::vector<std::string> words = {"uno", "due", "tre", "quattro", "cinque", "sei"};
    std::vector<TokenList> docs;
    for (int d = 0; d < 60; ++d) {
        TokenList doc;
        std::uniform_int_distribution<std::size_t> pick(0, words.size() - 1);
        std::uniform_int_distribution<int> len(0, 8);
        for (int i = len(rng); i > 0; --i) doc.push_back(words[pick(rng)]);
        docs.push_back(doc);
    }
    const std::size_t min_count = 3;
    Vocabulary v = build_vocabulary(docs, min_count);

    std::map<std::string, std::size_t> brute;
    for (const auto& doc : docs)
        for (std::size_t i = 0; i < doc.size(); ++i) {
            ++brute[doc[i]];
            if (i + 1 < doc.size()) ++brute[doc[i] + " " + doc[i + 1]];
        }
    std::size_t expected = 0;
    for (const auto& [term, count] : brute) {
        if (count >= min_count) {
            ++expected;
            CHECK(v.index_of(term).has_value());
        } else {
            CHECK(!v.index_of(term).has_value());
        }
    }
    CHECK(v.size() == expected);
}

TEST_CASE("vocabulary construction is order-independent") {
    std::vector<TokenList> docs = {{"a", "b", "c"}, {"b", "c"}, {"c", "a"}, {"a", "b"}};
    auto v1 = build_vocabulary(docs, 2);
    std::reverse(docs.begin(), docs.end());
    auto v2 = build_vocabulary(docs, 2);
    CHECK(v1.terms() == v2.terms());
}

TEST_CASE("featurize counts in-vocabulary terms and drops the rest") {
    Vocabulary v = build_vocabulary({{"a", "b"}}, 1);
    auto fv = featurize({"a", "b"}, v);
    REQUIRE(fv.entries.size() == 3);
    for (auto [idx, count] : fv.entries) CHECK(count == 1);
    CHECK(featurize({"z"}, v).entries.empty());
}

TEST_CASE("featurize agrees with a dense count oracle") {
    std::mt19937_64 rng(99);
    std::vector<std::string> words = {"w0", "w1", "w2", "w3", "w4"};
    std::vector<TokenList> docs;
    for (int d = 0; d < 20; ++d) {
        TokenList doc;
        std::uniform_int_distribution<std::size_t> pick(0, words.size() - 1);
        for (int i = 0; i < 12; ++i) doc.push_back(words[pick(rng)]);
        docs.push_back(doc);
    }
    Vocabulary v = build_vocabulary(docs, 1);
    for (const auto& doc : docs) {
        std::vector<std::uint32_t> dense(v.size(), 0);
        for (std::size_t i = 0; i < doc.size(); ++i) {
            if (auto idx = v.index_of(doc[i])) ++dense[*idx];
            if (i + 1 < doc.size())
                if (auto idx = v.index_of(doc[i] + " " + doc[i + 1])) ++dense[*idx];
        }
        auto fv = featurize(doc, v);
        std::vector<std::uint32_t> sparse(v.size(), 0);
        std::uint32_t prev_index = 0;
        bool first = true;
        for (auto [idx, count] : fv.entries) {
            CHECK(count >= 1);
            CHECK(idx < v.size());
            if (!first) CHECK(idx > prev_index);  // strictly increasing
            prev_index = idx;
            first = false;
            sparse[idx] = count;
        }
        CHECK(sparse == dense);
    }
}

TEST_CASE("featurize total count identity") {
    Vocabulary v = build_vocabulary({{"a", "b", "c"}, {"a", "b"}}, 1);
    TokenList doc = {"a", "b", "z", "c"};
    std::size_t in_vocab_unigrams = 0, in_vocab_bigrams = 0;
    for (std::size_t i = 0; i < doc.size(); ++i) {
        if (v.index_of(doc[i])) ++in_vocab_unigrams;
        if (i + 1 < doc.size() && v.index_of(doc[i] + " " + doc[i + 1])) ++in_vocab_bigrams;
    }
    CHECK(featurize(doc, v).total_count() == in_vocab_unigrams + in_vocab_bigrams);
}

TEST_CASE("vocabulary json round trip") {
    Vocabulary v = build_vocabulary({{"a", "b"}, {"b", "c"}}, 1);
    Vocabulary back = Vocabulary::from_json(v.to_json());
    CHECK(back.terms() == v.terms());
}

TEST_SUITE_END();
