#include <gtest/gtest.h>

#include "rolekit/text/tokenizer.hpp"
#include "rolekit/text/utf8.hpp"

using namespace rolekit::text;

namespace {

std::vector<std::string> token_strings(std::string_view s) {
    std::vector<std::string> out;
    for (const auto& t : default_tokenizer().tokenize(s)) {
        out.emplace_back(s.substr(t.begin, t.end - t.begin));
    }
    return out;
}

} // namespace

TEST(Utf8, DecodesMultibyteAndRecoversFromGarbage) {
    const std::string s = "a\xE4\xBD\xA0\xFF";
    EXPECT_EQ(decode_at(s, 0).value, U'a');
    const auto cp = decode_at(s, 1);
    EXPECT_EQ(cp.value, U'你');
    EXPECT_EQ(cp.length, 3u);
    const auto bad = decode_at(s, 4);
    EXPECT_EQ(bad.value, U'�');
    EXPECT_EQ(bad.length, 1u);
}

TEST(Utf8, TrimHandlesIdeographicSpace) {
    EXPECT_EQ(trim("\xE3\x80\x80 hi \n"), "hi");
    EXPECT_EQ(leading_space_bytes("  x"), 2u);
    EXPECT_EQ(trailing_space_bytes("x \t"), 2u);
    EXPECT_EQ(trim("   "), "");
}

TEST(Utf8, AppendRoundTrips) {
    std::string out;
    for (char32_t cp : {U'A', U'é', U'你', U'\U0001F600'}) {
        append_utf8(out, cp);
    }
    std::size_t pos = 0;
    std::vector<char32_t> back;
    while (pos < out.size()) {
        const auto cp = decode_at(out, pos);
        back.push_back(cp.value);
        pos += cp.length;
    }
    EXPECT_EQ(back, (std::vector<char32_t>{U'A', U'é', U'你', U'\U0001F600'}));
}

TEST(Tokenizer, SplitsCjkPerCharacterAndLatinOnSpace) {
    EXPECT_EQ(token_strings("Hello, world!"), (std::vector<std::string>{"Hello,", "world!"}));
    EXPECT_EQ(token_strings("你好abc 世界"), (std::vector<std::string>{"你", "好", "abc", "世", "界"}));
    EXPECT_TRUE(token_strings("").empty());
    EXPECT_TRUE(token_strings(" \n\t ").empty());
}

TEST(Tokenizer, LexicalTermsFoldCaseAndPunctuation) {
    EXPECT_EQ(lexical_terms("You've LOST, Harry's wand!"),
              (std::vector<std::string>{"you've", "lost", "harry's", "wand"}));
    EXPECT_EQ(lexical_terms("ＡＢＣ def"), (std::vector<std::string>{"abc", "def"}));
    EXPECT_EQ(lexical_terms("你好。"), (std::vector<std::string>{"你", "好"}));
    EXPECT_TRUE(lexical_terms("... !!").empty());
}
