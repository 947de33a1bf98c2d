#pragma once

#include <random>
#include <string>

namespace testutil {

// Space-separated words mixed with runs of CJK characters; returns the
// text and its token count under the default tokenizer.
inline std::pair<std::string, std::size_t> random_document(std::mt19937& rng, std::size_t tokens) {
    static const char* words[] = {"the", "willow", "Harry", "said,", "\"Rest.\"", "(smiles)", "dear", "boy."};
    static const char* cjk[] = {"你", "好", "林", "黛", "玉", "。", "，"};
    std::string out;
    std::size_t count = 0;
    std::uniform_int_distribution<int> kind(0, 3);
    while (count < tokens) {
        if (kind(rng) == 0) {
            out += cjk[rng() % 7];
        } else {
            if (!out.empty()) {
                out += (rng() % 5 == 0) ? "\n" : " ";
            }
            out += words[rng() % 8];
            out += ' ';
        }
        ++count;
    }
    return {out, count};
}

} // namespace testutil
