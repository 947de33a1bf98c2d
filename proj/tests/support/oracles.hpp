#pragma once

// Independent reference computations used to check the library. Nothing in
// here calls into rolekit; each oracle is the plain textbook formulation.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

namespace oracle {

inline std::uint64_t fnv1a64(const std::string& s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h = (h ^ c) * 0x100000001b3ULL;
    }
    return h;
}

// ASCII-only word splitter: lowercase alnum runs, apostrophes kept when
// flanked by alnum characters.
inline std::vector<std::string> ascii_words(const std::string& text) {
    std::vector<std::string> out;
    std::string cur;
    for (std::size_t i = 0; i < text.size(); ++i) {
        const unsigned char c = static_cast<unsigned char>(text[i]);
        const bool alnum = std::isalnum(c) != 0;
        const bool inner_apostrophe = c == '\'' && !cur.empty() && i + 1 < text.size() &&
                                      std::isalnum(static_cast<unsigned char>(text[i + 1])) != 0;
        if (alnum || inner_apostrophe) {
            cur.push_back(static_cast<char>(std::tolower(c)));
        } else if (!cur.empty()) {
            out.push_back(cur);
            cur.clear();
        }
    }
    if (!cur.empty()) {
        out.push_back(cur);
    }
    return out;
}

inline std::vector<double> hash_embedding(const std::string& text, std::size_t dim) {
    std::vector<double> v(dim, 0.0);
    const auto words = ascii_words(text);
    for (std::size_t i = 0; i < words.size(); ++i) {
        v[fnv1a64(words[i]) % dim] += 1.0;
        if (i + 1 < words.size()) {
            v[fnv1a64(words[i] + " " + words[i + 1]) % dim] += 0.5;
        }
    }
    double n = 0.0;
    for (double x : v) {
        n += x * x;
    }
    for (double& x : v) {
        x /= std::sqrt(n);
    }
    return v;
}

inline double cosine(const std::vector<double>& a, const std::vector<double>& b) {
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if (na == 0.0 || nb == 0.0) {
        return 0.0;
    }
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

// Okapi BM25 over pre-tokenized documents, scored straight from the
// definition: for every distinct query term, idf * tf*(k1+1) / (tf + k1*(1-b+b*|d|/avgdl)),
// with idf = ln(1 + (N - df + 0.5)/(df + 0.5)).
inline std::vector<double> bm25(const std::vector<std::vector<std::string>>& docs,
                                const std::vector<std::string>& query, double k1 = 1.2, double b = 0.75) {
    const double n = static_cast<double>(docs.size());
    double total = 0.0;
    for (const auto& d : docs) {
        total += static_cast<double>(d.size());
    }
    const double avgdl = docs.empty() ? 0.0 : total / n;
    std::set<std::string> distinct(query.begin(), query.end());
    std::vector<double> scores(docs.size(), 0.0);
    for (const auto& term : distinct) {
        double df = 0.0;
        for (const auto& d : docs) {
            if (std::find(d.begin(), d.end(), term) != d.end()) {
                df += 1.0;
            }
        }
        const double idf = std::log(1.0 + (n - df + 0.5) / (df + 0.5));
        for (std::size_t i = 0; i < docs.size(); ++i) {
            const double tf = static_cast<double>(std::count(docs[i].begin(), docs[i].end(), term));
            if (tf == 0.0 || avgdl == 0.0) {
                continue;
            }
            const double len = static_cast<double>(docs[i].size());
            scores[i] += idf * tf * (k1 + 1.0) / (tf + k1 * (1.0 - b + b * len / avgdl));
        }
    }
    return scores;
}

// Every window [i*stride, min(i*stride+size, n)) until one reaches n.
inline std::vector<std::pair<std::size_t, std::size_t>> windows(std::size_t n, std::size_t size, std::size_t overlap) {
    std::vector<std::pair<std::size_t, std::size_t>> out;
    if (n == 0) {
        return out;
    }
    const std::size_t stride = size - overlap;
    for (std::size_t start = 0;; start += stride) {
        const std::size_t end = std::min(start + size, n);
        out.emplace_back(start, end);
        if (end == n) {
            break;
        }
    }
    return out;
}

// Fusion by brute force: candidate pool is the union of both families'
// top `depth` documents (ties by id); each family is min-max scaled over
// the pool (flat range -> 1.0) and mixed with the weights.
inline std::vector<std::pair<std::uint64_t, double>> fuse(const std::map<std::uint64_t, double>& lexical,
                                                          const std::map<std::uint64_t, double>& dense,
                                                          double w_lex, double w_dense, std::size_t depth) {
    auto top = [depth](const std::map<std::uint64_t, double>& scores) {
        std::vector<std::pair<std::uint64_t, double>> v(scores.begin(), scores.end());
        std::sort(v.begin(), v.end(), [](const auto& a, const auto& b) {
            return a.second != b.second ? a.second > b.second : a.first < b.first;
        });
        std::set<std::uint64_t> ids;
        for (std::size_t i = 0; i < v.size() && i < depth; ++i) {
            ids.insert(v[i].first);
        }
        return ids;
    };
    std::set<std::uint64_t> pool = top(lexical);
    for (auto id : top(dense)) {
        pool.insert(id);
    }
    auto scaled = [&pool](const std::map<std::uint64_t, double>& scores) {
        double lo = INFINITY, hi = -INFINITY;
        for (auto id : pool) {
            const double s = scores.count(id) ? scores.at(id) : 0.0;
            lo = std::min(lo, s);
            hi = std::max(hi, s);
        }
        std::map<std::uint64_t, double> out;
        for (auto id : pool) {
            const double s = scores.count(id) ? scores.at(id) : 0.0;
            out[id] = hi > lo ? (s - lo) / (hi - lo) : 1.0;
        }
        return out;
    };
    const auto sl = scaled(lexical);
    const auto sd = scaled(dense);
    std::vector<std::pair<std::uint64_t, double>> fused;
    for (auto id : pool) {
        fused.emplace_back(id, w_lex * sl.at(id) + w_dense * sd.at(id));
    }
    std::sort(fused.begin(), fused.end(), [](const auto& a, const auto& b) {
        return a.second != b.second ? a.second > b.second : a.first < b.first;
    });
    return fused;
}

} // namespace oracle
