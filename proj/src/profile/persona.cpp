#include "rolekit/profile/persona.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>
#include <unordered_map>

#include "rolekit/error.hpp"
#include "rolekit/llm/json_reply.hpp"
#include "rolekit/llm/language.hpp"
#include "rolekit/text/tokenizer.hpp"
#include "rolekit/text/utf8.hpp"
#include "rolekit/util/files.hpp"
#include "rolekit/util/parallel.hpp"

namespace rolekit::profile {

BackgroundProfile::BackgroundProfile() {
    for (const auto key : kBackgroundKeys) {
        values_[std::string(key)] = std::string(kUnknown);
    }
}

const std::string& BackgroundProfile::get(std::string_view key) const {
    const auto it = values_.find(std::string(key));
    if (it == values_.end()) {
        throw InputError("unknown background attribute '" + std::string(key) + "'");
    }
    return it->second;
}

void BackgroundProfile::set(std::string_view key, std::string value) {
    const auto it = values_.find(std::string(key));
    if (it == values_.end()) {
        throw InputError("unknown background attribute '" + std::string(key) + "'");
    }
    if (text::trim(value).empty()) {
        throw InputError("background attribute '" + std::string(key) + "' cannot be blank; use \"unknown\"");
    }
    it->second = std::move(value);
}

namespace {

const std::unordered_map<std::string_view, std::string_view>& lexicon() {
    static const auto table = [] {
        std::unordered_map<std::string_view, std::string_view> t;
        auto add = [&t](std::string_view pos, std::initializer_list<std::string_view> words) {
            for (auto w : words) {
                t.emplace(w, pos);
            }
        };
        add("pronoun", {"i", "me", "my", "mine", "myself", "you", "your", "yours", "yourself", "yourselves",
                        "he", "him", "his", "himself", "she", "her", "hers", "herself", "it", "its", "itself",
                        "we", "us", "our", "ours", "ourselves", "they", "them", "their", "theirs", "themselves",
                        "who", "whom", "whose", "what", "which", "someone", "anyone", "everyone", "nobody",
                        "something", "anything", "everything", "nothing", "thee", "thou", "thy", "thine",
                        "我", "你", "他", "她", "它", "您", "咱", "俺", "汝", "吾", "余"});
        add("determiner", {"a", "an", "the", "this", "that", "these", "those", "each", "every", "some", "any",
                           "no", "all", "both", "either", "neither", "another", "such", "much", "many", "few",
                           "several", "这", "那", "每", "此", "该"});
        add("preposition", {"of", "in", "on", "at", "to", "for", "with", "by", "from", "about", "into", "over",
                            "under", "after", "before", "between", "through", "during", "without", "within",
                            "upon", "against", "among", "across", "behind", "beyond", "near", "toward", "towards",
                            "onto", "beside", "around", "along", "until", "in", "在", "从", "向", "对", "把",
                            "被", "于", "往", "给"});
        add("conjunction", {"and", "or", "but", "nor", "yet", "because", "although", "though", "while", "if",
                            "unless", "whether", "than", "as", "since", "和", "与", "但", "而", "或", "且"});
        add("interjection", {"oh", "ah", "alas", "hmm", "hush", "bah", "wow", "ouch", "hello", "goodbye", "yes",
                             "aye", "nay", "ha", "eh", "hey", "hallo", "唉", "哎", "喂", "哦", "嗯"});
        add("particle", {"的", "了", "吗", "呢", "吧", "啊", "呀", "嘛", "着", "过", "地", "得", "罢", "哩", "么"});
        add("verb", {"be", "is", "am", "are", "was", "were", "been", "being", "have", "has", "had", "do", "does",
                     "did", "shall", "will", "would", "should", "can", "could", "may", "might", "must", "say",
                     "said", "go", "went", "gone", "come", "came", "know", "knew", "known", "see", "saw", "seen",
                     "think", "thought", "take", "took", "taken", "make", "made", "get", "got", "give", "gave",
                     "given", "tell", "told", "let", "rest", "sleep", "want", "need", "believe", "fear", "hope",
                     "assure", "found", "find", "keep", "kept", "look", "feel", "felt", "leave", "left", "don't",
                     "can't", "won't", "isn't", "wasn't", "didn't", "shan't", "是", "有", "说", "去", "来", "看",
                     "要", "想", "做", "知道"});
        add("adverb", {"not", "very", "quite", "now", "then", "here", "there", "always", "never", "often",
                       "still", "already", "just", "only", "too", "also", "again", "soon", "perhaps", "indeed",
                       "away", "up", "down", "out", "back", "well", "rather", "so", "even", "ever", "once",
                       "where", "when", "why", "how", "almost", "really", "不", "很", "都", "也", "就", "还",
                       "又", "才", "太", "真", "便", "却"});
        add("adjective", {"dear", "good", "bad", "great", "little", "old", "young", "new", "safe", "own", "other",
                          "same", "long", "small", "large", "big", "happy", "sad", "true", "right", "wrong",
                          "poor", "fine", "sure", "afraid", "important", "best", "better", "worse", "worst",
                          "wise", "brave", "strange", "好", "大", "小"});
        add("noun", {"boy", "girl", "man", "woman", "child", "children", "time", "day", "night", "way", "thing",
                     "life", "world", "house", "school", "friend", "father", "mother", "professor", "headmaster",
                     "wand", "door", "room", "heart", "mind", "hand", "eyes", "sir", "madam", "lady", "lord",
                     "master", "harm", "breath", "body", "office", "people", "magic", "人", "事", "话"});
        add("numeral", {"one", "two", "three", "four", "five", "six", "seven", "eight", "nine", "ten", "hundred",
                        "thousand", "first", "second", "一", "二", "三", "四", "五", "六", "七", "八", "九",
                        "十", "百", "千", "万", "两"});
        return t;
    }();
    return table;
}

bool ends_with(std::string_view s, std::string_view suffix) {
    return s.size() > suffix.size() + 2 && s.substr(s.size() - suffix.size()) == suffix;
}

} // namespace

std::string_view LexiconTagger::tag(std::string_view word) const {
    const auto& table = lexicon();
    if (const auto it = table.find(word); it != table.end()) {
        return it->second;
    }
    if (!word.empty() && std::all_of(word.begin(), word.end(), [](char c) { return c >= '0' && c <= '9'; })) {
        return "numeral";
    }
    if (const auto apostrophe = word.find('\''); apostrophe != std::string_view::npos && apostrophe > 0) {
        if (const auto it = table.find(word.substr(0, apostrophe)); it != table.end()) {
            return it->second;
        }
    }
    for (auto s : {"ly"}) {
        if (ends_with(word, s)) {
            return "adverb";
        }
    }
    for (auto s : {"tion", "sion", "ment", "ness", "ity", "ship", "hood", "ism", "ist", "ance", "ence"}) {
        if (ends_with(word, s)) {
            return "noun";
        }
    }
    for (auto s : {"ous", "ful", "less", "able", "ible", "ive", "ical", "ish", "ary"}) {
        if (ends_with(word, s)) {
            return "adjective";
        }
    }
    for (auto s : {"ing", "ed", "ize", "ise", "ify", "ate"}) {
        if (ends_with(word, s)) {
            return "verb";
        }
    }
    return "other";
}

const PosTagger& default_tagger() {
    static const LexiconTagger tagger;
    return tagger;
}

void PersonaBundle::validate() const {
    if (text::trim(canonical_name).empty()) {
        throw InputError("persona canonical_name is empty");
    }
    if (text::trim(personality.synthesized).empty()) {
        throw InputError("persona personality.synthesized is empty");
    }
    for (const auto key : kBackgroundKeys) {
        if (text::trim(background.get(key)).empty()) {
            throw InputError("background attribute '" + std::string(key) + "' is blank");
        }
    }
    for (const auto& [pos, words] : style.common_words) {
        if (std::find(kPosClasses.begin(), kPosClasses.end(), pos) == kPosClasses.end()) {
            throw InputError("unknown part-of-speech class '" + pos + "' in common_words");
        }
        std::set<std::string> seen;
        for (const auto& w : words) {
            if (w.count < 1 || w.word.empty() || !seen.insert(w.word).second) {
                throw InputError("common_words." + pos + " has an empty, zero-count or duplicate entry");
            }
        }
    }
    for (const auto& u : utterances) {
        if (u.speaker != canonical_name) {
            throw InputError("utterance by '" + u.speaker + "' does not belong to persona '" + canonical_name + "'");
        }
        if (text::trim(u.text).empty()) {
            throw InputError("persona utterances cannot be blank");
        }
    }
    if (!alias_map.empty()) {
        if (alias_map.size() != 1 || alias_map.begin()->first != canonical_name ||
            !alias_map.begin()->second.count(canonical_name)) {
            throw InputError("persona alias map must hold exactly the entry for '" + canonical_name + "'");
        }
    }
}

namespace {

std::string detect_language(const ProfileOptions& options, const std::vector<std::string>& samples) {
    if (!options.language.empty()) {
        return options.language;
    }
    std::string joined;
    for (const auto& s : samples) {
        if (joined.size() > 8000) {
            break;
        }
        joined += s;
        joined += '\n';
    }
    return llm::select_prompt_language(joined);
}

std::vector<std::string> chunk_texts(const std::vector<ingest::Chunk>& chunks) {
    std::vector<std::string> out;
    for (const auto& c : chunks) {
        out.push_back(c.text);
    }
    return out;
}

std::string trimmed(const std::string& s) {
    return std::string(text::trim(s));
}

std::string value_text(const nlohmann::json& v) {
    if (v.is_string()) {
        return trimmed(v.get<std::string>());
    }
    if (v.is_array()) {
        std::string out;
        for (const auto& item : v) {
            const auto part = value_text(item);
            if (!part.empty()) {
                out += (out.empty() ? "" : "; ") + part;
            }
        }
        return out;
    }
    if (v.is_null()) {
        return "";
    }
    return v.dump();
}

bool is_unknown(const std::string& v) {
    std::string lower;
    for (char c : v) {
        lower.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    }
    return lower.empty() || lower == kUnknown || lower == "未知" || lower == "n/a" || lower == "none";
}

std::map<std::string, std::string> parse_background_reply(const std::string& raw) {
    const auto j = llm::parse_json_reply(raw);
    if (!j.is_object()) {
        throw ParseError("background reply is not a JSON object", raw);
    }
    std::map<std::string, std::string> out;
    for (const auto key : kBackgroundKeys) {
        const std::string k(key);
        if (j.contains(k)) {
            auto v = value_text(j.at(k));
            if (!is_unknown(v)) {
                out[k] = std::move(v);
            }
        }
    }
    return out;
}

std::string join_keys() {
    std::string out;
    for (const auto key : kBackgroundKeys) {
        out += (out.empty() ? "" : ", ") + std::string(key);
    }
    return out;
}

} // namespace

PersonalityProfile extract_personality(const std::string& speaker, const std::vector<ingest::Chunk>& chunks,
                                       const llm::LlmClient& client, const prompts::PromptLibrary& prompts,
                                       const ProfileOptions& options) {
    if (chunks.empty()) {
        throw InputError("personality extraction for '" + speaker + "' needs at least one chunk");
    }
    const auto language = detect_language(options, chunk_texts(chunks));
    PersonalityProfile profile;
    const auto traits = util::parallel_map(chunks.size(), options.parallelism, [&](std::size_t i) {
        return trimmed(client.complete(
            prompts.request("personality_chunk", language, {{"speaker", speaker}, {"chunk", chunks[i].text}})));
    });
    std::string notes;
    for (std::size_t i = 0; i < chunks.size(); ++i) {
        profile.per_chunk_traits.emplace_back(chunks[i].chunk_id, traits[i]);
        if (!traits[i].empty()) {
            notes += "- " + traits[i] + "\n";
        }
    }
    if (notes.empty()) {
        profile.synthesized = std::string(kUnknown);
        return profile;
    }
    profile.synthesized = trimmed(
        client.complete(prompts.request("personality_synthesis", language, {{"speaker", speaker}, {"traits", notes}})));
    if (profile.synthesized.empty()) {
        profile.synthesized = std::string(kUnknown);
    }
    return profile;
}

BackgroundProfile extract_background(const std::string& speaker, const std::vector<ingest::Chunk>& chunks,
                                     const llm::LlmClient& client, const prompts::PromptLibrary& prompts,
                                     const ProfileOptions& options) {
    if (chunks.empty()) {
        throw InputError("background extraction for '" + speaker + "' needs at least one chunk");
    }
    const auto language = detect_language(options, chunk_texts(chunks));
    const auto attributes = join_keys();
    std::map<std::string, std::string> summary;
    for (std::size_t round = 0; round * kBackgroundRoundSize < chunks.size(); ++round) {
        const auto begin = round * kBackgroundRoundSize;
        const auto count = std::min(kBackgroundRoundSize, chunks.size() - begin);
        const auto extracted = util::parallel_map(count, options.parallelism, [&](std::size_t i) {
            const auto& chunk = chunks[begin + i];
            const auto request = prompts.request(
                "background_chunk", language, {{"speaker", speaker}, {"attributes", attributes}, {"chunk", chunk.text}});
            try {
                return llm::complete_structured(client, request, parse_background_reply,
                                                [&](const std::string& raw, const std::string& why) {
                                                    return prompts.repair_request(request, raw, why, language);
                                                });
            } catch (const ParseError& e) {
                throw ExtractionError("background extraction failed at relevant chunk " + std::to_string(begin + i) +
                                          " (chunk_id " + std::to_string(chunk.chunk_id) + "): " + e.what(),
                                      e.raw_output());
            } catch (const Error& e) {
                throw Error(e.code(), "background extraction failed at relevant chunk " + std::to_string(begin + i) +
                                          ": " + e.what());
            }
        });
        for (const auto key : kBackgroundKeys) {
            const std::string k(key);
            std::vector<std::string> values;
            for (const auto& found : extracted) {
                if (const auto it = found.find(k); it != found.end()) {
                    values.push_back(it->second);
                }
            }
            if (values.empty()) {
                continue;
            }
            std::string notes;
            if (const auto prev = summary.find(k); prev != summary.end()) {
                notes += "- " + prev->second + "\n";
            }
            for (const auto& v : values) {
                notes += "- " + v + "\n";
            }
            auto merged = trimmed(client.complete(prompts.request(
                "background_summary", language, {{"speaker", speaker}, {"attribute", k}, {"values", notes}})));
            if (!merged.empty()) {
                summary[k] = std::move(merged);
            }
        }
    }
    BackgroundProfile profile;
    for (auto& [k, v] : summary) {
        if (!is_unknown(v)) {
            profile.set(k, v);
        }
    }
    return profile;
}

std::vector<std::size_t> stride_sample(std::size_t n, std::size_t sample) {
    std::vector<std::size_t> out;
    if (sample == 0) {
        return out;
    }
    if (n <= sample) {
        for (std::size_t i = 0; i < n; ++i) {
            out.push_back(i);
        }
        return out;
    }
    for (std::size_t i = 0; i < sample; ++i) {
        out.push_back(i * n / sample);
    }
    return out;
}

std::map<std::string, std::vector<WordCount>> count_common_words(const std::vector<std::string>& texts,
                                                                 std::size_t per_class, const PosTagger& tagger) {
    std::map<std::string, std::size_t> counts;
    for (const auto& t : texts) {
        for (auto& term : text::lexical_terms(t)) {
            ++counts[term];
        }
    }
    std::map<std::string, std::vector<WordCount>> out;
    for (const auto& [word, count] : counts) {
        out[std::string(tagger.tag(word))].push_back({word, count});
    }
    for (auto& [_, words] : out) {
        std::sort(words.begin(), words.end(), [](const WordCount& a, const WordCount& b) {
            return a.count != b.count ? a.count > b.count : a.word < b.word;
        });
        if (words.size() > per_class) {
            words.resize(per_class);
        }
    }
    return out;
}

StyleProfile extract_style(const std::string& speaker, const std::vector<ingest::UtteranceRecord>& utterances,
                           const llm::LlmClient& client, const prompts::PromptLibrary& prompts,
                           const ProfileOptions& options) {
    if (utterances.empty()) {
        throw InputError("style extraction for '" + speaker + "' needs at least one utterance");
    }
    std::vector<std::string> texts;
    for (const auto& u : utterances) {
        texts.push_back(u.text);
    }
    const auto language = detect_language(options, texts);
    std::string sample;
    for (auto i : stride_sample(texts.size(), options.style_sample)) {
        sample += "- " + texts[i] + "\n";
    }
    StyleProfile style;
    style.preferences = trimmed(
        client.complete(prompts.request("style_analysis", language, {{"speaker", speaker}, {"utterances", sample}})));
    if (style.preferences.empty()) {
        style.preferences = std::string(kUnknown);
    }
    style.common_words = count_common_words(texts, options.common_words_per_class);
    return style;
}

PersonaBundle build_persona(const std::string& speaker, const ingest::BookStore& book,
                            const retrieval::HybridIndex& chunk_index, const llm::LlmClient& client,
                            const prompts::PromptLibrary& prompts, const ProfileOptions& options) {
    PersonaBundle bundle;
    bundle.canonical_name = speaker;
    bundle.source_book = book.book_id;
    for (const auto& r : book.merged.records) {
        if (r.speaker == speaker) {
            bundle.utterances.push_back(r);
        }
    }
    if (bundle.utterances.empty()) {
        std::string known;
        for (const auto& [name, count] : ingest::speaker_counts(book.merged.records)) {
            known += (known.empty() ? "" : ", ") + name;
        }
        throw NotFoundError("no utterances for '" + speaker + "'; known speakers: " + (known.empty() ? "none" : known));
    }
    if (const auto it = book.merged.aliases.find(speaker); it != book.merged.aliases.end()) {
        bundle.alias_map[speaker] = it->second;
    } else {
        bundle.alias_map[speaker] = {speaker};
    }
    const auto relevant = ingest::select_relevant_chunks(speaker, book.merged.aliases, book.merged.records,
                                                         book.chunks, chunk_index, options.relevant_chunks);
    // Book order keeps the background rounds aligned with the narrative.
    auto ordered = relevant;
    std::sort(ordered.begin(), ordered.end(),
              [](const ingest::Chunk& a, const ingest::Chunk& b) { return a.chunk_id < b.chunk_id; });
    bundle.personality = extract_personality(speaker, ordered, client, prompts, options);
    bundle.background = extract_background(speaker, ordered, client, prompts, options);
    bundle.style = extract_style(speaker, bundle.utterances, client, prompts, options);
    bundle.validate();
    return bundle;
}

nlohmann::ordered_json profile_to_json(const PersonaBundle& bundle) {
    nlohmann::ordered_json j;
    j["canonical_name"] = bundle.canonical_name;
    j["source_book"] = bundle.source_book;
    nlohmann::ordered_json traits = nlohmann::ordered_json::array();
    for (const auto& [chunk_id, trait] : bundle.personality.per_chunk_traits) {
        nlohmann::ordered_json t;
        t["chunk_id"] = chunk_id;
        t["traits"] = trait;
        traits.push_back(std::move(t));
    }
    j["personality"]["synthesized"] = bundle.personality.synthesized;
    j["personality"]["per_chunk_traits"] = std::move(traits);
    nlohmann::ordered_json background = nlohmann::ordered_json::object();
    for (const auto key : kBackgroundKeys) {
        background[std::string(key)] = bundle.background.get(key);
    }
    j["background"] = std::move(background);
    j["style"]["preferences"] = bundle.style.preferences;
    return j;
}

nlohmann::ordered_json common_words_to_json(const StyleProfile& style) {
    nlohmann::ordered_json j = nlohmann::ordered_json::object();
    for (const auto pos : kPosClasses) {
        const auto it = style.common_words.find(std::string(pos));
        if (it == style.common_words.end()) {
            continue;
        }
        nlohmann::ordered_json list = nlohmann::ordered_json::array();
        for (const auto& w : it->second) {
            nlohmann::ordered_json entry;
            entry["word"] = w.word;
            entry["count"] = w.count;
            list.push_back(std::move(entry));
        }
        j[std::string(pos)] = std::move(list);
    }
    return j;
}

namespace {

void write_file(const std::filesystem::path& path, const std::string& content) {
    util::write_file_atomic(path, content);
}

nlohmann::json read_json_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    auto j = nlohmann::json::parse(ss.str(), nullptr, false);
    if (j.is_discarded()) {
        throw LoadError("malformed JSON in " + path.string());
    }
    return j;
}

std::map<std::string, std::vector<WordCount>> common_words_from_json(const nlohmann::json& j) {
    std::map<std::string, std::vector<WordCount>> out;
    for (const auto& [pos, list] : j.items()) {
        auto& words = out[pos];
        for (const auto& entry : list) {
            words.push_back({entry.at("word").get<std::string>(), entry.at("count").get<std::size_t>()});
        }
    }
    return out;
}

void apply_profile_json(PersonaBundle& bundle, const nlohmann::json& j, bool partial) {
    if (!j.is_object()) {
        throw InputError("persona profile must be a JSON object");
    }
    auto string_field = [](const nlohmann::json& obj, const char* key, const std::string& where) {
        const auto& v = obj.at(key);
        if (!v.is_string()) {
            throw InputError(where + "." + key + " must be a string");
        }
        return v.get<std::string>();
    };
    if (j.contains("canonical_name")) {
        const auto name = string_field(j, "canonical_name", "profile");
        if (partial && name != bundle.canonical_name) {
            throw InputError("canonical_name cannot be changed by an edit");
        }
        bundle.canonical_name = name;
    } else if (!partial) {
        throw InputError("profile.canonical_name is missing");
    }
    if (j.contains("source_book")) {
        bundle.source_book = string_field(j, "source_book", "profile");
    }
    if (j.contains("personality")) {
        const auto& p = j.at("personality");
        if (p.contains("synthesized")) {
            bundle.personality.synthesized = string_field(p, "synthesized", "personality");
        }
        if (p.contains("per_chunk_traits")) {
            bundle.personality.per_chunk_traits.clear();
            for (const auto& t : p.at("per_chunk_traits")) {
                bundle.personality.per_chunk_traits.emplace_back(t.at("chunk_id").get<std::size_t>(),
                                                                 t.at("traits").get<std::string>());
            }
        }
    } else if (!partial) {
        throw InputError("profile.personality is missing");
    }
    if (j.contains("background")) {
        const auto& b = j.at("background");
        if (!b.is_object()) {
            throw InputError("background must be an object");
        }
        for (const auto& [key, value] : b.items()) {
            if (!value.is_string()) {
                throw InputError("background." + key + " must be a string");
            }
            bundle.background.set(key, value.get<std::string>());
        }
        if (!partial) {
            for (const auto key : kBackgroundKeys) {
                if (!b.contains(std::string(key))) {
                    throw InputError("background." + std::string(key) + " is missing");
                }
            }
        }
    } else if (!partial) {
        throw InputError("profile.background is missing");
    }
    if (j.contains("style")) {
        const auto& s = j.at("style");
        if (s.contains("preferences")) {
            bundle.style.preferences = string_field(s, "preferences", "style");
        }
        if (s.contains("common_words")) {
            bundle.style.common_words = common_words_from_json(s.at("common_words"));
        }
    }
}

} // namespace

void save_bundle(const PersonaBundle& bundle, const std::filesystem::path& dir) {
    bundle.validate();
    std::filesystem::create_directories(dir);
    write_file(dir / "profile.json", profile_to_json(bundle).dump(2) + "\n");
    write_file(dir / "common_words.json", common_words_to_json(bundle.style).dump(2) + "\n");
    ingest::save_utterances(dir / "utterances.jsonl", bundle.utterances);
    ingest::save_aliases(dir / "aliases.json", bundle.alias_map);
}

PersonaBundle load_bundle(const std::filesystem::path& dir) {
    std::vector<std::string> missing;
    for (const auto* name : {"profile.json", "common_words.json", "utterances.jsonl", "aliases.json"}) {
        if (!std::filesystem::is_regular_file(dir / name)) {
            missing.emplace_back(name);
        }
    }
    if (!missing.empty()) {
        std::string list;
        for (const auto& m : missing) {
            list += (list.empty() ? "" : ", ") + m;
        }
        throw LoadError("persona bundle " + dir.string() + " is missing " + list);
    }
    PersonaBundle bundle;
    const auto profile_path = dir / "profile.json";
    try {
        apply_profile_json(bundle, read_json_file(profile_path), false);
    } catch (const nlohmann::json::exception& e) {
        throw LoadError("malformed " + profile_path.string() + ": " + e.what());
    } catch (const InputError& e) {
        throw LoadError("invalid " + profile_path.string() + ": " + e.what());
    }
    const auto words_path = dir / "common_words.json";
    try {
        bundle.style.common_words = common_words_from_json(read_json_file(words_path));
    } catch (const nlohmann::json::exception& e) {
        throw LoadError("malformed " + words_path.string() + ": " + e.what());
    }
    bundle.utterances = ingest::load_utterances(dir / "utterances.jsonl");
    bundle.alias_map = ingest::load_aliases(dir / "aliases.json");
    try {
        bundle.validate();
    } catch (const InputError& e) {
        throw LoadError("invalid persona bundle " + dir.string() + ": " + e.what());
    }
    return bundle;
}

PersonaBundle apply_edit(PersonaBundle bundle, const nlohmann::json& edit) {
    try {
        apply_profile_json(bundle, edit, true);
    } catch (const nlohmann::json::exception& e) {
        throw InputError(std::string("malformed persona edit: ") + e.what());
    }
    bundle.validate();
    return bundle;
}

std::shared_ptr<const retrieval::HybridIndex> load_or_build_utterance_index(
    const PersonaBundle& bundle, const std::filesystem::path& dir, std::shared_ptr<const llm::Embedder> embedder) {
    if (bundle.utterances.empty()) {
        return nullptr;
    }
    const auto index_dir = dir / "utterance_index";
    if (std::filesystem::exists(index_dir / "lexical.json")) {
        try {
            auto stored = retrieval::HybridIndex::load(index_dir, embedder);
            bool same = stored.size() == bundle.utterances.size();
            for (std::size_t i = 0; same && i < bundle.utterances.size(); ++i) {
                const auto& d = stored.documents()[i];
                same = d.id == i && d.text == bundle.utterances[i].text;
            }
            if (same) {
                return std::make_shared<const retrieval::HybridIndex>(std::move(stored));
            }
        } catch (const LoadError&) {
            // stale or damaged; rebuilt below
        }
    }
    std::vector<retrieval::Document> docs;
    for (std::size_t i = 0; i < bundle.utterances.size(); ++i) {
        docs.push_back({i, bundle.utterances[i].text});
    }
    auto index = retrieval::HybridIndex::build(std::move(docs), std::move(embedder));
    index.save(index_dir);
    return std::make_shared<const retrieval::HybridIndex>(std::move(index));
}

} // namespace rolekit::profile
