#include "rolekit/pipeline/pipeline.hpp"

#include <algorithm>
#include <set>

#include "rolekit/llm/json_reply.hpp"
#include "rolekit/llm/language.hpp"
#include "rolekit/text/tokenizer.hpp"
#include "rolekit/text/utf8.hpp"
#include "rolekit/util/parallel.hpp"

namespace rolekit::pipeline {

namespace {

class ForwardingChatModel final : public llm::ChatModel {
public:
    explicit ForwardingChatModel(const llm::LlmClient& inner) : inner_(inner) {}

    std::string complete(const llm::ChatRequest& request) override { return inner_.complete(request); }

private:
    const llm::LlmClient& inner_;
};

std::string label_for(std::string_view key) {
    std::string out(key);
    std::replace(out.begin(), out.end(), '_', ' ');
    if (!out.empty()) {
        out[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(out[0])));
    }
    return out;
}

std::string render_exemplars(const std::vector<std::string>& exemplars) {
    if (exemplars.empty()) {
        return "(none)";
    }
    std::string out;
    for (const auto& e : exemplars) {
        out += (out.empty() ? "- " : "\n- ") + e;
    }
    return out;
}

std::string render_hits(const std::vector<memory::MemoryHit>& hits) {
    std::string out;
    for (const auto& h : hits) {
        if (!out.empty()) {
            out += "\n";
        }
        out += "- [" + std::string(memory::hit_kind_name(h.kind)) + "] " + h.text;
    }
    return out;
}

std::vector<std::string> parse_keywords(const std::string& raw) {
    const auto j = llm::parse_json_reply(raw);
    if (!j.is_array()) {
        throw ParseError("keyword reply must be a JSON array of strings", raw);
    }
    std::vector<std::string> out;
    std::set<std::string> seen;
    for (const auto& k : j) {
        if (!k.is_string()) {
            throw ParseError("keyword reply must contain only strings", raw);
        }
        const auto t = std::string(text::trim(k.get_ref<const std::string&>()));
        if (!t.empty() && seen.insert(t).second && out.size() < 10) {
            out.push_back(t);
        }
    }
    if (out.empty()) {
        throw ParseError("keyword reply contains no keywords", raw);
    }
    return out;
}

std::vector<std::string> parse_sentence_array(const std::string& raw, std::size_t expected) {
    const auto j = llm::parse_json_reply(raw);
    if (!j.is_array() || j.size() != expected) {
        throw ParseError("expected a JSON array of " + std::to_string(expected) + " rewritten sentences", raw);
    }
    std::vector<std::string> out;
    for (const auto& s : j) {
        if (!s.is_string() || text::trim(s.get_ref<const std::string&>()).empty()) {
            throw ParseError("every rewritten sentence must be a non-empty string", raw);
        }
        out.emplace_back(text::trim(s.get_ref<const std::string&>()));
    }
    return out;
}

bool has_terms(const std::string& s) { return !text::lexical_terms(s).empty(); }

std::vector<std::string> exemplar_texts(const retrieval::HybridIndex& index,
                                        const std::vector<retrieval::ScoredDoc>& docs) {
    std::vector<std::string> out;
    for (const auto& d : docs) {
        out.push_back(index.document(d.doc_id).text);
    }
    return out;
}

} // namespace

std::string_view matching_mode_name(MatchingMode mode) noexcept {
    switch (mode) {
    case MatchingMode::simple:
        return "simple";
    case MatchingMode::parallel:
        return "parallel";
    case MatchingMode::dynamic:
        return "dynamic";
    }
    return "dynamic";
}

MatchingMode parse_matching_mode(std::string_view name) {
    for (auto m : {MatchingMode::simple, MatchingMode::parallel, MatchingMode::dynamic}) {
        if (matching_mode_name(m) == name) {
            return m;
        }
    }
    throw ConfigError("unknown matching mode '" + std::string(name) + "' (expected simple, parallel or dynamic)");
}

void PipelineConfig::validate() const {
    if (style_before_memory && !memory_check_enabled) {
        throw ConfigError("style_before_memory requires memory_check_enabled");
    }
    if (exemplar_k == 0) {
        throw ConfigError("exemplar_k must be at least 1");
    }
    if (memory_k == 0) {
        throw ConfigError("memory_k must be at least 1");
    }
    if (max_response_sentences && *max_response_sentences == 0) {
        throw ConfigError("max_response_sentences must be at least 1 when set");
    }
    if (parallelism == 0) {
        throw ConfigError("parallelism must be at least 1");
    }
}

std::size_t PipelineTrace::total_llm_calls() const {
    std::size_t n = 0;
    for (const auto& [stage, calls] : llm_calls) {
        n += calls;
    }
    return n;
}

TurnError::TurnError(const Error& cause, PipelineTrace partial)
    : Error(cause.code(), cause.what()), partial_(std::move(partial)) {}

std::string persona_language(const profile::PersonaBundle& bundle) {
    std::string sample = bundle.personality.synthesized;
    for (std::size_t i = 0; i < bundle.utterances.size() && i < 50; ++i) {
        sample += "\n" + bundle.utterances[i].text;
    }
    if (text::trim(sample).empty()) {
        sample = bundle.canonical_name;
    }
    return llm::select_prompt_language(sample);
}

std::string render_background(const profile::BackgroundProfile& background) {
    std::string out;
    for (const auto key : profile::kBackgroundKeys) {
        if (!out.empty()) {
            out += "\n";
        }
        out += label_for(key) + ": " + background.get(key);
    }
    return out;
}

std::string render_common_words(const profile::StyleProfile& style, std::size_t per_class) {
    std::string out;
    for (const auto pos : profile::kPosClasses) {
        const auto it = style.common_words.find(std::string(pos));
        if (it == style.common_words.end() || it->second.empty()) {
            continue;
        }
        std::string line = std::string(pos) + ": ";
        for (std::size_t i = 0; i < it->second.size() && i < per_class; ++i) {
            line += (i == 0 ? "" : ", ") + it->second[i].word;
        }
        out += (out.empty() ? "" : "\n") + line;
    }
    return out.empty() ? "(none)" : out;
}

std::vector<std::string> fallback_keywords(const std::string& input) {
    constexpr std::size_t kMax = 10;
    const auto& tagger = profile::default_tagger();
    std::vector<std::string> out;
    std::set<std::string> seen;
    auto add = [&](const std::string& k) {
        if (out.size() < kMax && !k.empty() && seen.insert(ingest::normalize_name(k)).second) {
            out.push_back(k);
        }
    };
    auto content_word = [&](const std::string& term) {
        const auto tag = tagger.tag(term);
        return tag == "noun" || tag == "other" || tag == "adjective";
    };

    std::vector<std::string> run;
    auto flush = [&] {
        bool keep = false;
        for (const auto& w : run) {
            keep = keep || content_word(text::lexical_terms(w).empty() ? w : text::lexical_terms(w).front());
        }
        if (keep) {
            std::string phrase;
            for (const auto& w : run) {
                phrase += (phrase.empty() ? "" : " ") + w;
            }
            add(phrase);
        }
        run.clear();
    };
    for (const auto& tok : text::default_tokenizer().tokenize(input)) {
        std::string word(input.substr(tok.begin, tok.end - tok.begin));
        std::size_t b = 0;
        std::size_t e = word.size();
        while (b < e && std::ispunct(static_cast<unsigned char>(word[b]))) {
            ++b;
        }
        bool ends_phrase = false;
        while (e > b && std::ispunct(static_cast<unsigned char>(word[e - 1]))) {
            --e;
            ends_phrase = true;
        }
        word = word.substr(b, e - b);
        if (!word.empty() && std::isupper(static_cast<unsigned char>(word[0]))) {
            run.push_back(word);
        } else {
            flush();
        }
        if (ends_phrase) {
            flush();
        }
    }
    flush();
    for (const auto& term : text::lexical_terms(input)) {
        if (tagger.tag(term) == "noun") {
            add(term);
        }
    }
    for (const auto& term : text::lexical_terms(input)) {
        if (content_word(term)) {
            add(term);
        }
    }
    if (out.empty()) {
        for (const auto& term : text::lexical_terms(input)) {
            add(term);
        }
    }
    return out;
}

Pipeline::Pipeline(std::shared_ptr<const llm::LlmClient> client,
                   std::shared_ptr<const prompts::PromptLibrary> prompts)
    : client_(std::move(client)), prompts_(std::move(prompts)) {
    if (!client_ || !prompts_) {
        throw ConfigError("pipeline needs a chat client and a prompt library");
    }
}

std::string Pipeline::stage1_styleless(const PersonaContext& persona, const std::vector<HistoryEntry>& history,
                                       const std::string& user_message, const std::string& language,
                                       const llm::LlmClient& client) const {
    const auto& bundle = *persona.bundle;
    llm::ChatRequest request;
    request.task = "styleless";
    request.system_prompt = prompts_->render_system("styleless_system", language,
                                                    {{"name", bundle.canonical_name},
                                                     {"personality", bundle.personality.synthesized},
                                                     {"background", render_background(bundle.background)}});
    for (const auto& h : history) {
        request.messages.push_back({llm::Role::user, h.user});
        request.messages.push_back({llm::Role::assistant, h.assistant});
    }
    request.messages.push_back({llm::Role::user, user_message});
    auto reply = std::string(text::trim(client.complete(request)));
    if (reply.empty()) {
        throw ParseError("styleless stage returned an empty reply", reply);
    }
    return reply;
}

Pipeline::Keywords Pipeline::stage2_rewrite_query(const PersonaContext& persona, const std::string& styleless,
                                                  const std::string& user_message, const std::string& language,
                                                  const llm::LlmClient& client) const {
    if (text::trim(styleless).empty()) {
        throw InputError("query rewriting needs a non-empty draft");
    }
    const auto request = prompts_->request(
        "rewrite_query", language,
        {{"name", persona.bundle->canonical_name}, {"user_message", user_message}, {"styleless", styleless}});
    try {
        return {llm::complete_structured(client, request, parse_keywords,
                                         [&](const std::string& raw, const std::string& why) {
                                             return prompts_->repair_request(request, raw, why, language);
                                         }),
                false};
    } catch (const ParseError&) {
        return {fallback_keywords(styleless), true};
    }
}

Pipeline::MemoryCheck Pipeline::stage2_memory_check(const PersonaContext& persona, const std::string& draft,
                                                    const std::vector<std::string>& keywords,
                                                    const std::string& user_message, const PipelineConfig& config,
                                                    const std::string& language,
                                                    const llm::LlmClient& client) const {
    if (!persona.graph) {
        throw ConfigError("memory checking is enabled but no memory graph is loaded for " +
                          persona.bundle->canonical_name);
    }
    MemoryCheck out;
    out.checked = draft;
    bool any_keyword = false;
    for (const auto& k : keywords) {
        any_keyword = any_keyword || has_terms(k);
    }
    if (any_keyword) {
        out.hits = persona.graph->query(keywords, {config.memory_k, 1, 0.8});
    }
    if (out.hits.empty()) {
        out.notes.push_back("memory check skipped: no memory hits for the keywords");
    } else {
        auto reply = std::string(text::trim(client.complete(prompts_->request(
            "memory_check", language,
            {{"name", persona.bundle->canonical_name},
             {"user_message", user_message},
             {"draft", draft},
             {"memory", render_hits(out.hits)}}))));
        if (reply.empty()) {
            out.notes.push_back("memory check returned an empty reply; draft kept");
        } else {
            out.checked = std::move(reply);
        }
    }
    if (config.summarize_after_memory) {
        auto reply =
            std::string(text::trim(client.complete(prompts_->request("summarize", language, {{"draft", out.checked}}))));
        out.summarized = reply.empty() ? out.checked : reply;
    }
    return out;
}

StyleRemoval Pipeline::remove_style(const std::string& input, const std::string& language,
                                    const llm::LlmClient& client) const {
    StyleRemoval out;
    out.before = input;
    out.caution = language == "zh";
    auto reply = std::string(text::trim(client.complete(prompts_->request("style_removal", language, {{"draft", input}}))));
    out.after = reply.empty() ? input : reply;
    return out;
}

Pipeline::Stylized Pipeline::stage3_stylize(const PersonaContext& persona, const std::string& draft,
                                            const PipelineConfig& config, const std::string& language,
                                            const llm::LlmClient& client) const {
    const auto& bundle = *persona.bundle;
    Stylized out;
    out.segments = segment_response(draft);
    if (config.max_response_sentences) {
        std::size_t sentences = 0;
        std::size_t keep = out.segments.size();
        for (std::size_t i = 0; i < out.segments.size(); ++i) {
            if (out.segments[i].kind == SegmentKind::sentence && ++sentences > *config.max_response_sentences) {
                keep = i;
                break;
            }
        }
        while (keep < out.segments.size() && keep > 0 && out.segments[keep - 1].kind == SegmentKind::action) {
            --keep;
        }
        if (keep < out.segments.size()) {
            out.segments.resize(keep);
            out.segments.back().trailing.clear();
            out.notes.push_back("reply truncated to " + std::to_string(*config.max_response_sentences) +
                                " sentence(s)");
        }
    }
    std::vector<std::size_t> sentence_pos;
    for (const auto& s : out.segments) {
        if (s.kind == SegmentKind::sentence) {
            sentence_pos.push_back(s.position);
        }
    }
    const auto* index = persona.utterance_index.get();
    if (!index) {
        out.notes.push_back("no utterances indexed for " + bundle.canonical_name + "; rewriting without exemplars");
    }
    auto retrieve = [&](const std::string& prefix, const std::string& segment) -> std::vector<std::string> {
        if (!index || !has_terms(segment)) {
            return {};
        }
        const auto k = std::min(config.exemplar_k, index->size());
        if (has_terms(prefix)) {
            return exemplar_texts(*index, index->search_progressive(prefix, segment, k));
        }
        return exemplar_texts(*index, index->search(segment, k));
    };
    const prompts::PromptVars base = {
        {"name", bundle.canonical_name},
        {"style_preferences", bundle.style.preferences},
        {"common_words", render_common_words(bundle.style)},
    };
    auto with = [&](prompts::PromptVars extra) {
        auto vars = base;
        for (auto& [k, v] : extra) {
            vars[k] = std::move(v);
        }
        return vars;
    };
    auto clean = [](const std::string& reply, const std::string& original) {
        auto t = std::string(text::trim(reply));
        return t.empty() ? original : t;
    };

    std::vector<std::string> rewritten(out.segments.size());
    std::vector<std::vector<std::string>> exemplars(out.segments.size());
    if (!sentence_pos.empty()) {
        switch (config.matching_mode) {
        case MatchingMode::simple: {
            nlohmann::json sentences = nlohmann::json::array();
            std::string joined;
            for (auto p : sentence_pos) {
                sentences.push_back(out.segments[p].text);
                joined += (joined.empty() ? "" : " ") + out.segments[p].text;
            }
            const auto shared = retrieve("", joined);
            const auto request = prompts_->request(
                "stylize_simple", language,
                with({{"exemplars", render_exemplars(shared)}, {"sentences_json", sentences.dump()}}));
            const auto n = sentence_pos.size();
            const auto result = llm::complete_structured(
                client, request, [n](const std::string& raw) { return parse_sentence_array(raw, n); },
                [&](const std::string& raw, const std::string& why) {
                    return prompts_->repair_request(request, raw, why, language);
                });
            for (std::size_t i = 0; i < n; ++i) {
                rewritten[sentence_pos[i]] = result[i];
                exemplars[sentence_pos[i]] = shared;
            }
            break;
        }
        case MatchingMode::parallel: {
            const auto results = util::parallel_map(sentence_pos.size(), config.parallelism, [&](std::size_t i) {
                const auto& segment = out.segments[sentence_pos[i]].text;
                auto ex = retrieve("", segment);
                auto reply = client.complete(prompts_->request(
                    "stylize_segment", language, with({{"exemplars", render_exemplars(ex)}, {"segment", segment}})));
                return std::make_pair(std::move(ex), clean(reply, segment));
            });
            for (std::size_t i = 0; i < sentence_pos.size(); ++i) {
                exemplars[sentence_pos[i]] = results[i].first;
                rewritten[sentence_pos[i]] = results[i].second;
            }
            break;
        }
        case MatchingMode::dynamic: {
            std::string stylized_sentences;
            std::string reply_so_far;
            std::size_t next = 0;
            for (auto p : sentence_pos) {
                for (; next < p; ++next) {
                    const auto& s = out.segments[next];
                    reply_so_far += s.leading + (s.kind == SegmentKind::sentence ? rewritten[next] : s.text) + s.trailing;
                }
                const auto& segment = out.segments[p].text;
                auto ex = retrieve(stylized_sentences, segment);
                const auto prefix = std::string(text::trim(reply_so_far));
                const auto request =
                    stylized_sentences.empty()
                        ? prompts_->request("stylize_segment", language,
                                            with({{"exemplars", render_exemplars(ex)}, {"segment", segment}}))
                        : prompts_->request(
                              "stylize_progressive", language,
                              with({{"exemplars", render_exemplars(ex)}, {"prefix", prefix}, {"segment", segment}}));
                rewritten[p] = clean(client.complete(request), segment);
                exemplars[p] = std::move(ex);
                stylized_sentences += (stylized_sentences.empty() ? "" : " ") + rewritten[p];
            }
            break;
        }
        }
    }
    auto final_segments = out.segments;
    for (auto p : sentence_pos) {
        final_segments[p].text = rewritten[p];
        out.per_segment.push_back({p, exemplars[p], rewritten[p]});
    }
    out.text = std::string(text::trim(join_segments(final_segments)));
    return out;
}

PipelineTrace Pipeline::run_turn(const PersonaContext& persona, std::vector<HistoryEntry>& history,
                                 const std::string& user_message, const PipelineConfig& config,
                                 const std::string& trace_id) const {
    PipelineTrace trace;
    trace.trace_id = trace_id;
    trace.user_message = user_message;
    trace.config = config;
    try {
        if (!persona.bundle) {
            throw ConfigError("turn has no persona bundle");
        }
        if (text::trim(user_message).empty()) {
            throw InputError("message text must not be empty");
        }
        config.validate();
        trace.language = config.language.empty() ? persona_language(*persona.bundle) : config.language;
        const auto& language = trace.language;

        auto log = std::make_shared<llm::CallLog>();
        const llm::LlmClient turn_client(std::make_shared<ForwardingChatModel>(*client_), log);
        auto stage = [&](const std::string& name, auto&& body) {
            trace.stages.push_back(name);
            const auto before = log->count(llm::CallKind::chat);
            struct Count {
                PipelineTrace& t;
                const std::string& n;
                const llm::CallLog& l;
                std::size_t b;
                ~Count() { t.llm_calls[n] += l.count(llm::CallKind::chat) - b; }
            } count{trace, name, *log, before};
            body();
        };

        stage("styleless", [&] {
            trace.styleless = stage1_styleless(persona, history, user_message, language, turn_client);
        });
        std::string draft = trace.styleless;

        auto memory_stages = [&](const std::string& input) {
            stage("rewrite_query", [&] {
                auto k = stage2_rewrite_query(persona, input, user_message, language, turn_client);
                trace.rewrite_keywords = std::move(k.keywords);
                trace.keywords_fallback = k.fallback;
                if (k.fallback) {
                    trace.notes.push_back("query rewriting failed; keywords extracted from the draft");
                }
            });
            MemoryCheck checked;
            stage("memory_check", [&] {
                auto cfg = config;
                cfg.summarize_after_memory = false;
                checked = stage2_memory_check(persona, input, *trace.rewrite_keywords, user_message, cfg, language,
                                              turn_client);
                trace.memory_hits = checked.hits;
                trace.memory_checked = checked.checked;
                trace.notes.insert(trace.notes.end(), checked.notes.begin(), checked.notes.end());
            });
            std::string result = checked.checked;
            if (config.summarize_after_memory) {
                stage("summarize", [&] {
                    auto reply = std::string(text::trim(
                        turn_client.complete(prompts_->request("summarize", language, {{"draft", result}}))));
                    trace.summarized = reply.empty() ? result : reply;
                });
                result = *trace.summarized;
            }
            return result;
        };
        auto style_stages = [&](const std::string& input) {
            std::string source = input;
            if (config.style_removal_enabled) {
                stage("style_removal", [&] {
                    trace.style_removal = remove_style(source, language, turn_client);
                    if (trace.style_removal->caution) {
                        trace.notes.push_back("style removal on Chinese text may alter the original meaning");
                    }
                });
                source = trace.style_removal->after;
            }
            Stylized stylized;
            stage("stylize", [&] {
                stylized = stage3_stylize(persona, source, config, language, turn_client);
            });
            trace.segments = std::move(stylized.segments);
            trace.per_segment = std::move(stylized.per_segment);
            trace.stylized = stylized.text;
            trace.notes.insert(trace.notes.end(), stylized.notes.begin(), stylized.notes.end());
            return trace.stylized;
        };

        if (!config.memory_check_enabled) {
            trace.reply = style_stages(draft);
        } else if (config.style_before_memory) {
            trace.reply = memory_stages(style_stages(draft));
        } else {
            trace.reply = style_stages(memory_stages(draft));
        }
        if (text::trim(trace.reply).empty()) {
            throw InternalError("turn produced an empty reply");
        }
    } catch (const Error& e) {
        trace.failed = true;
        trace.error = std::string(error_code_name(e.code())) + ": " + e.what();
        throw TurnError(e, std::move(trace));
    } catch (const std::exception& e) {
        trace.failed = true;
        trace.error = std::string("internal: ") + e.what();
        throw TurnError(InternalError(e.what()), std::move(trace));
    }
    history.push_back({user_message, trace.reply, trace.trace_id});
    return trace;
}

} // namespace rolekit::pipeline
