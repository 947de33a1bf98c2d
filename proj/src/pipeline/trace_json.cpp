#include <set>

#include "rolekit/pipeline/pipeline.hpp"

namespace rolekit::pipeline {

namespace {

nlohmann::ordered_json hit_to_json(const memory::MemoryHit& h) {
    nlohmann::ordered_json j;
    j["kind"] = memory::hit_kind_name(h.kind);
    j["doc_id"] = h.doc_id;
    j["text"] = h.text;
    j["score"] = h.score;
    j["provenance"] = h.provenance;
    j["first_chunk"] = h.first_chunk;
    j["expanded"] = h.expanded;
    return j;
}

memory::MemoryHit hit_from_json(const nlohmann::json& j) {
    memory::MemoryHit h;
    const auto kind = j.at("kind").get<std::string>();
    if (kind == "entity") {
        h.kind = memory::HitKind::entity;
    } else if (kind == "relation") {
        h.kind = memory::HitKind::relation;
    } else if (kind == "chunk") {
        h.kind = memory::HitKind::chunk;
    } else {
        throw LoadError("unknown memory hit kind '" + kind + "'");
    }
    h.doc_id = j.at("doc_id").get<std::uint64_t>();
    h.text = j.at("text").get<std::string>();
    h.score = j.at("score").get<double>();
    h.provenance = j.at("provenance").get<std::vector<std::size_t>>();
    h.first_chunk = j.at("first_chunk").get<std::size_t>();
    h.expanded = j.at("expanded").get<bool>();
    return h;
}

nlohmann::ordered_json segment_to_json(const Segment& s) {
    nlohmann::ordered_json j;
    j["kind"] = segment_kind_name(s.kind);
    j["position"] = s.position;
    j["text"] = s.text;
    j["leading"] = s.leading;
    j["trailing"] = s.trailing;
    return j;
}

Segment segment_from_json(const nlohmann::json& j) {
    Segment s;
    const auto kind = j.at("kind").get<std::string>();
    if (kind != "action" && kind != "sentence") {
        throw LoadError("unknown segment kind '" + kind + "'");
    }
    s.kind = kind == "action" ? SegmentKind::action : SegmentKind::sentence;
    s.position = j.at("position").get<std::size_t>();
    s.text = j.at("text").get<std::string>();
    s.leading = j.value("leading", std::string());
    s.trailing = j.value("trailing", std::string());
    return s;
}

template <class T>
void optional_field(nlohmann::ordered_json& j, const char* key, const std::optional<T>& value) {
    if (value) {
        j[key] = *value;
    } else {
        j[key] = nullptr;
    }
}

} // namespace

nlohmann::ordered_json config_to_json(const PipelineConfig& c) {
    nlohmann::ordered_json j;
    j["memory_check_enabled"] = c.memory_check_enabled;
    j["style_before_memory"] = c.style_before_memory;
    j["style_removal_enabled"] = c.style_removal_enabled;
    j["summarize_after_memory"] = c.summarize_after_memory;
    j["matching_mode"] = matching_mode_name(c.matching_mode);
    j["exemplar_k"] = c.exemplar_k;
    j["memory_k"] = c.memory_k;
    optional_field(j, "max_response_sentences", c.max_response_sentences);
    j["parallelism"] = c.parallelism;
    j["language"] = c.language;
    return j;
}

PipelineConfig config_from_json(const nlohmann::json& j, PipelineConfig c) {
    if (j.is_null()) {
        return c;
    }
    if (!j.is_object()) {
        throw ConfigError("pipeline config must be a JSON object");
    }
    static const std::set<std::string> known = {
        "memory_check_enabled", "style_before_memory", "style_removal_enabled", "summarize_after_memory",
        "matching_mode",        "exemplar_k",          "memory_k",              "max_response_sentences",
        "parallelism",          "language",
    };
    for (const auto& [key, value] : j.items()) {
        if (!known.count(key)) {
            throw ConfigError("unknown pipeline config key '" + key + "'");
        }
    }
    auto flag = [&](const char* key, bool& out) {
        if (j.contains(key)) {
            if (!j.at(key).is_boolean()) {
                throw ConfigError(std::string(key) + " must be a boolean");
            }
            out = j.at(key).get<bool>();
        }
    };
    auto count = [&](const char* key, std::size_t& out) {
        if (j.contains(key)) {
            if (!j.at(key).is_number_integer() || j.at(key).get<long long>() < 0) {
                throw ConfigError(std::string(key) + " must be a non-negative integer");
            }
            out = j.at(key).get<std::size_t>();
        }
    };
    flag("memory_check_enabled", c.memory_check_enabled);
    flag("style_before_memory", c.style_before_memory);
    flag("style_removal_enabled", c.style_removal_enabled);
    flag("summarize_after_memory", c.summarize_after_memory);
    if (j.contains("matching_mode")) {
        if (!j.at("matching_mode").is_string()) {
            throw ConfigError("matching_mode must be a string");
        }
        c.matching_mode = parse_matching_mode(j.at("matching_mode").get<std::string>());
    }
    count("exemplar_k", c.exemplar_k);
    count("memory_k", c.memory_k);
    count("parallelism", c.parallelism);
    if (j.contains("max_response_sentences")) {
        if (j.at("max_response_sentences").is_null()) {
            c.max_response_sentences.reset();
        } else {
            std::size_t n = 0;
            count("max_response_sentences", n);
            c.max_response_sentences = n;
        }
    }
    if (j.contains("language")) {
        if (!j.at("language").is_string()) {
            throw ConfigError("language must be a string");
        }
        c.language = j.at("language").get<std::string>();
    }
    c.validate();
    return c;
}

nlohmann::ordered_json trace_to_json(const PipelineTrace& t) {
    nlohmann::ordered_json j;
    j["trace_id"] = t.trace_id;
    j["user_message"] = t.user_message;
    j["language"] = t.language;
    j["config"] = config_to_json(t.config);
    j["stages"] = t.stages;
    j["styleless"] = t.styleless;
    optional_field(j, "rewrite_keywords", t.rewrite_keywords);
    j["keywords_fallback"] = t.keywords_fallback;
    if (t.memory_hits) {
        auto hits = nlohmann::ordered_json::array();
        for (const auto& h : *t.memory_hits) {
            hits.push_back(hit_to_json(h));
        }
        j["memory_hits"] = hits;
    } else {
        j["memory_hits"] = nullptr;
    }
    optional_field(j, "memory_checked", t.memory_checked);
    optional_field(j, "summarized", t.summarized);
    if (t.style_removal) {
        j["style_removal"] = {{"before", t.style_removal->before},
                              {"after", t.style_removal->after},
                              {"caution", t.style_removal->caution}};
    } else {
        j["style_removal"] = nullptr;
    }
    auto segments = nlohmann::ordered_json::array();
    for (const auto& s : t.segments) {
        segments.push_back(segment_to_json(s));
    }
    j["segments"] = segments;
    auto per_segment = nlohmann::ordered_json::array();
    for (const auto& p : t.per_segment) {
        nlohmann::ordered_json e;
        e["position"] = p.position;
        e["exemplars"] = p.exemplars;
        e["rewritten"] = p.rewritten;
        per_segment.push_back(e);
    }
    j["per_segment"] = per_segment;
    j["stylized"] = t.stylized;
    j["reply"] = t.reply;
    nlohmann::ordered_json calls = nlohmann::ordered_json::object();
    for (const auto& stage : t.stages) {
        const auto it = t.llm_calls.find(stage);
        calls[stage] = it == t.llm_calls.end() ? 0 : it->second;
    }
    j["llm_calls"] = calls;
    j["total_llm_calls"] = t.total_llm_calls();
    j["notes"] = t.notes;
    j["failed"] = t.failed;
    j["error"] = t.error;
    return j;
}

PipelineTrace trace_from_json(const nlohmann::json& j) {
    PipelineTrace t;
    try {
        t.trace_id = j.at("trace_id").get<std::string>();
        t.user_message = j.at("user_message").get<std::string>();
        t.language = j.value("language", std::string());
        t.config = config_from_json(j.at("config"));
        t.stages = j.at("stages").get<std::vector<std::string>>();
        t.styleless = j.at("styleless").get<std::string>();
        if (!j.at("rewrite_keywords").is_null()) {
            t.rewrite_keywords = j.at("rewrite_keywords").get<std::vector<std::string>>();
        }
        t.keywords_fallback = j.at("keywords_fallback").get<bool>();
        if (!j.at("memory_hits").is_null()) {
            t.memory_hits.emplace();
            for (const auto& h : j.at("memory_hits")) {
                t.memory_hits->push_back(hit_from_json(h));
            }
        }
        if (!j.at("memory_checked").is_null()) {
            t.memory_checked = j.at("memory_checked").get<std::string>();
        }
        if (!j.at("summarized").is_null()) {
            t.summarized = j.at("summarized").get<std::string>();
        }
        if (!j.at("style_removal").is_null()) {
            const auto& r = j.at("style_removal");
            t.style_removal = StyleRemoval{r.at("before").get<std::string>(), r.at("after").get<std::string>(),
                                           r.at("caution").get<bool>()};
        }
        for (const auto& s : j.at("segments")) {
            t.segments.push_back(segment_from_json(s));
        }
        for (const auto& p : j.at("per_segment")) {
            t.per_segment.push_back({p.at("position").get<std::size_t>(),
                                     p.at("exemplars").get<std::vector<std::string>>(),
                                     p.at("rewritten").get<std::string>()});
        }
        t.stylized = j.at("stylized").get<std::string>();
        t.reply = j.at("reply").get<std::string>();
        for (const auto& [stage, calls] : j.at("llm_calls").items()) {
            t.llm_calls[stage] = calls.get<std::size_t>();
        }
        t.notes = j.at("notes").get<std::vector<std::string>>();
        t.failed = j.at("failed").get<bool>();
        t.error = j.at("error").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
        throw LoadError(std::string("malformed trace: ") + e.what());
    } catch (const ConfigError& e) {
        throw LoadError(std::string("malformed trace config: ") + e.what());
    }
    return t;
}

} // namespace rolekit::pipeline
