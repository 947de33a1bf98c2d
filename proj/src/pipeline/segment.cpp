#include <algorithm>

#include "rolekit/pipeline/pipeline.hpp"
#include "rolekit/text/utf8.hpp"

namespace rolekit::pipeline {

namespace {

bool is_open(char32_t cp) { return cp == U'(' || cp == U'（'; }
bool is_close(char32_t cp) { return cp == U')' || cp == U'）'; }

bool is_terminal(char32_t cp) {
    switch (cp) {
    case U'.':
    case U'!':
    case U'?':
    case U'…':
    case U'。':
    case U'！':
    case U'？':
        return true;
    default:
        return false;
    }
}

bool needs_space_after(char32_t cp) { return cp == U'.' || cp == U'!' || cp == U'?'; }

bool is_closing_quote(char32_t cp) {
    switch (cp) {
    case U'"':
    case U'\'':
    case U'”':
    case U'’':
    case U'」':
    case U'』':
    case U'》':
        return true;
    default:
        return false;
    }
}

struct Span {
    SegmentKind kind;
    std::size_t begin;
    std::size_t end;
};

void split_sentences(std::string_view text, std::size_t begin, std::size_t end, std::vector<Span>& out) {
    std::size_t pos = begin;
    while (pos < end) {
        while (pos < end) {
            const auto cp = text::decode_at(text, pos);
            if (!text::is_whitespace(cp.value)) {
                break;
            }
            pos += cp.length;
        }
        if (pos >= end) {
            return;
        }
        const std::size_t start = pos;
        std::size_t stop = end;
        while (pos < end) {
            const auto cp = text::decode_at(text, pos);
            if (!is_terminal(cp.value)) {
                pos += cp.length;
                continue;
            }
            std::size_t after = pos;
            bool ascii_only = true;
            while (after < end) {
                const auto t = text::decode_at(text, after);
                if (!is_terminal(t.value)) {
                    break;
                }
                ascii_only = ascii_only && needs_space_after(t.value);
                after += t.length;
            }
            while (after < end) {
                const auto q = text::decode_at(text, after);
                if (!is_closing_quote(q.value)) {
                    break;
                }
                after += q.length;
            }
            const bool boundary = after >= end || !ascii_only ||
                                  text::is_whitespace(text::decode_at(text, after).value);
            pos = after;
            if (boundary) {
                stop = after;
                break;
            }
        }
        std::size_t content_end = std::min(stop, end);
        content_end -= text::trailing_space_bytes(text.substr(start, content_end - start));
        out.push_back({SegmentKind::sentence, start, content_end});
        pos = std::max(pos, content_end);
    }
}

} // namespace

std::string_view segment_kind_name(SegmentKind kind) noexcept {
    return kind == SegmentKind::action ? "action" : "sentence";
}

std::vector<std::pair<std::size_t, std::size_t>> BracketActionDetector::find(std::string_view text) const {
    std::vector<std::size_t> open;
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    for (std::size_t pos = 0; pos < text.size();) {
        const auto cp = text::decode_at(text, pos);
        if (is_open(cp.value)) {
            open.push_back(pos);
        } else if (is_close(cp.value) && !open.empty()) {
            pairs.emplace_back(open.back(), pos + cp.length);
            open.pop_back();
        }
        pos += cp.length;
    }
    std::sort(pairs.begin(), pairs.end(), [](const auto& a, const auto& b) {
        return a.first != b.first ? a.first < b.first : a.second > b.second;
    });
    std::vector<std::pair<std::size_t, std::size_t>> outer;
    for (const auto& p : pairs) {
        if (outer.empty() || p.first >= outer.back().second) {
            outer.push_back(p);
        }
    }
    return outer;
}

const ActionDetector& default_action_detector() {
    static const BracketActionDetector detector;
    return detector;
}

std::vector<Segment> segment_response(std::string_view text, const ActionDetector& detector) {
    if (text::trim(text).empty()) {
        throw InputError("cannot segment an empty response");
    }
    std::vector<Span> spans;
    std::size_t pos = 0;
    for (const auto& [begin, end] : detector.find(text)) {
        split_sentences(text, pos, begin, spans);
        spans.push_back({SegmentKind::action, begin, end});
        pos = end;
    }
    split_sentences(text, pos, text.size(), spans);

    std::vector<Segment> out;
    for (std::size_t i = 0; i < spans.size(); ++i) {
        Segment s;
        s.kind = spans[i].kind;
        s.position = i;
        s.text = std::string(text.substr(spans[i].begin, spans[i].end - spans[i].begin));
        if (i == 0) {
            s.leading = std::string(text.substr(0, spans[i].begin));
        }
        const auto next = i + 1 < spans.size() ? spans[i + 1].begin : text.size();
        s.trailing = std::string(text.substr(spans[i].end, next - spans[i].end));
        out.push_back(std::move(s));
    }
    return out;
}

std::string join_segments(const std::vector<Segment>& segments) {
    std::string out;
    for (const auto& s : segments) {
        out += s.leading;
        out += s.text;
        out += s.trailing;
    }
    return out;
}

} // namespace rolekit::pipeline
