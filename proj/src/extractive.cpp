#include "carbonsum/extractive.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <stdexcept>

#include "carbonsum/util.hpp"

namespace carbonsum {

namespace {

// Common English abbreviations; shipped as data/abbreviations.txt for
// customization. Entries keep their trailing period.
constexpr const char* kDefaultAbbreviations[] = {
    "mr.",   "mrs.",  "ms.",   "dr.",    "prof.", "rev.",  "hon.",  "st.",
    "sr.",   "jr.",   "ph.d.", "m.d.",   "b.a.",  "m.a.",  "d.d.s.",
    "e.g.",  "i.e.",  "etc.",  "cf.",    "ca.",   "al.",   "vs.",   "viz.",
    "no.",   "nos.",  "vol.",  "vols.",  "p.",    "pp.",   "para.", "paras.",
    "ch.",   "chs.",  "fig.",  "figs.",  "eq.",   "eqs.",  "sec.",  "secs.",
    "ed.",   "eds.",  "repr.", "approx.","dept.", "govt.", "inc.",  "ltd.",
    "co.",   "corp.", "u.s.",  "u.k.",   "u.n.",  "jan.",  "feb.",  "mar.",
    "apr.",  "jun.",  "jul.",  "aug.",   "sep.",  "sept.", "oct.",  "nov.",
    "dec.",  "mt.",   "est.",  "min.",   "max.",  "avg.",  "univ.",
};

bool is_terminal(char c) { return c == '.' || c == '!' || c == '?'; }

bool is_closing(char c) {
    return c == '"' || c == '\'' || c == ')' || c == ']';
}

bool is_upper_or_digit(char c) {
    unsigned char u = static_cast<unsigned char>(c);
    return std::isupper(u) || std::isdigit(u);
}

/// The token ending at position `dot` (inclusive), scanning back over
/// letters and periods: catches "Dr." as well as "e.g." and "U.S.".
std::string token_ending_at(std::string_view text, size_t dot) {
    size_t start = dot;
    while (start > 0) {
        char c = text[start - 1];
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '.') --start;
        else break;
    }
    return to_lower(text.substr(start, dot - start + 1));
}

}  // namespace

const AbbreviationSet& AbbreviationSet::defaults() {
    static const AbbreviationSet set = [] {
        AbbreviationSet s;
        for (const char* token : kDefaultAbbreviations) s.tokens_.insert(token);
        return s;
    }();
    return set;
}

AbbreviationSet AbbreviationSet::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open abbreviation list: " + path);
    AbbreviationSet set;
    std::string line;
    while (std::getline(in, line)) {
        std::string token = trim(line);
        if (token.empty() || token[0] == '#') continue;
        set.tokens_.insert(to_lower(token));
    }
    return set;
}

bool AbbreviationSet::contains(std::string_view token) const {
    return tokens_.count(to_lower(token)) > 0;
}

std::vector<SentenceSpan> segment_sentences(std::string_view text) {
    return segment_sentences(text, AbbreviationSet::defaults());
}

std::vector<SentenceSpan> segment_sentences(std::string_view text,
                                            const AbbreviationSet& abbreviations) {
    if (text.empty()) throw std::invalid_argument("segment_sentences: text is empty");

    std::vector<SentenceSpan> spans;
    size_t n = text.size();
    size_t start = 0;

    auto flush = [&](size_t end) {
        // Trim the span to non-whitespace content.
        while (start < end && std::isspace(static_cast<unsigned char>(text[start]))) ++start;
        size_t last = end;
        while (last > start && std::isspace(static_cast<unsigned char>(text[last - 1]))) --last;
        if (last > start) {
            SentenceSpan span;
            span.index = spans.size();
            span.char_start = start;
            span.char_end = last;
            span.text = std::string(text.substr(start, last - start));
            spans.push_back(std::move(span));
        }
        start = end;
    };

    size_t i = 0;
    while (i < n) {
        char c = text[i];
        if (is_terminal(c)) {
            size_t end = i + 1;
            while (end < n && is_closing(text[end])) ++end;
            // Boundary requires whitespace then an uppercase/digit start.
            size_t next = end;
            while (next < n && std::isspace(static_cast<unsigned char>(text[next]))) ++next;
            bool boundary = next > end && next < n && is_upper_or_digit(text[next]);
            if (boundary && c == '.' && abbreviations.contains(token_ending_at(text, i)))
                boundary = false;
            if (boundary) {
                flush(end);
                i = next;
                continue;
            }
        }
        ++i;
    }
    flush(n);

    if (spans.empty()) throw std::invalid_argument("segment_sentences: text is all whitespace");
    return spans;
}

ExtractiveSummary extract_summary(const std::string& topic, const std::string& text,
                                  std::size_t k, Provider& encoder) {
    if (k < 1) throw std::invalid_argument("extract_summary: k must be >= 1");
    if (trim(text).empty()) throw std::invalid_argument("extract_summary: text is empty");
    if (!encoder.can_embed()) throw std::invalid_argument("extract_summary: encoder cannot embed");

    auto sentences = segment_sentences(text);

    std::vector<std::string> inputs;
    inputs.reserve(sentences.size() + 1);
    inputs.push_back(topic);
    for (const auto& s : sentences) inputs.push_back(s.text);
    auto vectors = encoder.embed_batch(inputs);

    const auto& query = vectors[0].values;
    double qn = l2_norm(query);

    // Rank by cosine similarity; equal scores break toward the earlier
    // sentence so selection is deterministic.
    std::vector<std::pair<double, size_t>> scored;
    scored.reserve(sentences.size());
    for (size_t i = 0; i < sentences.size(); ++i) {
        const auto& v = vectors[i + 1].values;
        double dot = 0.0;
        for (size_t j = 0; j < v.size(); ++j) dot += query[j] * v[j];
        double score = dot / (qn * l2_norm(v));
        scored.emplace_back(score, i);
    }
    std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;
    });

    ExtractiveSummary out;
    out.k = k;
    size_t take = std::min(k, sentences.size());
    out.selected_indices.reserve(take);
    for (size_t i = 0; i < take; ++i) out.selected_indices.push_back(scored[i].second);
    std::sort(out.selected_indices.begin(), out.selected_indices.end());

    for (size_t i = 0; i < out.selected_indices.size(); ++i) {
        if (i) out.summary += ' ';
        out.summary += sentences[out.selected_indices[i]].text;
    }
    return out;
}

}  // namespace carbonsum
