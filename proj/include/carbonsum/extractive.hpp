#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "carbonsum/providers.hpp"

namespace carbonsum {

/// One sentence of a source text. Spans are non-overlapping, ordered, and
/// cover all non-whitespace source content; `text` is the verbatim
/// substring [char_start, char_end).
struct SentenceSpan {
    std::size_t index = 0;
    std::string text;
    std::size_t char_start = 0;
    std::size_t char_end = 0;
};

/// Tokens that end with a period but do not close a sentence ("dr.",
/// "e.g.", ...). Lookup is case-insensitive.
class AbbreviationSet {
public:
    static const AbbreviationSet& defaults();
    static AbbreviationSet from_file(const std::string& path);  // one token per line
    bool contains(std::string_view token) const;
    std::size_t size() const { return tokens_.size(); }

private:
    std::unordered_set<std::string> tokens_;
};

/// Deterministic split on terminal punctuation (. ! ?) followed by
/// whitespace and an uppercase/digit start; the abbreviation stop-list
/// suppresses false boundaries. No boundary means one sentence.
std::vector<SentenceSpan> segment_sentences(std::string_view text);
std::vector<SentenceSpan> segment_sentences(std::string_view text,
                                            const AbbreviationSet& abbreviations);

struct ExtractiveSummary {
    std::vector<std::size_t> selected_indices;  // ascending document order
    std::string summary;
    std::size_t k = 0;
};

/// Non-generative baseline: select the min(k, n) sentences most cosine-
/// similar to the encoded topic and concatenate them in document order,
/// space-separated.
ExtractiveSummary extract_summary(const std::string& topic, const std::string& text,
                                  std::size_t k, Provider& encoder);

}  // namespace carbonsum
