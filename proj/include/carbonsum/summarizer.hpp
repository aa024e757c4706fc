#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "carbonsum/extractive.hpp"
#include "carbonsum/providers.hpp"

namespace carbonsum {

/// A generation prompt with `{topic}` and `{text}` placeholders, each
/// required exactly once.
class PromptTemplate {
public:
    static PromptTemplate parse(std::string text);  // validates placeholders
    static const PromptTemplate& defaults();
    const std::string& text() const { return text_; }

private:
    std::string text_;
};

/// Placeholders replaced verbatim; topic and text appear as contiguous
/// substrings of the result.
std::string render_prompt(const PromptTemplate& tmpl, const std::string& topic,
                          const std::string& text);

/// Paragraphs joined in order; a single paragraph passes through unchanged.
std::string assemble_text(const std::vector<std::string>& paragraphs,
                          std::string_view separator = "\n\n");

enum class ChunkMode { Single, Iterative };

struct ChunkPlan {
    ChunkMode mode = ChunkMode::Single;
    std::vector<std::string> pieces;
    std::size_t threshold = 0;
};

/// Single mode when the assembled text fits the character threshold;
/// iterative otherwise with one piece per paragraph. A paragraph longer
/// than the threshold is split on sentence boundaries into maximal pieces
/// each within the threshold; a single sentence beyond it is an error.
ChunkPlan plan_chunks(const std::vector<std::string>& paragraphs, std::size_t threshold,
                      std::string_view separator = "\n\n");

struct SummarizeOptions {
    PromptTemplate prompt = PromptTemplate::defaults();
    std::size_t threshold = 12000;  // characters
    std::string separator = "\n\n";
    int max_chunk_depth = 3;
    bool concurrent_pieces = true;
};

struct SummaryOutput {
    std::string record_id;
    std::string mode;  // "gold" | "rag"
    std::vector<std::string> used_paragraph_ids;
    std::string summary;
    int provider_calls = 0;
    int chunk_depth = 0;
    std::vector<GenerationResult> generation_results;
};

/// One call when the assembled input fits the threshold; otherwise interim
/// summaries per piece followed by a recursive pass over their
/// concatenation. Interim generations may run concurrently; results commit
/// in piece order, so output is deterministic for deterministic providers.
SummaryOutput summarize_aspect(const std::string& topic,
                               const std::vector<std::string>& paragraph_texts,
                               Provider& provider, const SummarizeOptions& options = {});

}  // namespace carbonsum
