#include "carbonsum/summarizer.hpp"

#include <future>
#include <stdexcept>

#include "carbonsum/util.hpp"

namespace carbonsum {

namespace {

constexpr const char* kDefaultTemplate =
    "Summarize the main takeaways from the following text with respect to topic {topic}. "
    "Text: {text}";

size_t count_occurrences(std::string_view text, std::string_view needle) {
    size_t count = 0, pos = 0;
    while ((pos = text.find(needle, pos)) != std::string_view::npos) {
        ++count;
        pos += needle.size();
    }
    return count;
}

}  // namespace

PromptTemplate PromptTemplate::parse(std::string text) {
    for (const char* placeholder : {"{topic}", "{text}"}) {
        size_t n = count_occurrences(text, placeholder);
        if (n == 0)
            throw std::invalid_argument(std::string("prompt template: missing placeholder ") +
                                        placeholder);
        if (n > 1)
            throw std::invalid_argument(std::string("prompt template: placeholder ") +
                                        placeholder + " must appear exactly once");
    }
    PromptTemplate tmpl;
    tmpl.text_ = std::move(text);
    return tmpl;
}

const PromptTemplate& PromptTemplate::defaults() {
    static const PromptTemplate tmpl = PromptTemplate::parse(kDefaultTemplate);
    return tmpl;
}

std::string render_prompt(const PromptTemplate& tmpl, const std::string& topic,
                          const std::string& text) {
    if (topic.empty()) throw std::invalid_argument("render_prompt: topic is empty");
    if (text.empty()) throw std::invalid_argument("render_prompt: text is empty");

    // Single pass so substituted content is never re-scanned for
    // placeholders.
    const std::string& t = tmpl.text();
    std::string out;
    out.reserve(t.size() + topic.size() + text.size());
    size_t pos = 0;
    while (pos < t.size()) {
        size_t brace = t.find('{', pos);
        if (brace == std::string::npos) {
            out.append(t, pos, std::string::npos);
            break;
        }
        out.append(t, pos, brace - pos);
        if (t.compare(brace, 7, "{topic}") == 0) {
            out += topic;
            pos = brace + 7;
        } else if (t.compare(brace, 6, "{text}") == 0) {
            out += text;
            pos = brace + 6;
        } else {
            out += '{';
            pos = brace + 1;
        }
    }
    return out;
}

std::string assemble_text(const std::vector<std::string>& paragraphs,
                          std::string_view separator) {
    if (paragraphs.empty()) throw std::invalid_argument("assemble_text: no paragraphs");
    std::string out;
    for (size_t i = 0; i < paragraphs.size(); ++i) {
        if (paragraphs[i].empty())
            throw std::invalid_argument("assemble_text: paragraph " + std::to_string(i + 1) +
                                        " is empty");
        if (i) out += separator;
        out += paragraphs[i];
    }
    return out;
}

namespace {

/// Greedy packing of one oversized paragraph: sentences joined with a
/// single space, each piece as long as fits within the threshold.
std::vector<std::string> pack_sentences(const std::string& paragraph, size_t threshold,
                                        size_t paragraph_position) {
    auto sentences = segment_sentences(paragraph);
    std::vector<std::string> pieces;
    std::string current;
    for (const auto& s : sentences) {
        if (s.text.size() > threshold)
            throw std::runtime_error("plan_chunks: paragraph " +
                                     std::to_string(paragraph_position) + " contains a sentence of " +
                                     std::to_string(s.text.size()) +
                                     " characters, longer than threshold " +
                                     std::to_string(threshold));
        if (current.empty()) {
            current = s.text;
        } else if (current.size() + 1 + s.text.size() <= threshold) {
            current += ' ';
            current += s.text;
        } else {
            pieces.push_back(std::move(current));
            current = s.text;
        }
    }
    if (!current.empty()) pieces.push_back(std::move(current));
    return pieces;
}

}  // namespace

ChunkPlan plan_chunks(const std::vector<std::string>& paragraphs, std::size_t threshold,
                      std::string_view separator) {
    if (threshold < 1) throw std::invalid_argument("plan_chunks: threshold must be >= 1");
    std::string assembled = assemble_text(paragraphs, separator);

    ChunkPlan plan;
    plan.threshold = threshold;
    if (assembled.size() <= threshold) {
        plan.mode = ChunkMode::Single;
        plan.pieces.push_back(std::move(assembled));
        return plan;
    }
    plan.mode = ChunkMode::Iterative;
    for (size_t i = 0; i < paragraphs.size(); ++i) {
        if (paragraphs[i].size() <= threshold) {
            plan.pieces.push_back(paragraphs[i]);
        } else {
            auto packed = pack_sentences(paragraphs[i], threshold, i + 1);
            for (auto& piece : packed) plan.pieces.push_back(std::move(piece));
        }
    }
    return plan;
}

namespace {

struct StageResult {
    std::string summary;
    int depth_reached = 0;
};

StageResult run_stage(const std::string& topic, const std::vector<std::string>& texts,
                      Provider& provider, const SummarizeOptions& options, int depth,
                      SummaryOutput& output) {
    if (depth > options.max_chunk_depth)
        throw std::runtime_error("summarize_aspect: chunked recursion exceeded max depth " +
                                 std::to_string(options.max_chunk_depth));

    ChunkPlan plan = plan_chunks(texts, options.threshold, options.separator);

    if (plan.mode == ChunkMode::Single) {
        GenerationRequest request;
        request.prompt = render_prompt(options.prompt, topic, plan.pieces[0]);
        GenerationResult result = provider.generate(request);
        ++output.provider_calls;
        output.generation_results.push_back(result);
        return {result.text, depth};
    }

    // Interim summaries, one per piece. Generations may overlap; results
    // commit in piece order.
    std::vector<GenerationResult> interim(plan.pieces.size());
    auto generate_piece = [&](size_t i) {
        GenerationRequest request;
        request.prompt = render_prompt(options.prompt, topic, plan.pieces[i]);
        return provider.generate(request);
    };
    if (options.concurrent_pieces && plan.pieces.size() > 1) {
        std::vector<std::future<GenerationResult>> futures;
        futures.reserve(plan.pieces.size());
        for (size_t i = 0; i < plan.pieces.size(); ++i)
            futures.push_back(std::async(std::launch::async, generate_piece, i));
        for (size_t i = 0; i < futures.size(); ++i) {
            try {
                interim[i] = futures[i].get();
            } catch (const std::exception& e) {
                // Drain remaining futures before surfacing the failure.
                for (size_t j = i + 1; j < futures.size(); ++j) {
                    try { futures[j].get(); } catch (...) {}
                }
                throw std::runtime_error("summarize_aspect: piece " + std::to_string(i + 1) +
                                         "/" + std::to_string(plan.pieces.size()) + ": " +
                                         e.what());
            }
        }
    } else {
        for (size_t i = 0; i < plan.pieces.size(); ++i) {
            try {
                interim[i] = generate_piece(i);
            } catch (const std::exception& e) {
                throw std::runtime_error("summarize_aspect: piece " + std::to_string(i + 1) +
                                         "/" + std::to_string(plan.pieces.size()) + ": " +
                                         e.what());
            }
        }
    }

    std::vector<std::string> interim_texts;
    interim_texts.reserve(interim.size());
    for (auto& result : interim) {
        ++output.provider_calls;
        interim_texts.push_back(result.text);
        output.generation_results.push_back(std::move(result));
    }

    return run_stage(topic, interim_texts, provider, options, depth + 1, output);
}

}  // namespace

SummaryOutput summarize_aspect(const std::string& topic,
                               const std::vector<std::string>& paragraph_texts,
                               Provider& provider, const SummarizeOptions& options) {
    if (topic.empty()) throw std::invalid_argument("summarize_aspect: topic is empty");
    if (paragraph_texts.empty())
        throw std::invalid_argument("summarize_aspect: no paragraphs to summarize");
    if (!provider.can_generate())
        throw std::invalid_argument("summarize_aspect: provider cannot generate");

    SummaryOutput output;
    StageResult stage = run_stage(topic, paragraph_texts, provider, options, 0, output);
    output.summary = std::move(stage.summary);
    output.chunk_depth = stage.depth_reached;
    return output;
}

}  // namespace carbonsum
