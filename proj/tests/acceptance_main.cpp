// Acceptance suite: one self-contained check per shipping criterion, one
// pass/fail line each, nonzero exit when any check fails. Expected values
// are frozen from independent oracles (long-double formula evaluation,
// exhaustive search, quadrature) before being asserted against the
// production code path.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "carbonsum/cli.hpp"
#include "carbonsum/corpus.hpp"
#include "carbonsum/energy.hpp"
#include "carbonsum/extractive.hpp"
#include "carbonsum/providers.hpp"
#include "carbonsum/retrieval.hpp"
#include "carbonsum/scoring.hpp"
#include "carbonsum/summarizer.hpp"
#include "carbonsum/util.hpp"

using namespace carbonsum;
namespace fs = std::filesystem;

namespace {

std::string data_path(const std::string& name) {
    return std::string(CARBONSUM_DATA_DIR) + "/" + name;
}

struct CheckFailure : std::runtime_error {
    using std::runtime_error::runtime_error;
};

void require(bool condition, const std::string& what) {
    if (!condition) throw CheckFailure(what);
}

// ---------------------------------------------------------------------------
// Shared helpers
// ---------------------------------------------------------------------------

/// Embedder serving vectors from a prepared table keyed by text.
class TableEmbedder : public Provider {
public:
    explicit TableEmbedder(std::map<std::string, std::vector<double>> table)
        : table_(std::move(table)) {
        spec_.kind = ProviderKind::MockHashEmbed;
        spec_.model_name = "table-embedder";
    }
    const ProviderSpec& spec() const override { return spec_; }
    bool can_generate() const override { return false; }
    bool can_embed() const override { return true; }
    GenerationResult generate(const GenerationRequest&) override {
        throw ProviderError("cannot generate");
    }
    std::vector<EmbeddingVector> embed_batch(const std::vector<std::string>& texts) override {
        std::vector<EmbeddingVector> out;
        for (const auto& text : texts) out.push_back({table_.at(text), spec_.model_name});
        return out;
    }

private:
    ProviderSpec spec_;
    std::map<std::string, std::vector<double>> table_;
};

/// Generation mock that counts calls and replies with a short fixed text.
class CountingProvider : public Provider {
public:
    CountingProvider() { spec_.kind = ProviderKind::MockFixed; }
    const ProviderSpec& spec() const override { return spec_; }
    bool can_generate() const override { return true; }
    bool can_embed() const override { return false; }
    GenerationResult generate(const GenerationRequest& request) override {
        ++calls;
        return {"tiny interim.", static_cast<long>(count_tokens(request.prompt)), 2, 0.0};
    }
    std::vector<EmbeddingVector> embed_batch(const std::vector<std::string>&) override {
        throw ProviderError("cannot embed");
    }
    int calls = 0;

private:
    ProviderSpec spec_;
};

long double carburacy_oracle(long double r, long double c, long double alpha, long double beta) {
    return std::exp(std::log(r) / std::log(alpha)) / (1.0L + c * beta);
}

// ---------------------------------------------------------------------------
// Criteria
// ---------------------------------------------------------------------------

void check_corpus_statistics() {
    Corpus corpus = load_corpus(data_path("sumipcc_fixture.json"));
    CorpusStats all = corpus_stats(corpus);
    CorpusStats ar5 = corpus_stats(corpus, ReportId::AR5);
    CorpusStats ar6 = corpus_stats(corpus, ReportId::AR6);

    require(all.overall.summaries == 140, "overall summaries != 140");
    require(all.overall.paragraphs == 72, "overall paragraphs != 72");
    require(all.overall.unique_topics == 133, "overall topics != 133");
    require(all.overall.section_headers == 7, "overall section headers != 7");
    require(all.overall.subsection_headers == 35, "overall subsection headers != 35");
    require(all.overall.paragraph_section_headers == 72, "overall paragraph headers != 72");
    require(ar5.overall.summaries == 70 && ar5.overall.paragraphs == 34 &&
                ar5.overall.unique_topics == 63,
            "AR5 counts != 70/34/63");
    require(ar6.overall.summaries == 70 && ar6.overall.paragraphs == 38 &&
                ar6.overall.unique_topics == 70,
            "AR6 counts != 70/38/70");

    require(run_cli({"stats", data_path("sumipcc_fixture.json")}) == 0, "stats exit code != 0");
}

void check_carburacy_oracle() {
    require(carburacy(1.0, 0.0) == 1.0, "gamma(1, 0) != 1 exactly");

    double expected_a = static_cast<double>(carburacy_oracle(0.9L, 4.41e-05L, 10.0L, 100.0L));
    double got_a = carburacy(0.9, 4.41e-05, 10.0, 100.0);
    require(std::abs(expected_a - 0.951079337091) < 1e-9, "oracle drifted for gamma_a");
    require(std::abs(got_a - expected_a) <= 1e-6, "gamma(0.9, 4.41e-05, 10, 100) off oracle");

    double expected_b = static_cast<double>(carburacy_oracle(0.8L, 1.65e-07L, 10.0L, 10000.0L));
    double got_b = carburacy(0.8, 1.65e-07, 10.0, 10000.0);
    require(std::abs(expected_b - 0.906142542847) < 1e-9, "oracle drifted for gamma_b");
    require(std::abs(got_b - expected_b) <= 1e-6, "gamma(0.8, 1.65e-07, 10, 10000) off oracle");
    std::printf("       note: oracle gives %.9f for the retrieval-regime case; the published\n"
                "       rounding 0.906145 sits 2.5e-6 away from the formula value\n",
                expected_b);
}

void check_cost_scaling() {
    double scaled = estimate_scaled_cost(4.41e-05, 2.0, 175.0);
    require(format_sig3(scaled) == "3.86e-03",
            "scaled cost " + format_sig3(scaled) + " != 3.86e-03 at 3 significant digits");
}

void check_reranking_property() {
    CostTable table = load_cost_table(data_path("costs_summarization.csv"));
    const std::vector<std::pair<std::string, double>> averages = {
        {"Qwen 0.5B", 4.33}, {"Qwen 1.8B", 4.85}, {"Qwen 4B", 4.77}, {"Qwen 7B", 4.86},
        {"Gemma 2B", 4.85},  {"Gemma 7B", 4.90},  {"Phi 3", 4.86},  {"Llama 3", 4.83},
        {"Mistral", 4.79},   {"ChatGPT", 4.91},   {"GPT4", 4.89},   {"MPNet", 3.77},
    };
    std::map<std::string, double> gamma;
    for (const auto& [model, average] : averages) {
        auto row = table.lookup(model);
        require(row.has_value(), "cost table lacks " + model);
        double r = normalize_effectiveness(average, NormalizeScheme::RtsOverFive);
        gamma[model] = carburacy(r, row->kg_co2_per_probe, 10.0, 100.0);
        double oracle = static_cast<double>(
            carburacy_oracle(r, row->kg_co2_per_probe, 10.0L, 100.0L));
        require(std::abs(gamma[model] - oracle) < 1e-12, "gamma off oracle for " + model);
    }
    double min_slm = 2.0;
    for (const char* slm : {"Qwen 0.5B", "Qwen 1.8B", "Qwen 4B", "Qwen 7B", "Gemma 2B",
                            "Gemma 7B", "Phi 3", "Llama 3", "Mistral"})
        min_slm = std::min(min_slm, gamma.at(slm));
    require(min_slm > std::max(gamma.at("ChatGPT"), gamma.at("GPT4")),
            "a sub-8B model re-ranks below the large-model baselines");
    require(gamma.at("Qwen 0.5B") > gamma.at("MPNet"),
            "Qwen 0.5B does not re-rank above the extractive baseline");
}

void check_retrieval_oracle_equivalence() {
    std::mt19937 rng(20240612);
    std::uniform_real_distribution<double> component(-1.0, 1.0);

    for (int trial = 0; trial < 1000; ++trial) {
        size_t n = 1 + rng() % 50;
        size_t d = 2 + rng() % 15;  // <= 16
        size_t k = 1 + rng() % 10;

        std::map<std::string, std::vector<double>> table;
        Corpus corpus;
        for (size_t i = 0; i < n; ++i) {
            char id[16];
            std::snprintf(id, sizeof(id), "P%03zu", i);
            std::string text = "p" + std::to_string(i);
            std::vector<double> vec(d);
            // Coarse grid so exact ties occur and exercise the tie-break.
            for (auto& v : vec) v = std::round(component(rng) * 4.0) / 4.0;
            if (std::all_of(vec.begin(), vec.end(), [](double v) { return v == 0.0; }))
                vec[0] = 0.25;
            table[text] = vec;
            corpus.paragraphs.push_back({id, ReportId::AR5, "s", text});
        }
        size_t n_records = 1 + rng() % 5;
        for (size_t r = 0; r < n_records; ++r) {
            std::string topic = "q" + std::to_string(r);
            std::vector<double> vec(d);
            for (auto& v : vec) v = std::round(component(rng) * 4.0) / 4.0;
            if (std::all_of(vec.begin(), vec.end(), [](double v) { return v == 0.0; }))
                vec[0] = 0.5;
            table[topic] = vec;
            size_t n_gold = 1 + rng() % std::min<size_t>(3, n);
            std::vector<std::string> gold;
            for (size_t g = 0; g < n_gold; ++g) {
                char id[16];
                std::snprintf(id, sizeof(id), "P%03zu", rng() % n);
                gold.push_back(id);
            }
            corpus.records.push_back({"S" + std::to_string(r), topic, "ref", gold, "s", "ss",
                                      ReportId::AR5});
        }

        TableEmbedder embedder(table);
        ParagraphIndex index = build_index(corpus, embedder);

        // retrieve_top_k against an exhaustive full sort with the documented
        // tie-break, on identical score arithmetic.
        for (size_t r = 0; r < n_records; ++r) {
            const std::string& topic = corpus.records[r].topic;
            RankedList got = retrieve_top_k(index, topic, k, embedder);

            std::vector<double> query = table.at(topic);
            double qn = 0;
            for (double v : query) qn += v * v;
            qn = std::sqrt(qn);
            for (double& v : query) v /= qn;
            std::vector<RankedItem> expected;
            for (const auto& [id, vec] : index.entries) {
                double dot = 0;
                for (size_t j = 0; j < vec.values.size(); ++j) dot += query[j] * vec.values[j];
                expected.push_back({id, std::clamp(dot, -1.0, 1.0)});
            }
            std::sort(expected.begin(), expected.end(),
                      [](const RankedItem& a, const RankedItem& b) {
                          if (a.score != b.score) return a.score > b.score;
                          return a.paragraph_id < b.paragraph_id;
                      });
            expected.resize(std::min(k, expected.size()));
            require(got.items.size() == expected.size(), "top-k size mismatch");
            for (size_t i = 0; i < expected.size(); ++i) {
                require(got.items[i].paragraph_id == expected[i].paragraph_id,
                        "top-k id mismatch at rank " + std::to_string(i + 1));
                require(got.items[i].score == expected[i].score, "top-k score mismatch");
            }
        }

        // evaluate_retrieval mean against an independent recomputation.
        std::map<ReportId, ParagraphIndex> indexes;
        indexes.emplace(ReportId::AR5, index);
        RetrievalReport report = evaluate_retrieval(corpus, indexes, embedder, 10);
        double mean = 0.0;
        size_t count = 0;
        for (const auto& record : corpus.records) {
            RankedList full = retrieve_top_k(index, record.topic,
                                             std::min<size_t>(10, index.entries.size()), embedder);
            std::set<std::string> gold(record.gold_paragraph_ids.begin(),
                                       record.gold_paragraph_ids.end());
            double rr = 0.0;
            for (size_t i = 0; i < full.items.size() && i < 10; ++i) {
                if (gold.count(full.items[i].paragraph_id)) {
                    rr = 1.0 / static_cast<double>(i + 1);
                    break;
                }
            }
            require(report.per_record[count].reciprocal_rank == rr,
                    "per-record reciprocal rank mismatch");
            mean += rr;
            ++count;
        }
        mean /= static_cast<double>(count);
        require(report.overall_mean == mean, "retrieval mean mismatch");
    }
}

void check_mrr_unit_values() {
    RankedList ranked;
    for (int i = 0; i < 12; ++i)
        ranked.items.push_back({"P" + std::to_string(i), 1.0 - 0.01 * i});
    require(mrr_at_10(ranked, {"P0"}) == 1.0, "rank 1 != 1.0");
    require(mrr_at_10(ranked, {"P3"}) == 0.25, "rank 4 != 0.25");
    require(mrr_at_10(ranked, {"P10"}) == 0.0, "rank 11 != 0.0");
}

void check_chunking_call_count_law() {
    std::mt19937 rng(97);
    for (int trial = 0; trial < 300; ++trial) {
        size_t n = 1 + rng() % 8;
        size_t threshold = 120 + rng() % 400;
        std::vector<std::string> paragraphs;
        for (size_t i = 0; i < n; ++i)
            paragraphs.emplace_back(std::string(20 + rng() % 100, static_cast<char>('a' + i)));
        std::string assembled = assemble_text(paragraphs);

        CountingProvider provider;
        SummarizeOptions options;
        options.threshold = threshold;
        SummaryOutput output = summarize_aspect("t", paragraphs, provider, options);

        if (assembled.size() <= threshold) {
            require(output.provider_calls == 1, "single mode made more than one call");
            require(output.chunk_depth == 0, "single mode reported nonzero depth");
        } else {
            ChunkPlan plan = plan_chunks(paragraphs, threshold);
            require(output.provider_calls == static_cast<int>(plan.pieces.size()) + 1,
                    "iterative calls != pieces + 1");
            require(output.chunk_depth == 1, "two-stage depth != 1");
        }
        require(provider.calls == output.provider_calls, "instrumented count disagrees");
    }
}

void check_extractive_guarantees() {
    ProviderSpec spec;
    spec.kind = ProviderKind::MockHashEmbed;
    auto embedder = provider_from_spec(spec);
    std::mt19937 rng(101);
    std::vector<std::string> vocabulary = {"alpha", "beta",  "gamma", "delta", "sigma",
                                           "omega", "theta", "kappa", "zeta",  "eta",
                                           "iota",  "mu"};
    for (int trial = 0; trial < 500; ++trial) {
        size_t n_sentences = 2 + rng() % 10;
        std::string text;
        for (size_t s = 0; s < n_sentences; ++s) {
            size_t words = 2 + rng() % 6;
            std::string sentence;
            for (size_t w = 0; w < words; ++w) {
                if (w) sentence += ' ';
                sentence += vocabulary[rng() % vocabulary.size()];
            }
            sentence[0] = static_cast<char>(std::toupper(sentence[0]));
            text += (s ? " " : "") + sentence + ".";
        }
        std::string topic = vocabulary[rng() % vocabulary.size()] + " " +
                            vocabulary[rng() % vocabulary.size()];
        size_t k = 1 + rng() % 6;

        ExtractiveSummary summary = extract_summary(topic, text, k, *embedder);
        auto spans = segment_sentences(text);

        // Verbatim guarantee.
        for (size_t index : summary.selected_indices) {
            require(index < spans.size(), "selected index out of range");
            require(text.find(spans[index].text) != std::string::npos,
                    "selected sentence is not a substring of the input");
        }

        // Exhaustive top-k selection on explicit cosine similarity.
        std::vector<std::string> inputs;
        inputs.push_back(topic);
        for (const auto& span : spans) inputs.push_back(span.text);
        auto vectors = embedder->embed_batch(inputs);
        const auto& query = vectors[0].values;
        std::vector<std::pair<double, size_t>> scored;
        for (size_t i = 0; i < spans.size(); ++i) {
            const auto& v = vectors[i + 1].values;
            double dot = 0, qq = 0, vv = 0;
            for (size_t j = 0; j < v.size(); ++j) {
                dot += query[j] * v[j];
                qq += query[j] * query[j];
                vv += v[j] * v[j];
            }
            scored.emplace_back(dot / (std::sqrt(qq) * std::sqrt(vv)), i);
        }
        std::stable_sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
            if (a.first != b.first) return a.first > b.first;
            return a.second < b.second;
        });
        std::vector<size_t> expected;
        for (size_t i = 0; i < std::min(k, scored.size()); ++i)
            expected.push_back(scored[i].second);
        std::sort(expected.begin(), expected.end());
        require(summary.selected_indices == expected, "selection differs from brute force");
    }
}

void check_rouge_oracle() {
    require(std::abs(rouge_n("the cat", "the cat sat", 1) - 0.8) <= 1e-9,
            "rouge_1 != 0.8 on the clipped-overlap case");
    require(std::abs(rouge_l("a b c d", "a c b d") - 0.75) <= 1e-9, "rouge_l != 0.75 on LCS 3");
    require(rouge_n("same text here", "same text here", 1) == 1.0, "rouge_1 identity != 1");
    require(rouge_n("same text here", "same text here", 2) == 1.0, "rouge_2 identity != 1");
    require(rouge_l("same text here", "same text here") == 1.0, "rouge_l identity != 1");
}

void check_judge_pipeline() {
    std::string article = "The observed decade was the warmest on record.";
    std::string candidate = "The decade was the warmest.";

    // Placeholder contracts.
    bool threw = false;
    try {
        build_judge_prompt(JudgePromptTemplate::defaults(JudgeDimension::Relevance), article,
                           candidate);
    } catch (const std::invalid_argument&) {
        threw = true;
    }
    require(threw, "relevance accepted a prompt without aspect and reference");
    threw = false;
    try {
        build_judge_prompt(JudgePromptTemplate::defaults(JudgeDimension::Fluency), article,
                           candidate, std::string("aspect"), std::string("ref"));
    } catch (const std::invalid_argument&) {
        threw = true;
    }
    require(threw, "fluency accepted aspect and reference");
    std::string relevance = build_judge_prompt(
        JudgePromptTemplate::defaults(JudgeDimension::Relevance), article, candidate,
        std::string("warmth"), std::string("reference summary"));
    require(relevance.find(article) != std::string::npos &&
                relevance.find(candidate) != std::string::npos &&
                relevance.find("warmth") != std::string::npos &&
                relevance.find("reference summary") != std::string::npos,
            "relevance prompt lost a substitution");

    // Fuzzed parse: the first in-range integer always wins.
    std::mt19937 rng(103);
    std::vector<std::string> words = {"statement", "supported", "by", "the", "text",
                                      "score",     "overall",   "of", "rating"};
    for (int trial = 0; trial < 200; ++trial) {
        int expected = -1;
        std::string reply;
        int pieces = 3 + static_cast<int>(rng() % 10);
        for (int p = 0; p < pieces; ++p) {
            if (rng() % 3 == 0) {
                long value = static_cast<long>(rng() % 120);
                if (expected == -1 && value >= 1 && value <= 5)
                    expected = static_cast<int>(value);
                reply += std::to_string(value);
            } else {
                reply += words[rng() % words.size()];
            }
            reply += ' ';
        }
        if (expected == -1) {
            reply += "4";
            expected = 4;
        }
        require(parse_judge_score(reply) == expected,
                "fuzzed reply parsed to the wrong score: " + reply);
    }

    // Mock judge end to end.
    ProviderSpec spec;
    spec.kind = ProviderKind::MockFixed;
    spec.fixed_reply = "3 - acceptable but clumsy";
    auto judge = provider_from_spec(spec);
    RtsScore score = judge_summary(*judge, article, candidate, "warmth", "reference summary");
    require(score.consistency == 3 && score.coherence == 3 && score.fluency == 3 &&
                score.relevance == 3,
            "mock judge did not yield 3/3/3/3");
    require(score.average() == 3.0, "mock judge average != 3.0");
}

void check_mock_run_determinism() {
    auto stamp = std::chrono::steady_clock::now().time_since_epoch().count();
    fs::path base = fs::temp_directory_path() / ("carbonsum_accept_" + std::to_string(stamp));
    fs::create_directories(base);
    struct Cleanup {
        fs::path path;
        ~Cleanup() {
            std::error_code ec;
            fs::remove_all(path, ec);
        }
    } cleanup{base};

    auto run = [&](const std::string& name) {
        int code = run_cli({"summarize", "--corpus", data_path("sumipcc_fixture.json"), "--mode",
                            "rag", "--provider", "mock-echo", "--encoder", "mock-hash-embed",
                            "--out", (base / name).string()});
        require(code == 0, "summarize run exited " + std::to_string(code));
    };
    run("a");
    run("b");

    auto strip_timestamp = [](const std::string& content) {
        std::string out;
        std::istringstream in(content);
        std::string line;
        while (std::getline(in, line))
            if (line.find("\"timestamp\"") == std::string::npos) out += line + "\n";
        return out;
    };
    size_t compared = 0;
    for (const auto& entry : fs::recursive_directory_iterator(base / "a")) {
        if (!entry.is_regular_file()) continue;
        fs::path relative = fs::relative(entry.path(), base / "a");
        std::string a = read_file(entry.path().string());
        std::string b = read_file((base / "b" / relative).string());
        require(strip_timestamp(a) == strip_timestamp(b),
                "artifact differs between runs: " + relative.string());
        ++compared;
    }
    require(compared >= 143, "expected 140 summaries + 2 indexes + manifest, saw " +
                                 std::to_string(compared));
}

struct Criterion {
    const char* name;
    double budget_seconds;
    std::function<void()> check;
};

}  // namespace

int main() {
    const std::vector<Criterion> criteria = {
        {"1. corpus statistics match the released counts", 1.0, check_corpus_statistics},
        {"2. carburacy oracle values", 1.0, check_carburacy_oracle},
        {"3. cost scaling to 175B parameters", 1.0, check_cost_scaling},
        {"4. carbon re-ranking of published results", 1.0, check_reranking_property},
        {"5. retrieval equals the exhaustive oracle (1000 instances)", 10.0,
         check_retrieval_oracle_equivalence},
        {"6. MRR@10 unit values", 1.0, check_mrr_unit_values},
        {"7. chunking call-count law", 5.0, check_chunking_call_count_law},
        {"8. extractive guarantees (500 instances)", 10.0, check_extractive_guarantees},
        {"9. rouge oracle values", 1.0, check_rouge_oracle},
        {"10. judge pipeline contracts and parsing", 1.0, check_judge_pipeline},
        {"11. mock rag runs are byte-identical apart from timestamps", 30.0,
         check_mock_run_determinism},
    };

    int failures = 0;
    for (const auto& criterion : criteria) {
        auto t0 = std::chrono::steady_clock::now();
        std::string detail;
        bool passed = true;
        try {
            criterion.check();
        } catch (const std::exception& e) {
            passed = false;
            detail = e.what();
        }
        double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (passed && elapsed > criterion.budget_seconds) {
            passed = false;
            detail = "exceeded time budget of " + std::to_string(criterion.budget_seconds) + "s";
        }
        std::printf("[%s] %-62s (%.2fs)\n", passed ? "PASS" : "FAIL", criterion.name, elapsed);
        if (!passed) {
            std::printf("       %s\n", detail.c_str());
            ++failures;
        }
    }
    if (failures) std::printf("%d criterion(s) failed\n", failures);
    else std::printf("all %zu criteria passed\n", criteria.size());
    return failures == 0 ? 0 : 1;
}
