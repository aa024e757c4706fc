#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "carbonsum/providers.hpp"
#include "carbonsum/summarizer.hpp"

namespace carbonsum {

/// Carbon-aware re-weighting of an effectiveness score:
///   gamma = exp(log_alpha(R)) / (1 + C * beta)
/// Strictly increasing in R, strictly decreasing in C; in (0, 1] for
/// R in (0, 1].
double carburacy(double effectiveness, double cost_kg_co2, double alpha = 10.0,
                 double beta = 100.0);

struct CarburacyParams {
    double alpha = 10.0;
    double beta = 100.0;  // summarization regime; retrieval regime uses 10000
};

enum class NormalizeScheme { RtsOverFive, Identity };

NormalizeScheme normalize_scheme_from_string(const std::string& s);
std::string to_string(NormalizeScheme scheme);

/// Maps a raw metric into the (0, 1] domain of carburacy.
double normalize_effectiveness(double raw, NormalizeScheme scheme);

enum class JudgeDimension { Consistency, Coherence, Fluency, Relevance };

std::string to_string(JudgeDimension dim);

/// Judge prompt with {article} and {summary} placeholders; the relevance
/// dimension additionally requires {aspect} and {reference_summary}.
class JudgePromptTemplate {
public:
    static JudgePromptTemplate parse(JudgeDimension dimension, std::string text);
    static const JudgePromptTemplate& defaults(JudgeDimension dimension);
    JudgeDimension dimension() const { return dimension_; }
    const std::string& text() const { return text_; }

private:
    JudgeDimension dimension_ = JudgeDimension::Consistency;
    std::string text_;
};

struct JudgeTemplateSet {
    JudgePromptTemplate consistency = JudgePromptTemplate::defaults(JudgeDimension::Consistency);
    JudgePromptTemplate coherence = JudgePromptTemplate::defaults(JudgeDimension::Coherence);
    JudgePromptTemplate fluency = JudgePromptTemplate::defaults(JudgeDimension::Fluency);
    JudgePromptTemplate relevance = JudgePromptTemplate::defaults(JudgeDimension::Relevance);

    const JudgePromptTemplate& for_dimension(JudgeDimension dim) const;
    /// Loads <dir>/{consistency,coherence,fluency,relevance}.txt.
    static JudgeTemplateSet from_directory(const std::string& dir);
};

/// Aspect and reference are required for relevance and rejected elsewhere.
std::string build_judge_prompt(const JudgePromptTemplate& tmpl, const std::string& article,
                               const std::string& candidate,
                               const std::optional<std::string>& aspect = std::nullopt,
                               const std::optional<std::string>& reference = std::nullopt);

/// First integer token in the reply lying in 1..5; throws when none found.
int parse_judge_score(std::string_view reply);

struct RtsScore {
    int consistency = 0;
    int coherence = 0;
    int fluency = 0;
    int relevance = 0;
    double average() const { return (consistency + coherence + fluency + relevance) / 4.0; }
};

/// Four prompts, one per dimension; one bounded re-ask on an unparseable
/// reply before erroring.
RtsScore judge_summary(Provider& judge, const std::string& article, const std::string& candidate,
                       const std::string& aspect, const std::string& reference,
                       const JudgeTemplateSet& templates = {});

/// F1 over clipped n-gram overlap, n in {1, 2}; lowercased
/// alphanumeric-run tokenization.
double rouge_n(const std::string& candidate, const std::string& reference, int n);

/// F1 from longest-common-subsequence length over token sequences.
double rouge_l(const std::string& candidate, const std::string& reference);

struct WelchResult {
    double t = 0.0;
    double p = 1.0;  // two-sided
    double df = 0.0;
};

/// Welch's unequal-variance two-sample test with Welch-Satterthwaite
/// degrees of freedom. Degenerate variances are defined, not errors:
/// equal means give (0, 1), unequal means give p = 0.
WelchResult welch_t_test(std::span<const double> sample_a, std::span<const double> sample_b);

/// Regularized incomplete beta function I_x(a, b); exposed because the
/// t-distribution tail is defined through it.
double incomplete_beta(double a, double b, double x);

struct ModelRun {
    std::string model_name;
    std::string mode;  // "gold" | "rag"
    double cost_kg_co2 = 0.0;
    std::vector<SummaryOutput> outputs;  // aligned with scores when present
    std::vector<RtsScore> scores;
};

struct RunReportRow {
    std::string model_name;
    std::string mode;
    double consistency = 0.0;
    double coherence = 0.0;
    double fluency = 0.0;
    double relevance = 0.0;
    double average = 0.0;
    double effectiveness = 0.0;  // R
    double cost = 0.0;           // C
    double beta = 0.0;
    double gamma = 0.0;
    double p_vs_best = 1.0;
    bool significant_vs_best = false;  // p < 0.05 and worse than best
};

struct RunReport {
    std::vector<RunReportRow> rows;
    double alpha = 10.0;
    double beta = 100.0;
    std::string normalize_scheme;
    std::string best_model;
    std::string manifest_ref;
};

/// Per-dimension means, normalized R, gamma, and significance marks
/// against the best model (highest average).
RunReport aggregate_run(const std::vector<ModelRun>& runs, CarburacyParams params,
                        NormalizeScheme scheme);

/// Columns: model, mode, consistency, coherence, fluency, relevance,
/// average, R, C, beta, gamma, significant_vs_best.
std::string report_to_csv(const RunReport& report);
RunReport report_from_csv(const std::string& csv);

}  // namespace carbonsum
