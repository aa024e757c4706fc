#include "carbonsum/scoring.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

#include "carbonsum/util.hpp"

namespace carbonsum {

double carburacy(double effectiveness, double cost_kg_co2, double alpha, double beta) {
    if (!(effectiveness > 0.0) || effectiveness > 1.0)
        throw std::invalid_argument("carburacy: effectiveness R must be in (0, 1], got " +
                                    std::to_string(effectiveness));
    if (!(alpha > 1.0)) throw std::invalid_argument("carburacy: alpha must be > 1");
    if (cost_kg_co2 < 0.0) throw std::invalid_argument("carburacy: cost C must be >= 0");
    if (beta < 0.0) throw std::invalid_argument("carburacy: beta must be >= 0");
    double log_alpha_r = std::log(effectiveness) / std::log(alpha);
    return std::exp(log_alpha_r) / (1.0 + cost_kg_co2 * beta);
}

NormalizeScheme normalize_scheme_from_string(const std::string& s) {
    if (s == "rts-over-5") return NormalizeScheme::RtsOverFive;
    if (s == "identity") return NormalizeScheme::Identity;
    throw std::invalid_argument("unknown normalize scheme: \"" + s + "\"");
}

std::string to_string(NormalizeScheme scheme) {
    return scheme == NormalizeScheme::RtsOverFive ? "rts-over-5" : "identity";
}

double normalize_effectiveness(double raw, NormalizeScheme scheme) {
    switch (scheme) {
        case NormalizeScheme::RtsOverFive:
            if (!(raw > 0.0) || raw > 5.0)
                throw std::invalid_argument("normalize_effectiveness: rts-over-5 requires raw in "
                                            "(0, 5], got " + std::to_string(raw));
            return raw / 5.0;
        case NormalizeScheme::Identity:
            if (!(raw > 0.0) || raw > 1.0)
                throw std::invalid_argument("normalize_effectiveness: identity requires raw in "
                                            "(0, 1], got " + std::to_string(raw));
            return raw;
    }
    throw std::invalid_argument("normalize_effectiveness: unknown scheme");
}

std::string to_string(JudgeDimension dim) {
    switch (dim) {
        case JudgeDimension::Consistency: return "consistency";
        case JudgeDimension::Coherence: return "coherence";
        case JudgeDimension::Fluency: return "fluency";
        case JudgeDimension::Relevance: return "relevance";
    }
    return "?";
}

namespace {

constexpr const char* kConsistencyTemplate =
    "You will be given a source text and a summary written for it.\n"
    "Rate the consistency of the summary. A consistent summary contains only statements "
    "that are supported by the source text and introduces no fabricated or contradictory "
    "facts.\n\nSource text:\n{article}\n\nSummary:\n{summary}\n\n"
    "Begin your reply with a single score from 1 (worst) to 5 (best), then give a short "
    "explanation of your judgement.";

constexpr const char* kCoherenceTemplate =
    "You will be given a source text and a summary written for it.\n"
    "Rate the coherence of the summary. A coherent summary is well structured and well "
    "organized: it builds from sentence to sentence rather than being a heap of related "
    "information.\n\nSource text:\n{article}\n\nSummary:\n{summary}\n\n"
    "Begin your reply with a single score from 1 (worst) to 5 (best), then give a short "
    "explanation of your judgement.";

constexpr const char* kFluencyTemplate =
    "You will be given a source text and a summary written for it.\n"
    "Rate the fluency of the summary. A fluent summary has well-formed, grammatical "
    "sentences that are easy to read; formatting problems, capitalization errors and "
    "ungrammatical fragments lower the score.\n\nSource text:\n{article}\n\nSummary:\n"
    "{summary}\n\nBegin your reply with a single score from 1 (worst) to 5 (best), then "
    "give a short explanation of your judgement.";

constexpr const char* kRelevanceTemplate =
    "You will be given a source text, a topic, a reference summary and a candidate "
    "summary.\nRate the relevance of the candidate summary. A relevant summary captures "
    "the important information of the source text with respect to the topic and covers "
    "the content of the reference summary without redundancies or excess information.\n\n"
    "Topic: {aspect}\n\nSource text:\n{article}\n\nReference summary:\n{reference_summary}"
    "\n\nCandidate summary:\n{summary}\n\nBegin your reply with a single score from 1 "
    "(worst) to 5 (best), then give a short explanation of your judgement.";

/// All {word} placeholder tokens appearing in a template.
std::vector<std::string> scan_placeholders(std::string_view text) {
    std::vector<std::string> found;
    size_t pos = 0;
    while ((pos = text.find('{', pos)) != std::string_view::npos) {
        size_t end = text.find('}', pos + 1);
        if (end == std::string_view::npos) break;
        std::string_view token = text.substr(pos + 1, end - pos - 1);
        bool word = !token.empty();
        for (char c : token)
            if (!(std::islower(static_cast<unsigned char>(c)) || c == '_')) word = false;
        if (word) {
            found.emplace_back(token);
            pos = end + 1;
        } else {
            pos = pos + 1;
        }
    }
    return found;
}

std::string replace_all(std::string text, std::string_view placeholder, const std::string& value) {
    size_t pos = 0;
    while ((pos = text.find(placeholder, pos)) != std::string::npos) {
        text.replace(pos, placeholder.size(), value);
        pos += value.size();
    }
    return text;
}

}  // namespace

JudgePromptTemplate JudgePromptTemplate::parse(JudgeDimension dimension, std::string text) {
    bool relevance = dimension == JudgeDimension::Relevance;
    std::vector<std::string> required = {"article", "summary"};
    if (relevance) {
        required.push_back("aspect");
        required.push_back("reference_summary");
    }
    auto found = scan_placeholders(text);
    for (const auto& name : found) {
        bool known = name == "article" || name == "summary" ||
                     (relevance && (name == "aspect" || name == "reference_summary"));
        if (!known)
            throw std::invalid_argument("judge template (" + to_string(dimension) +
                                        "): unknown placeholder {" + name + "}");
    }
    for (const auto& name : required) {
        if (std::find(found.begin(), found.end(), name) == found.end())
            throw std::invalid_argument("judge template (" + to_string(dimension) +
                                        "): missing placeholder {" + name + "}");
    }
    JudgePromptTemplate tmpl;
    tmpl.dimension_ = dimension;
    tmpl.text_ = std::move(text);
    return tmpl;
}

const JudgePromptTemplate& JudgePromptTemplate::defaults(JudgeDimension dimension) {
    static const JudgePromptTemplate consistency =
        JudgePromptTemplate::parse(JudgeDimension::Consistency, kConsistencyTemplate);
    static const JudgePromptTemplate coherence =
        JudgePromptTemplate::parse(JudgeDimension::Coherence, kCoherenceTemplate);
    static const JudgePromptTemplate fluency =
        JudgePromptTemplate::parse(JudgeDimension::Fluency, kFluencyTemplate);
    static const JudgePromptTemplate relevance =
        JudgePromptTemplate::parse(JudgeDimension::Relevance, kRelevanceTemplate);
    switch (dimension) {
        case JudgeDimension::Consistency: return consistency;
        case JudgeDimension::Coherence: return coherence;
        case JudgeDimension::Fluency: return fluency;
        case JudgeDimension::Relevance: return relevance;
    }
    return consistency;
}

const JudgePromptTemplate& JudgeTemplateSet::for_dimension(JudgeDimension dim) const {
    switch (dim) {
        case JudgeDimension::Consistency: return consistency;
        case JudgeDimension::Coherence: return coherence;
        case JudgeDimension::Fluency: return fluency;
        case JudgeDimension::Relevance: return relevance;
    }
    return consistency;
}

JudgeTemplateSet JudgeTemplateSet::from_directory(const std::string& dir) {
    JudgeTemplateSet set;
    set.consistency = JudgePromptTemplate::parse(JudgeDimension::Consistency,
                                                 read_file(dir + "/consistency.txt"));
    set.coherence = JudgePromptTemplate::parse(JudgeDimension::Coherence,
                                               read_file(dir + "/coherence.txt"));
    set.fluency = JudgePromptTemplate::parse(JudgeDimension::Fluency,
                                             read_file(dir + "/fluency.txt"));
    set.relevance = JudgePromptTemplate::parse(JudgeDimension::Relevance,
                                               read_file(dir + "/relevance.txt"));
    return set;
}

std::string build_judge_prompt(const JudgePromptTemplate& tmpl, const std::string& article,
                               const std::string& candidate,
                               const std::optional<std::string>& aspect,
                               const std::optional<std::string>& reference) {
    bool relevance = tmpl.dimension() == JudgeDimension::Relevance;
    if (relevance && (!aspect || !reference))
        throw std::invalid_argument("build_judge_prompt: relevance requires aspect and reference");
    if (!relevance && (aspect || reference))
        throw std::invalid_argument("build_judge_prompt: " + to_string(tmpl.dimension()) +
                                    " takes only article and summary");
    if (article.empty() || candidate.empty())
        throw std::invalid_argument("build_judge_prompt: article and summary must be non-empty");

    std::string out = replace_all(tmpl.text(), "{article}", article);
    out = replace_all(out, "{summary}", candidate);
    if (relevance) {
        out = replace_all(out, "{aspect}", *aspect);
        out = replace_all(out, "{reference_summary}", *reference);
    }
    return out;
}

int parse_judge_score(std::string_view reply) {
    size_t i = 0;
    while (i < reply.size()) {
        if (std::isdigit(static_cast<unsigned char>(reply[i]))) {
            size_t start = i;
            while (i < reply.size() && std::isdigit(static_cast<unsigned char>(reply[i]))) ++i;
            size_t len = i - start;
            if (len <= 9) {
                long value = std::stol(std::string(reply.substr(start, len)));
                if (value >= 1 && value <= 5) return static_cast<int>(value);
            }
        } else {
            ++i;
        }
    }
    throw std::runtime_error("parse_judge_score: no integer in 1..5 found in reply: \"" +
                             std::string(reply.substr(0, 120)) + "\"");
}

namespace {

int judge_one_dimension(Provider& judge, const JudgePromptTemplate& tmpl,
                        const std::string& article, const std::string& candidate,
                        const std::optional<std::string>& aspect,
                        const std::optional<std::string>& reference) {
    GenerationRequest request;
    request.prompt = build_judge_prompt(tmpl, article, candidate, aspect, reference);
    GenerationResult reply = judge.generate(request);
    try {
        return parse_judge_score(reply.text);
    } catch (const std::exception&) {
        // One bounded re-ask with an explicit format reminder.
        GenerationRequest retry;
        retry.prompt = request.prompt + "\n\nReply with a single integer score from 1 to 5.";
        GenerationResult second = judge.generate(retry);
        try {
            return parse_judge_score(second.text);
        } catch (const std::exception&) {
            throw std::runtime_error("judge_summary: unparseable " + to_string(tmpl.dimension()) +
                                     " reply after re-ask: \"" + second.text.substr(0, 120) + "\"");
        }
    }
}

}  // namespace

RtsScore judge_summary(Provider& judge, const std::string& article, const std::string& candidate,
                       const std::string& aspect, const std::string& reference,
                       const JudgeTemplateSet& templates) {
    if (!judge.can_generate())
        throw std::invalid_argument("judge_summary: judge provider cannot generate");
    RtsScore score;
    score.consistency =
        judge_one_dimension(judge, templates.consistency, article, candidate, {}, {});
    score.coherence = judge_one_dimension(judge, templates.coherence, article, candidate, {}, {});
    score.fluency = judge_one_dimension(judge, templates.fluency, article, candidate, {}, {});
    score.relevance =
        judge_one_dimension(judge, templates.relevance, article, candidate, aspect, reference);
    return score;
}

namespace {

/// Lowercased alphanumeric runs; punctuation and whitespace delimit.
std::vector<std::string> rouge_tokens(std::string_view text) {
    std::vector<std::string> tokens;
    std::string current;
    for (char c : text) {
        if (std::isalnum(static_cast<unsigned char>(c))) {
            current += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
        } else if (!current.empty()) {
            tokens.push_back(std::move(current));
            current.clear();
        }
    }
    if (!current.empty()) tokens.push_back(std::move(current));
    return tokens;
}

std::unordered_map<std::string, int> ngram_counts(const std::vector<std::string>& tokens, int n) {
    std::unordered_map<std::string, int> counts;
    if (static_cast<int>(tokens.size()) < n) return counts;
    for (size_t i = 0; i + n <= tokens.size(); ++i) {
        std::string key = tokens[i];
        for (int j = 1; j < n; ++j) {
            key += '\x1f';
            key += tokens[i + j];
        }
        ++counts[key];
    }
    return counts;
}

double f1(double overlap, double candidate_total, double reference_total) {
    if (candidate_total == 0.0 || reference_total == 0.0) return 0.0;
    double precision = overlap / candidate_total;
    double recall = overlap / reference_total;
    if (precision + recall == 0.0) return 0.0;
    return 2.0 * precision * recall / (precision + recall);
}

}  // namespace

double rouge_n(const std::string& candidate, const std::string& reference, int n) {
    if (n != 1 && n != 2) throw std::invalid_argument("rouge_n: n must be 1 or 2");
    auto cand_tokens = rouge_tokens(candidate);
    auto ref_tokens = rouge_tokens(reference);
    if (cand_tokens.empty() || ref_tokens.empty())
        throw std::invalid_argument("rouge_n: both texts must be tokenizable");
    auto cand = ngram_counts(cand_tokens, n);
    auto ref = ngram_counts(ref_tokens, n);
    double overlap = 0.0, cand_total = 0.0, ref_total = 0.0;
    for (const auto& [gram, count] : cand) {
        cand_total += count;
        auto it = ref.find(gram);
        if (it != ref.end()) overlap += std::min(count, it->second);  // clipped
    }
    for (const auto& [gram, count] : ref) ref_total += count;
    return f1(overlap, cand_total, ref_total);
}

double rouge_l(const std::string& candidate, const std::string& reference) {
    auto cand = rouge_tokens(candidate);
    auto ref = rouge_tokens(reference);
    if (cand.empty() || ref.empty())
        throw std::invalid_argument("rouge_l: both texts must be tokenizable");
    // Two-row LCS table.
    std::vector<size_t> prev(ref.size() + 1, 0), current(ref.size() + 1, 0);
    for (size_t i = 1; i <= cand.size(); ++i) {
        for (size_t j = 1; j <= ref.size(); ++j) {
            if (cand[i - 1] == ref[j - 1]) current[j] = prev[j - 1] + 1;
            else current[j] = std::max(prev[j], current[j - 1]);
        }
        std::swap(prev, current);
    }
    double lcs = static_cast<double>(prev[ref.size()]);
    return f1(lcs, static_cast<double>(cand.size()), static_cast<double>(ref.size()));
}

namespace {

/// Continued fraction for the incomplete beta function (Lentz's method).
double beta_continued_fraction(double a, double b, double x) {
    constexpr int kMaxIterations = 300;
    constexpr double kEpsilon = 3e-16;
    constexpr double kTiny = 1e-300;

    double qab = a + b, qap = a + 1.0, qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::fabs(d) < kTiny) d = kTiny;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= kMaxIterations; ++m) {
        int m2 = 2 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::fabs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::fabs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        double del = d * c;
        h *= del;
        if (std::fabs(del - 1.0) < kEpsilon) return h;
    }
    throw std::runtime_error("incomplete_beta: continued fraction did not converge");
}

}  // namespace

double incomplete_beta(double a, double b, double x) {
    if (!(a > 0.0) || !(b > 0.0)) throw std::invalid_argument("incomplete_beta: a, b must be > 0");
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    double ln_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) +
                      b * std::log1p(-x);
    double front = std::exp(ln_front);
    if (x < (a + 1.0) / (a + b + 2.0)) return front * beta_continued_fraction(a, b, x) / a;
    return 1.0 - front * beta_continued_fraction(b, a, 1.0 - x) / b;
}

WelchResult welch_t_test(std::span<const double> sample_a, std::span<const double> sample_b) {
    if (sample_a.size() < 2 || sample_b.size() < 2)
        throw std::invalid_argument("welch_t_test: each sample needs >= 2 elements");

    auto mean = [](std::span<const double> s) {
        double sum = 0.0;
        for (double v : s) sum += v;
        return sum / static_cast<double>(s.size());
    };
    auto variance = [](std::span<const double> s, double m) {
        double sum = 0.0;
        for (double v : s) sum += (v - m) * (v - m);
        return sum / static_cast<double>(s.size() - 1);
    };

    double na = static_cast<double>(sample_a.size()), nb = static_cast<double>(sample_b.size());
    double ma = mean(sample_a), mb = mean(sample_b);
    double va = variance(sample_a, ma), vb = variance(sample_b, mb);
    double se2 = va / na + vb / nb;

    WelchResult result;
    if (se2 == 0.0) {
        // Both samples degenerate.
        if (ma == mb) return {0.0, 1.0, 0.0};
        double sign = ma > mb ? 1.0 : -1.0;
        return {sign * std::numeric_limits<double>::infinity(), 0.0, 0.0};
    }
    result.t = (ma - mb) / std::sqrt(se2);
    double var_a_term = va / na, var_b_term = vb / nb;
    result.df = se2 * se2 /
                (var_a_term * var_a_term / (na - 1.0) + var_b_term * var_b_term / (nb - 1.0));
    if (result.t == 0.0) {
        result.p = 1.0;
    } else {
        result.p = incomplete_beta(result.df / 2.0, 0.5,
                                   result.df / (result.df + result.t * result.t));
    }
    return result;
}

RunReport aggregate_run(const std::vector<ModelRun>& runs, CarburacyParams params,
                        NormalizeScheme scheme) {
    if (runs.empty()) throw std::invalid_argument("aggregate_run: no model runs");
    for (const auto& run : runs) {
        if (run.scores.empty())
            throw std::invalid_argument("aggregate_run: model " + run.model_name + " has no scores");
        if (!run.outputs.empty() && run.outputs.size() != run.scores.size())
            throw std::invalid_argument("aggregate_run: model " + run.model_name + " has " +
                                        std::to_string(run.outputs.size()) + " outputs but " +
                                        std::to_string(run.scores.size()) + " scores");
    }

    RunReport report;
    report.alpha = params.alpha;
    report.beta = params.beta;
    report.normalize_scheme = to_string(scheme);

    for (const auto& run : runs) {
        RunReportRow row;
        row.model_name = run.model_name;
        row.mode = run.mode;
        double n = static_cast<double>(run.scores.size());
        for (const auto& s : run.scores) {
            row.consistency += s.consistency;
            row.coherence += s.coherence;
            row.fluency += s.fluency;
            row.relevance += s.relevance;
        }
        row.consistency /= n;
        row.coherence /= n;
        row.fluency /= n;
        row.relevance /= n;
        row.average = (row.consistency + row.coherence + row.fluency + row.relevance) / 4.0;
        row.effectiveness = normalize_effectiveness(row.average, scheme);
        row.cost = run.cost_kg_co2;
        row.beta = params.beta;
        row.gamma = carburacy(row.effectiveness, row.cost, params.alpha, params.beta);
        report.rows.push_back(std::move(row));
    }

    // Significance versus the best model by average, on per-record average
    // score samples.
    size_t best = 0;
    for (size_t i = 1; i < report.rows.size(); ++i)
        if (report.rows[i].average > report.rows[best].average) best = i;
    report.best_model = report.rows[best].model_name;

    auto record_averages = [](const ModelRun& run) {
        std::vector<double> out;
        out.reserve(run.scores.size());
        for (const auto& s : run.scores) out.push_back(s.average());
        return out;
    };
    std::vector<double> best_sample = record_averages(runs[best]);
    for (size_t i = 0; i < report.rows.size(); ++i) {
        if (i == best || best_sample.size() < 2 || runs[i].scores.size() < 2) continue;
        std::vector<double> sample = record_averages(runs[i]);
        WelchResult welch = welch_t_test(sample, best_sample);
        report.rows[i].p_vs_best = welch.p;
        report.rows[i].significant_vs_best =
            welch.p < 0.05 && report.rows[i].average < report.rows[best].average;
    }
    return report;
}

namespace {

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.10g", v);
    return std::string(buf);
}

}  // namespace

std::string report_to_csv(const RunReport& report) {
    std::ostringstream out;
    out << "model,mode,consistency,coherence,fluency,relevance,average,R,C,beta,gamma,"
           "significant_vs_best\n";
    for (const auto& row : report.rows) {
        out << row.model_name << ',' << row.mode << ',' << format_double(row.consistency) << ','
            << format_double(row.coherence) << ',' << format_double(row.fluency) << ','
            << format_double(row.relevance) << ',' << format_double(row.average) << ','
            << format_double(row.effectiveness) << ',' << format_double(row.cost) << ','
            << format_double(row.beta) << ',' << format_double(row.gamma) << ','
            << (row.significant_vs_best ? "yes" : "no") << '\n';
    }
    return out.str();
}

RunReport report_from_csv(const std::string& csv) {
    std::stringstream in(csv);
    std::string line;
    if (!std::getline(in, line) || line.rfind("model,", 0) != 0)
        throw std::runtime_error("report csv: missing header");
    RunReport report;
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        std::stringstream row(line);
        std::vector<std::string> cells;
        std::string cell;
        while (std::getline(row, cell, ',')) cells.push_back(cell);
        if (cells.size() != 12)
            throw std::runtime_error("report csv: expected 12 columns, got " +
                                     std::to_string(cells.size()));
        RunReportRow parsed;
        parsed.model_name = cells[0];
        parsed.mode = cells[1];
        parsed.consistency = std::stod(cells[2]);
        parsed.coherence = std::stod(cells[3]);
        parsed.fluency = std::stod(cells[4]);
        parsed.relevance = std::stod(cells[5]);
        parsed.average = std::stod(cells[6]);
        parsed.effectiveness = std::stod(cells[7]);
        parsed.cost = std::stod(cells[8]);
        parsed.beta = std::stod(cells[9]);
        parsed.gamma = std::stod(cells[10]);
        parsed.significant_vs_best = cells[11] == "yes";
        report.rows.push_back(std::move(parsed));
    }
    if (!report.rows.empty()) report.beta = report.rows[0].beta;
    return report;
}

}  // namespace carbonsum
