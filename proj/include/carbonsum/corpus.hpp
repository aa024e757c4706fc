#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace carbonsum {

enum class ReportId { AR5, AR6 };

std::string to_string(ReportId id);
ReportId report_id_from_string(const std::string& s);  // throws on unknown label

/// One paragraph of a synthesis report. `id` is unique across the corpus.
struct Paragraph {
    std::string id;
    ReportId report = ReportId::AR5;
    std::string section_header;
    std::string text;
};

/// A topic-annotated reference summary together with the paragraph ids it
/// was written from. Every gold id must resolve to a paragraph of the same
/// report.
struct SummaryRecord {
    std::string id;
    std::string topic;
    std::string reference_summary;
    std::vector<std::string> gold_paragraph_ids;
    std::string section_header;
    std::string subsection_header;
    ReportId report = ReportId::AR5;
};

struct Corpus {
    std::vector<Paragraph> paragraphs;
    std::vector<SummaryRecord> records;
    std::string source_path;

    /// nullptr when the id is unknown.
    const Paragraph* find_paragraph(const std::string& id) const;
};

/// One invariant violation; `id` names the offending record/paragraph (or a
/// report label for corpus-level problems).
struct Violation {
    std::string id;
    std::string reason;
};

struct StatCounts {
    std::size_t summaries = 0;
    std::size_t paragraphs = 0;
    std::size_t unique_topics = 0;
    std::size_t section_headers = 0;
    std::size_t subsection_headers = 0;
    std::size_t paragraph_section_headers = 0;
};

struct CorpusStats {
    StatCounts overall;
    std::map<ReportId, StatCounts> per_report;
};

/// Parse without validating; the result may violate corpus invariants.
/// Throws on I/O or document-shape errors only.
Corpus read_corpus(const std::string& path);

/// Parse and validate; throws with every violation listed when the corpus is
/// invalid. Record and paragraph order is preserved from the file.
Corpus load_corpus(const std::string& path);

void save_corpus(const Corpus& corpus, const std::string& path);

/// Collects all violations (never throws); deterministic order by id then
/// reason. Empty result means the corpus is valid.
std::vector<Violation> validate_corpus(const Corpus& corpus);

/// Unique-occurrence counts per feature, over the subset when given.
CorpusStats corpus_stats(const Corpus& corpus, std::optional<ReportId> subset = std::nullopt);

Corpus filter_by_report(const Corpus& corpus, ReportId report);

}  // namespace carbonsum
