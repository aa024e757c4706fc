#pragma once

#include <cstddef>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "carbonsum/corpus.hpp"
#include "carbonsum/providers.hpp"

namespace carbonsum {

/// Paragraph embeddings in corpus order; vectors are L2-normalized at
/// index time.
struct ParagraphIndex {
    std::string encoder_id;
    std::size_t dimension = 0;
    std::vector<std::pair<std::string, EmbeddingVector>> entries;
};

struct RankedItem {
    std::string paragraph_id;
    double score = 0.0;  // cosine similarity in [-1, 1]
};

/// Scores non-increasing; equal scores ordered by ascending paragraph id.
struct RankedList {
    std::string query_topic;
    std::vector<RankedItem> items;
};

struct RetrievalReport {
    struct RecordResult {
        std::string record_id;
        ReportId report = ReportId::AR5;
        double reciprocal_rank = 0.0;
    };
    std::string encoder_id;
    int cutoff = 10;
    std::vector<RecordResult> per_record;
    std::map<ReportId, double> subset_mean;
    double overall_mean = 0.0;
};

ParagraphIndex build_index(const Corpus& corpus, Provider& encoder);

/// The min(k, N) paragraphs maximizing cosine similarity to the encoded
/// topic; warns on stderr when k exceeds the index size.
RankedList retrieve_top_k(const ParagraphIndex& index, const std::string& topic, std::size_t k,
                          Provider& encoder);

/// 1/r for the first gold paragraph at rank r within the cutoff, else 0.
double mrr_at_10(const RankedList& ranked, const std::set<std::string>& gold_ids,
                 int cutoff = 10);

/// Per-record reciprocal ranks with each record's topic as the query;
/// subsets are evaluated separately against their own index.
RetrievalReport evaluate_retrieval(const Corpus& corpus,
                                   const std::map<ReportId, ParagraphIndex>& indexes,
                                   Provider& encoder, int cutoff = 10);

/// Plain-text persistence: header lines (encoder_id, d, count) then one
/// id TAB vector row per entry, 9 significant digits.
void save_index(const ParagraphIndex& index, const std::string& path);
ParagraphIndex load_index(const std::string& path);

double cosine_similarity(const std::vector<double>& a, const std::vector<double>& b);

}  // namespace carbonsum
