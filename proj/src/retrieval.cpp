#include "carbonsum/retrieval.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <stdexcept>

#include "carbonsum/util.hpp"

namespace carbonsum {

double cosine_similarity(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size())
        throw std::invalid_argument("cosine_similarity: dimension mismatch " +
                                    std::to_string(a.size()) + " vs " + std::to_string(b.size()));
    double dot = 0.0;
    for (size_t i = 0; i < a.size(); ++i) dot += a[i] * b[i];
    double na = l2_norm(a), nb = l2_norm(b);
    if (na == 0.0 || nb == 0.0)
        throw std::invalid_argument("cosine_similarity: zero-norm vector");
    return std::clamp(dot / (na * nb), -1.0, 1.0);
}

ParagraphIndex build_index(const Corpus& corpus, Provider& encoder) {
    if (corpus.paragraphs.empty()) throw std::invalid_argument("build_index: corpus has no paragraphs");
    if (!encoder.can_embed()) throw std::invalid_argument("build_index: encoder cannot embed");

    std::vector<std::string> texts;
    texts.reserve(corpus.paragraphs.size());
    for (const auto& p : corpus.paragraphs) texts.push_back(p.text);
    auto vectors = encoder.embed_batch(texts);
    if (vectors.size() != texts.size())
        throw std::runtime_error("build_index: encoder returned " + std::to_string(vectors.size()) +
                                 " vectors for " + std::to_string(texts.size()) + " paragraphs");

    ParagraphIndex index;
    index.dimension = vectors.empty() ? 0 : vectors[0].values.size();
    index.encoder_id = vectors.empty() ? "" : vectors[0].encoder_id;
    index.entries.reserve(vectors.size());
    for (size_t i = 0; i < vectors.size(); ++i) {
        auto& vec = vectors[i];
        if (vec.values.size() != index.dimension)
            throw std::runtime_error("build_index: inconsistent embedding dimension " +
                                     std::to_string(vec.values.size()) + " vs " +
                                     std::to_string(index.dimension) + " at paragraph " +
                                     corpus.paragraphs[i].id);
        double norm = l2_norm(vec.values);
        if (norm == 0.0)
            throw std::runtime_error("build_index: zero-norm embedding for paragraph " +
                                     corpus.paragraphs[i].id);
        for (double& v : vec.values) v /= norm;
        index.entries.emplace_back(corpus.paragraphs[i].id, std::move(vec));
    }
    return index;
}

RankedList retrieve_top_k(const ParagraphIndex& index, const std::string& topic, std::size_t k,
                          Provider& encoder) {
    if (k < 1) throw std::invalid_argument("retrieve_top_k: k must be >= 1");
    if (index.entries.empty()) throw std::invalid_argument("retrieve_top_k: index is empty");
    if (k > index.entries.size())
        std::cerr << "warning: retrieve_top_k: k=" << k << " exceeds index size N="
                  << index.entries.size() << ", returning all entries\n";

    auto query_vectors = encoder.embed_batch({topic});
    if (query_vectors.size() != 1)
        throw std::runtime_error("retrieve_top_k: encoder returned " +
                                 std::to_string(query_vectors.size()) + " vectors for one query");
    auto& query = query_vectors[0].values;
    if (query.size() != index.dimension)
        throw std::runtime_error("retrieve_top_k: query dimension " + std::to_string(query.size()) +
                                 " != index dimension " + std::to_string(index.dimension));
    double qnorm = l2_norm(query);
    if (qnorm == 0.0) throw std::runtime_error("retrieve_top_k: zero-norm query embedding");
    for (double& v : query) v /= qnorm;

    RankedList ranked;
    ranked.query_topic = topic;
    ranked.items.reserve(index.entries.size());
    for (const auto& [id, vec] : index.entries) {
        double dot = 0.0;
        for (size_t j = 0; j < vec.values.size(); ++j) dot += query[j] * vec.values[j];
        ranked.items.push_back({id, std::clamp(dot, -1.0, 1.0)});
    }
    std::sort(ranked.items.begin(), ranked.items.end(), [](const RankedItem& a, const RankedItem& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.paragraph_id < b.paragraph_id;
    });
    ranked.items.resize(std::min(k, ranked.items.size()));
    return ranked;
}

double mrr_at_10(const RankedList& ranked, const std::set<std::string>& gold_ids, int cutoff) {
    if (gold_ids.empty()) throw std::invalid_argument("mrr_at_10: gold id set is empty");
    size_t limit = std::min<size_t>(ranked.items.size(), static_cast<size_t>(cutoff));
    for (size_t i = 0; i < limit; ++i) {
        if (gold_ids.count(ranked.items[i].paragraph_id))
            return 1.0 / static_cast<double>(i + 1);
    }
    return 0.0;
}

RetrievalReport evaluate_retrieval(const Corpus& corpus,
                                   const std::map<ReportId, ParagraphIndex>& indexes,
                                   Provider& encoder, int cutoff) {
    if (corpus.records.empty()) throw std::invalid_argument("evaluate_retrieval: corpus has no records");

    RetrievalReport report;
    report.cutoff = cutoff;
    if (!indexes.empty()) report.encoder_id = indexes.begin()->second.encoder_id;

    std::map<ReportId, std::pair<double, size_t>> subset_acc;
    double total = 0.0;
    for (const auto& record : corpus.records) {
        auto it = indexes.find(record.report);
        if (it == indexes.end())
            throw std::runtime_error("evaluate_retrieval: no index for subset " +
                                     to_string(record.report) + " (record " + record.id + ")");
        RankedList ranked = retrieve_top_k(
            it->second, record.topic,
            std::min<size_t>(static_cast<size_t>(cutoff), it->second.entries.size()), encoder);
        std::set<std::string> gold(record.gold_paragraph_ids.begin(),
                                   record.gold_paragraph_ids.end());
        double rr = mrr_at_10(ranked, gold, cutoff);
        report.per_record.push_back({record.id, record.report, rr});
        auto& [sum, count] = subset_acc[record.report];
        sum += rr;
        ++count;
        total += rr;
    }
    for (const auto& [rep, acc] : subset_acc)
        report.subset_mean[rep] = acc.first / static_cast<double>(acc.second);
    report.overall_mean = total / static_cast<double>(report.per_record.size());
    return report;
}

void save_index(const ParagraphIndex& index, const std::string& path) {
    std::ostringstream out;
    out << "encoder_id\t" << index.encoder_id << "\n";
    out << "d\t" << index.dimension << "\n";
    out << "count\t" << index.entries.size() << "\n";
    char buf[32];
    for (const auto& [id, vec] : index.entries) {
        out << id;
        for (double v : vec.values) {
            std::snprintf(buf, sizeof(buf), "%.9g", v);
            out << '\t' << buf;
        }
        out << '\n';
    }
    write_file(path, out.str());
}

ParagraphIndex load_index(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open index file: " + path);
    ParagraphIndex index;
    std::string line;
    size_t count = 0;
    for (const char* key : {"encoder_id", "d", "count"}) {
        if (!std::getline(in, line))
            throw std::runtime_error("index file truncated header: " + path);
        auto tab = line.find('\t');
        if (tab == std::string::npos || line.substr(0, tab) != key)
            throw std::runtime_error("index file: expected header line \"" + std::string(key) +
                                     "\" in " + path);
        std::string value = line.substr(tab + 1);
        if (key[0] == 'e') index.encoder_id = value;
        else if (key[0] == 'd') index.dimension = std::stoul(value);
        else count = std::stoul(value);
    }
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream row(line);
        std::string id;
        if (!std::getline(row, id, '\t'))
            throw std::runtime_error("index file: malformed row in " + path);
        EmbeddingVector vec;
        vec.encoder_id = index.encoder_id;
        std::string cell;
        while (std::getline(row, cell, '\t')) vec.values.push_back(std::stod(cell));
        if (vec.values.size() != index.dimension)
            throw std::runtime_error("index file: row " + id + " has " +
                                     std::to_string(vec.values.size()) + " components, expected " +
                                     std::to_string(index.dimension));
        index.entries.emplace_back(std::move(id), std::move(vec));
    }
    if (index.entries.size() != count)
        throw std::runtime_error("index file: header count " + std::to_string(count) +
                                 " != rows " + std::to_string(index.entries.size()));
    return index;
}

}  // namespace carbonsum
