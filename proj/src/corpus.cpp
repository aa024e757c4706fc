#include "carbonsum/corpus.hpp"

#include <algorithm>
#include <set>
#include <sstream>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

#include <json.hpp>

#include "carbonsum/util.hpp"

namespace carbonsum {

using nlohmann::json;
using nlohmann::ordered_json;

std::string to_string(ReportId id) {
    return id == ReportId::AR5 ? "AR5" : "AR6";
}

ReportId report_id_from_string(const std::string& s) {
    if (s == "AR5") return ReportId::AR5;
    if (s == "AR6") return ReportId::AR6;
    throw std::invalid_argument("unknown report label: \"" + s + "\" (expected AR5 or AR6)");
}

const Paragraph* Corpus::find_paragraph(const std::string& id) const {
    for (const auto& p : paragraphs)
        if (p.id == id) return &p;
    return nullptr;
}

namespace {

std::string require_string(const json& obj, const char* key, const std::string& where) {
    auto it = obj.find(key);
    if (it == obj.end() || !it->is_string())
        throw std::runtime_error("malformed corpus document: missing string key \"" +
                                 std::string(key) + "\" in " + where);
    return it->get<std::string>();
}

}  // namespace

Corpus read_corpus(const std::string& path) {
    json doc;
    try {
        doc = json::parse(read_file(path));
    } catch (const json::parse_error& e) {
        throw std::runtime_error("malformed corpus document " + path + ": " + e.what());
    }
    if (!doc.is_object() || !doc.contains("paragraphs") || !doc.contains("summaries"))
        throw std::runtime_error("malformed corpus document " + path +
                                 ": top-level keys \"paragraphs\" and \"summaries\" required");

    Corpus corpus;
    corpus.source_path = path;
    for (const auto& p : doc["paragraphs"]) {
        Paragraph par;
        par.id = require_string(p, "id", "paragraphs");
        par.report = report_id_from_string(require_string(p, "report", "paragraph " + par.id));
        par.section_header = require_string(p, "section_header", "paragraph " + par.id);
        par.text = require_string(p, "text", "paragraph " + par.id);
        corpus.paragraphs.push_back(std::move(par));
    }
    for (const auto& s : doc["summaries"]) {
        SummaryRecord rec;
        rec.id = require_string(s, "id", "summaries");
        rec.topic = require_string(s, "topic", "summary " + rec.id);
        rec.reference_summary = require_string(s, "reference_summary", "summary " + rec.id);
        auto it = s.find("gold_paragraph_ids");
        if (it == s.end() || !it->is_array())
            throw std::runtime_error("malformed corpus document: summary " + rec.id +
                                     " lacks gold_paragraph_ids list");
        for (const auto& g : *it) rec.gold_paragraph_ids.push_back(g.get<std::string>());
        rec.section_header = require_string(s, "section_header", "summary " + rec.id);
        rec.subsection_header = require_string(s, "subsection_header", "summary " + rec.id);
        rec.report = report_id_from_string(require_string(s, "report", "summary " + rec.id));
        corpus.records.push_back(std::move(rec));
    }
    return corpus;
}

Corpus load_corpus(const std::string& path) {
    Corpus corpus = read_corpus(path);
    if (corpus.records.empty()) throw std::runtime_error("no records in corpus " + path);
    auto violations = validate_corpus(corpus);
    if (!violations.empty()) {
        std::ostringstream msg;
        msg << "invalid corpus " << path << " (" << violations.size() << " violation"
            << (violations.size() == 1 ? "" : "s") << "):";
        for (const auto& v : violations) msg << "\n  " << v.id << ": " << v.reason;
        throw std::runtime_error(msg.str());
    }
    return corpus;
}

void save_corpus(const Corpus& corpus, const std::string& path) {
    ordered_json doc;
    doc["paragraphs"] = ordered_json::array();
    for (const auto& p : corpus.paragraphs) {
        doc["paragraphs"].push_back({{"id", p.id},
                                     {"report", to_string(p.report)},
                                     {"section_header", p.section_header},
                                     {"text", p.text}});
    }
    doc["summaries"] = ordered_json::array();
    for (const auto& r : corpus.records) {
        doc["summaries"].push_back({{"id", r.id},
                                    {"topic", r.topic},
                                    {"reference_summary", r.reference_summary},
                                    {"gold_paragraph_ids", r.gold_paragraph_ids},
                                    {"section_header", r.section_header},
                                    {"subsection_header", r.subsection_header},
                                    {"report", to_string(r.report)}});
    }
    write_file(path, doc.dump(2) + "\n");
}

std::vector<Violation> validate_corpus(const Corpus& corpus) {
    std::vector<Violation> out;

    std::unordered_map<std::string, const Paragraph*> by_id;
    std::unordered_set<std::string> seen_par_ids;
    for (const auto& p : corpus.paragraphs) {
        if (!seen_par_ids.insert(p.id).second)
            out.push_back({p.id, "duplicate paragraph id"});
        else
            by_id.emplace(p.id, &p);
        if (trim(p.text).empty()) out.push_back({p.id, "paragraph text is empty"});
    }

    std::unordered_set<std::string> seen_rec_ids;
    std::set<ReportId> reports_with_records;
    for (const auto& r : corpus.records) {
        if (!seen_rec_ids.insert(r.id).second) out.push_back({r.id, "duplicate summary id"});
        if (trim(r.topic).empty()) out.push_back({r.id, "topic is empty"});
        if (trim(r.reference_summary).empty()) out.push_back({r.id, "reference summary is empty"});
        if (r.gold_paragraph_ids.empty())
            out.push_back({r.id, "gold_paragraph_ids is empty (need at least 1)"});
        for (const auto& gid : r.gold_paragraph_ids) {
            auto it = by_id.find(gid);
            if (it == by_id.end())
                out.push_back({r.id, "gold paragraph id \"" + gid + "\" does not resolve"});
            else if (it->second->report != r.report)
                out.push_back({r.id, "gold paragraph id \"" + gid + "\" belongs to " +
                                         to_string(it->second->report) + ", record is " +
                                         to_string(r.report)});
        }
        reports_with_records.insert(r.report);
    }

    std::set<ReportId> reports_with_paragraphs;
    for (const auto& p : corpus.paragraphs) reports_with_paragraphs.insert(p.report);
    for (ReportId rep : reports_with_paragraphs) {
        if (!reports_with_records.count(rep))
            out.push_back({to_string(rep), "report has paragraphs but no summary records"});
    }

    std::sort(out.begin(), out.end(), [](const Violation& a, const Violation& b) {
        return a.id != b.id ? a.id < b.id : a.reason < b.reason;
    });
    return out;
}

namespace {

StatCounts count_subset(const Corpus& corpus, std::optional<ReportId> subset) {
    StatCounts c;
    std::set<std::string> topics, sections, subsections, par_sections;
    for (const auto& r : corpus.records) {
        if (subset && r.report != *subset) continue;
        ++c.summaries;
        topics.insert(trim(r.topic));
        sections.insert(trim(r.section_header));
        subsections.insert(trim(r.subsection_header));
    }
    for (const auto& p : corpus.paragraphs) {
        if (subset && p.report != *subset) continue;
        ++c.paragraphs;
        par_sections.insert(trim(p.section_header));
    }
    c.unique_topics = topics.size();
    c.section_headers = sections.size();
    c.subsection_headers = subsections.size();
    c.paragraph_section_headers = par_sections.size();
    return c;
}

}  // namespace

CorpusStats corpus_stats(const Corpus& corpus, std::optional<ReportId> subset) {
    CorpusStats stats;
    stats.overall = count_subset(corpus, subset);
    if (subset) {
        stats.per_report[*subset] = stats.overall;
        return stats;
    }
    std::set<ReportId> represented;
    for (const auto& r : corpus.records) represented.insert(r.report);
    for (const auto& p : corpus.paragraphs) represented.insert(p.report);
    for (ReportId rep : represented) stats.per_report[rep] = count_subset(corpus, rep);
    return stats;
}

Corpus filter_by_report(const Corpus& corpus, ReportId report) {
    Corpus out;
    out.source_path = corpus.source_path;
    for (const auto& p : corpus.paragraphs)
        if (p.report == report) out.paragraphs.push_back(p);
    for (const auto& r : corpus.records)
        if (r.report == report) out.records.push_back(r);
    return out;
}

}  // namespace carbonsum
