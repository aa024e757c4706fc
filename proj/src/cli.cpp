#include "carbonsum/cli.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <mutex>
#include <sstream>
#include <thread>
#include <unordered_map>

#include <CLI11.hpp>
#include <json.hpp>

#include "carbonsum/corpus.hpp"
#include "carbonsum/energy.hpp"
#include "carbonsum/manifest.hpp"
#include "carbonsum/providers.hpp"
#include "carbonsum/summarizer.hpp"
#include "carbonsum/util.hpp"

namespace fs = std::filesystem;

namespace carbonsum {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.10g", v);
    return std::string(buf);
}

/// Configuration file: a JSON tree whose top-level keys are flag names;
/// a section named after a subcommand overrides the top level for it.
/// Flags given on the command line always win.
json load_config(const std::string& path) {
    if (path.empty()) return json::object();
    try {
        return json::parse(read_file(path));
    } catch (const std::exception& e) {
        throw UsageError("cannot read config " + path + ": " + e.what());
    }
}

const json* config_find(const json& config, const std::string& subcommand,
                        const std::string& key) {
    if (config.contains(subcommand) && config[subcommand].is_object() &&
        config[subcommand].contains(key))
        return &config[subcommand][key];
    if (config.contains(key) && !config[key].is_object()) return &config[key];
    return nullptr;
}

/// Command-line value if the flag was passed, else the config value, else
/// the fallback.
template <typename T>
T resolve(const CLI::Option* opt, const T& cli_value, const json& config,
          const std::string& subcommand, const std::string& key, const T& fallback) {
    if (opt != nullptr && opt->count() > 0) return cli_value;
    if (const json* v = config_find(config, subcommand, key)) {
        try {
            return v->get<T>();
        } catch (const std::exception& e) {
            throw UsageError("config key \"" + key + "\": " + e.what());
        }
    }
    return fallback;
}

std::string sanitize_filename(const std::string& name) {
    std::string out = name;
    for (char& c : out)
        if (c == '/' || c == '\\' || c == ':') c = '_';
    return out;
}

void prepare_run_dir(const std::string& out_dir) {
    if (out_dir.empty()) throw UsageError("--out run directory is required");
    if (fs::exists(fs::path(out_dir) / "manifest.json"))
        throw std::runtime_error("run directory " + out_dir +
                                 " already holds a manifest; runs are append-only, use a fresh "
                                 "directory");
    fs::create_directories(out_dir);
}

std::map<std::string, std::string> default_versions() {
    return {
        {"template", PromptTemplate::defaults().text()},
        {"threshold", "12000"},
        {"rag_k", "2"},
        {"alpha", "10"},
        {"beta_summarization", "100"},
        {"beta_retrieval", "10000"},
        {"probe_k", "10"},
        {"probe_topic", "climate change"},
        {"token_counting", "endpoint usage when reported, whitespace pieces otherwise"},
        {"iterative_final_prompt", "same template as the interim passes"},
        {"separator", "\\n\\n"},
        {"carbon_intensity", "0.475"},
    };
}

std::string provider_model_label(const ProviderSpec& spec) {
    return spec.model_name.empty() ? to_string(spec.kind) : spec.model_name;
}

ordered_json summary_output_to_json(const SummaryOutput& output) {
    ordered_json doc;
    doc["record_id"] = output.record_id;
    doc["mode"] = output.mode;
    doc["used_paragraph_ids"] = output.used_paragraph_ids;
    doc["summary"] = output.summary;
    doc["provider_calls"] = output.provider_calls;
    doc["chunk_depth"] = output.chunk_depth;
    doc["generation_results"] = ordered_json::array();
    for (const auto& g : output.generation_results) {
        doc["generation_results"].push_back({{"text", g.text},
                                             {"prompt_tokens", g.prompt_tokens},
                                             {"completion_tokens", g.completion_tokens},
                                             {"wall_time_seconds", g.wall_time_seconds}});
    }
    return doc;
}

SummaryOutput summary_output_from_json(const json& doc) {
    SummaryOutput output;
    output.record_id = doc.at("record_id").get<std::string>();
    output.mode = doc.value("mode", "");
    output.used_paragraph_ids = doc.value("used_paragraph_ids", std::vector<std::string>{});
    output.summary = doc.at("summary").get<std::string>();
    output.provider_calls = doc.value("provider_calls", 0);
    output.chunk_depth = doc.value("chunk_depth", 0);
    if (doc.contains("generation_results")) {
        for (const auto& g : doc["generation_results"]) {
            GenerationResult result;
            result.text = g.value("text", "");
            result.prompt_tokens = g.value("prompt_tokens", 0L);
            result.completion_tokens = g.value("completion_tokens", 0L);
            result.wall_time_seconds = g.value("wall_time_seconds", 0.0);
            output.generation_results.push_back(std::move(result));
        }
    }
    return output;
}

/// Bounded worker pool; results commit by record index so output order is
/// deterministic regardless of scheduling.
template <typename Fn>
void for_each_indexed(size_t count, size_t jobs, Fn&& fn) {
    jobs = std::max<size_t>(1, std::min(jobs, count));
    if (jobs == 1) {
        for (size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<size_t> next{0};
    std::exception_ptr first_error;
    std::mutex error_mutex;
    auto worker = [&] {
        for (;;) {
            size_t i = next.fetch_add(1);
            if (i >= count) return;
            try {
                fn(i);
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (!first_error) first_error = std::current_exception();
                return;
            }
        }
    };
    std::vector<std::thread> workers;
    for (size_t j = 0; j < jobs; ++j) workers.emplace_back(worker);
    for (auto& w : workers) w.join();
    if (first_error) std::rethrow_exception(first_error);
}

// ---------------------------------------------------------------------------
// Subcommand handlers
// ---------------------------------------------------------------------------

int handle_validate(const std::string& corpus_path) {
    if (corpus_path.empty()) throw UsageError("validate: --corpus is required");
    Corpus corpus = read_corpus(corpus_path);
    auto violations = validate_corpus(corpus);
    if (violations.empty()) {
        std::cout << "corpus valid: " << corpus.records.size() << " records, "
                  << corpus.paragraphs.size() << " paragraphs\n";
        return 0;
    }
    for (const auto& v : violations) std::cout << v.id << ": " << v.reason << "\n";
    std::cout << violations.size() << " violation" << (violations.size() == 1 ? "" : "s")
              << " found\n";
    return 2;
}

int handle_stats(const std::string& corpus_path, const std::string& subset_label) {
    if (corpus_path.empty()) throw UsageError("stats: --corpus is required");
    Corpus corpus = load_corpus(corpus_path);
    std::optional<ReportId> subset;
    if (!subset_label.empty()) subset = report_id_from_string(subset_label);
    CorpusStats stats = corpus_stats(corpus, subset);

    auto row = [&](const char* label, auto pick) {
        std::printf("%-28s", label);
        for (const auto& [rep, counts] : stats.per_report)
            std::printf(" %7zu", static_cast<size_t>(pick(counts)));
        if (!subset) std::printf(" %7zu", static_cast<size_t>(pick(stats.overall)));
        std::printf("\n");
    };
    std::printf("%-28s", "feature");
    for (const auto& [rep, counts] : stats.per_report) std::printf(" %7s", to_string(rep).c_str());
    if (!subset) std::printf(" %7s", "all");
    std::printf("\n");
    row("summaries", [](const StatCounts& c) { return c.summaries; });
    row("paragraphs", [](const StatCounts& c) { return c.paragraphs; });
    row("summary_topics", [](const StatCounts& c) { return c.unique_topics; });
    row("summary_section_headers", [](const StatCounts& c) { return c.section_headers; });
    row("summary_subsection_headers", [](const StatCounts& c) { return c.subsection_headers; });
    row("paragraph_section_headers",
        [](const StatCounts& c) { return c.paragraph_section_headers; });
    return 0;
}

struct SummarizeArgs {
    std::string corpus_path;
    std::string mode = "gold";
    std::string provider;
    std::string encoder;
    std::string template_path;
    std::string meter;
    std::string subset;
    std::string out_dir;
    size_t k = 2;
    size_t threshold = 12000;
    size_t jobs = 4;
};

int handle_summarize(const SummarizeArgs& args) {
    if (args.corpus_path.empty()) throw UsageError("summarize: --corpus is required");
    if (args.provider.empty()) throw UsageError("summarize: --provider is required");
    if (args.mode != "gold" && args.mode != "rag")
        throw UsageError("summarize: --mode must be gold or rag");
    if (args.mode == "rag" && args.encoder.empty())
        throw UsageError("summarize: --mode rag requires --encoder");
    prepare_run_dir(args.out_dir);

    Corpus corpus = load_corpus(args.corpus_path);
    if (!args.subset.empty()) corpus = filter_by_report(corpus, report_id_from_string(args.subset));
    std::string corpus_digest = fnv1a64_hex(read_file(args.corpus_path));

    ProviderSpec generator_spec = parse_provider_spec(args.provider);
    ProviderHandle generator = provider_from_spec(generator_spec);

    SummarizeOptions options;
    options.threshold = args.threshold;
    if (!args.template_path.empty())
        options.prompt = PromptTemplate::parse(read_file(args.template_path));

    std::unordered_map<std::string, const Paragraph*> paragraph_by_id;
    for (const auto& p : corpus.paragraphs) paragraph_by_id.emplace(p.id, &p);

    ProviderHandle encoder;
    std::map<ReportId, ParagraphIndex> indexes;
    std::vector<std::string> outputs;
    if (args.mode == "rag") {
        encoder = provider_from_spec(parse_provider_spec(args.encoder));
        std::set<ReportId> reports;
        for (const auto& r : corpus.records) reports.insert(r.report);
        for (ReportId rep : reports) {
            Corpus sub = filter_by_report(corpus, rep);
            indexes.emplace(rep, build_index(sub, *encoder));
            std::string index_file = "index_" + to_string(rep) + ".tsv";
            save_index(indexes.at(rep), args.out_dir + "/" + index_file);
            outputs.push_back(index_file);
        }
    }

    fs::create_directories(fs::path(args.out_dir) / "summaries");
    std::vector<SummaryOutput> results(corpus.records.size());
    for_each_indexed(corpus.records.size(), args.jobs, [&](size_t i) {
        const SummaryRecord& record = corpus.records[i];
        std::vector<std::string> used_ids;
        std::vector<std::string> texts;
        if (args.mode == "gold") {
            used_ids = record.gold_paragraph_ids;
        } else {
            RankedList ranked =
                retrieve_top_k(indexes.at(record.report), record.topic, args.k, *encoder);
            for (const auto& item : ranked.items) used_ids.push_back(item.paragraph_id);
        }
        for (const auto& id : used_ids) {
            auto it = paragraph_by_id.find(id);
            if (it == paragraph_by_id.end())
                throw std::runtime_error("record " + record.id + ": paragraph " + id +
                                         " not in corpus");
            texts.push_back(it->second->text);
        }
        SummaryOutput output = summarize_aspect(record.topic, texts, *generator, options);
        output.record_id = record.id;
        output.mode = args.mode;
        output.used_paragraph_ids = std::move(used_ids);
        results[i] = std::move(output);
    });

    for (const auto& output : results) {
        std::string file = "summaries/" + sanitize_filename(output.record_id) + ".json";
        write_file(args.out_dir + "/" + file, summary_output_to_json(output).dump(2) + "\n");
        outputs.push_back(file);
    }

    RunManifest manifest;
    manifest.subcommand = "summarize";
    manifest.corpus_path = args.corpus_path;
    manifest.corpus_digest = corpus_digest;
    manifest.mode = args.mode;
    manifest.model_name = provider_model_label(generator_spec);
    manifest.providers["generator"] = args.provider;
    if (!args.encoder.empty()) manifest.providers["encoder"] = args.encoder;
    manifest.template_digests["prompt"] = fnv1a64_hex(options.prompt.text());
    manifest.threshold = args.threshold;
    if (args.mode == "rag") manifest.k = args.k;
    manifest.defaults = default_versions();

    if (!args.meter.empty()) {
        EnergyMeterSpec meter = parse_meter_spec(args.meter);
        EmissionSample sample = measure_generation_emission(*generator, meter,
                                                            default_probe_prompt(), 10);
        ordered_json doc = {{"model_name", sample.model_name},
                            {"kg_co2", sample.kg_co2},
                            {"duration_seconds", sample.duration_seconds},
                            {"probe", sample.probe}};
        write_file(args.out_dir + "/emission.json", doc.dump(2) + "\n");
        outputs.push_back("emission.json");
        manifest.meter = args.meter;
    }

    std::sort(outputs.begin(), outputs.end());
    manifest.outputs = outputs;
    std::ostringstream material;
    material << "summarize|" << corpus_digest << "|" << args.mode << "|" << args.provider << "|"
             << args.encoder << "|" << args.k << "|" << args.threshold << "|"
             << manifest.template_digests["prompt"] << "|" << args.subset;
    manifest.run_id = make_run_id(material.str());
    manifest.timestamp = utc_timestamp();
    write_manifest(manifest, args.out_dir);

    std::cout << "summarize: wrote " << results.size() << " summaries to " << args.out_dir
              << " (run " << manifest.run_id << ")\n";
    return 0;
}

struct RetrieveEvalArgs {
    std::string corpus_path;
    std::string encoder;
    std::string costs_path;
    std::string subset;
    std::string out_dir;
    double alpha = 10.0;
    double beta = 10000.0;  // retrieval regime
};

int handle_retrieve_eval(const RetrieveEvalArgs& args) {
    if (args.corpus_path.empty()) throw UsageError("retrieve-eval: --corpus is required");
    if (args.encoder.empty()) throw UsageError("retrieve-eval: --encoder is required");
    prepare_run_dir(args.out_dir);

    Corpus corpus = load_corpus(args.corpus_path);
    if (!args.subset.empty()) corpus = filter_by_report(corpus, report_id_from_string(args.subset));

    ProviderSpec encoder_spec = parse_provider_spec(args.encoder);
    ProviderHandle encoder = provider_from_spec(encoder_spec);

    std::set<ReportId> reports;
    for (const auto& r : corpus.records) reports.insert(r.report);
    std::map<ReportId, ParagraphIndex> indexes;
    std::vector<std::string> outputs;
    for (ReportId rep : reports) {
        Corpus sub = filter_by_report(corpus, rep);
        indexes.emplace(rep, build_index(sub, *encoder));
        std::string index_file = "index_" + to_string(rep) + ".tsv";
        save_index(indexes.at(rep), args.out_dir + "/" + index_file);
        outputs.push_back(index_file);
    }

    RetrievalReport report = evaluate_retrieval(corpus, indexes, *encoder, 10);

    ordered_json doc;
    doc["encoder_id"] = report.encoder_id;
    doc["cutoff"] = report.cutoff;
    doc["overall_mean"] = report.overall_mean;
    doc["subset_mean"] = ordered_json::object();
    for (const auto& [rep, mean] : report.subset_mean) doc["subset_mean"][to_string(rep)] = mean;
    doc["per_record"] = ordered_json::array();
    for (const auto& r : report.per_record)
        doc["per_record"].push_back({{"record_id", r.record_id},
                                     {"report", to_string(r.report)},
                                     {"reciprocal_rank", r.reciprocal_rank}});
    write_file(args.out_dir + "/retrieval.json", doc.dump(2) + "\n");
    outputs.push_back("retrieval.json");

    double cost = 0.0;
    if (!args.costs_path.empty()) {
        CostTable table = load_cost_table(args.costs_path);
        std::string model = provider_model_label(encoder_spec);
        auto row = table.lookup(model);
        if (!row)
            throw std::runtime_error("retrieve-eval: cost table has no row for encoder \"" +
                                     model + "\"");
        cost = row->kg_co2_per_probe;
        emit_plot_data(report, cost, {args.alpha, args.beta}, args.out_dir + "/plot.csv");
        outputs.push_back("plot.csv");
    }

    RunManifest manifest;
    manifest.subcommand = "retrieve-eval";
    manifest.corpus_path = args.corpus_path;
    manifest.corpus_digest = fnv1a64_hex(read_file(args.corpus_path));
    manifest.model_name = provider_model_label(encoder_spec);
    manifest.providers["encoder"] = args.encoder;
    manifest.alpha = args.alpha;
    manifest.beta = args.beta;
    manifest.defaults = default_versions();
    std::sort(outputs.begin(), outputs.end());
    manifest.outputs = outputs;
    manifest.run_id = make_run_id("retrieve-eval|" + manifest.corpus_digest + "|" + args.encoder +
                                  "|" + args.subset);
    manifest.timestamp = utc_timestamp();
    write_manifest(manifest, args.out_dir);

    std::cout << "retrieve-eval: MRR@10 overall " << format_double(report.overall_mean);
    for (const auto& [rep, mean] : report.subset_mean)
        std::cout << ", " << to_string(rep) << " " << format_double(mean);
    std::cout << " (run " << manifest.run_id << ")\n";
    return 0;
}

struct JudgeArgs {
    std::string corpus_path;
    std::string judge;
    std::string run_dir;
    std::string templates_dir;
    std::string out_dir;
    size_t jobs = 4;
};

int handle_judge(const JudgeArgs& args) {
    if (args.corpus_path.empty()) throw UsageError("judge: --corpus is required");
    if (args.judge.empty()) throw UsageError("judge: --judge provider spec is required");
    if (args.run_dir.empty()) throw UsageError("judge: --run summarize run directory is required");
    prepare_run_dir(args.out_dir);

    Corpus corpus = load_corpus(args.corpus_path);
    RunManifest input = read_manifest(args.run_dir);

    ProviderSpec judge_spec = parse_provider_spec(args.judge);
    ProviderHandle judge = provider_from_spec(judge_spec);
    JudgeTemplateSet templates;
    if (!args.templates_dir.empty())
        templates = JudgeTemplateSet::from_directory(args.templates_dir);

    std::unordered_map<std::string, const SummaryRecord*> record_by_id;
    for (const auto& r : corpus.records) record_by_id.emplace(r.id, &r);
    std::unordered_map<std::string, const Paragraph*> paragraph_by_id;
    for (const auto& p : corpus.paragraphs) paragraph_by_id.emplace(p.id, &p);

    std::vector<std::string> summary_files;
    for (const auto& file : input.outputs)
        if (file.rfind("summaries/", 0) == 0) summary_files.push_back(file);
    if (summary_files.empty())
        throw std::runtime_error("judge: run " + args.run_dir + " lists no summaries");

    fs::create_directories(fs::path(args.out_dir) / "scores");
    struct Judged {
        std::string record_id;
        RtsScore score;
    };
    std::vector<Judged> results(summary_files.size());
    for_each_indexed(summary_files.size(), args.jobs, [&](size_t i) {
        json doc = json::parse(read_file(args.run_dir + "/" + summary_files[i]));
        SummaryOutput output = summary_output_from_json(doc);
        auto rec_it = record_by_id.find(output.record_id);
        if (rec_it == record_by_id.end())
            throw std::runtime_error("judge: record " + output.record_id + " not in corpus");
        const SummaryRecord& record = *rec_it->second;
        // The judge's article is always the record's target paragraphs, so
        // retrieval misses in rag mode show up as consistency drops.
        std::vector<std::string> gold_texts;
        for (const auto& id : record.gold_paragraph_ids) {
            auto p = paragraph_by_id.find(id);
            if (p == paragraph_by_id.end())
                throw std::runtime_error("judge: paragraph " + id + " not in corpus");
            gold_texts.push_back(p->second->text);
        }
        std::string article = assemble_text(gold_texts);
        RtsScore score = judge_summary(*judge, article, output.summary, record.topic,
                                       record.reference_summary, templates);
        results[i] = {output.record_id, score};
    });

    std::vector<std::string> outputs;
    for (const auto& judged : results) {
        ordered_json doc = {{"record_id", judged.record_id},
                            {"consistency", judged.score.consistency},
                            {"coherence", judged.score.coherence},
                            {"fluency", judged.score.fluency},
                            {"relevance", judged.score.relevance},
                            {"average", judged.score.average()}};
        std::string file = "scores/" + sanitize_filename(judged.record_id) + ".json";
        write_file(args.out_dir + "/" + file, doc.dump(2) + "\n");
        outputs.push_back(file);
    }

    RunManifest manifest;
    manifest.subcommand = "judge";
    manifest.corpus_path = args.corpus_path;
    manifest.corpus_digest = fnv1a64_hex(read_file(args.corpus_path));
    manifest.mode = input.mode;
    manifest.model_name = input.model_name;  // the judged generator
    manifest.providers = input.providers;
    manifest.providers["judge"] = args.judge;
    manifest.template_digests["judge_consistency"] = fnv1a64_hex(templates.consistency.text());
    manifest.template_digests["judge_coherence"] = fnv1a64_hex(templates.coherence.text());
    manifest.template_digests["judge_fluency"] = fnv1a64_hex(templates.fluency.text());
    manifest.template_digests["judge_relevance"] = fnv1a64_hex(templates.relevance.text());
    manifest.parent_run = input.run_id;
    manifest.defaults = default_versions();
    std::sort(outputs.begin(), outputs.end());
    manifest.outputs = outputs;
    manifest.run_id = make_run_id("judge|" + input.run_id + "|" + args.judge);
    manifest.timestamp = utc_timestamp();
    write_manifest(manifest, args.out_dir);

    std::cout << "judge: scored " << results.size() << " summaries into " << args.out_dir
              << " (run " << manifest.run_id << ")\n";
    return 0;
}

struct ScoreArgs {
    std::vector<std::string> run_dirs;
    std::string costs_path;
    std::string normalize = "rts-over-5";
    std::string out_dir;
    double alpha = 10.0;
    double beta = 100.0;
};

int handle_score(const ScoreArgs& args) {
    if (args.run_dirs.empty()) throw UsageError("score: at least one --run directory is required");
    if (args.costs_path.empty()) throw UsageError("score: --costs table is required");
    prepare_run_dir(args.out_dir);

    CostTable table = load_cost_table(args.costs_path);
    NormalizeScheme scheme = normalize_scheme_from_string(args.normalize);

    std::vector<ModelRun> runs;
    std::vector<std::string> parents;
    for (const auto& dir : args.run_dirs) {
        RunManifest input = read_manifest(dir);
        ModelRun run;
        run.model_name = input.model_name;
        run.mode = input.mode;
        auto row = table.lookup(input.model_name);
        if (!row)
            throw std::runtime_error("score: cost table " + args.costs_path +
                                     " has no row for model \"" + input.model_name + "\"");
        run.cost_kg_co2 = row->kg_co2_per_probe;
        for (const auto& file : input.outputs) {
            if (file.rfind("scores/", 0) != 0) continue;
            json doc = json::parse(read_file(dir + "/" + file));
            RtsScore score;
            score.consistency = doc.at("consistency").get<int>();
            score.coherence = doc.at("coherence").get<int>();
            score.fluency = doc.at("fluency").get<int>();
            score.relevance = doc.at("relevance").get<int>();
            run.scores.push_back(score);
        }
        if (run.scores.empty())
            throw std::runtime_error("score: run " + dir + " lists no scores; run judge first");
        runs.push_back(std::move(run));
        parents.push_back(input.run_id);
    }

    RunReport report = aggregate_run(runs, {args.alpha, args.beta}, scheme);

    RunManifest manifest;
    manifest.subcommand = "score";
    manifest.alpha = args.alpha;
    manifest.beta = args.beta;
    manifest.normalize = args.normalize;
    std::string parent_join;
    for (size_t i = 0; i < parents.size(); ++i) parent_join += (i ? ";" : "") + parents[i];
    manifest.parent_run = parent_join;
    manifest.defaults = default_versions();
    manifest.run_id = make_run_id("score|" + parent_join + "|" + args.normalize + "|" +
                                  format_double(args.alpha) + "|" + format_double(args.beta));
    report.manifest_ref = manifest.run_id;

    write_file(args.out_dir + "/report.csv", report_to_csv(report));
    manifest.outputs = {"report.csv"};
    manifest.timestamp = utc_timestamp();
    write_manifest(manifest, args.out_dir);

    std::cout << "score: " << report.rows.size() << " models, best " << report.best_model
              << " (run " << manifest.run_id << ")\n";
    return 0;
}

int handle_report(const std::string& report_path, const std::string& out_dir) {
    if (report_path.empty()) throw UsageError("report: --report report.csv path is required");
    prepare_run_dir(out_dir);
    RunReport report = report_from_csv(read_file(report_path));
    emit_plot_data(report, out_dir + "/plot.csv");

    RunManifest manifest;
    manifest.subcommand = "report";
    manifest.defaults = default_versions();
    manifest.outputs = {"plot.csv"};
    manifest.run_id = make_run_id("report|" + fnv1a64_hex(read_file(report_path)));
    manifest.timestamp = utc_timestamp();
    write_manifest(manifest, out_dir);
    std::cout << "report: wrote plot data for " << report.rows.size() << " rows\n";
    return 0;
}

}  // namespace

void emit_plot_data(const RunReport& report, const std::string& out_path) {
    if (report.rows.empty()) throw std::runtime_error("emit_plot_data: report has no rows");
    std::vector<const RunReportRow*> rows;
    rows.reserve(report.rows.size());
    for (const auto& row : report.rows) rows.push_back(&row);
    std::sort(rows.begin(), rows.end(), [](const RunReportRow* a, const RunReportRow* b) {
        if (a->gamma != b->gamma) return a->gamma > b->gamma;
        return a->model_name < b->model_name;
    });
    std::ostringstream out;
    out << "model,raw,gamma\n";
    for (const auto* row : rows)
        out << row->model_name << ',' << format_double(row->average) << ','
            << format_double(row->gamma) << '\n';
    write_file(out_path, out.str());
}

void emit_plot_data(const RetrievalReport& report, double cost_kg_co2, CarburacyParams params,
                    const std::string& out_path) {
    if (report.per_record.empty())
        throw std::runtime_error("emit_plot_data: retrieval report is empty");
    struct Row {
        std::string label;
        double raw;
        double gamma;
    };
    // An all-miss subset has R = 0, outside carburacy's domain; its
    // re-weighted score is the R -> 0+ limit, which is 0.
    auto gamma_of = [&](double mrr) {
        return mrr > 0.0 ? carburacy(mrr, cost_kg_co2, params.alpha, params.beta) : 0.0;
    };
    std::vector<Row> rows;
    for (const auto& [rep, mean] : report.subset_mean)
        rows.push_back({report.encoder_id + ":" + to_string(rep), mean, gamma_of(mean)});
    rows.push_back({report.encoder_id + ":overall", report.overall_mean,
                    gamma_of(report.overall_mean)});
    std::sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) {
        if (a.gamma != b.gamma) return a.gamma > b.gamma;
        return a.label < b.label;
    });
    std::ostringstream out;
    out << "model,raw,gamma\n";
    for (const auto& row : rows)
        out << row.label << ',' << format_double(row.raw) << ',' << format_double(row.gamma)
            << '\n';
    write_file(out_path, out.str());
}

int run_cli(int argc, const char* const* argv) {
    CLI::App app{"carbonsum: carbon-aware aspect-based summarization benchmark"};
    app.require_subcommand(0, 1);

    std::string config_path;
    app.add_option("--config", config_path, "JSON configuration file; flags override it");

    // validate
    auto* validate_cmd = app.add_subcommand("validate", "check corpus invariants");
    std::string v_corpus;
    auto* v_corpus_opt = validate_cmd->add_option("--corpus,corpus", v_corpus, "corpus file");

    // stats
    auto* stats_cmd = app.add_subcommand("stats", "unique-occurrence corpus statistics");
    std::string s_corpus, s_subset;
    auto* s_corpus_opt = stats_cmd->add_option("--corpus,corpus", s_corpus, "corpus file");
    auto* s_subset_opt = stats_cmd->add_option("--subset", s_subset, "AR5 or AR6");

    // summarize
    auto* sum_cmd = app.add_subcommand("summarize", "generate aspect-based summaries");
    SummarizeArgs sum;
    auto* sum_corpus = sum_cmd->add_option("--corpus", sum.corpus_path, "corpus file");
    auto* sum_mode = sum_cmd->add_option("--mode", sum.mode, "gold | rag");
    auto* sum_provider = sum_cmd->add_option("--provider", sum.provider, "generator provider spec");
    auto* sum_encoder = sum_cmd->add_option("--encoder", sum.encoder, "encoder provider spec (rag)");
    auto* sum_template = sum_cmd->add_option("--template", sum.template_path, "prompt template file");
    auto* sum_meter = sum_cmd->add_option("--meter", sum.meter, "energy meter spec for a probe");
    auto* sum_subset = sum_cmd->add_option("--subset", sum.subset, "AR5 or AR6");
    auto* sum_out = sum_cmd->add_option("--out", sum.out_dir, "run directory");
    auto* sum_k = sum_cmd->add_option("--k", sum.k, "paragraphs to retrieve in rag mode");
    auto* sum_threshold = sum_cmd->add_option("--threshold", sum.threshold,
                                              "character threshold for chunked summarization");
    auto* sum_jobs = sum_cmd->add_option("--jobs", sum.jobs, "worker threads");

    // retrieve-eval
    auto* ret_cmd = app.add_subcommand("retrieve-eval", "evaluate retrieval with MRR@10");
    RetrieveEvalArgs ret;
    auto* ret_corpus = ret_cmd->add_option("--corpus", ret.corpus_path, "corpus file");
    auto* ret_encoder = ret_cmd->add_option("--encoder", ret.encoder, "encoder provider spec");
    auto* ret_costs = ret_cmd->add_option("--costs", ret.costs_path, "encoder cost table");
    auto* ret_subset = ret_cmd->add_option("--subset", ret.subset, "AR5 or AR6");
    auto* ret_out = ret_cmd->add_option("--out", ret.out_dir, "run directory");
    auto* ret_alpha = ret_cmd->add_option("--alpha", ret.alpha, "carburacy alpha");
    auto* ret_beta = ret_cmd->add_option("--beta", ret.beta, "carburacy beta (retrieval regime)");

    // judge
    auto* judge_cmd = app.add_subcommand("judge", "LLM-judge scores for a summarize run");
    JudgeArgs jdg;
    auto* jdg_corpus = judge_cmd->add_option("--corpus", jdg.corpus_path, "corpus file");
    auto* jdg_judge = judge_cmd->add_option("--judge", jdg.judge, "judge provider spec");
    auto* jdg_run = judge_cmd->add_option("--run", jdg.run_dir, "summarize run directory");
    auto* jdg_templates =
        judge_cmd->add_option("--templates", jdg.templates_dir, "judge template directory");
    auto* jdg_out = judge_cmd->add_option("--out", jdg.out_dir, "run directory");
    auto* jdg_jobs = judge_cmd->add_option("--jobs", jdg.jobs, "worker threads");

    // score
    auto* score_cmd = app.add_subcommand("score", "aggregate judged runs into a report");
    ScoreArgs sc;
    auto* sc_runs = score_cmd->add_option("--run", sc.run_dirs, "judged run directory (repeatable)");
    auto* sc_costs = score_cmd->add_option("--costs", sc.costs_path, "model cost table");
    auto* sc_normalize =
        score_cmd->add_option("--normalize", sc.normalize, "rts-over-5 | identity");
    auto* sc_out = score_cmd->add_option("--out", sc.out_dir, "run directory");
    auto* sc_alpha = score_cmd->add_option("--alpha", sc.alpha, "carburacy alpha");
    auto* sc_beta = score_cmd->add_option("--beta", sc.beta, "carburacy beta");

    // report
    auto* report_cmd = app.add_subcommand("report", "plot-ready data from a report");
    std::string rep_report, rep_out;
    auto* rep_report_opt = report_cmd->add_option("--report", rep_report, "report.csv path");
    auto* rep_out_opt = report_cmd->add_option("--out", rep_out, "run directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        json config = load_config(config_path);
        if (app.got_subcommand(validate_cmd)) {
            return handle_validate(
                resolve(v_corpus_opt, v_corpus, config, "validate", "corpus", std::string()));
        }
        if (app.got_subcommand(stats_cmd)) {
            return handle_stats(
                resolve(s_corpus_opt, s_corpus, config, "stats", "corpus", std::string()),
                resolve(s_subset_opt, s_subset, config, "stats", "subset", std::string()));
        }
        if (app.got_subcommand(sum_cmd)) {
            SummarizeArgs a;
            a.corpus_path = resolve(sum_corpus, sum.corpus_path, config, "summarize", "corpus",
                                    std::string());
            a.mode = resolve(sum_mode, sum.mode, config, "summarize", "mode", std::string("gold"));
            a.provider = resolve(sum_provider, sum.provider, config, "summarize", "provider",
                                 std::string());
            a.encoder =
                resolve(sum_encoder, sum.encoder, config, "summarize", "encoder", std::string());
            a.template_path = resolve(sum_template, sum.template_path, config, "summarize",
                                      "template", std::string());
            a.meter = resolve(sum_meter, sum.meter, config, "summarize", "meter", std::string());
            a.subset = resolve(sum_subset, sum.subset, config, "summarize", "subset", std::string());
            a.out_dir = resolve(sum_out, sum.out_dir, config, "summarize", "out", std::string());
            a.k = resolve(sum_k, sum.k, config, "summarize", "k", std::size_t{2});
            a.threshold = resolve(sum_threshold, sum.threshold, config, "summarize", "threshold",
                                  std::size_t{12000});
            a.jobs = resolve(sum_jobs, sum.jobs, config, "summarize", "jobs", std::size_t{4});
            return handle_summarize(a);
        }
        if (app.got_subcommand(ret_cmd)) {
            RetrieveEvalArgs a;
            a.corpus_path = resolve(ret_corpus, ret.corpus_path, config, "retrieve-eval", "corpus",
                                    std::string());
            a.encoder = resolve(ret_encoder, ret.encoder, config, "retrieve-eval", "encoder",
                                std::string());
            a.costs_path =
                resolve(ret_costs, ret.costs_path, config, "retrieve-eval", "costs", std::string());
            a.subset =
                resolve(ret_subset, ret.subset, config, "retrieve-eval", "subset", std::string());
            a.out_dir = resolve(ret_out, ret.out_dir, config, "retrieve-eval", "out", std::string());
            a.alpha = resolve(ret_alpha, ret.alpha, config, "retrieve-eval", "alpha", 10.0);
            a.beta = resolve(ret_beta, ret.beta, config, "retrieve-eval", "beta", 10000.0);
            return handle_retrieve_eval(a);
        }
        if (app.got_subcommand(judge_cmd)) {
            JudgeArgs a;
            a.corpus_path =
                resolve(jdg_corpus, jdg.corpus_path, config, "judge", "corpus", std::string());
            a.judge = resolve(jdg_judge, jdg.judge, config, "judge", "judge", std::string());
            a.run_dir = resolve(jdg_run, jdg.run_dir, config, "judge", "run", std::string());
            a.templates_dir = resolve(jdg_templates, jdg.templates_dir, config, "judge",
                                      "templates", std::string());
            a.out_dir = resolve(jdg_out, jdg.out_dir, config, "judge", "out", std::string());
            a.jobs = resolve(jdg_jobs, jdg.jobs, config, "judge", "jobs", std::size_t{4});
            return handle_judge(a);
        }
        if (app.got_subcommand(score_cmd)) {
            ScoreArgs a;
            a.run_dirs = resolve(sc_runs, sc.run_dirs, config, "score", "run",
                                 std::vector<std::string>{});
            a.costs_path = resolve(sc_costs, sc.costs_path, config, "score", "costs", std::string());
            a.normalize = resolve(sc_normalize, sc.normalize, config, "score", "normalize",
                                  std::string("rts-over-5"));
            a.out_dir = resolve(sc_out, sc.out_dir, config, "score", "out", std::string());
            a.alpha = resolve(sc_alpha, sc.alpha, config, "score", "alpha", 10.0);
            a.beta = resolve(sc_beta, sc.beta, config, "score", "beta", 100.0);
            return handle_score(a);
        }
        if (app.got_subcommand(report_cmd)) {
            return handle_report(
                resolve(rep_report_opt, rep_report, config, "report", "report", std::string()),
                resolve(rep_out_opt, rep_out, config, "report", "out", std::string()));
        }
        std::cerr << app.help();
        return 1;
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 1;
    } catch (const std::invalid_argument& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}

int run_cli(const std::vector<std::string>& args) {
    std::vector<const char*> argv;
    argv.push_back("carbonsum");
    for (const auto& a : args) argv.push_back(a.c_str());
    return run_cli(static_cast<int>(argv.size()), argv.data());
}

}  // namespace carbonsum
