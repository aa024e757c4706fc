#include "carbonsum/manifest.hpp"

#include <stdexcept>

#include <json.hpp>

#include "carbonsum/util.hpp"

namespace carbonsum {

using nlohmann::ordered_json;

std::string make_run_id(const std::string& material) {
    return fnv1a64_hex(material);
}

void write_manifest(const RunManifest& manifest, const std::string& run_dir) {
    ordered_json doc;
    doc["run_id"] = manifest.run_id;
    doc["timestamp"] = manifest.timestamp;
    doc["subcommand"] = manifest.subcommand;
    if (!manifest.corpus_path.empty()) {
        doc["corpus_path"] = manifest.corpus_path;
        doc["corpus_digest"] = manifest.corpus_digest;
    }
    if (!manifest.mode.empty()) doc["mode"] = manifest.mode;
    if (!manifest.model_name.empty()) doc["model_name"] = manifest.model_name;
    if (!manifest.providers.empty()) doc["providers"] = manifest.providers;
    if (!manifest.template_digests.empty()) doc["template_digests"] = manifest.template_digests;
    if (manifest.threshold) doc["threshold"] = *manifest.threshold;
    if (manifest.k) doc["k"] = *manifest.k;
    if (!manifest.meter.empty()) doc["meter"] = manifest.meter;
    doc["alpha"] = manifest.alpha;
    doc["beta"] = manifest.beta;
    if (!manifest.normalize.empty()) doc["normalize"] = manifest.normalize;
    if (!manifest.parent_run.empty()) doc["parent_run"] = manifest.parent_run;
    doc["outputs"] = manifest.outputs;
    doc["defaults"] = manifest.defaults;
    write_file(run_dir + "/manifest.json", doc.dump(2) + "\n");
}

RunManifest read_manifest(const std::string& run_dir) {
    ordered_json doc;
    try {
        doc = ordered_json::parse(read_file(run_dir + "/manifest.json"));
    } catch (const std::exception& e) {
        throw std::runtime_error("cannot read manifest in " + run_dir + ": " + e.what());
    }
    RunManifest manifest;
    manifest.run_id = doc.value("run_id", "");
    manifest.timestamp = doc.value("timestamp", "");
    manifest.subcommand = doc.value("subcommand", "");
    manifest.corpus_path = doc.value("corpus_path", "");
    manifest.corpus_digest = doc.value("corpus_digest", "");
    manifest.mode = doc.value("mode", "");
    manifest.model_name = doc.value("model_name", "");
    if (doc.contains("providers"))
        manifest.providers = doc["providers"].get<std::map<std::string, std::string>>();
    if (doc.contains("template_digests"))
        manifest.template_digests =
            doc["template_digests"].get<std::map<std::string, std::string>>();
    if (doc.contains("threshold")) manifest.threshold = doc["threshold"].get<std::size_t>();
    if (doc.contains("k")) manifest.k = doc["k"].get<std::size_t>();
    manifest.meter = doc.value("meter", "");
    manifest.alpha = doc.value("alpha", 10.0);
    manifest.beta = doc.value("beta", 100.0);
    manifest.normalize = doc.value("normalize", "");
    manifest.parent_run = doc.value("parent_run", "");
    if (doc.contains("outputs"))
        manifest.outputs = doc["outputs"].get<std::vector<std::string>>();
    if (doc.contains("defaults"))
        manifest.defaults = doc["defaults"].get<std::map<std::string, std::string>>();
    return manifest;
}

}  // namespace carbonsum
