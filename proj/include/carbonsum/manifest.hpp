#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace carbonsum {

/// Reproducibility record written once per run directory. The run id is a
/// digest of the resolved configuration and input digests, so identical
/// runs produce identical manifests apart from the timestamp.
struct RunManifest {
    std::string run_id;
    std::string timestamp;
    std::string subcommand;
    std::string corpus_path;
    std::string corpus_digest;
    std::string mode;        // gold | rag, when applicable
    std::string model_name;  // primary model of this run
    std::map<std::string, std::string> providers;         // role -> spec string
    std::map<std::string, std::string> template_digests;  // name -> fnv1a hex
    std::optional<std::size_t> threshold;
    std::optional<std::size_t> k;
    std::string meter;
    double alpha = 10.0;
    double beta = 100.0;
    std::string normalize;
    std::string parent_run;             // upstream run id for chained stages
    std::vector<std::string> outputs;   // files of this run, relative paths
    std::map<std::string, std::string> defaults;  // versions of all defaults
};

void write_manifest(const RunManifest& manifest, const std::string& run_dir);
RunManifest read_manifest(const std::string& run_dir);

/// Deterministic run id from the resolved configuration.
std::string make_run_id(const std::string& material);

}  // namespace carbonsum
