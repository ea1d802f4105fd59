#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "medrag/gateway.hpp"
#include "medrag/preference.hpp"
#include "medrag/query.hpp"

namespace medrag {

struct ExploreParams {
    std::size_t queries_per_corpus = 6;
    std::size_t n_q = 1;
};

struct PairsParams {
    double alpha_r = 0.5;
    std::vector<TextMetric> metrics{TextMetric::bleu, TextMetric::rouge_l};
    double beta = 0.1;
};

struct ConcurrencyParams {
    std::size_t workers = 4;
    std::size_t max_in_flight = 4;
};

struct ServeParams {
    std::string host = "127.0.0.1";
    int port = 8080;
};

struct PipelineConfig {
    std::filesystem::path config_dir;  // directory of the config file
    std::filesystem::path store_dir;
    std::filesystem::path index_dir;
    std::filesystem::path cache_dir;  // empty disables the persistent cache
    std::filesystem::path output_dir;
    std::map<std::string, std::filesystem::path> inputs;
    std::map<std::string, ModelEndpoint> endpoints;
    int dedup_threshold = 2;
    RetrievalParams retrieval;
    PairsParams pairs;
    ExploreParams explore;
    ConcurrencyParams concurrency;
    ServeParams serve;
    json raw;  // canonical source of the config hash

    /// Input path for `name`; throws ConfigError when missing or nonexistent.
    std::filesystem::path input(const std::string& name) const;
    /// Endpoint named `name` with kind verified; throws ConfigError otherwise.
    ModelEndpoint endpoint(const std::string& name, EndpointKind kind) const;
};

/// Loads and validates a config file. Relative paths resolve against the
/// config file's directory. Parameter ranges are enforced here so pipeline
/// code can assume them.
PipelineConfig load_config(const std::filesystem::path& path);

/// Applies `key=value` overrides onto the raw JSON before validation; keys
/// are dot-separated paths, values parse as JSON when possible and fall back
/// to strings.
void apply_overrides(json& raw, const std::vector<std::string>& overrides);

PipelineConfig parse_config(json raw, const std::filesystem::path& config_dir);

/// Hash of the canonicalized (sorted-key) config JSON.
std::string config_hash(const json& raw);

// ---------------------------------------------------------------------------
// Run manifests

/// Content manifest for one subcommand run: every input and output file is
/// recorded with its hash, so identical configs and inputs produce identical
/// manifests.
struct RunManifest {
    std::string subcommand;
    std::string config_hash;
    std::map<std::string, std::string> inputs;   // path -> sha256
    std::map<std::string, std::string> outputs;  // path -> sha256
    std::map<std::string, std::size_t> wire_calls;

    json to_json() const;
    void write(const std::filesystem::path& path) const;
};

}  // namespace medrag
