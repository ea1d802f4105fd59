#include "medrag/config.hpp"

#include <algorithm>

#include "medrag/errors.hpp"

namespace medrag {

namespace {

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
    std::filesystem::path path(p);
    return path.is_absolute() ? path : base / path;
}

ModelEndpoint parse_endpoint(const std::string& name, const json& spec) {
    ModelEndpoint ep;
    const std::string kind = spec.value("kind", std::string{});
    const auto parsed_kind = endpoint_kind_from_name(kind);
    if (!parsed_kind) {
        throw ConfigError("endpoint '" + name + "': unknown kind '" + kind + "'");
    }
    ep.kind = *parsed_kind;
    ep.model_id = spec.value("model_id", name);
    ep.base_url = spec.value("base_url", std::string{});
    if (ep.base_url.empty()) {
        throw ConfigError("endpoint '" + name + "': base_url is required");
    }
    ep.max_batch = spec.value("max_batch", std::size_t{16});
    if (ep.max_batch < 1) throw ConfigError("endpoint '" + name + "': max_batch >= 1");
    ep.timeout = std::chrono::milliseconds(spec.value("timeout_ms", std::int64_t{60000}));
    ep.max_retries = spec.value("max_retries", std::size_t{2});
    ep.max_in_flight = spec.value("max_in_flight", std::size_t{4});
    ep.backoff = std::chrono::milliseconds(spec.value("backoff_ms", std::int64_t{100}));
    if (ep.timeout.count() <= 0) throw ConfigError("endpoint '" + name + "': timeout > 0");
    return ep;
}

}  // namespace

std::filesystem::path PipelineConfig::input(const std::string& name) const {
    auto it = inputs.find(name);
    if (it == inputs.end()) {
        throw ConfigError("config: inputs." + name + " is required for this subcommand");
    }
    if (!std::filesystem::exists(it->second)) {
        throw ConfigError("config: inputs." + name + " does not exist: " +
                          it->second.string());
    }
    return it->second;
}

ModelEndpoint PipelineConfig::endpoint(const std::string& name, EndpointKind kind) const {
    auto it = endpoints.find(name);
    if (it == endpoints.end()) {
        throw ConfigError("config: endpoints." + name + " is required");
    }
    if (it->second.kind != kind) {
        throw ConfigError("config: endpoints." + name + " must have kind " +
                          std::string(endpoint_kind_name(kind)));
    }
    return it->second;
}

PipelineConfig parse_config(json raw, const std::filesystem::path& config_dir) {
    PipelineConfig cfg;
    cfg.config_dir = config_dir;
    cfg.raw = raw;

    try {
        cfg.store_dir = resolve(config_dir, raw.value("store_dir", std::string{"stores"}));
        cfg.index_dir = resolve(config_dir, raw.value("index_dir", std::string{"indexes"}));
        cfg.output_dir = resolve(config_dir, raw.value("output_dir", std::string{"out"}));
        const std::string cache = raw.value("cache_dir", std::string{});
        if (!cache.empty()) cfg.cache_dir = resolve(config_dir, cache);

        if (raw.contains("inputs")) {
            for (const auto& [name, value] : raw.at("inputs").items()) {
                cfg.inputs[name] = resolve(config_dir, value.get<std::string>());
            }
        }
        if (raw.contains("endpoints")) {
            for (const auto& [name, spec] : raw.at("endpoints").items()) {
                auto ep = parse_endpoint(name, spec);
                // resolve scripted-mock paths relative to the config
                const std::string prefix = "mock://scripted?script=";
                if (ep.base_url.rfind(prefix, 0) == 0) {
                    const std::string p = ep.base_url.substr(prefix.size());
                    ep.base_url = prefix + resolve(config_dir, p).string();
                }
                cfg.endpoints.emplace(name, std::move(ep));
            }
        }

        cfg.dedup_threshold = raw.value("dedup_threshold", 2);
        if (cfg.dedup_threshold < 0 || cfg.dedup_threshold > 64) {
            throw ConfigError("config: dedup_threshold must be in [0, 64]");
        }

        if (raw.contains("retrieval")) {
            const auto& r = raw.at("retrieval");
            cfg.retrieval.tau = r.value("tau", 0.8);
            cfg.retrieval.k_max = r.value("k_max", std::size_t{3});
            cfg.retrieval.k0 = r.value("k0", std::size_t{60});
            cfg.retrieval.top_n = r.value("top_n", std::size_t{10});
            cfg.retrieval.top_m = r.value("top_m", std::size_t{2});
            cfg.retrieval.max_unstructured_queries =
                r.value("max_unstructured_queries", std::size_t{4});
            cfg.retrieval.graph_top_relations =
                r.value("graph_top_relations", std::size_t{10});
        }
        if (!(cfg.retrieval.tau > 0.0 && cfg.retrieval.tau <= 1.0)) {
            throw ConfigError("config: retrieval.tau must be in (0, 1]");
        }
        if (cfg.retrieval.k_max < 1) throw ConfigError("config: retrieval.k_max >= 1");
        if (cfg.retrieval.top_n < 1) throw ConfigError("config: retrieval.top_n >= 1");
        if (cfg.retrieval.top_m > cfg.retrieval.top_n) {
            throw ConfigError("config: retrieval.top_m must not exceed top_n");
        }

        if (raw.contains("pairs")) {
            const auto& p = raw.at("pairs");
            cfg.pairs.alpha_r = p.value("alpha_r", 0.5);
            cfg.pairs.beta = p.value("beta", 0.1);
            if (p.contains("metrics")) {
                cfg.pairs.metrics.clear();
                for (const auto& m : p.at("metrics")) {
                    const auto metric = text_metric_from_name(m.get<std::string>());
                    if (!metric) {
                        throw ConfigError("config: unknown pairs.metric '" +
                                          m.get<std::string>() + "'");
                    }
                    cfg.pairs.metrics.push_back(*metric);
                }
            }
        }
        if (cfg.pairs.alpha_r < 0.0 || cfg.pairs.alpha_r > 1.0) {
            throw ConfigError("config: pairs.alpha_r must be in [0, 1]");
        }
        if (cfg.pairs.beta <= 0.0) throw ConfigError("config: pairs.beta must be > 0");
        if (cfg.pairs.metrics.empty()) {
            throw ConfigError("config: pairs.metrics must not be empty");
        }

        if (raw.contains("explore")) {
            const auto& e = raw.at("explore");
            cfg.explore.queries_per_corpus = e.value("queries_per_corpus", std::size_t{6});
            cfg.explore.n_q = e.value("n_q", std::size_t{1});
        }
        if (cfg.explore.n_q < 1) throw ConfigError("config: explore.n_q must be >= 1");
        if (cfg.explore.queries_per_corpus < 1) {
            throw ConfigError("config: explore.queries_per_corpus must be >= 1");
        }

        if (raw.contains("concurrency")) {
            const auto& c = raw.at("concurrency");
            cfg.concurrency.workers = c.value("workers", std::size_t{4});
            cfg.concurrency.max_in_flight = c.value("max_in_flight", std::size_t{4});
        }
        if (cfg.concurrency.workers < 1) {
            throw ConfigError("config: concurrency.workers must be >= 1");
        }

        if (raw.contains("serve")) {
            const auto& s = raw.at("serve");
            cfg.serve.host = s.value("host", std::string{"127.0.0.1"});
            cfg.serve.port = s.value("port", 8080);
        }
        if (cfg.serve.port < 0 || cfg.serve.port > 65535) {
            throw ConfigError("config: serve.port out of range");
        }
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("config: malformed value: ") + e.what());
    }
    return cfg;
}

PipelineConfig load_config(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) {
        throw ConfigError("config file not found: " + path.string());
    }
    json raw;
    try {
        raw = json::parse(read_file(path));
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError("config is not valid JSON: " + std::string(e.what()));
    }
    auto dir = path.has_parent_path() ? path.parent_path()
                                      : std::filesystem::current_path();
    return parse_config(std::move(raw), dir);
}

void apply_overrides(json& raw, const std::vector<std::string>& overrides) {
    for (const auto& kv : overrides) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("override must look like key=value: " + kv);
        }
        std::string pointer = "/" + kv.substr(0, eq);
        std::replace(pointer.begin(), pointer.end(), '.', '/');
        const std::string value_text = kv.substr(eq + 1);

        json value = json::parse(value_text, nullptr, false);
        if (value.is_discarded()) value = value_text;
        try {
            raw[json::json_pointer(pointer)] = value;
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError("override '" + kv + "' failed: " + e.what());
        }
    }
}

std::string config_hash(const json& raw) {
    // sorted keys make the hash independent of key order in the file
    return sha256_hex(nlohmann::json(raw).dump());
}

json RunManifest::to_json() const {
    json inputs_json = json::object();
    for (const auto& [path, hash] : inputs) inputs_json[path] = hash;
    json outputs_json = json::object();
    for (const auto& [path, hash] : outputs) outputs_json[path] = hash;
    json wire = json::object();
    for (const auto& [name, count] : wire_calls) wire[name] = count;
    return json{{"subcommand", subcommand},
                {"config_hash", config_hash},
                {"inputs", inputs_json},
                {"outputs", outputs_json},
                {"wire_calls", wire}};
}

void RunManifest::write(const std::filesystem::path& path) const {
    write_file(path, to_json().dump(2) + "\n");
}

}  // namespace medrag
