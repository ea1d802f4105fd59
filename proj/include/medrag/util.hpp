#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace medrag {

using json = nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// Hashing

/// FNV-1a over raw bytes.
std::uint64_t fnv1a64(std::string_view data);

/// One splitmix64 step; advances `state` and returns the next output.
std::uint64_t splitmix64(std::uint64_t& state);

/// Maps a 64-bit word onto [0, 1) using the top 53 bits.
double unit_interval(std::uint64_t x);

/// Hex-encoded SHA-256 of `data`.
std::string sha256_hex(std::string_view data);

// ---------------------------------------------------------------------------
// Encoding

std::string base64_encode(std::string_view bytes);
std::string base64_decode(std::string_view text);

// ---------------------------------------------------------------------------
// Text

/// Lowercases, trims, and collapses internal whitespace runs to single spaces.
std::string normalize_term(std::string_view s);

/// Lowercased alphanumeric runs; punctuation and whitespace are separators.
std::vector<std::string> word_tokens(std::string_view s);

/// Metric tokenizer: lowercased alphanumeric runs plus each punctuation
/// character as its own single-character token.
std::vector<std::string> metric_tokens(std::string_view s);

std::string trim(std::string_view s);
std::string to_lower(std::string_view s);

// ---------------------------------------------------------------------------
// Files

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view content);

/// Parses one JSON object per non-empty line. Throws InputError with the
/// line number on malformed rows.
std::vector<json> read_jsonl(const std::filesystem::path& path);
void write_jsonl(const std::filesystem::path& path, const std::vector<json>& rows);

std::string sha256_file_hex(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Concurrency

/// Runs f(0..n-1) on up to `workers` threads. Exceptions from f propagate
/// after all workers join (first one wins). workers==0 or 1 runs inline.
void parallel_for(std::size_t n, std::size_t workers,
                  const std::function<void(std::size_t)>& f);

}  // namespace medrag
