#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace carbonsum {

std::string trim(std::string_view s);

/// Whitespace-delimited pieces; the token-count convention used whenever an
/// endpoint does not report usage data.
std::vector<std::string> split_tokens(std::string_view text);
std::size_t count_tokens(std::string_view text);

std::string to_lower(std::string_view s);

/// FNV-1a 64-bit. Used for content digests in run manifests and for the
/// deterministic hashing embedder. Stable across platforms by construction.
std::uint64_t fnv1a64(std::string_view bytes);
std::string fnv1a64_hex(std::string_view bytes);

std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view content);

/// ISO-8601 UTC, second resolution.
std::string utc_timestamp();

/// Value formatted with %.3g-style significant digits, e.g. 3.86e-03.
std::string format_sig3(double value);

}  // namespace carbonsum
