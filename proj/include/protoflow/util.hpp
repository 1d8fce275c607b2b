#ifndef PROTOFLOW_UTIL_HPP
#define PROTOFLOW_UTIL_HPP

#include <cstdint>
#include <string>
#include <vector>

namespace protoflow::util {

std::string lower(const std::string& s);
std::string trim(const std::string& s);

// Splits on whitespace, stripping leading/trailing punctuation from each
// token. Tokens are kept verbatim otherwise (no case folding).
std::vector<std::string> tokenize(const std::string& s);

// Lowercased word tokens with punctuation stripped.
std::vector<std::string> word_tokens(const std::string& s);

bool starts_with(const std::string& s, const std::string& prefix);
bool ends_with(const std::string& s, const std::string& suffix);

std::string join(const std::vector<std::string>& parts, const std::string& sep);

// Levenshtein distance over token sequences.
std::size_t edit_distance(const std::vector<std::string>& a,
                          const std::vector<std::string>& b);

// edit_distance normalized by max(|a|, |b|, 1); in [0, 1].
double normalized_edit_distance(const std::vector<std::string>& a,
                                const std::vector<std::string>& b);

// Cosine similarity of character-trigram count vectors of the lowercased
// inputs; in [0, 1]. Strings shorter than 3 characters are padded.
double trigram_cosine(const std::string& a, const std::string& b);

std::uint64_t fnv1a64(const std::string& data);
std::string to_hex(std::uint64_t v);

// Locale-independent shortest round-trippable-ish rendering (%.9g with
// trailing-zero trimming); deterministic across runs.
std::string format_number(double v);

std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& data);

}  // namespace protoflow::util

#endif
