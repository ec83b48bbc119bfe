#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace decgnn::csv {

// Splits one CSV record. Supports double-quoted fields with "" escapes.
std::vector<std::string> split_line(std::string_view line);

// Quotes the field only when it contains a comma, quote or newline.
std::string escape(std::string_view field);

std::string join(const std::vector<std::string>& fields);

// Shortest decimal text that parses back to the identical double.
std::string format_double(double x);

// Fixed-precision text, used where the file should read like a report.
std::string format_fixed(double x, int decimals);

// Strict parse of a whole field; returns false on trailing garbage.
bool parse_double(std::string_view text, double& out);

// Lines of a text file with trailing '\r' removed. Throws DataError if the
// file cannot be opened.
std::vector<std::string> read_lines(const std::filesystem::path& path);

void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace decgnn::csv
