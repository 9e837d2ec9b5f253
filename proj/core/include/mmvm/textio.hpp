#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace mmvm {

/// One CSV record; double quotes escape commas and quotes.
std::vector<std::string> split_csv_line(const std::string& line);
/// Quotes a cell only when it needs quoting.
std::string csv_cell(const std::string& v);

/// Whole file as bytes. ParseError if it cannot be opened.
std::string slurp(const std::filesystem::path& path);
/// Replaces the file's contents. IoError on failure.
void spit(const std::filesystem::path& path, const std::string& bytes);

}  // namespace mmvm
