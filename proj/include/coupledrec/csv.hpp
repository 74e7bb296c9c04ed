#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace coupledrec::csv {

using Row = std::vector<std::string>;

/// Splits one CSV record. Double-quoted fields may contain commas and
/// doubled quotes; a trailing CR is stripped.
Row split_line(std::string_view line);

/// Quotes a field only when it contains a comma, quote, or leading/trailing space.
std::string escape(std::string_view field);

std::string join(const Row& fields);

struct Document {
  Row header;
  std::vector<Row> rows;
  std::vector<std::size_t> line_numbers;  // 1-based source line of each row
};

/// Reads a whole file. Blank lines are skipped. Throws InputError when the
/// file cannot be opened or has no header.
Document read_file(const std::filesystem::path& path);

/// Throws InputError unless `doc.header` equals `expected` exactly.
void require_header(const Document& doc, const Row& expected, const std::filesystem::path& path);

}  // namespace coupledrec::csv
