#pragma once

#include <istream>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

namespace ppm::csv {

using Row = std::vector<std::string>;

/// Reads comma-separated records with RFC 4180 quoting. Quoted fields may
/// contain commas, doubled quotes and line breaks. CRLF and LF line endings
/// are both accepted. A trailing empty line is not a record.
std::vector<Row> read(std::istream& in);

/// Quotes a field only when it contains a comma, quote, CR or LF.
std::string escape(std::string_view field);

void write_row(std::ostream& out, const Row& row);

}  // namespace ppm::csv
