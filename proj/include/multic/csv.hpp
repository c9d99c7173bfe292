#pragma once

#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace multic {

/// RFC-4180 field quoting: fields containing a comma, quote, CR or LF are
/// wrapped in quotes with embedded quotes doubled.
std::string csv_escape(std::string_view field);

/// Writes one record terminated by CRLF-free "\n".
void write_csv_row(std::ostream& out, const std::vector<std::string>& fields);

/// Parses a whole RFC-4180 document. Quoted fields may span lines.
/// Throws std::runtime_error on an unterminated quote.
std::vector<std::vector<std::string>> parse_csv(std::string_view text);

}  // namespace multic
