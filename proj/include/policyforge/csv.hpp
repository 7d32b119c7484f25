#pragma once

#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace policyforge::csv {

using Row = std::vector<std::string>;

// RFC 4180 reader: quoted fields, doubled quotes, embedded newlines, CRLF.
std::vector<Row> parse(std::string_view text);

std::string escape(std::string_view field);
void write_row(std::ostream& out, const Row& row);

}  // namespace policyforge::csv
