#pragma once

#include <iosfwd>
#include <string>

#include "cmle/missing_data.hpp"

namespace cmle {

/// Reads a counts table. Two accepted forms:
///   - keyed lines `n i j k count` / `m j k count` with i,j,k in {0,1},
///     `#` comments, any order, missing cells default to 0, duplicates are
///     an error;
///   - a bare list of exactly 12 integers in canonical order
///     (n000 n010 n001 n011 n100 n110 n101 n111 m00 m10 m01 m11).
/// Throws ParseError with a line-numbered message.
CellCounts read_counts(std::istream& in);
CellCounts read_counts_file(const std::string& path);

/// Writes the canonical keyed form; read_counts(write_counts(c)) == c.
void write_counts(std::ostream& out, const CellCounts& counts);
std::string counts_to_string(const CellCounts& counts);

/// Cell label in file order: n000..n111 for 0..7, m00..m11 for 8..11.
std::string cell_label(int flat_index);

}  // namespace cmle
