#include "cmle/counts_io.hpp"

#include <array>
#include <fstream>
#include <sstream>
#include <vector>

namespace cmle {

namespace {

std::string at_line(int line, const std::string& msg) {
  return "line " + std::to_string(line) + ": " + msg;
}

std::int64_t parse_count(const std::string& tok, int line) {
  size_t pos = 0;
  std::int64_t v = 0;
  try {
    v = std::stoll(tok, &pos);
  } catch (const std::exception&) {
    throw ParseError(at_line(line, "expected an integer count, got '" + tok + "'"));
  }
  if (pos != tok.size())
    throw ParseError(at_line(line, "expected an integer count, got '" + tok + "'"));
  if (v < 0) throw ParseError(at_line(line, "counts must be non-negative"));
  return v;
}

int parse_bit(const std::string& tok, const char* what, int line) {
  if (tok == "0") return 0;
  if (tok == "1") return 1;
  throw ParseError(at_line(line, std::string(what) + " must be 0 or 1, got '" + tok + "'"));
}

}  // namespace

std::string cell_label(int flat_index) {
  if (flat_index < 8) {
    const int i = flat_index / 4;
    const int c = flat_index % 4;
    return "n" + std::to_string(i) + std::to_string(c % 2) + std::to_string(c / 2);
  }
  const int c = flat_index - 8;
  return "m" + std::to_string(c % 2) + std::to_string(c / 2);
}

CellCounts read_counts(std::istream& in) {
  CellCounts counts;
  std::array<bool, 12> seen{};
  std::vector<std::int64_t> bare;
  bool keyed = false, is_bare = false;

  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    std::string tok;
    if (!(ls >> tok)) continue;  // blank or comment-only

    if (tok == "n" || tok == "m") {
      if (is_bare)
        throw ParseError(at_line(lineno, "keyed line after bare numeric values"));
      keyed = true;
      const bool full = tok == "n";
      std::string a, b, c, d;
      int i = 0, j = 0, k = 0;
      if (full) {
        if (!(ls >> a >> b >> c >> d))
          throw ParseError(at_line(lineno, "expected 'n i j k count'"));
        i = parse_bit(a, "i", lineno);
        j = parse_bit(b, "j", lineno);
        k = parse_bit(c, "k", lineno);
      } else {
        if (!(ls >> a >> b >> c))
          throw ParseError(at_line(lineno, "expected 'm j k count'"));
        j = parse_bit(a, "j", lineno);
        k = parse_bit(b, "k", lineno);
        d = c;
      }
      if (ls >> tok) throw ParseError(at_line(lineno, "trailing tokens"));
      const int flat = full ? 4 * i + cell_index(j, k) : 8 + cell_index(j, k);
      if (seen[static_cast<size_t>(flat)])
        throw ParseError(at_line(lineno, "duplicate cell " + cell_label(flat)));
      seen[static_cast<size_t>(flat)] = true;
      const std::int64_t v = parse_count(d, lineno);
      if (full)
        counts.n[static_cast<size_t>(4 * i + cell_index(j, k))] = v;
      else
        counts.m[static_cast<size_t>(cell_index(j, k))] = v;
    } else {
      if (keyed)
        throw ParseError(at_line(lineno, "bare numeric value after keyed lines"));
      is_bare = true;
      do {
        if (bare.size() == 12)
          throw ParseError(at_line(lineno, "unexpected extra value after " + cell_label(11)));
        bare.push_back(parse_count(tok, lineno));
      } while (ls >> tok);
    }
  }

  if (is_bare) {
    if (bare.size() != 12)
      throw ParseError("missing value for cell " + cell_label(static_cast<int>(bare.size())) +
                       " (got " + std::to_string(bare.size()) + " of 12 values)");
    for (int i = 0; i < 8; ++i) counts.n[static_cast<size_t>(i)] = bare[static_cast<size_t>(i)];
    for (int c = 0; c < 4; ++c) counts.m[static_cast<size_t>(c)] = bare[static_cast<size_t>(8 + c)];
  }
  return counts;
}

CellCounts read_counts_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open counts file '" + path + "'");
  return read_counts(in);
}

void write_counts(std::ostream& out, const CellCounts& counts) {
  out << "# counts table: n i j k count / m j k count\n";
  for (int i = 0; i < 2; ++i)
    for (int c = 0; c < 4; ++c)
      out << "n " << i << ' ' << (c % 2) << ' ' << (c / 2) << ' '
          << counts.n[static_cast<size_t>(4 * i + c)] << '\n';
  for (int c = 0; c < 4; ++c)
    out << "m " << (c % 2) << ' ' << (c / 2) << ' '
        << counts.m[static_cast<size_t>(c)] << '\n';
}

std::string counts_to_string(const CellCounts& counts) {
  std::ostringstream ss;
  write_counts(ss, counts);
  return ss.str();
}

}  // namespace cmle
