#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "stc/io.hpp"

namespace stc::cli {

enum class Format { Json, Jsonl, Table };

Format parse_format(const std::string& name);

// A stream of records: a JSON array, one line per record, or a table of
// the records' scalar fields.
void print_records(std::ostream& out, Format format,
                   const std::vector<io::Json>& records);

// One result object: indented JSON, a single line, or key/value rows with
// nested keys joined by dots.
void print_object(std::ostream& out, Format format, const io::Json& object);

}  // namespace stc::cli
