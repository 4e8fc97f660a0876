#pragma once

#include <fstream>
#include <string>
#include <vector>

#include "stc/io.hpp"

namespace stc::testing {

inline std::string fixture_path(const std::string& name) {
  return std::string(STC_FIXTURE_DIR) + "/" + name;
}

inline std::vector<io::Json> load_jsonl(const std::string& name) {
  std::ifstream in(fixture_path(name), std::ios::binary);
  if (!in) throw std::runtime_error("missing fixture " + name);
  return io::read_jsonl_strict(in);
}

inline io::TraceRecord load_trace(const std::string& name) {
  return io::trace_from_json(load_jsonl(name).at(0));
}

}  // namespace stc::testing
