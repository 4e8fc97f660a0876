#pragma once

#include <cstddef>
#include <string_view>
#include <vector>

namespace stc::utf8 {

// Byte offset of every code point start in `text`, followed by text.size().
// Bytes that do not start a valid UTF-8 sequence count as one code point
// each, so every byte string has a well-defined segmentation.
std::vector<std::size_t> boundaries(std::string_view text);

}  // namespace stc::utf8
