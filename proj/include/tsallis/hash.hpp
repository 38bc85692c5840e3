#pragma once

#include <string>
#include <string_view>

namespace tsallis {

// Lowercase hex SHA-1 of "blob <size>\0" + content, the same id `git
// hash-object` prints for a file with these bytes.
std::string git_blob_sha1(std::string_view content);

}  // namespace tsallis
