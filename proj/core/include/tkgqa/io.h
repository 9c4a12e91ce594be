#ifndef TKGQA_IO_H_
#define TKGQA_IO_H_

#include <filesystem>
#include <string>
#include <string_view>

namespace tkgqa {

// Whole-file read; throws Error naming the path.
std::string read_file(const std::filesystem::path& path);
// Creates parent directories as needed.
void write_file(const std::filesystem::path& path, std::string_view bytes);

}  // namespace tkgqa

#endif  // TKGQA_IO_H_
