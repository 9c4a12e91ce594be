#ifndef TKGQA_CHECKPOINT_H_
#define TKGQA_CHECKPOINT_H_

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "tkgqa/embeddings.h"
#include "tkgqa/linalg.h"

namespace tkgqa {

inline constexpr std::uint32_t kCheckpointVersion = 1;

// Little-endian binary framing shared by all checkpoints:
//   magic[4] | version u32 | d u32 | per-matrix shape | row-major float32 data
// For "TKGE" the shape block is three u64 row counts (columns are d). Other
// magics store one (rows u64, cols u64) pair per matrix, since decoder and
// projection matrices are not d columns wide.
struct MatrixBundle {
  std::array<char, 4> magic{};
  std::uint32_t dim = 0;
  std::vector<Matrix> matrices;
  // Optional trailing string list (u64 count, then u64 length + bytes each).
  std::vector<std::string> strings;
};

void write_bundle(const MatrixBundle& bundle, const std::filesystem::path& path);
// Throws ParseError on a wrong magic, version, truncation or trailing bytes.
MatrixBundle read_bundle(const std::filesystem::path& path, const std::array<char, 4>& magic);

std::string encode_bundle(const MatrixBundle& bundle);
MatrixBundle decode_bundle(const std::string& bytes, const std::array<char, 4>& magic);

void save_embeddings(const EmbeddingTable& table, const std::filesystem::path& path);
EmbeddingTable load_embeddings(const std::filesystem::path& path);

// Values are stored as float32; this rounds every entry the same way so a
// reloaded checkpoint equals the in-memory table it was written from.
void round_to_float(Matrix& m);

}  // namespace tkgqa

#endif  // TKGQA_CHECKPOINT_H_
