#include "tkgqa/checkpoint.h"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "tkgqa/error.h"

namespace tkgqa {
namespace {

constexpr std::array<char, 4> kEmbeddingMagic = {'T', 'K', 'G', 'E'};

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

template <typename T>
void put(std::string& out, T value) {
  char buf[sizeof(T)];
  std::memcpy(buf, &value, sizeof(T));
  out.append(buf, sizeof(T));
}

class Reader {
 public:
  explicit Reader(const std::string& bytes) : bytes_(bytes) {}

  template <typename T>
  T get() {
    need(sizeof(T));
    T value;
    std::memcpy(&value, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return value;
  }

  std::string get_bytes(std::size_t n) {
    need(n);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw ParseError("checkpoint is truncated");
  }

  const std::string& bytes_;
  std::size_t pos_ = 0;
};

bool is_embedding_magic(const std::array<char, 4>& m) { return m == kEmbeddingMagic; }

}  // namespace

void round_to_float(Matrix& m) {
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    m.data()[i] = static_cast<double>(static_cast<float>(m.data()[i]));
  }
}

std::string encode_bundle(const MatrixBundle& b) {
  std::string out;
  out.append(b.magic.data(), 4);
  put<std::uint32_t>(out, kCheckpointVersion);
  put<std::uint32_t>(out, b.dim);
  const bool embedding = is_embedding_magic(b.magic);
  if (embedding && b.matrices.size() != 3) {
    throw ValidationError("TKGE checkpoints hold exactly three matrices");
  }
  if (!embedding) put<std::uint64_t>(out, b.matrices.size());
  for (const Matrix& m : b.matrices) {
    put<std::uint64_t>(out, static_cast<std::uint64_t>(m.rows()));
    if (embedding) {
      if (m.cols() != static_cast<Eigen::Index>(b.dim)) {
        throw ValidationError("TKGE matrix column count must equal d");
      }
    } else {
      put<std::uint64_t>(out, static_cast<std::uint64_t>(m.cols()));
    }
  }
  for (const Matrix& m : b.matrices) {
    for (Eigen::Index i = 0; i < m.size(); ++i) put<float>(out, static_cast<float>(m.data()[i]));
  }
  if (!b.strings.empty()) {
    put<std::uint64_t>(out, b.strings.size());
    for (const auto& s : b.strings) {
      put<std::uint64_t>(out, s.size());
      out += s;
    }
  }
  return out;
}

MatrixBundle decode_bundle(const std::string& bytes, const std::array<char, 4>& magic) {
  Reader in(bytes);
  MatrixBundle b;
  const std::string head = in.get_bytes(4);
  std::memcpy(b.magic.data(), head.data(), 4);
  if (b.magic != magic) {
    throw ParseError("checkpoint magic '" + head + "' does not match expected '" +
                     std::string(magic.data(), 4) + "'");
  }
  const auto version = in.get<std::uint32_t>();
  if (version != kCheckpointVersion) {
    throw ParseError("unsupported checkpoint version " + std::to_string(version));
  }
  b.dim = in.get<std::uint32_t>();
  const bool embedding = is_embedding_magic(magic);
  const std::uint64_t count = embedding ? 3 : in.get<std::uint64_t>();
  if (count > 64) throw ParseError("implausible matrix count in checkpoint");
  std::vector<std::pair<std::uint64_t, std::uint64_t>> shapes;
  for (std::uint64_t i = 0; i < count; ++i) {
    const auto rows = in.get<std::uint64_t>();
    const auto cols = embedding ? std::uint64_t{b.dim} : in.get<std::uint64_t>();
    shapes.emplace_back(rows, cols);
  }
  for (const auto& [rows, cols] : shapes) {
    if (rows != 0 && cols > (bytes.size() / sizeof(float)) / rows) {
      throw ParseError("checkpoint is truncated");
    }
    Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = in.get<float>();
    b.matrices.push_back(std::move(m));
  }
  if (!in.done()) {
    const auto n = in.get<std::uint64_t>();
    for (std::uint64_t i = 0; i < n; ++i) {
      const auto len = in.get<std::uint64_t>();
      b.strings.push_back(in.get_bytes(len));
    }
  }
  if (!in.done()) throw ParseError("trailing bytes after checkpoint payload");
  return b;
}

void write_bundle(const MatrixBundle& bundle, const std::filesystem::path& path) {
  const std::string bytes = encode_bundle(bundle);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write checkpoint: " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

MatrixBundle read_bundle(const std::filesystem::path& path, const std::array<char, 4>& magic) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open checkpoint: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  try {
    return decode_bundle(ss.str(), magic);
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

void save_embeddings(const EmbeddingTable& table, const std::filesystem::path& path) {
  MatrixBundle b;
  b.magic = kEmbeddingMagic;
  b.dim = static_cast<std::uint32_t>(table.dim);
  b.matrices = {table.entity, table.relation, table.time};
  write_bundle(b, path);
}

EmbeddingTable load_embeddings(const std::filesystem::path& path) {
  MatrixBundle b = read_bundle(path, kEmbeddingMagic);
  EmbeddingTable t;
  t.dim = b.dim;
  t.entity = std::move(b.matrices[0]);
  t.relation = std::move(b.matrices[1]);
  t.time = std::move(b.matrices[2]);
  return t;
}

}  // namespace tkgqa
