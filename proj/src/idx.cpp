#include <zlib.h>

#include <algorithm>
#include <array>
#include <cstdio>
#include <memory>

#include "mmtl/data.hpp"

namespace mmtl {

namespace {

constexpr std::uint32_t kImageMagic = 0x00000803;
constexpr std::uint32_t kLabelMagic = 0x00000801;

struct GzCloser {
  void operator()(gzFile_s* f) const { gzclose(f); }
};

// gzread passes uncompressed files through unchanged, so one reader covers both.
class IdxReader {
 public:
  explicit IdxReader(const std::filesystem::path& path) : path_(path.string()) {
    file_.reset(gzopen(path_.c_str(), "rb"));
    if (!file_) throw DataError("cannot open " + path_);
  }

  void read(void* dst, std::size_t n) {
    auto* p = static_cast<unsigned char*>(dst);
    while (n > 0) {
      const unsigned chunk = static_cast<unsigned>(std::min<std::size_t>(n, 1u << 30));
      const int got = gzread(file_.get(), p, chunk);
      if (got <= 0) throw CorruptIdxError(path_ + ": truncated file");
      p += got;
      n -= static_cast<std::size_t>(got);
    }
  }

  std::uint32_t read_u32() {
    std::array<unsigned char, 4> b{};
    read(b.data(), 4);
    return (std::uint32_t{b[0]} << 24) | (std::uint32_t{b[1]} << 16) | (std::uint32_t{b[2]} << 8) | b[3];
  }

  void expect_magic(std::uint32_t magic) {
    const std::uint32_t got = read_u32();
    if (got != magic) {
      char msg[64];
      std::snprintf(msg, sizeof msg, "bad magic 0x%08x, expected 0x%08x", got, magic);
      throw CorruptIdxError(path_ + ": " + msg);
    }
  }

  void expect_end() {
    unsigned char extra = 0;
    if (gzread(file_.get(), &extra, 1) != 0) throw CorruptIdxError(path_ + ": trailing bytes after payload");
  }

  const std::string& path() const { return path_; }

 private:
  std::string path_;
  std::unique_ptr<gzFile_s, GzCloser> file_;
};

}  // namespace

IdxImages read_idx_images(const std::filesystem::path& path) {
  IdxReader r(path);
  r.expect_magic(kImageMagic);
  IdxImages out;
  out.count = r.read_u32();
  out.rows = r.read_u32();
  out.cols = r.read_u32();
  if (out.rows == 0 || out.cols == 0 || out.rows * out.cols > (1u << 20))
    throw CorruptIdxError(r.path() + ": implausible image shape");
  out.pixels.resize(out.count * out.rows * out.cols);
  r.read(out.pixels.data(), out.pixels.size());
  r.expect_end();
  return out;
}

std::vector<std::uint8_t> read_idx_labels(const std::filesystem::path& path) {
  IdxReader r(path);
  r.expect_magic(kLabelMagic);
  std::vector<std::uint8_t> labels(r.read_u32());
  r.read(labels.data(), labels.size());
  r.expect_end();
  return labels;
}

Matrix to_feature_matrix(const IdxImages& images) {
  const std::size_t d = images.rows * images.cols;
  Matrix x(images.count, d);
  auto out = x.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = images.pixels[i] / 255.0;
  return x;
}

}  // namespace mmtl
