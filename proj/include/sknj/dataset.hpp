#pragma once

// Paged binary dataset format (little-endian):
//
//   header : "SKNJ" | version u32 (= 1) | D u32 | vector_count u64
//   vector : id u64 | feature_count u32 | feature_count x (d u32, w f32)
//
// A vector occupies 12 + 8 * feature_count bytes. Blocks are packed greedily
// in file order against a budget of pages * page_size bytes.

#include <array>
#include <bit>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <istream>
#include <memory>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "sknj/errors.hpp"
#include "sknj/sparse_vector.hpp"

namespace sknj {

inline constexpr std::array<char, 4> kDatasetMagic{'S', 'K', 'N', 'J'};
inline constexpr std::uint32_t kDatasetVersion = 1;
inline constexpr std::size_t kHeaderBytes = 20;
inline constexpr std::size_t kVectorHeaderBytes = 12;
inline constexpr std::size_t kFeatureBytes = 8;
inline constexpr std::size_t kDefaultPageSize = 8192;

struct DatasetHeader {
  Dimension dims = 0;
  std::uint64_t vector_count = 0;

  friend bool operator==(const DatasetHeader&, const DatasetHeader&) = default;
};

constexpr std::size_t serialized_size(std::size_t feature_count) noexcept {
  return kVectorHeaderBytes + kFeatureBytes * feature_count;
}

inline std::size_t serialized_size(const SparseVector& v) noexcept {
  return serialized_size(v.features.size());
}

/// A memory-resident run of consecutive vectors from one dataset file.
struct Block {
  std::vector<SparseVector> vectors;
  std::size_t serialized_bytes = 0;

  std::size_t size() const noexcept { return vectors.size(); }
  bool empty() const noexcept { return vectors.empty(); }
};

namespace detail {

inline void put_u32(std::ostream& out, std::uint32_t v) {
  const std::array<char, 4> b{static_cast<char>(v), static_cast<char>(v >> 8),
                              static_cast<char>(v >> 16), static_cast<char>(v >> 24)};
  out.write(b.data(), b.size());
}

inline void put_u64(std::ostream& out, std::uint64_t v) {
  put_u32(out, static_cast<std::uint32_t>(v));
  put_u32(out, static_cast<std::uint32_t>(v >> 32));
}

inline std::uint32_t get_u32(const unsigned char* p) noexcept {
  return static_cast<std::uint32_t>(p[0]) | static_cast<std::uint32_t>(p[1]) << 8 |
         static_cast<std::uint32_t>(p[2]) << 16 | static_cast<std::uint32_t>(p[3]) << 24;
}

inline std::uint64_t get_u64(const unsigned char* p) noexcept {
  return static_cast<std::uint64_t>(get_u32(p)) | static_cast<std::uint64_t>(get_u32(p + 4)) << 32;
}

inline void read_exact(std::istream& in, void* dst, std::size_t n, const char* what) {
  in.read(static_cast<char*>(dst), static_cast<std::streamsize>(n));
  if (static_cast<std::size_t>(in.gcount()) != n) {
    throw DataError(std::string("truncated dataset: ") + what);
  }
}

}  // namespace detail

/// Reads and checks the 20-byte header at the current stream position.
inline DatasetHeader read_header(std::istream& in) {
  std::array<unsigned char, kHeaderBytes> buf{};
  detail::read_exact(in, buf.data(), buf.size(), "header");
  if (std::memcmp(buf.data(), kDatasetMagic.data(), kDatasetMagic.size()) != 0) {
    throw DataError("not a dataset file (bad magic)");
  }
  const std::uint32_t version = detail::get_u32(buf.data() + 4);
  if (version != kDatasetVersion) {
    throw DataError("unsupported dataset version " + std::to_string(version));
  }
  DatasetHeader h{detail::get_u32(buf.data() + 8), detail::get_u64(buf.data() + 12)};
  if (h.dims == 0) throw DataError("dataset header has D = 0");
  return h;
}

inline DatasetHeader read_header(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  return read_header(in);
}

/// Streams vectors into a dataset. The vector count in the header is patched
/// by finish(), so the sink must be seekable.
class DatasetWriter {
 public:
  DatasetWriter(std::ostream& out, Dimension dims) : out_(out), dims_(dims) {
    if (dims == 0) throw UsageError("dimensionality must be positive");
    start_ = out_.tellp();
    write_header(0);
  }

  void append(const SparseVector& v) {
    if (finished_) throw UsageError("append after finish");
    validate(v, dims_);
    detail::put_u64(out_, v.id);
    detail::put_u32(out_, static_cast<std::uint32_t>(v.features.size()));
    for (const Feature& f : v.features) {
      detail::put_u32(out_, f.d);
      detail::put_u32(out_, std::bit_cast<std::uint32_t>(f.w));
    }
    ++count_;
  }

  DatasetHeader finish() {
    if (!finished_) {
      const auto end = out_.tellp();
      out_.seekp(start_);
      write_header(count_);
      out_.seekp(end);
      out_.flush();
      if (!out_) throw DataError("write failed");
      finished_ = true;
    }
    return {dims_, count_};
  }

  std::uint64_t count() const noexcept { return count_; }

 private:
  void write_header(std::uint64_t count) {
    out_.write(kDatasetMagic.data(), kDatasetMagic.size());
    detail::put_u32(out_, kDatasetVersion);
    detail::put_u32(out_, dims_);
    detail::put_u64(out_, count);
  }

  std::ostream& out_;
  Dimension dims_;
  std::ostream::pos_type start_{};
  std::uint64_t count_ = 0;
  bool finished_ = false;
};

inline DatasetHeader write_dataset(std::span<const SparseVector> vectors, Dimension dims,
                                   std::ostream& out) {
  DatasetWriter writer(out, dims);
  for (const SparseVector& v : vectors) writer.append(v);
  return writer.finish();
}

inline DatasetHeader write_dataset(std::span<const SparseVector> vectors, Dimension dims,
                                   const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot create " + path.string());
  return write_dataset(vectors, dims, out);
}

/// Sequential block reader. Each call to next() returns the longest prefix of
/// the remaining vectors whose serialized size fits in pages * page_size.
class BlockReader {
 public:
  BlockReader(const std::filesystem::path& path, std::size_t pages,
              std::size_t page_size = kDefaultPageSize)
      : owned_(std::make_unique<std::ifstream>(path, std::ios::binary)),
        in_(owned_.get()),
        budget_(budget_of(pages, page_size)) {
    if (!*owned_) throw DataError("cannot open " + path.string());
    header_ = read_header(*in_);
  }

  /// Borrows `in`, which must outlive the reader.
  BlockReader(std::istream& in, std::size_t pages, std::size_t page_size = kDefaultPageSize)
      : in_(&in), budget_(budget_of(pages, page_size)) {
    header_ = read_header(*in_);
  }

  const DatasetHeader& header() const noexcept { return header_; }
  std::size_t budget_bytes() const noexcept { return budget_; }

  std::optional<Block> next() {
    Block block;
    while (true) {
      if (!pending_) {
        if (consumed_ == header_.vector_count) break;
        pending_ = read_vector();
      }
      const std::size_t bytes = serialized_size(*pending_);
      if (bytes > budget_) {
        throw DataError("vector " + std::to_string(pending_->id) + " exceeds block budget (" +
                        std::to_string(bytes) + " > " + std::to_string(budget_) + " bytes)");
      }
      if (block.serialized_bytes + bytes > budget_) break;
      block.serialized_bytes += bytes;
      block.vectors.push_back(std::move(*pending_));
      pending_.reset();
    }
    if (block.empty()) return std::nullopt;
    return block;
  }

 private:
  static std::size_t budget_of(std::size_t pages, std::size_t page_size) {
    if (pages == 0 || page_size == 0) throw UsageError("block budget needs pages >= 1 and page_size >= 1");
    return pages * page_size;
  }

  SparseVector read_vector() {
    std::array<unsigned char, kVectorHeaderBytes> head{};
    detail::read_exact(*in_, head.data(), head.size(), "vector header");
    SparseVector v;
    v.id = detail::get_u64(head.data());
    const std::uint32_t n = detail::get_u32(head.data() + 8);
    if (n > header_.dims) {
      throw DataError("vector " + std::to_string(v.id) + ": feature count exceeds D");
    }
    scratch_.resize(static_cast<std::size_t>(n) * kFeatureBytes);
    detail::read_exact(*in_, scratch_.data(), scratch_.size(), "features");
    v.features.resize(n);
    for (std::uint32_t i = 0; i < n; ++i) {
      const unsigned char* p = scratch_.data() + static_cast<std::size_t>(i) * kFeatureBytes;
      v.features[i] = {detail::get_u32(p), std::bit_cast<float>(detail::get_u32(p + 4))};
    }
    validate(v, header_.dims);
    ++consumed_;
    return v;
  }

  std::unique_ptr<std::ifstream> owned_;
  std::istream* in_;
  std::size_t budget_;
  DatasetHeader header_{};
  std::uint64_t consumed_ = 0;
  std::optional<SparseVector> pending_;
  std::vector<unsigned char> scratch_;
};

/// Loads a whole dataset into memory, ignoring block budgets.
inline std::vector<SparseVector> read_all(std::istream& in, DatasetHeader* header = nullptr) {
  BlockReader reader(in, 1, std::size_t{1} << 40);
  if (header) *header = reader.header();
  std::vector<SparseVector> out;
  out.reserve(reader.header().vector_count);
  while (auto b = reader.next()) {
    for (auto& v : b->vectors) out.push_back(std::move(v));
  }
  return out;
}

inline std::vector<SparseVector> read_all(const std::filesystem::path& path,
                                          DatasetHeader* header = nullptr) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  return read_all(in, header);
}

}  // namespace sknj
