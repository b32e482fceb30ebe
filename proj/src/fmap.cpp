#include "patchnas/fmap.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>

#include <zlib.h>

#include "patchnas/error.hpp"

namespace patchnas {

namespace {

constexpr char kMagic[4] = {'F', 'M', 'A', 'P'};

template <typename T>
void put(std::vector<std::uint8_t>& out, T value) {
  using U = std::make_unsigned_t<T>;
  auto v = static_cast<U>(value);
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    out.push_back(static_cast<std::uint8_t>(v & 0xffu));
    if constexpr (sizeof(T) > 1) v = static_cast<U>(v >> 8);
  }
}

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  template <typename T>
  T get() {
    need(sizeof(T));
    std::make_unsigned_t<T> v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) {
      v |= static_cast<std::make_unsigned_t<T>>(static_cast<std::make_unsigned_t<T>>(bytes_[pos_ + i]) << (8 * i));
    }
    pos_ += sizeof(T);
    return static_cast<T>(v);
  }

  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw DataError("FMAP: truncated data");
  }
  std::size_t pos() const { return pos_; }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::uint32_t crc32_of(std::span<const std::uint8_t> bytes) {
  uLong crc = crc32(0L, Z_NULL, 0);
  crc = crc32(crc, bytes.data(), static_cast<uInt>(bytes.size()));
  return static_cast<std::uint32_t>(crc);
}

std::vector<std::uint8_t> encode_fmap(std::span<const StageTensor> tensors) {
  std::vector<std::uint8_t> out(std::begin(kMagic), std::end(kMagic));
  put<std::uint32_t>(out, kFmapVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(tensors.size()));
  constexpr int kMax = std::numeric_limits<std::uint16_t>::max();
  for (const auto& st : tensors) {
    const auto& t = st.tensor;
    if (st.stage < 0 || st.stage > 255 || t.channels > kMax || t.height > kMax || t.width > kMax) {
      throw DataError("FMAP: tensor header field out of range");
    }
    put<std::uint8_t>(out, static_cast<std::uint8_t>(st.stage));
    put<std::uint16_t>(out, static_cast<std::uint16_t>(t.channels));
    put<std::uint16_t>(out, static_cast<std::uint16_t>(t.height));
    put<std::uint16_t>(out, static_cast<std::uint16_t>(t.width));
    for (float v : t.values) put<std::uint32_t>(out, std::bit_cast<std::uint32_t>(v));
  }
  put<std::uint32_t>(out, crc32_of(out));
  return out;
}

bool looks_like_fmap(std::span<const std::uint8_t> bytes) {
  return bytes.size() >= 4 && std::memcmp(bytes.data(), kMagic, 4) == 0;
}

std::vector<StageTensor> decode_fmap(std::span<const std::uint8_t> bytes) {
  if (!looks_like_fmap(bytes)) throw DataError("FMAP: bad magic");
  if (bytes.size() < 16) throw DataError("FMAP: truncated data");
  const auto payload = bytes.first(bytes.size() - 4);
  Reader crc_reader(bytes.subspan(bytes.size() - 4));
  if (crc_reader.get<std::uint32_t>() != crc32_of(payload)) throw DataError("FMAP: CRC mismatch");

  Reader r(payload);
  r.get<std::uint32_t>();  // magic
  if (const auto version = r.get<std::uint32_t>(); version != kFmapVersion) {
    throw DataError("FMAP: unsupported version " + std::to_string(version));
  }
  const auto n = r.get<std::uint32_t>();
  std::vector<StageTensor> out;
  for (std::uint32_t i = 0; i < n; ++i) {
    StageTensor st;
    st.stage = r.get<std::uint8_t>();
    const int c = r.get<std::uint16_t>();
    const int h = r.get<std::uint16_t>();
    const int w = r.get<std::uint16_t>();
    const std::size_t count = static_cast<std::size_t>(c) * h * w;
    r.need(count * 4);
    st.tensor = FeatureTensor(c, h, w);
    for (std::size_t k = 0; k < count; ++k) {
      st.tensor.values[k] = std::bit_cast<float>(r.get<std::uint32_t>());
    }
    out.push_back(std::move(st));
  }
  if (r.pos() != payload.size()) throw DataError("FMAP: trailing bytes after last tensor");
  return out;
}

void write_fmap(const std::filesystem::path& path, std::span<const StageTensor> tensors) {
  const auto bytes = encode_fmap(tensors);
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("cannot write " + path.string());
}

std::vector<StageTensor> read_fmap(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_fmap(bytes);
}

}  // namespace patchnas
