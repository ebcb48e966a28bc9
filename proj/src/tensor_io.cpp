#include "hypelift/tensor_io.hpp"

#include <array>
#include <bit>
#include <cmath>
#include <fstream>
#include <iterator>
#include <string>

namespace hypelift {

namespace {

constexpr std::array<char, 4> kMagic{'O', 'H', 'Y', 'P'};
constexpr std::uint32_t kVersion = 1;
constexpr std::size_t kMaxDims = 16;

template <typename T>
void put_le(std::string& out, T value) {
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    out.push_back(static_cast<char>((value >> (8 * i)) & 0xff));
  }
}

class Reader {
 public:
  Reader(const std::string& bytes, const std::filesystem::path& path) : bytes_(bytes), path_(path) {}

  template <typename T>
  T get_le() {
    need(sizeof(T));
    T v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) {
      v |= static_cast<T>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    }
    pos_ += sizeof(T);
    return v;
  }

  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw FormatError("truncated tensor file: " + path_.string());
  }
  std::size_t remaining() const { return bytes_.size() - pos_; }
  std::size_t pos() const { return pos_; }

 private:
  const std::string& bytes_;
  const std::filesystem::path& path_;
  std::size_t pos_ = 0;
};

}  // namespace

Tensor Tensor::zeros(std::vector<std::uint64_t> shape, DType dtype) {
  Tensor t;
  t.shape = std::move(shape);
  t.dtype = dtype;
  t.values.assign(t.element_count(), 0.0);
  return t;
}

std::uint64_t Tensor::element_count() const {
  std::uint64_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

void write_tensor(const std::filesystem::path& path, const Tensor& tensor) {
  if (tensor.values.size() != tensor.element_count()) {
    throw FormatError("tensor value count does not match its shape");
  }
  if (tensor.shape.size() > kMaxDims) throw FormatError("too many tensor dimensions");
  std::string out(kMagic.begin(), kMagic.end());
  put_le<std::uint32_t>(out, kVersion);
  out.push_back(static_cast<char>(tensor.dtype));
  out.push_back(static_cast<char>(tensor.shape.size()));
  for (auto d : tensor.shape) put_le<std::uint64_t>(out, d);
  for (double v : tensor.values) {
    if (!std::isfinite(v)) throw NumericalError("refusing to write a non-finite tensor value");
    if (tensor.dtype == DType::f32) {
      put_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
    } else {
      put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(v));
    }
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw FormatError("cannot open for writing: " + path.string());
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw FormatError("write failed: " + path.string());
}

Tensor read_tensor(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw FormatError("cannot open tensor file: " + path.string());
  const std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  Reader r(bytes, path);

  r.need(kMagic.size());
  if (!std::equal(kMagic.begin(), kMagic.end(), bytes.begin())) {
    throw FormatError("bad magic in tensor file: " + path.string());
  }
  for (std::size_t i = 0; i < kMagic.size(); ++i) r.get_le<std::uint8_t>();
  const auto version = r.get_le<std::uint32_t>();
  if (version != kVersion) throw FormatError("unsupported tensor version " + std::to_string(version));

  Tensor t;
  const auto dtype = r.get_le<std::uint8_t>();
  if (dtype != 1 && dtype != 2) throw FormatError("unknown dtype code " + std::to_string(dtype));
  t.dtype = static_cast<DType>(dtype);
  const auto ndim = r.get_le<std::uint8_t>();
  if (ndim > kMaxDims) throw FormatError("too many tensor dimensions");
  for (std::uint8_t i = 0; i < ndim; ++i) t.shape.push_back(r.get_le<std::uint64_t>());

  const std::size_t width = t.dtype == DType::f32 ? 4 : 8;
  const std::uint64_t count = t.element_count();
  if (count > r.remaining() / width) throw FormatError("truncated tensor payload: " + path.string());
  if (r.remaining() != count * width) throw FormatError("trailing bytes in tensor file: " + path.string());
  t.values.resize(count);
  for (auto& v : t.values) {
    v = t.dtype == DType::f32 ? static_cast<double>(std::bit_cast<float>(r.get_le<std::uint32_t>()))
                              : std::bit_cast<double>(r.get_le<std::uint64_t>());
  }
  return t;
}

}  // namespace hypelift
