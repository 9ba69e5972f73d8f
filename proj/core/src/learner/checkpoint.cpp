#include "atr/learner/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace atr::learner {

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

namespace {

constexpr char kMagic[4] = {'A', 'T', 'R', 'C'};

template <typename T>
void put(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw std::runtime_error("checkpoint: truncated file");
  return v;
}

std::size_t width(DType d) {
  switch (d) {
    case DType::kF32: return 4;
    case DType::kF64: return 8;
    case DType::kU64: return 8;
    case DType::kBytes: return 1;
  }
  throw std::runtime_error("checkpoint: unknown dtype");
}

template <typename T>
std::vector<unsigned char> bytes_of(const T* p, std::size_t n) {
  std::vector<unsigned char> out(n * sizeof(T));
  if (n > 0) std::memcpy(out.data(), p, out.size());
  return out;
}

}  // namespace

Tensor Tensor::f32(const std::string& name, const Mat& m) {
  Tensor t;
  t.name = name;
  t.dtype = DType::kF32;
  t.shape = {static_cast<std::uint64_t>(m.rows()), static_cast<std::uint64_t>(m.cols())};
  std::vector<float> v;
  v.reserve(static_cast<std::size_t>(m.size()));
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) v.push_back(static_cast<float>(m(i, j)));
  t.data = bytes_of(v.data(), v.size());
  return t;
}

Tensor Tensor::f64(const std::string& name, const std::vector<double>& v,
                   std::vector<std::uint64_t> shape) {
  Tensor t;
  t.name = name;
  t.dtype = DType::kF64;
  t.shape = shape.empty() ? std::vector<std::uint64_t>{v.size()} : std::move(shape);
  t.data = bytes_of(v.data(), v.size());
  if (t.elements() != v.size()) throw std::invalid_argument("checkpoint: shape/data mismatch");
  return t;
}

Tensor Tensor::u64(const std::string& name, const std::vector<std::uint64_t>& v) {
  Tensor t;
  t.name = name;
  t.dtype = DType::kU64;
  t.shape = {v.size()};
  t.data = bytes_of(v.data(), v.size());
  return t;
}

Tensor Tensor::text(const std::string& name, const std::string& s) {
  Tensor t;
  t.name = name;
  t.dtype = DType::kBytes;
  t.shape = {s.size()};
  t.data.assign(s.begin(), s.end());
  return t;
}

std::uint64_t Tensor::elements() const {
  std::uint64_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

Mat Tensor::as_mat() const {
  if (dtype != DType::kF32 && dtype != DType::kF64)
    throw std::runtime_error("checkpoint: tensor '" + name + "' is not real-valued");
  const auto rows = static_cast<Eigen::Index>(shape.empty() ? 1 : shape[0]);
  const auto cols = static_cast<Eigen::Index>(shape.size() < 2 ? 1 : elements() / shape[0]);
  Mat m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) {
      const std::size_t k = static_cast<std::size_t>(i * cols + j);
      if (dtype == DType::kF32) {
        float f;
        std::memcpy(&f, data.data() + 4 * k, 4);
        m(i, j) = f;
      } else {
        double d;
        std::memcpy(&d, data.data() + 8 * k, 8);
        m(i, j) = d;
      }
    }
  }
  return m;
}

std::vector<double> Tensor::as_f64() const {
  if (dtype != DType::kF64) throw std::runtime_error("checkpoint: '" + name + "' is not f64");
  std::vector<double> v(elements());
  if (!v.empty()) std::memcpy(v.data(), data.data(), v.size() * 8);
  return v;
}

std::vector<std::uint64_t> Tensor::as_u64() const {
  if (dtype != DType::kU64) throw std::runtime_error("checkpoint: '" + name + "' is not u64");
  std::vector<std::uint64_t> v(elements());
  if (!v.empty()) std::memcpy(v.data(), data.data(), v.size() * 8);
  return v;
}

std::string Tensor::as_text() const {
  if (dtype != DType::kBytes) throw std::runtime_error("checkpoint: '" + name + "' is not text");
  return std::string(data.begin(), data.end());
}

void TensorFile::add(Tensor t) {
  for (auto& existing : tensors_) {
    if (existing.name == t.name) {
      existing = std::move(t);
      return;
    }
  }
  tensors_.push_back(std::move(t));
}

const Tensor* TensorFile::find(const std::string& name) const {
  for (const auto& t : tensors_)
    if (t.name == name) return &t;
  return nullptr;
}

const Tensor& TensorFile::require(const std::string& name) const {
  const Tensor* t = find(name);
  if (t == nullptr) throw std::runtime_error("checkpoint: missing tensor '" + name + "'");
  return *t;
}

void TensorFile::save(const std::filesystem::path& path) const {
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("checkpoint: cannot write " + tmp.string());
    os.write(kMagic, 4);
    put<std::uint32_t>(os, kCheckpointVersion);
    put<std::uint32_t>(os, static_cast<std::uint32_t>(tensors_.size()));
    for (const auto& t : tensors_) {
      put<std::uint32_t>(os, static_cast<std::uint32_t>(t.name.size()));
      os.write(t.name.data(), static_cast<std::streamsize>(t.name.size()));
      put<std::uint32_t>(os, static_cast<std::uint32_t>(t.dtype));
      put<std::uint32_t>(os, static_cast<std::uint32_t>(t.shape.size()));
      for (auto d : t.shape) put<std::uint64_t>(os, d);
      os.write(reinterpret_cast<const char*>(t.data.data()),
               static_cast<std::streamsize>(t.data.size()));
    }
    if (!os) throw std::runtime_error("checkpoint: write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

TensorFile TensorFile::load(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("checkpoint: cannot open " + path.string());
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kMagic, 4) != 0)
    throw std::runtime_error("checkpoint: bad magic in " + path.string());
  const auto version = get<std::uint32_t>(is);
  if (version != kCheckpointVersion)
    throw std::runtime_error("checkpoint: unsupported version " + std::to_string(version));
  const auto count = get<std::uint32_t>(is);
  TensorFile f;
  for (std::uint32_t i = 0; i < count; ++i) {
    Tensor t;
    const auto len = get<std::uint32_t>(is);
    t.name.resize(len);
    is.read(t.name.data(), len);
    t.dtype = static_cast<DType>(get<std::uint32_t>(is));
    const auto ndim = get<std::uint32_t>(is);
    for (std::uint32_t d = 0; d < ndim; ++d) t.shape.push_back(get<std::uint64_t>(is));
    t.data.resize(static_cast<std::size_t>(t.elements() * width(t.dtype)));
    is.read(reinterpret_cast<char*>(t.data.data()), static_cast<std::streamsize>(t.data.size()));
    if (!is) throw std::runtime_error("checkpoint: truncated tensor '" + t.name + "'");
    f.tensors_.push_back(std::move(t));
  }
  return f;
}

void store_bundle(TensorFile& f, PolicyBundle& bundle, bool with_moments) {
  for (Param* p : bundle.params()) {
    f.add(Tensor::f32("net/" + p->name, p->value));
    if (with_moments) {
      f.add(Tensor::f32("adam/m/" + p->name, p->m));
      f.add(Tensor::f32("adam/v/" + p->name, p->v));
    }
  }
}

void restore_bundle(const TensorFile& f, PolicyBundle& bundle, bool with_moments) {
  auto load_into = [&](const std::string& name, Mat& dst) {
    Mat m = f.require(name).as_mat();
    if (m.rows() != dst.rows() || m.cols() != dst.cols())
      throw std::runtime_error("checkpoint: shape mismatch for '" + name + "'");
    dst = std::move(m);
  };
  for (Param* p : bundle.params()) {
    load_into("net/" + p->name, p->value);
    if (with_moments) {
      load_into("adam/m/" + p->name, p->m);
      load_into("adam/v/" + p->name, p->v);
    }
  }
}

}  // namespace atr::learner
