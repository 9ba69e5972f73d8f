#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "atr/learner/autodiff.hpp"
#include "atr/learner/networks.hpp"

namespace atr::learner {

/// Binary tensor container.
///
///   "ATRC"  u32 version  u32 count
///   count x { u32 name_len, name, u32 dtype, u32 ndim, u64 dims[ndim], data }
///
/// All integers and reals little-endian; matrices row-major. dtype 0 is a
/// 32-bit real, 1 a 64-bit real, 2 an unsigned 64-bit integer, 3 raw bytes.
enum class DType : std::uint32_t { kF32 = 0, kF64 = 1, kU64 = 2, kBytes = 3 };

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Tensor {
  std::string name;
  DType dtype = DType::kF32;
  std::vector<std::uint64_t> shape;
  std::vector<unsigned char> data;

  static Tensor f32(const std::string& name, const Mat& m);
  static Tensor f64(const std::string& name, const std::vector<double>& v,
                    std::vector<std::uint64_t> shape = {});
  static Tensor u64(const std::string& name, const std::vector<std::uint64_t>& v);
  static Tensor text(const std::string& name, const std::string& s);

  std::uint64_t elements() const;
  Mat as_mat() const;
  std::vector<double> as_f64() const;
  std::vector<std::uint64_t> as_u64() const;
  std::string as_text() const;
};

class TensorFile {
 public:
  void add(Tensor t);
  const Tensor* find(const std::string& name) const;
  /// Throws std::runtime_error when absent.
  const Tensor& require(const std::string& name) const;
  const std::vector<Tensor>& tensors() const { return tensors_; }

  void save(const std::filesystem::path& path) const;
  static TensorFile load(const std::filesystem::path& path);

 private:
  std::vector<Tensor> tensors_;
};

/// Network values under "net/<param>", Adam moments under "adam/m/<param>"
/// and "adam/v/<param>".
void store_bundle(TensorFile& f, PolicyBundle& bundle, bool with_moments = true);
/// Shapes must match the bundle's architecture.
void restore_bundle(const TensorFile& f, PolicyBundle& bundle, bool with_moments = true);

}  // namespace atr::learner
