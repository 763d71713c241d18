#pragma once

#include <Eigen/Core>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace roi10d {

// Voxel grid of truncated signed distances, negative inside the surface.
// Samples live on the lattice origin + voxel_size * (i, j, k) and are stored
// x-fastest; every value is clamped to [-truncation, +truncation].
class TsdfGrid {
 public:
  TsdfGrid() : TsdfGrid(Eigen::Vector3i(128, 128, 256), 0.05) {}

  TsdfGrid(const Eigen::Vector3i& dims, double voxel_size,
           const Eigen::Vector3d& origin = Eigen::Vector3d::Zero(),
           double truncation = -1.0)
      : dims_(dims),
        voxel_size_(voxel_size),
        origin_(origin),
        truncation_(truncation > 0.0 ? truncation : 3.0 * voxel_size) {
    if (dims_.minCoeff() <= 0) throw std::domain_error("TsdfGrid: dims must be positive");
    if (voxel_size_ <= 0.0) throw std::domain_error("TsdfGrid: voxel size must be positive");
    values_.assign(voxel_count(), static_cast<float>(truncation_));
  }

  const Eigen::Vector3i& dims() const { return dims_; }
  double voxel_size() const { return voxel_size_; }
  const Eigen::Vector3d& origin() const { return origin_; }
  double truncation() const { return truncation_; }
  const std::vector<float>& values() const { return values_; }
  std::size_t voxel_count() const {
    return static_cast<std::size_t>(dims_.x()) * dims_.y() * dims_.z();
  }

  std::size_t index(int i, int j, int k) const {
    return static_cast<std::size_t>(i) +
           static_cast<std::size_t>(dims_.x()) *
               (static_cast<std::size_t>(j) + static_cast<std::size_t>(dims_.y()) * k);
  }

  float at(int i, int j, int k) const { return values_[index(i, j, k)]; }

  void set(int i, int j, int k, double value) {
    values_[index(i, j, k)] = clamp(value);
  }

  float clamp(double value) const {
    if (value > truncation_) return static_cast<float>(truncation_);
    if (value < -truncation_) return static_cast<float>(-truncation_);
    return static_cast<float>(value);
  }

  Eigen::Vector3d position(int i, int j, int k) const {
    return origin_ + voxel_size_ * Eigen::Vector3d(i, j, k);
  }

  bool same_lattice(const TsdfGrid& other) const {
    return dims_ == other.dims_;
  }

 private:
  Eigen::Vector3i dims_;
  double voxel_size_;
  Eigen::Vector3d origin_;
  double truncation_;
  std::vector<float> values_;
};

namespace detail {

static_assert(std::endian::native == std::endian::little,
              "tsdf file i/o assumes a little-endian host");

inline constexpr uint32_t kTsdfMagic = 0x46445354u;  // "TSDF"

template <typename T>
void write_raw(std::ostream& out, const T& value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_raw(std::istream& in) {
  T value;
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!in) throw std::runtime_error("tsdf file truncated");
  return value;
}

}  // namespace detail

inline void write_tsdf(const TsdfGrid& grid, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  detail::write_raw(out, detail::kTsdfMagic);
  for (int a = 0; a < 3; ++a) detail::write_raw(out, static_cast<int32_t>(grid.dims()[a]));
  detail::write_raw(out, grid.voxel_size());
  for (int a = 0; a < 3; ++a) detail::write_raw(out, grid.origin()[a]);
  detail::write_raw(out, grid.truncation());
  out.write(reinterpret_cast<const char*>(grid.values().data()),
            static_cast<std::streamsize>(grid.values().size() * sizeof(float)));
  if (!out) throw std::runtime_error("short write: " + path);
}

inline TsdfGrid read_tsdf(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open: " + path);
  if (detail::read_raw<uint32_t>(in) != detail::kTsdfMagic)
    throw std::runtime_error("not a tsdf file: " + path);
  Eigen::Vector3i dims;
  for (int a = 0; a < 3; ++a) dims[a] = detail::read_raw<int32_t>(in);
  const double voxel_size = detail::read_raw<double>(in);
  Eigen::Vector3d origin;
  for (int a = 0; a < 3; ++a) origin[a] = detail::read_raw<double>(in);
  const double truncation = detail::read_raw<double>(in);
  TsdfGrid grid(dims, voxel_size, origin, truncation);
  std::vector<float> raw(grid.voxel_count());
  in.read(reinterpret_cast<char*>(raw.data()),
          static_cast<std::streamsize>(raw.size() * sizeof(float)));
  if (!in) throw std::runtime_error("tsdf file truncated: " + path);
  int k = 0;
  for (int z = 0; z < dims.z(); ++z)
    for (int y = 0; y < dims.y(); ++y)
      for (int x = 0; x < dims.x(); ++x) grid.set(x, y, z, raw[k++]);
  return grid;
}

}  // namespace roi10d
