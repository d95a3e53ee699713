#ifndef LESIONLAB_VOLUME_HPP
#define LESIONLAB_VOLUME_HPP

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "lesionlab/errors.hpp"

namespace lesionlab {

struct Dims {
    int nx = 0, ny = 0, nz = 0;

    std::size_t voxels() const {
        return static_cast<std::size_t>(nx) * static_cast<std::size_t>(ny) *
               static_cast<std::size_t>(nz);
    }
    bool contains(int x, int y, int z) const {
        return x >= 0 && x < nx && y >= 0 && y < ny && z >= 0 && z < nz;
    }
    std::size_t index(int x, int y, int z) const {
        return (static_cast<std::size_t>(z) * ny + y) * nx + x;
    }
    std::array<int, 3> unindex(std::size_t i) const {
        const int x = static_cast<int>(i % nx);
        const int y = static_cast<int>((i / nx) % ny);
        const int z = static_cast<int>(i / (static_cast<std::size_t>(nx) * ny));
        return {x, y, z};
    }
    bool operator==(const Dims&) const = default;
};

struct Spacing {
    double sx = 1.0, sy = 1.0, sz = 1.0;

    double voxel_mm3() const { return sx * sy * sz; }
    // Physical position of a voxel's center.
    std::array<double, 3> center_mm(int x, int y, int z) const {
        return {(x + 0.5) * sx, (y + 0.5) * sy, (z + 0.5) * sz};
    }
    bool operator==(const Spacing&) const = default;
};

// Single-channel 3D raster, linear index (z*ny + y)*nx + x.
template <typename T>
struct Vol3 {
    Dims dims;
    std::vector<T> data;

    Vol3() = default;
    explicit Vol3(Dims d, T fill = T(0)) : dims(d), data(d.voxels(), fill) {}

    T& at(int x, int y, int z) { return data[dims.index(x, y, z)]; }
    const T& at(int x, int y, int z) const { return data[dims.index(x, y, z)]; }
};

// Multi-channel 3D raster, channels x Z x Y x X; linear index
// ((c*nz + z)*ny + y)*nx + x.
struct Volume4 {
    Dims dims;
    Spacing spacing;
    int channels = 0;
    std::vector<float> data;

    Volume4() = default;
    Volume4(Dims d, Spacing s, int c)
        : dims(d), spacing(s), channels(c), data(d.voxels() * static_cast<std::size_t>(c), 0.0f) {}

    std::size_t index(int c, int x, int y, int z) const {
        return ((static_cast<std::size_t>(c) * dims.nz + z) * dims.ny + y) * dims.nx + x;
    }
    float& at(int c, int x, int y, int z) { return data[index(c, x, y, z)]; }
    const float& at(int c, int x, int y, int z) const { return data[index(c, x, y, z)]; }
    // Start of the (c, z) plane, ny*nx contiguous values.
    const float* plane(int c, int z) const { return data.data() + index(c, 0, 0, z); }
};

}  // namespace lesionlab

#endif  // LESIONLAB_VOLUME_HPP
