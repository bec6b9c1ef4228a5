#pragma once

#include <array>
#include <cstddef>
#include <vector>

namespace emsim {

// Dense 3-D array, x-fastest storage order: index = i + nx*(j + ny*k).
// This is also the on-disk layout of field checkpoints.
template <typename T>
class Array3D {
public:
    Array3D() : nx_(0), ny_(0), nz_(0) {}
    Array3D(std::size_t nx, std::size_t ny, std::size_t nz, T fill = T{})
        : nx_(nx), ny_(ny), nz_(nz), data_(nx * ny * nz, fill) {}

    void resize(std::size_t nx, std::size_t ny, std::size_t nz, T fill = T{}) {
        nx_ = nx; ny_ = ny; nz_ = nz;
        data_.assign(nx * ny * nz, fill);
    }

    std::size_t nx() const { return nx_; }
    std::size_t ny() const { return ny_; }
    std::size_t nz() const { return nz_; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    std::size_t index(std::size_t i, std::size_t j, std::size_t k) const {
        return i + nx_ * (j + ny_ * k);
    }

    T& operator()(std::size_t i, std::size_t j, std::size_t k) { return data_[index(i, j, k)]; }
    const T& operator()(std::size_t i, std::size_t j, std::size_t k) const { return data_[index(i, j, k)]; }

    T& operator[](std::size_t n) { return data_[n]; }
    const T& operator[](std::size_t n) const { return data_[n]; }

    T* data() { return data_.data(); }
    const T* data() const { return data_.data(); }

    void fill(T v) { data_.assign(data_.size(), v); }

    std::array<std::size_t, 3> dims() const { return {nx_, ny_, nz_}; }

    bool operator==(const Array3D& other) const {
        return nx_ == other.nx_ && ny_ == other.ny_ && nz_ == other.nz_ && data_ == other.data_;
    }

private:
    std::size_t nx_, ny_, nz_;
    std::vector<T> data_;
};

} // namespace emsim
