#pragma once

#include <algorithm>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace csar {

// Row-major H x W grid. Row index is y, column index is x.
template <typename T>
class Grid {
 public:
  Grid() = default;
  Grid(int rows, int cols, T fill = T{})
      : rows_(rows), cols_(cols), data_(checked_size(rows, cols), fill) {}

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }

  T& operator()(int row, int col) { return data_[index(row, col)]; }
  const T& operator()(int row, int col) const { return data_[index(row, col)]; }

  T& at(int row, int col) {
    bounds_check(row, col);
    return (*this)(row, col);
  }
  const T& at(int row, int col) const {
    bounds_check(row, col);
    return (*this)(row, col);
  }

  bool contains(int row, int col) const {
    return row >= 0 && row < rows_ && col >= 0 && col < cols_;
  }

  std::vector<T>& values() { return data_; }
  const std::vector<T>& values() const { return data_; }

  bool same_shape(const Grid& other) const {
    return rows_ == other.rows_ && cols_ == other.cols_;
  }

  friend bool operator==(const Grid&, const Grid&) = default;

 private:
  static std::size_t checked_size(int rows, int cols) {
    if (rows < 0 || cols < 0) throw std::invalid_argument("grid: negative shape");
    return static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols);
  }
  std::size_t index(int row, int col) const {
    return static_cast<std::size_t>(row) * static_cast<std::size_t>(cols_) +
           static_cast<std::size_t>(col);
  }
  void bounds_check(int row, int col) const {
    if (!contains(row, col)) throw std::out_of_range("grid: index out of range");
  }

  int rows_ = 0;
  int cols_ = 0;
  std::vector<T> data_;
};

// DRL state: colour (grayscale intensity in [0,1]) and depth (metres) heightmaps.
struct Heightmaps {
  Grid<double> color;
  Grid<double> depth;

  int rows() const { return depth.rows(); }
  int cols() const { return depth.cols(); }

  friend bool operator==(const Heightmaps&, const Heightmaps&) = default;
};

// Dense per-cell action values, same shape as the heightmaps.
using QMap = Grid<double>;

}  // namespace csar
