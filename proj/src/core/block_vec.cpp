#include <cmath>

#include "palmi/core.hpp"

namespace palmi {

BlockVec BlockVec::zeros(std::span<const Index> dims) {
  std::vector<Vector> blocks;
  blocks.reserve(dims.size());
  for (Index m : dims) blocks.push_back(Vector::Zero(m));
  return BlockVec(std::move(blocks));
}

BlockVec BlockVec::unflatten(const Vector& flat, std::span<const Index> dims) {
  Index total = 0;
  for (Index m : dims) total += m;
  if (total != flat.size()) throw InputError("unflatten: size does not match block dimensions");
  std::vector<Vector> blocks;
  Index offset = 0;
  for (Index m : dims) {
    blocks.push_back(flat.segment(offset, m));
    offset += m;
  }
  return BlockVec(std::move(blocks));
}

std::vector<Index> BlockVec::dims() const {
  std::vector<Index> d;
  d.reserve(blocks_.size());
  for (const auto& b : blocks_) d.push_back(b.size());
  return d;
}

Index BlockVec::total_size() const {
  Index n = 0;
  for (const auto& b : blocks_) n += b.size();
  return n;
}

Vector BlockVec::flatten() const {
  Vector out(total_size());
  Index offset = 0;
  for (const auto& b : blocks_) {
    out.segment(offset, b.size()) = b;
    offset += b.size();
  }
  return out;
}

double BlockVec::squared_norm() const {
  double s = 0.0;
  for (const auto& b : blocks_) s += b.squaredNorm();
  return s;
}

double BlockVec::norm() const { return std::sqrt(squared_norm()); }

double BlockVec::distance(const BlockVec& other) const {
  if (other.num_blocks() != num_blocks()) throw InputError("distance: block count mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    if (blocks_[i].size() != other.blocks_[i].size()) {
      throw InputError("distance: block dimension mismatch");
    }
    s += (blocks_[i] - other.blocks_[i]).squaredNorm();
  }
  return std::sqrt(s);
}

bool BlockVec::all_finite() const {
  for (const auto& b : blocks_) {
    if (!b.allFinite()) return false;
  }
  return true;
}

bool operator==(const BlockVec& a, const BlockVec& b) {
  if (a.blocks_.size() != b.blocks_.size()) return false;
  for (std::size_t i = 0; i < a.blocks_.size(); ++i) {
    if (a.blocks_[i].size() != b.blocks_[i].size()) return false;
    if (a.blocks_[i] != b.blocks_[i]) return false;
  }
  return true;
}

}  // namespace palmi
