#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "wasr/tensor.hpp"

namespace wasr {

/// Named tensors in deterministic (insertion) order.
///
/// A trainable store flags every entry requires_grad; a buffer store (batch
/// norm running statistics, optimizer moments) never does.
class ParamStore {
 public:
  explicit ParamStore(bool trainable = true) : trainable_(trainable) {}

  bool trainable() const { return trainable_; }

  /// Inserts a tensor under a unique dot-separated name and returns the stored handle.
  Tensor& add(const std::string& name, Tensor t);

  bool contains(std::string_view name) const;
  Tensor& at(std::string_view name);
  const Tensor& at(std::string_view name) const;

  std::size_t size() const { return order_.size(); }
  const std::vector<std::string>& names() const { return order_; }
  std::int64_t total_elements() const;

  void zero_grad();

  /// Deep copy (fresh nodes, no shared storage).
  ParamStore clone() const;

  /// True when names, shapes and values match exactly.
  bool bit_equal(const ParamStore& other) const;

  /// Binary format: magic (8 bytes), then per entry: u32 name length, UTF-8
  /// name, u32 rank, u32 extents, f64 values; all little-endian.
  void save(const std::filesystem::path& path, std::string_view magic = "WASRPRM1") const;
  static ParamStore load(const std::filesystem::path& path, bool trainable = true,
                         std::string_view magic = "WASRPRM1");

 private:
  bool trainable_;
  std::vector<std::string> order_;
  std::map<std::string, Tensor, std::less<>> entries_;
};

}  // namespace wasr
