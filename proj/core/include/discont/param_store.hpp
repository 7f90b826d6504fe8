#pragma once

#include <map>
#include <string>
#include <string_view>

#include "discont/tensor.hpp"

namespace discont {

// Named trainable tensors, iterated in lexicographic path order.
class ParamStore {
 public:
  using Map = std::map<std::string, Tensor, std::less<>>;

  // Registers `value` under `path` and marks it as requiring gradients.
  Tensor& add(std::string path, Tensor value);

  Tensor& at(std::string_view path);
  const Tensor& at(std::string_view path) const;
  bool contains(std::string_view path) const;

  std::size_t size() const { return params_.size(); }
  std::size_t element_count() const;

  void clear_grads();

  Map::iterator begin() { return params_.begin(); }
  Map::iterator end() { return params_.end(); }
  Map::const_iterator begin() const { return params_.begin(); }
  Map::const_iterator end() const { return params_.end(); }

 private:
  Map params_;
};

// Non-trainable named state such as batch-norm running statistics.
using BufferStore = std::map<std::string, Tensor, std::less<>>;

}  // namespace discont
