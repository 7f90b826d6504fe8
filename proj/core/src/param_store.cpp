#include "discont/param_store.hpp"

#include "discont/error.hpp"

namespace discont {

Tensor& ParamStore::add(std::string path, Tensor value) {
  if (path.empty()) throw ContractError("parameter path must not be empty");
  value.set_requires_grad(true);
  auto [it, inserted] = params_.emplace(std::move(path), std::move(value));
  if (!inserted) throw ContractError("duplicate parameter path '" + it->first + "'");
  return it->second;
}

Tensor& ParamStore::at(std::string_view path) {
  auto it = params_.find(path);
  if (it == params_.end()) throw ContractError("unknown parameter '" + std::string(path) + "'");
  return it->second;
}

const Tensor& ParamStore::at(std::string_view path) const {
  auto it = params_.find(path);
  if (it == params_.end()) throw ContractError("unknown parameter '" + std::string(path) + "'");
  return it->second;
}

bool ParamStore::contains(std::string_view path) const { return params_.find(path) != params_.end(); }

std::size_t ParamStore::element_count() const {
  std::size_t n = 0;
  for (const auto& [_, t] : params_) n += t.numel();
  return n;
}

void ParamStore::clear_grads() {
  for (auto& [_, t] : params_) t.clear_grad();
}

}  // namespace discont
