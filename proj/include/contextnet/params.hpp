/* Copyright 2026 The ContextNet Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#ifndef CONTEXTNET_PARAMS_HPP_
#define CONTEXTNET_PARAMS_HPP_

#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "contextnet/tape.hpp"

namespace contextnet {

// Owns every named tensor of a model in creation order. Trainable entries
// are optimizer targets; non-trainable entries (batch-norm running stats)
// are buffers that still serialize with checkpoints.
template <typename S>
class ParamStore {
 public:
  struct Entry {
    std::unique_ptr<Parameter<S>> param;
    bool trainable;
  };

  Parameter<S>& create(const std::string& name, Tensor<S> init, bool trainable = true) {
    if (by_name_.count(name)) throw ConfigError("duplicate parameter name: " + name);
    auto p = std::make_unique<Parameter<S>>(Parameter<S>{name, std::move(init)});
    Parameter<S>* raw = p.get();
    entries_.push_back(Entry{std::move(p), trainable});
    by_name_.emplace(name, raw);
    return *raw;
  }

  Parameter<S>* find(const std::string& name) const {
    auto it = by_name_.find(name);
    return it == by_name_.end() ? nullptr : it->second;
  }

  const std::vector<Entry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }

  std::vector<Parameter<S>*> trainable() const {
    std::vector<Parameter<S>*> out;
    for (const auto& e : entries_) {
      if (e.trainable) out.push_back(e.param.get());
    }
    return out;
  }

  std::int64_t total_elements(bool trainable_only = false) const {
    std::int64_t n = 0;
    for (const auto& e : entries_) {
      if (!trainable_only || e.trainable) n += e.param->value.numel();
    }
    return n;
  }

 private:
  std::vector<Entry> entries_;
  std::unordered_map<std::string, Parameter<S>*> by_name_;
};

}  // namespace contextnet

#endif  // CONTEXTNET_PARAMS_HPP_
