#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "ddd/errors.hpp"

namespace ddd {

/// Named, ordered feature values for one window. Name order is a function of
/// the extractor family set only, never of the data.
struct FeatureVector {
  std::vector<std::string> names;
  std::vector<double> values;
  std::size_t window_index = 0;

  void push(const std::string& name, double value) {
    if (!std::isfinite(value)) {
      throw Error("non-finite feature value: " + name);
    }
    names.push_back(name);
    values.push_back(value);
  }

  void append(const FeatureVector& other) {
    for (std::size_t i = 0; i < other.names.size(); ++i) {
      names.push_back(other.names[i]);
      values.push_back(other.values[i]);
    }
  }

  std::size_t size() const { return values.size(); }
};

}  // namespace ddd
