#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "ddd/errors.hpp"
#include "ddd/feature_vector.hpp"
#include "ddd/labeling.hpp"

namespace ddd {

/// Labeled feature matrix. Rows follow window order; y is 0 for awake and
/// 1 for drowsy. Unlabeled windows never enter a Dataset.
struct Dataset {
  std::vector<std::string> feature_names;
  std::vector<std::vector<double>> x;
  std::vector<int> y;

  std::size_t size() const { return x.size(); }
  std::size_t dim() const { return feature_names.size(); }

  std::size_t count(int label) const {
    std::size_t c = 0;
    for (int v : y) c += (v == label) ? 1 : 0;
    return c;
  }

  static Dataset from_features(const std::vector<FeatureVector>& rows,
                               const std::vector<Label>& labels) {
    if (rows.size() != labels.size())
      throw ConfigError("feature rows and labels disagree in length");
    Dataset ds;
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (labels[i].state == DriverState::unlabeled) continue;
      if (ds.feature_names.empty())
        ds.feature_names = rows[i].names;
      else if (rows[i].names != ds.feature_names)
        throw ConfigError("inconsistent feature rows");
      ds.x.push_back(rows[i].values);
      ds.y.push_back(labels[i].state == DriverState::drowsy ? 1 : 0);
    }
    return ds;
  }

  Dataset select_columns(const std::vector<std::size_t>& cols) const {
    Dataset out;
    for (std::size_t c : cols) {
      if (c >= dim()) throw ConfigError("feature index out of range");
      out.feature_names.push_back(feature_names[c]);
    }
    out.x.reserve(size());
    for (const auto& row : x) {
      std::vector<double> r;
      r.reserve(cols.size());
      for (std::size_t c : cols) r.push_back(row[c]);
      out.x.push_back(std::move(r));
    }
    out.y = y;
    return out;
  }

  Dataset subset_rows(const std::vector<std::size_t>& idx) const {
    Dataset out;
    out.feature_names = feature_names;
    out.x.reserve(idx.size());
    out.y.reserve(idx.size());
    for (std::size_t i : idx) {
      if (i >= size()) throw ConfigError("row index out of range");
      out.x.push_back(x[i]);
      out.y.push_back(y[i]);
    }
    return out;
  }

  void append_rows(const Dataset& other) {
    if (feature_names.empty()) feature_names = other.feature_names;
    if (other.feature_names != feature_names)
      throw ConfigError("cannot append rows with different features");
    x.insert(x.end(), other.x.begin(), other.x.end());
    y.insert(y.end(), other.y.begin(), other.y.end());
  }
};

}  // namespace ddd
