#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "brl/partition.hpp"

namespace brl {

/// Category codes (0-based) stored feature-major so that one feature across all
/// records is contiguous.
class CategoricalRecordView {
 public:
  CategoricalRecordView() = default;
  CategoricalRecordView(std::vector<std::vector<std::int32_t>> by_feature,
                        std::vector<int> supports);

  int num_features() const { return static_cast<int>(codes_.size()); }
  int num_records() const { return num_records_; }
  int support(int feature) const { return supports_[feature]; }
  std::span<const int> supports() const { return supports_; }
  std::int32_t code(int rec, int feature) const { return codes_[feature][rec]; }
  std::span<const std::int32_t> feature(int f) const { return codes_[f]; }
  const std::int32_t* feature_data(int f) const { return codes_[f].data(); }

 private:
  std::vector<std::vector<std::int32_t>> codes_;
  std::vector<int> supports_;
  int num_records_ = 0;
};

/// Regression columns: component 0 is y, components 1..p are x_1..x_p.
/// Missing cells carry a zero mask entry.
class RegressionObservations {
 public:
  RegressionObservations() = default;
  RegressionObservations(int num_records, int num_covariates);

  int num_records() const { return num_records_; }
  int num_covariates() const { return p_; }
  int width() const { return p_ + 1; }
  bool empty() const { return p_ == 0 && !any_y_; }

  bool observed(int rec, int comp) const { return mask_[idx(rec, comp)] != 0; }
  double value(int rec, int comp) const { return values_[idx(rec, comp)]; }
  void set(int rec, int comp, double v);
  void clear(int rec, int comp);
  int count_observed(int rec) const;
  bool has_any(int rec) const { return count_observed(rec) > 0; }
  bool has_any_observation() const;

 private:
  std::size_t idx(int rec, int comp) const {
    return static_cast<std::size_t>(rec) * static_cast<std::size_t>(p_ + 1) +
           static_cast<std::size_t>(comp);
  }
  int num_records_ = 0;
  int p_ = 0;
  bool any_y_ = false;
  std::vector<double> values_;
  std::vector<std::uint8_t> mask_;
};

/// L databases of records in database-major order.
struct Corpus {
  int num_databases = 0;
  std::vector<int> record_db;                   // 0-based database of each record
  std::vector<std::int64_t> record_key;         // rec_id as written in the file
  std::vector<std::string> feature_names;
  CategoricalRecordView categorical;
  bool has_response = false;
  int num_covariates = 0;
  RegressionObservations regression;
  std::optional<std::vector<std::int64_t>> entity;  // ground truth, when known

  int num_records() const { return static_cast<int>(record_db.size()); }
  std::vector<int> db_sizes() const;
  bool has_regression() const { return has_response || num_covariates > 0; }
  LinkageState singleton_state(Constraint c) const { return LinkageState(record_db, c); }
};

}  // namespace brl
