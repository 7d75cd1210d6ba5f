#include "brl/corpus.hpp"

#include "brl/error.hpp"

namespace brl {

CategoricalRecordView::CategoricalRecordView(std::vector<std::vector<std::int32_t>> by_feature,
                                             std::vector<int> supports)
    : codes_(std::move(by_feature)), supports_(std::move(supports)) {
  if (codes_.size() != supports_.size()) throw Error("CategoricalRecordView: support count");
  num_records_ = codes_.empty() ? 0 : static_cast<int>(codes_.front().size());
  for (std::size_t f = 0; f < codes_.size(); ++f) {
    if (static_cast<int>(codes_[f].size()) != num_records_) {
      throw Error("CategoricalRecordView: ragged feature columns");
    }
    for (std::int32_t c : codes_[f]) {
      if (c < 0 || c >= supports_[f]) {
        throw Error("CategoricalRecordView: code outside the support of feature " +
                    std::to_string(f + 1));
      }
    }
  }
}

RegressionObservations::RegressionObservations(int num_records, int num_covariates)
    : num_records_(num_records),
      p_(num_covariates),
      values_(static_cast<std::size_t>(num_records) * (num_covariates + 1), 0.0),
      mask_(static_cast<std::size_t>(num_records) * (num_covariates + 1), 0) {}

void RegressionObservations::set(int rec, int comp, double v) {
  values_[idx(rec, comp)] = v;
  mask_[idx(rec, comp)] = 1;
  if (comp == 0) any_y_ = true;
}

void RegressionObservations::clear(int rec, int comp) {
  values_[idx(rec, comp)] = 0.0;
  mask_[idx(rec, comp)] = 0;
}

int RegressionObservations::count_observed(int rec) const {
  int c = 0;
  for (int j = 0; j <= p_; ++j) c += mask_[idx(rec, j)];
  return c;
}

bool RegressionObservations::has_any_observation() const {
  for (auto m : mask_)
    if (m) return true;
  return false;
}

std::vector<int> Corpus::db_sizes() const {
  std::vector<int> sizes(num_databases, 0);
  for (int d : record_db) ++sizes[d];
  return sizes;
}

}  // namespace brl
