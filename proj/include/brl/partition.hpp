#pragma once

#include <compare>
#include <cstdint>
#include <optional>
#include <set>
#include <span>
#include <utility>
#include <vector>

namespace brl {

/// Position of a record: database `db` (0-based) and row `index` within it (0-based).
struct RecordId {
  int db = 0;
  int index = 0;
  auto operator<=>(const RecordId&) const = default;
};

enum class Constraint { Unconstrained, NoWithinDbDuplicates };

struct PartitionSummary {
  int k = 0;
  std::vector<int> cluster_sizes;  // sorted ascending
  std::optional<int> t;            // only for two databases without within-db duplicates
};

/// Label vector over N records plus the cluster bookkeeping derived from it.
///
/// Records are addressed by a global index in database-major order. Labels live in
/// [0, N). Emptied clusters are released immediately and a move to kNew always
/// takes the smallest free label, so a run is a pure function of its seed.
class LinkageState {
 public:
  static constexpr int kNew = -1;
  static constexpr int kDetached = -1;

  LinkageState() = default;
  /// All records in their own cluster; record i gets label i. `record_db` must be
  /// non-decreasing (database-major order).
  LinkageState(std::vector<int> record_db, Constraint constraint);
  /// Labels must lie in [0, N) and satisfy the constraint.
  static LinkageState from_labels(std::vector<int> record_db, std::span<const int> labels,
                                  Constraint constraint);

  int num_records() const { return static_cast<int>(label_.size()); }
  int num_clusters() const { return static_cast<int>(active_.size()); }
  int num_databases() const { return static_cast<int>(db_offset_.size()) - 1; }
  int db_size(int db) const { return db_offset_[db + 1] - db_offset_[db]; }
  Constraint constraint() const { return constraint_; }

  int db_of(int rec) const { return db_[rec]; }
  int index_of(RecordId id) const;
  RecordId id_of(int rec) const { return {db_[rec], rec - db_offset_[db_[rec]]}; }

  int label_of(int rec) const { return label_[rec]; }
  bool is_active(int label) const {
    return label >= 0 && label < num_records() && active_pos_[label] >= 0;
  }
  std::span<const int> members(int label) const { return members_[label]; }
  int cluster_size(int label) const { return static_cast<int>(members_[label].size()); }
  std::span<const int> active_labels() const { return active_; }
  std::vector<int> labels() const { return label_; }

  /// True when `rec` may join cluster `label` without breaking the constraint.
  bool admits(int rec, int label) const;

  /// Moves `rec` into `target` (an active label or kNew) and returns its new label.
  /// Throws ConstraintError or std::out_of_range; the state is unchanged on error.
  int move_record(int rec, int target);
  int move_record(RecordId rec, int target) { return move_record(index_of(rec), target); }

  // Sampler plumbing: a detached record belongs to no cluster until re-attached.
  // attach() also accepts a free label, which reopens it.
  void detach(int rec);
  int attach(int rec, int target);
  bool is_detached(int rec) const { return label_[rec] == kDetached; }

  std::vector<std::pair<int, int>> pairwise_links() const;
  PartitionSummary summary() const;

  /// Rebuilds bookkeeping from the label vector and throws if it disagrees.
  void validate() const;

 private:
  void activate(int label);
  void deactivate(int label);

  std::vector<int> db_;
  std::vector<int> db_offset_{0};
  std::vector<int> label_;
  std::vector<std::vector<int>> members_;
  std::vector<int> active_;
  std::vector<int> active_pos_;
  std::set<int> free_;
  Constraint constraint_ = Constraint::Unconstrained;
};

/// Number of co-clustered pairs for a size multiset.
std::int64_t count_pairs(std::span<const int> cluster_sizes);

}  // namespace brl
