#include "brl/partition.hpp"

#include <algorithm>
#include <map>
#include <stdexcept>
#include <string>

#include "brl/error.hpp"

namespace brl {

LinkageState::LinkageState(std::vector<int> record_db, Constraint constraint)
    : db_(std::move(record_db)), constraint_(constraint) {
  const int n = static_cast<int>(db_.size());
  int current = 0;
  for (int i = 0; i < n; ++i) {
    if (db_[i] < current) throw Error("LinkageState: records must be in database-major order");
    while (current < db_[i]) {
      db_offset_.push_back(i);
      ++current;
    }
  }
  if (n > 0) db_offset_.push_back(n);
  label_.resize(n);
  members_.resize(n);
  active_pos_.assign(n, -1);
  active_.reserve(n);
  for (int i = 0; i < n; ++i) {
    label_[i] = i;
    members_[i].push_back(i);
    activate(i);
  }
}

LinkageState LinkageState::from_labels(std::vector<int> record_db, std::span<const int> labels,
                                       Constraint constraint) {
  LinkageState s(std::move(record_db), constraint);
  const int n = s.num_records();
  if (static_cast<int>(labels.size()) != n) throw Error("from_labels: size mismatch");
  for (int i = 0; i < n; ++i) {
    if (labels[i] < 0 || labels[i] >= n) throw Error("from_labels: label out of range");
  }
  for (int i = 0; i < n; ++i) s.members_[i].clear();
  s.active_.clear();
  std::fill(s.active_pos_.begin(), s.active_pos_.end(), -1);
  s.free_.clear();
  for (int i = 0; i < n; ++i) {
    s.label_[i] = labels[i];
    s.members_[labels[i]].push_back(i);
  }
  for (int l = 0; l < n; ++l) {
    if (s.members_[l].empty()) {
      s.free_.insert(l);
    } else {
      s.active_pos_[l] = static_cast<int>(s.active_.size());
      s.active_.push_back(l);
    }
  }
  if (constraint == Constraint::NoWithinDbDuplicates) {
    for (int l : s.active_) {
      const auto& m = s.members_[l];
      for (std::size_t a = 0; a < m.size(); ++a)
        for (std::size_t b = a + 1; b < m.size(); ++b)
          if (s.db_[m[a]] == s.db_[m[b]])
            throw ConstraintError("from_labels: two records of one database share a cluster");
    }
  }
  return s;
}

int LinkageState::index_of(RecordId id) const {
  if (id.db < 0 || id.db >= num_databases() || id.index < 0 || id.index >= db_size(id.db)) {
    throw std::out_of_range("RecordId out of range");
  }
  return db_offset_[id.db] + id.index;
}

void LinkageState::activate(int label) {
  free_.erase(label);
  active_pos_[label] = static_cast<int>(active_.size());
  active_.push_back(label);
}

void LinkageState::deactivate(int label) {
  const int pos = active_pos_[label];
  const int last = active_.back();
  active_[pos] = last;
  active_pos_[last] = pos;
  active_.pop_back();
  active_pos_[label] = -1;
  free_.insert(label);
}

bool LinkageState::admits(int rec, int label) const {
  if (constraint_ == Constraint::Unconstrained) return true;
  const int d = db_[rec];
  for (int m : members_[label]) {
    if (m != rec && db_[m] == d) return false;
  }
  return true;
}

int LinkageState::move_record(int rec, int target) {
  if (rec < 0 || rec >= num_records()) throw std::out_of_range("move_record: bad record");
  if (target != kNew) {
    if (!is_active(target)) throw std::out_of_range("move_record: unknown cluster label");
    if (!admits(rec, target)) {
      throw ConstraintError("move_record: target already holds a record from database " +
                            std::to_string(db_[rec] + 1));
    }
    if (target == label_[rec]) return target;
  }
  detach(rec);
  return attach(rec, target);
}

void LinkageState::detach(int rec) {
  const int old = label_[rec];
  if (old == kDetached) return;
  auto& m = members_[old];
  m.erase(std::find(m.begin(), m.end(), rec));
  if (m.empty()) deactivate(old);
  label_[rec] = kDetached;
}

int LinkageState::attach(int rec, int target) {
  if (label_[rec] != kDetached) throw Error("attach: record is not detached");
  int label = target;
  if (target == kNew) {
    label = *free_.begin();
    activate(label);
  } else if (target >= 0 && target < num_records() && free_.count(target) != 0) {
    activate(label);
  } else if (!is_active(target)) {
    throw std::out_of_range("attach: unknown cluster label");
  } else if (!admits(rec, target)) {
    throw ConstraintError("attach: constraint violation");
  }
  members_[label].push_back(rec);
  label_[rec] = label;
  return label;
}

std::vector<std::pair<int, int>> LinkageState::pairwise_links() const {
  std::vector<std::pair<int, int>> out;
  for (int l : active_) {
    const auto& m = members_[l];
    for (std::size_t a = 0; a < m.size(); ++a)
      for (std::size_t b = a + 1; b < m.size(); ++b)
        out.emplace_back(std::min(m[a], m[b]), std::max(m[a], m[b]));
  }
  std::sort(out.begin(), out.end());
  return out;
}

PartitionSummary LinkageState::summary() const {
  PartitionSummary s;
  s.k = num_clusters();
  s.cluster_sizes.reserve(active_.size());
  for (int l : active_) s.cluster_sizes.push_back(cluster_size(l));
  std::sort(s.cluster_sizes.begin(), s.cluster_sizes.end());
  if (constraint_ == Constraint::NoWithinDbDuplicates && num_databases() == 2) {
    s.t = static_cast<int>(std::count(s.cluster_sizes.begin(), s.cluster_sizes.end(), 2));
  }
  return s;
}

void LinkageState::validate() const {
  const int n = num_records();
  std::map<int, std::vector<int>> rebuilt;
  for (int i = 0; i < n; ++i) {
    if (label_[i] == kDetached) continue;
    rebuilt[label_[i]].push_back(i);
  }
  if (static_cast<int>(rebuilt.size()) != num_clusters()) throw Error("validate: k mismatch");
  for (auto& [label, recs] : rebuilt) {
    if (!is_active(label)) throw Error("validate: label not active");
    std::vector<int> have = members_[label];
    std::sort(have.begin(), have.end());
    if (have != recs) throw Error("validate: membership mismatch");
    if (constraint_ == Constraint::NoWithinDbDuplicates) {
      for (std::size_t a = 1; a < recs.size(); ++a)
        for (std::size_t b = 0; b < a; ++b)
          if (db_[recs[a]] == db_[recs[b]]) throw ConstraintError("validate: constraint violated");
    }
  }
  for (int l : active_) {
    if (members_[l].empty()) throw Error("validate: empty active cluster");
  }
  if (static_cast<int>(free_.size() + active_.size()) != n) throw Error("validate: label leak");
}

std::int64_t count_pairs(std::span<const int> cluster_sizes) {
  std::int64_t acc = 0;
  for (int s : cluster_sizes) acc += static_cast<std::int64_t>(s) * (s - 1) / 2;
  return acc;
}

}  // namespace brl
