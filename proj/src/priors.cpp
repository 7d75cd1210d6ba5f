#include "brl/priors.hpp"

#include <charconv>
#include <cmath>
#include <sstream>

#include "brl/error.hpp"
#include "brl/math.hpp"

namespace brl {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

void check_pyp_admissible(double strength, double discount) {
  if (!std::isfinite(strength) || !std::isfinite(discount)) {
    throw ConfigError("PYP parameters must be finite");
  }
  if (discount >= 0.0 && discount < 1.0) {
    if (!(strength > -discount)) throw ConfigError("PYP: strength must exceed -discount");
    return;
  }
  if (discount < 0.0) {
    const double m = strength / std::fabs(discount);
    if (m < 0.5 || std::fabs(m - std::round(m)) > 1e-9) {
      throw ConfigError("PYP: negative discount requires strength = m*|discount|, m >= 1 integer");
    }
    return;
  }
  throw ConfigError("PYP: discount must be < 1");
}

std::vector<double> parse_numbers(std::string_view body) {
  std::vector<double> out;
  while (!body.empty()) {
    const auto comma = body.find(',');
    const auto tok = body.substr(0, comma);
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec != std::errc() || ptr != tok.data() + tok.size()) {
      throw ConfigError("prior: bad number '" + std::string(tok) + "'");
    }
    out.push_back(v);
    if (comma == std::string_view::npos) break;
    body.remove_prefix(comma + 1);
  }
  return out;
}

// Log of (a)_{na} / (b)_{nb} in Pochhammer notation, b > 0. Returns the sign separately
// because (a)_{na} can be zero or negative when a <= 0.
SignedLog rising_ratio(double a, int na, double b, int nb) {
  const double denom = log_generalized_rising(b, nb, 1.0);
  if (a > 0.0) return {log_generalized_rising(a, na, 1.0) - denom, 1};
  double acc = 0.0;
  int sign = 1;
  for (int i = 0; i < na; ++i) {
    const double f = a + i;
    if (f == 0.0) return {kNegInf, 0};
    if (f < 0.0) sign = -sign;
    acc += std::log(std::fabs(f));
  }
  return {acc - denom, sign};
}

double signed_exp(SignedLog s) { return s.sign == 0 ? 0.0 : s.sign * std::exp(s.log_abs); }

}  // namespace

double AllocWeight::weight() const { return std::exp(log_weight); }

PartitionPrior::PartitionPrior(PriorVariant v) : v_(v) {
  std::visit(Overloaded{
                 [](const UniformLabels& u) {
                   if (u.n_pop < 1) throw ConfigError("uniform-labels: n_pop must be positive");
                 },
                 [](const UniformPartitions& u) {
                   if (u.n_pop < 1) throw ConfigError("uniform-partitions: n_pop must be positive");
                 },
                 [](const Pyp& p) { check_pyp_admissible(p.strength, p.discount); },
                 [](const ConstrainedPyp& p) {
                   check_pyp_admissible(p.strength, p.discount);
                   if (p.discount < 0.0) throw ConfigError("constrained-pyp: discount must be >= 0");
                 },
             },
             v_);
}

PartitionPrior PartitionPrior::parse(std::string_view text) {
  const auto colon = text.find(':');
  if (colon == std::string_view::npos) throw ConfigError("prior: expected '<kind>:<params>'");
  const auto kind = text.substr(0, colon);
  const auto nums = parse_numbers(text.substr(colon + 1));
  auto want = [&](std::size_t n) {
    if (nums.size() != n) throw ConfigError("prior '" + std::string(kind) + "': wrong arity");
  };
  auto as_count = [](double v) {
    if (v < 1 || v != std::floor(v)) throw ConfigError("prior: n_pop must be a positive integer");
    return static_cast<std::int64_t>(v);
  };
  if (kind == "pyp") {
    want(2);
    return PartitionPrior(Pyp{nums[0], nums[1]});
  }
  if (kind == "constrained-pyp") {
    want(2);
    return PartitionPrior(ConstrainedPyp{nums[0], nums[1]});
  }
  if (kind == "uniform-labels") {
    want(1);
    return PartitionPrior(UniformLabels{as_count(nums[0])});
  }
  if (kind == "uniform-partitions") {
    want(1);
    return PartitionPrior(UniformPartitions{as_count(nums[0])});
  }
  throw ConfigError("prior: unknown kind '" + std::string(kind) + "'");
}

std::string PartitionPrior::to_string() const {
  std::ostringstream os;
  os.precision(17);
  std::visit(Overloaded{
                 [&](const UniformLabels& u) { os << "uniform-labels:" << u.n_pop; },
                 [&](const UniformPartitions& u) { os << "uniform-partitions:" << u.n_pop; },
                 [&](const Pyp& p) { os << "pyp:" << p.strength << ',' << p.discount; },
                 [&](const ConstrainedPyp& p) {
                   os << "constrained-pyp:" << p.strength << ',' << p.discount;
                 },
             },
             v_);
  return os.str();
}

void PartitionPrior::check_records(int n) const {
  std::visit(Overloaded{
                 [&](const UniformLabels& u) {
                   if (u.n_pop < n) throw ConfigError("uniform-labels: n_pop smaller than N");
                 },
                 [&](const UniformPartitions& u) {
                   if (u.n_pop < n) throw ConfigError("uniform-partitions: n_pop smaller than N");
                 },
                 [](const auto&) {},
             },
             v_);
}

double log_existing_weight(const PartitionPrior& prior, int size, int k_minus, int n_total) {
  return std::visit(
      Overloaded{
          [&](const UniformLabels& u) { return -std::log(static_cast<double>(u.n_pop)); },
          [&](const UniformPartitions& u) { return -log_falling_factorial(u.n_pop, k_minus); },
          [&](const Pyp& p) {
            return std::log(size - p.discount) - std::log(n_total - 1 + p.strength);
          },
          [&](const ConstrainedPyp& p) -> double {
            return size == 1 ? std::log1p(-p.discount) : kNegInf;
          },
      },
      prior.variant());
}

double log_new_weight(const PartitionPrior& prior, int k_minus, int n_total) {
  return std::visit(
      Overloaded{
          [&](const UniformLabels& u) {
            const double free = static_cast<double>(u.n_pop - k_minus);
            return (free > 0 ? std::log(free) : kNegInf) - std::log(static_cast<double>(u.n_pop));
          },
          [&](const UniformPartitions& u) {
            const double free = static_cast<double>(u.n_pop - k_minus);
            if (free <= 0) return kNegInf;
            return std::log(free) - log_falling_factorial(u.n_pop, k_minus + 1);
          },
          [&](const Pyp& p) {
            const double num = k_minus * p.discount + p.strength;
            return (num > 0 ? std::log(num) : kNegInf) - std::log(n_total - 1 + p.strength);
          },
          [&](const ConstrainedPyp&) -> double {
            throw Error("log_new_weight: constrained prior needs the state");
          },
      },
      prior.variant());
}

namespace {

void require_bipartite(const LinkageState& state) {
  if (state.num_databases() != 2 || state.constraint() != Constraint::NoWithinDbDuplicates) {
    throw ConfigError("constrained-pyp needs two databases without within-db duplicates");
  }
}

// True when second-database record q shares its cluster with no first-database record.
bool opens_cluster(const LinkageState& state, int q) {
  const int label = state.label_of(q);
  if (label == LinkageState::kDetached) return true;
  for (int m : state.members(label))
    if (state.db_of(m) == 0) return false;
  return true;
}

}  // namespace

bool constrained_eligible(const LinkageState& state, int r, int label) {
  int first_db = 0;
  int others = 0;
  for (int m : state.members(label)) {
    if (m == r) continue;
    ++others;
    if (state.db_of(m) == 0) ++first_db;
  }
  return others == 1 && first_db == 1;
}

double constrained_log_new_weight(const ConstrainedPyp& prior, const LinkageState& state, int r) {
  require_bipartite(state);
  if (state.db_of(r) != 1) throw Error("constrained prior: only second-database records move");
  const int n1 = state.db_size(0);
  const int n2 = state.db_size(1);
  const int first2 = n1;
  const int j = r - first2;
  const double s = prior.discount;
  const double th = prior.strength;

  int k_minus = n1;
  for (int q = first2; q < first2 + n2; ++q)
    if (q != r && opens_cluster(state, q)) ++k_minus;

  double acc = std::log(k_minus * s + th);
  // k_m counts distinct clusters among the first database and the first m records of the
  // second one, with r counted as linked.
  int k_m = n1;
  for (int m = 0; m < n2; ++m) {
    if (m > j) {
      const double base = k_m - m * (1.0 - s) + th;
      acc += std::log(base) - std::log(base + 1.0);
    }
    const int q = first2 + m;
    if (q != r && opens_cluster(state, q)) ++k_m;
  }
  return acc;
}

std::vector<AllocWeight> predictive_alloc(const PartitionPrior& prior, const LinkageState& state,
                                          int r) {
  const int own = state.label_of(r);
  const bool own_survives = own != LinkageState::kDetached && state.cluster_size(own) > 1;
  const int k_minus = state.num_clusters() - (own != LinkageState::kDetached && !own_survives);
  const int n_total = state.num_records();

  std::vector<AllocWeight> out;
  out.reserve(state.active_labels().size() + 1);

  if (const auto* cp = std::get_if<ConstrainedPyp>(&prior.variant())) {
    require_bipartite(state);
    if (state.db_of(r) != 1) throw Error("constrained prior: first-database labels are fixed");
    const double log_link = std::log1p(-cp->discount);
    for (int label : state.active_labels()) {
      if (label == own && !own_survives) continue;
      out.push_back({label, constrained_eligible(state, r, label) ? log_link : kNegInf});
    }
    out.push_back({LinkageState::kNew, constrained_log_new_weight(*cp, state, r)});
    return out;
  }

  for (int label : state.active_labels()) {
    if (label == own && !own_survives) continue;
    const int size = state.cluster_size(label) - (label == own ? 1 : 0);
    const double w = state.admits(r, label) ? log_existing_weight(prior, size, k_minus, n_total)
                                            : kNegInf;
    out.push_back({label, w});
  }
  out.push_back({LinkageState::kNew, log_new_weight(prior, k_minus, n_total)});
  return out;
}

double pyp_eppf_log_prob(const PartitionPrior& prior, std::span<const int> sizes) {
  const auto* p = std::get_if<Pyp>(&prior.variant());
  if (p == nullptr) throw Error("pyp_eppf_log_prob: prior is not an unconstrained PYP");
  std::int64_t n = 0;
  for (int s : sizes) {
    if (s < 1) throw Error("pyp_eppf_log_prob: block sizes must be positive");
    n += s;
  }
  if (n < 1) throw Error("pyp_eppf_log_prob: empty partition");
  const auto k = static_cast<std::int64_t>(sizes.size());
  double acc = log_generalized_rising(p->strength + p->discount, k - 1, p->discount);
  for (int s : sizes) acc += log_generalized_rising(1.0 - p->discount, s - 1, 1.0);
  return acc - log_generalized_rising(p->strength + 1.0, n - 1, 1.0);
}

PypMoments pyp_moments(const PartitionPrior& prior, int n) {
  const auto* p = std::get_if<Pyp>(&prior.variant());
  if (p == nullptr) throw Error("pyp_moments: prior is not an unconstrained PYP");
  if (p->discount == 0.0) {
    throw Error("pyp_moments: zero discount (Chinese restaurant limit) is not supported");
  }
  if (n < 1) throw Error("pyp_moments: n must be positive");
  const double th = p->strength;
  const double s = p->discount;
  // th * (th+s)_N / th_N = (th+s)_N / (th+1)_{N-1}, finite also at th = 0.
  const double a1 = signed_exp(rising_ratio(th + s, n, th + 1.0, n - 1));
  const double a2 = signed_exp(rising_ratio(th + 2.0 * s, n, th + 1.0, n - 1));
  const double mean = (a1 - th) / s;
  const double var = ((th + s) * a2 - a1 * a1 - s * a1) / (s * s);
  return {mean, std::max(var, 0.0)};
}

double hypergeometric_t_log_pmf(std::int64_t n_pop, std::int64_t n1, std::int64_t n2,
                                std::int64_t t) {
  if (n1 < 0 || n2 < 0) throw ConfigError("hypergeometric: negative sample size");
  if (n_pop < std::max(n1, n2)) throw ConfigError("hypergeometric: n_pop smaller than a sample");
  const std::int64_t lo = std::max<std::int64_t>(0, n1 + n2 - n_pop);
  const std::int64_t hi = std::min(n1, n2);
  if (t < lo || t > hi) return kNegInf;
  return log_binomial(n1, t) + log_binomial(n_pop - n1, n2 - t) - log_binomial(n_pop, n2);
}

ConstrainedStep constrained_pyp_step(const ConstrainedPyp& prior, int j, int k_j) {
  const double s = prior.discount;
  const double den = k_j - j * (1.0 - s) + prior.strength;
  const int available = k_j - j;
  return {std::log1p(-s) - std::log(den), std::log(k_j * s + prior.strength) - std::log(den),
          available};
}

double constrained_pyp_joint_log_prob(const PartitionPrior& prior, const LinkageState& state) {
  const auto* p = std::get_if<ConstrainedPyp>(&prior.variant());
  if (p == nullptr) throw Error("constrained_pyp_joint_log_prob: prior is not constrained-pyp");
  require_bipartite(state);
  state.validate();
  const int n1 = state.db_size(0);
  const int n2 = state.db_size(1);
  for (int q = 0; q < n1; ++q) {
    for (int m : state.members(state.label_of(q))) {
      if (m != q && state.db_of(m) == 0) throw ConstraintError("first-database records linked");
    }
  }
  const double s = p->discount;
  const double th = p->strength;
  const int n = n1 + n2;
  const int k = state.num_clusters();

  // (1-s)^(N-k) prod_{l=N1+1}^{k} (s(l-1)+th) / prod_{l=1}^{N2} (k_{l-1} - (l-1)(1-s) + th)
  double acc = (n - k) * std::log1p(-s);
  for (int l = n1 + 1; l <= k; ++l) acc += std::log(s * (l - 1) + th);
  int k_prev = n1;
  for (int l = 1; l <= n2; ++l) {
    acc -= std::log(k_prev - (l - 1) * (1.0 - s) + th);
    if (opens_cluster(state, n1 + l - 1)) ++k_prev;
  }
  return acc;
}

}  // namespace brl
