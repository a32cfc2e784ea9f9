#include "regkit/coarse/tls.hpp"

#include "regkit/core/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace regkit {

namespace {

void validate(std::span<const double> m, std::span<const double> a, std::span<const double> w, double c2) {
  if (m.empty() || m.size() != a.size() || m.size() != w.size()) {
    throw Error(ErrorCode::InvalidArgument, "tls: measurement, bound and weight counts must match and be non-zero");
  }
  if (!(c2 > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "tls: c2 must be positive");
  }
  for (std::size_t i = 0; i < m.size(); ++i) {
    if (!std::isfinite(m[i]) || !(a[i] > 0.0) || !(w[i] > 0.0) || !std::isfinite(a[i]) || !std::isfinite(w[i])) {
      throw Error(ErrorCode::InvalidArgument, "tls: measurements finite, bounds and weights positive");
    }
  }
}

struct Event {
  double x;
  bool enter;
  std::size_t index;
};

}  // namespace

double tls_objective_1d(double x, std::span<const double> m, std::span<const double> a,
                        std::span<const double> w, double c2) {
  double f = 0.0;
  for (std::size_t i = 0; i < m.size(); ++i) {
    const double r = (x - m[i]) / a[i];
    f += w[i] * std::min(r * r, c2);
  }
  return f;
}

Tls1dResult solve_tls_1d(std::span<const double> m, std::span<const double> a, std::span<const double> w, double c2) {
  validate(m, a, w, c2);
  const std::size_t n = m.size();
  const double c = std::sqrt(c2);

  // Work relative to a central value so the running sums stay well scaled.
  std::vector<double> sorted_m(m.begin(), m.end());
  std::nth_element(sorted_m.begin(), sorted_m.begin() + static_cast<std::ptrdiff_t>(n / 2), sorted_m.end());
  const double shift = sorted_m[n / 2];

  std::vector<Event> events;
  events.reserve(2 * n);
  for (std::size_t i = 0; i < n; ++i) {
    events.push_back({m[i] - c * a[i], true, i});
    events.push_back({m[i] + c * a[i], false, i});
  }
  // Entries before exits at the same coordinate: touching intervals overlap.
  std::sort(events.begin(), events.end(), [](const Event& l, const Event& r) {
    if (l.x != r.x) return l.x < r.x;
    if (l.enter != r.enter) return l.enter;
    return l.index < r.index;
  });

  const double total_w = std::accumulate(w.begin(), w.end(), 0.0);
  double s0 = 0.0, s1 = 0.0, s2 = 0.0, in_w = 0.0;  // sums of w/a^2, w m/a^2, w m^2/a^2, w
  std::size_t active = 0, max_active = 0;

  struct Candidate {
    double cost;
    double cardinality;
    double variance;
    double x;
    std::size_t event;  // sweep position whose active set this is
  };
  bool have = false;
  Candidate best{};
  const auto better = [](const Candidate& l, const Candidate& r) {
    const double tol = 1e-12 * (1.0 + std::fabs(r.cost));
    if (l.cost < r.cost - tol) return true;
    if (l.cost > r.cost + tol) return false;
    if (l.cardinality != r.cardinality) return l.cardinality > r.cardinality;
    if (l.variance != r.variance) return l.variance < r.variance;
    return l.x < r.x;
  };

  for (std::size_t e = 0; e < events.size(); ++e) {
    const Event& ev = events[e];
    const std::size_t i = ev.index;
    const double p = w[i] / (a[i] * a[i]);
    const double mi = m[i] - shift;
    if (ev.enter) {
      s0 += p;
      s1 += p * mi;
      s2 += p * mi * mi;
      in_w += w[i];
      ++active;
      max_active = std::max(max_active, active);
    } else {
      s0 -= p;
      s1 -= p * mi;
      s2 -= p * mi * mi;
      in_w -= w[i];
      --active;
    }
    // Evaluate once per maximal run of same-kind events at one coordinate.
    const bool run_ends = e + 1 == events.size() || events[e + 1].x != ev.x || events[e + 1].enter != ev.enter;
    if (!run_ends || active == 0) continue;
    const double x = s1 / s0;
    const double quad = std::max(0.0, s2 - s1 * x);
    const Candidate cand{quad + c2 * (total_w - in_w), in_w, quad / in_w, x + shift, e};
    if (!have || better(cand, best)) {
      best = cand;
      have = true;
    }
  }

  // Rebuild the winning consensus set and recompute its estimate exactly.
  std::vector<char> member(n, 0);
  for (std::size_t e = 0; e <= best.event; ++e) {
    member[events[e].index] = events[e].enter ? 1 : 0;
  }
  Tls1dResult out;
  double q0 = 0.0, q1 = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!member[i]) continue;
    out.consensus.push_back(i);
    const double p = w[i] / (a[i] * a[i]);
    q0 += p;
    q1 += p * (m[i] - shift);
  }
  out.estimate = q1 / q0 + shift;
  out.objective = tls_objective_1d(out.estimate, m, a, w, c2);
  out.intervals_disjoint = n >= 2 && max_active <= 1;
  return out;
}

double weighted_median(std::span<const double> values, std::span<const double> weights) {
  if (values.empty() || values.size() != weights.size()) {
    throw Error(ErrorCode::InvalidArgument, "weighted_median: empty or mismatched input");
  }
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t l, std::size_t r) {
    return values[l] < values[r] || (values[l] == values[r] && l < r);
  });
  const double half = 0.5 * std::accumulate(weights.begin(), weights.end(), 0.0);
  double acc = 0.0;
  for (std::size_t i : order) {
    acc += weights[i];
    if (acc >= half) return values[i];
  }
  return values[order.back()];
}

}  // namespace regkit
