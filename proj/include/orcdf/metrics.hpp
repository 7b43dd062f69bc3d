#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "orcdf/cdm.hpp"
#include "orcdf/dataset.hpp"
#include "orcdf/error.hpp"

namespace orcdf {

/// Area under the ROC curve as the Mann-Whitney statistic; tied scores
/// contribute one half.
inline double auc(std::span<const double> scores, std::span<const double> labels) {
  if (scores.size() != labels.size()) throw ShapeError("auc: scores and labels differ in length");
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  double pos_rank_sum = 0.0;
  std::size_t n_pos = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    const double avg_rank = 0.5 * static_cast<double>(i + 1 + j);  // mean of ranks i+1 .. j
    for (std::size_t k = i; k < j; ++k) {
      if (labels[order[k]] > 0.5) {
        pos_rank_sum += avg_rank;
        ++n_pos;
      }
    }
    i = j;
  }
  const std::size_t n_neg = n - n_pos;
  if (n_pos == 0 || n_neg == 0) throw UndefinedMetricError("auc: both classes must be present");
  const double np = static_cast<double>(n_pos);
  return (pos_rank_sum - np * (np + 1.0) / 2.0) / (np * static_cast<double>(n_neg));
}

/// Fraction of items where (score >= threshold) agrees with the label.
inline double accuracy(std::span<const double> scores, std::span<const double> labels, double threshold = 0.5) {
  if (scores.size() != labels.size()) throw ShapeError("accuracy: scores and labels differ in length");
  if (scores.empty()) throw UndefinedMetricError("accuracy: empty input");
  std::size_t hit = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    hit += static_cast<std::size_t>((scores[i] >= threshold) == (labels[i] > 0.5));
  }
  return static_cast<double>(hit) / static_cast<double>(scores.size());
}

/// Mean normalized difference of mastery rows:
///   1/(N(N-1)) * sum_u sum_v ||m_u - m_v||^2 / Z.
/// Evaluated through the identity sum_{u,v} ||m_u - m_v||^2 = 2N sum ||m_u||^2 - 2 ||sum m_u||^2.
inline double mnd(const Matrix& mas) {
  const auto n = mas.rows();
  const auto z = mas.cols();
  if (n < 2) throw UndefinedMetricError("mnd: needs at least two students");
  if (z < 1) throw UndefinedMetricError("mnd: needs at least one concept");
  const Eigen::RowVectorXd mean = mas.colwise().mean();
  // Centering first keeps the closed form accurate for nearly equal rows.
  const double spread = (mas.rowwise() - mean).squaredNorm();
  const double pair_sum = 2.0 * static_cast<double>(n) * spread;
  return pair_sum / (static_cast<double>(n) * static_cast<double>(n - 1) * static_cast<double>(z));
}

inline double mnd(const Mastery& m) {
  if (!m.concept_indexed) throw UnsuitableMetricError("mnd: mastery is not concept-indexed");
  return mnd(m.values);
}

/// The `count` concepts with the most response logs (ties broken by concept id).
inline std::vector<std::int32_t> top_concepts(std::span<const Response> logs, const QMatrix& q, std::size_t count) {
  std::vector<std::size_t> freq(static_cast<std::size_t>(q.n_concepts()), 0);
  for (const auto& r : logs) {
    for (auto k : q.concepts(r.exercise)) ++freq[static_cast<std::size_t>(k)];
  }
  std::vector<std::int32_t> ids(freq.size());
  std::iota(ids.begin(), ids.end(), 0);
  std::stable_sort(ids.begin(), ids.end(), [&](std::int32_t a, std::int32_t b) {
    return freq[static_cast<std::size_t>(a)] > freq[static_cast<std::size_t>(b)];
  });
  ids.resize(std::min(count, ids.size()));
  return ids;
}

struct DoaReport {
  double value = 0.0;                    ///< mean over scored concepts
  std::vector<std::int32_t> concepts;    ///< scored concepts
  std::vector<double> per_concept;       ///< DOA_k for each scored concept
  std::vector<std::int32_t> excluded;    ///< requested concepts with no comparable pair
};

/// Degree of agreement per concept k: over ordered student pairs (a, b) with
/// Mas[a,k] > Mas[b,k], the share of co-answered concept-k exercises with
/// differing responses on which a is right, averaged over the pairs that have
/// at least one such exercise. The report averages over `concepts`.
inline DoaReport doa(const Matrix& mas, std::span<const Response> logs, const QMatrix& q,
                     std::span<const std::int32_t> concepts) {
  const auto n = static_cast<std::int32_t>(mas.rows());
  if (mas.cols() != q.n_concepts()) throw ShapeError("doa: mastery width != concept count");
  std::vector<std::vector<std::int32_t>> right(static_cast<std::size_t>(q.n_exercises()));
  std::vector<std::vector<std::int32_t>> wrong(static_cast<std::size_t>(q.n_exercises()));
  for (const auto& r : logs) {
    if (r.student < 0 || r.student >= n) throw ShapeError("doa: log student outside mastery rows");
    (r.score ? right : wrong)[static_cast<std::size_t>(r.exercise)].push_back(r.student);
  }
  std::vector<std::vector<std::int32_t>> exercises_of(static_cast<std::size_t>(q.n_concepts()));
  for (std::int32_t e = 0; e < q.n_exercises(); ++e) {
    for (auto k : q.concepts(e)) exercises_of[static_cast<std::size_t>(k)].push_back(e);
  }

  DoaReport rep;
  struct Counts {
    std::int32_t lo_right = 0;  ///< smaller id right, larger id wrong
    std::int32_t hi_right = 0;
  };
  for (auto k : concepts) {
    if (k < 0 || k >= q.n_concepts()) throw ShapeError("doa: concept id out of range");
    std::unordered_map<std::uint64_t, Counts> pairs;
    for (auto e : exercises_of[static_cast<std::size_t>(k)]) {
      for (auto a : right[static_cast<std::size_t>(e)]) {
        for (auto b : wrong[static_cast<std::size_t>(e)]) {
          const auto lo = std::min(a, b), hi = std::max(a, b);
          auto& c = pairs[(static_cast<std::uint64_t>(lo) << 32) | static_cast<std::uint32_t>(hi)];
          (a == lo ? c.lo_right : c.hi_right) += 1;
        }
      }
    }
    double sum = 0.0;
    std::size_t scored = 0;
    for (const auto& [key, c] : pairs) {
      const auto lo = static_cast<std::int32_t>(key >> 32);
      const auto hi = static_cast<std::int32_t>(key & 0xffffffffu);
      const double m_lo = mas(lo, k), m_hi = mas(hi, k);
      if (m_lo == m_hi) continue;
      const double den = c.lo_right + c.hi_right;
      sum += (m_lo > m_hi ? c.lo_right : c.hi_right) / den;
      ++scored;
    }
    if (scored == 0) {
      rep.excluded.push_back(k);
      continue;
    }
    rep.concepts.push_back(k);
    rep.per_concept.push_back(sum / static_cast<double>(scored));
  }
  if (rep.per_concept.empty()) throw UndefinedMetricError("doa: no concept has a comparable student pair");
  rep.value = std::accumulate(rep.per_concept.begin(), rep.per_concept.end(), 0.0) /
              static_cast<double>(rep.per_concept.size());
  return rep;
}

inline DoaReport doa(const Mastery& m, std::span<const Response> logs, const QMatrix& q,
                     std::span<const std::int32_t> concepts) {
  if (!m.concept_indexed) throw UnsuitableMetricError("doa: mastery is not concept-indexed");
  return doa(m.values, logs, q, concepts);
}

/// Metric values plus the sweep coordinates they were measured at.
struct MetricReport {
  double auc = 0.0;
  double acc = 0.0;
  std::optional<double> doa;
  std::optional<double> mnd;
  std::size_t n_test = 0;
  double p_t = 0.2;
  double p_n = 0.0;
  std::uint64_t seed = 0;
  nlohmann::json config = nlohmann::json::object();

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["auc"] = auc;
    j["acc"] = acc;
    j["doa"] = doa ? nlohmann::json(*doa) : nlohmann::json(nullptr);
    j["mnd"] = mnd ? nlohmann::json(*mnd) : nlohmann::json(nullptr);
    j["n_test"] = n_test;
    nlohmann::json c = config;
    c["p_t"] = p_t;
    c["p_n"] = p_n;
    c["seed"] = seed;
    j["config"] = c;
    return j;
  }
};

}  // namespace orcdf
