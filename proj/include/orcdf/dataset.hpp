#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "orcdf/error.hpp"
#include "orcdf/numerics/rng.hpp"
#include "orcdf/numerics/sparse.hpp"

namespace orcdf {

/// One response log entry: student answered exercise right (1) or wrong (0).
struct Response {
  std::int32_t student = 0;
  std::int32_t exercise = 0;
  std::int8_t score = 0;

  bool operator==(const Response&) const = default;
};

/// Binary exercise-by-concept relevance matrix, stored as sorted concept lists.
class QMatrix {
 public:
  QMatrix() = default;
  QMatrix(std::int32_t n_exercises, std::int32_t n_concepts)
      : n_concepts_(n_concepts), concepts_(static_cast<std::size_t>(n_exercises)) {}

  static QMatrix from_dense(const std::vector<std::vector<int>>& rows) {
    const auto z = rows.empty() ? 0 : static_cast<std::int32_t>(rows[0].size());
    QMatrix q(static_cast<std::int32_t>(rows.size()), z);
    for (std::size_t e = 0; e < rows.size(); ++e) {
      if (static_cast<std::int32_t>(rows[e].size()) != z) throw DataError("Q-matrix rows differ in width");
      for (std::int32_t k = 0; k < z; ++k) {
        if (rows[e][static_cast<std::size_t>(k)] != 0) q.set(static_cast<std::int32_t>(e), k);
      }
    }
    return q;
  }

  void set(std::int32_t exercise, std::int32_t concept_id) {
    if (exercise < 0 || exercise >= n_exercises() || concept_id < 0 || concept_id >= n_concepts_) {
      throw DataError("Q-matrix entry out of range");
    }
    auto& c = concepts_[static_cast<std::size_t>(exercise)];
    const auto it = std::lower_bound(c.begin(), c.end(), concept_id);
    if (it == c.end() || *it != concept_id) c.insert(it, concept_id);
  }

  bool at(std::int32_t exercise, std::int32_t concept_id) const {
    const auto& c = concepts_[static_cast<std::size_t>(exercise)];
    return std::binary_search(c.begin(), c.end(), concept_id);
  }

  std::span<const std::int32_t> concepts(std::int32_t exercise) const {
    return concepts_[static_cast<std::size_t>(exercise)];
  }

  std::int32_t n_exercises() const noexcept { return static_cast<std::int32_t>(concepts_.size()); }
  std::int32_t n_concepts() const noexcept { return n_concepts_; }

  std::size_t nnz() const {
    std::size_t n = 0;
    for (const auto& c : concepts_) n += c.size();
    return n;
  }

  Matrix to_dense() const {
    Matrix d = Matrix::Zero(n_exercises(), n_concepts_);
    for (std::int32_t e = 0; e < n_exercises(); ++e) {
      for (auto k : concepts(e)) d(e, k) = 1.0;
    }
    return d;
  }

  bool operator==(const QMatrix&) const = default;

 private:
  std::int32_t n_concepts_ = 0;
  std::vector<std::vector<std::int32_t>> concepts_;
};

/// Original (string) ids in dense-index order for each entity kind.
struct IdMaps {
  std::vector<std::string> students;
  std::vector<std::string> exercises;
  std::vector<std::string> concepts;

  static std::vector<std::string> identity(std::int32_t n) {
    std::vector<std::string> v;
    v.reserve(static_cast<std::size_t>(n));
    for (std::int32_t i = 0; i < n; ++i) v.push_back(std::to_string(i));
    return v;
  }

  nlohmann::json to_json() const {
    auto block = [](const std::vector<std::string>& ids) {
      nlohmann::json j = nlohmann::json::object();
      for (std::size_t i = 0; i < ids.size(); ++i) j[ids[i]] = i;
      return j;
    };
    return {{"student", block(students)}, {"exercise", block(exercises)}, {"concept", block(concepts)}};
  }
};

/// Students, exercises, concepts, their response logs and the Q-matrix.
/// Invariants hold after create(): ids in range, every exercise has at least
/// one concept, no duplicated (student, exercise) pair.
class Dataset {
 public:
  Dataset() = default;

  /// Validates and deduplicates (first occurrence wins).
  static Dataset create(std::int32_t n_students, std::int32_t n_exercises, std::int32_t n_concepts,
                        std::vector<Response> logs, QMatrix q, IdMaps ids = {}) {
    if (n_students < 1 || n_exercises < 1 || n_concepts < 1) {
      throw DataError("dataset needs at least one student, exercise and concept");
    }
    if (q.n_exercises() != n_exercises || q.n_concepts() != n_concepts) {
      throw DataError("Q-matrix shape does not match exercise/concept counts");
    }
    for (std::int32_t e = 0; e < n_exercises; ++e) {
      if (q.concepts(e).empty()) {
        throw DataError("exercise " + std::to_string(e) + " has an empty concept set");
      }
    }
    Dataset d;
    d.n_students_ = n_students;
    d.n_exercises_ = n_exercises;
    d.n_concepts_ = n_concepts;
    d.q_ = std::move(q);
    std::set<std::pair<std::int32_t, std::int32_t>> seen;
    d.logs_.reserve(logs.size());
    for (const Response& r : logs) {
      if (r.student < 0 || r.student >= n_students) {
        throw DataError("student id " + std::to_string(r.student) + " out of range");
      }
      if (r.exercise < 0 || r.exercise >= n_exercises) {
        throw DataError("exercise id " + std::to_string(r.exercise) + " out of range");
      }
      if (r.score != 0 && r.score != 1) throw DataError("score must be 0 or 1");
      if (!seen.emplace(r.student, r.exercise).second) {
        ++d.duplicates_dropped_;
        continue;
      }
      d.logs_.push_back(r);
    }
    d.ids_ = std::move(ids);
    if (d.ids_.students.empty()) d.ids_.students = IdMaps::identity(n_students);
    if (d.ids_.exercises.empty()) d.ids_.exercises = IdMaps::identity(n_exercises);
    if (d.ids_.concepts.empty()) d.ids_.concepts = IdMaps::identity(n_concepts);
    return d;
  }

  std::int32_t n_students() const noexcept { return n_students_; }
  std::int32_t n_exercises() const noexcept { return n_exercises_; }
  std::int32_t n_concepts() const noexcept { return n_concepts_; }
  std::int32_t n_nodes() const noexcept { return n_students_ + n_exercises_ + n_concepts_; }
  const std::vector<Response>& logs() const noexcept { return logs_; }
  const QMatrix& q() const noexcept { return q_; }
  const IdMaps& ids() const noexcept { return ids_; }
  std::size_t duplicates_dropped() const noexcept { return duplicates_dropped_; }

  double correct_rate() const {
    if (logs_.empty()) return 0.0;
    std::size_t right = 0;
    for (const auto& r : logs_) right += static_cast<std::size_t>(r.score);
    return static_cast<double>(right) / static_cast<double>(logs_.size());
  }

 private:
  std::int32_t n_students_ = 0;
  std::int32_t n_exercises_ = 0;
  std::int32_t n_concepts_ = 0;
  std::vector<Response> logs_;
  QMatrix q_;
  IdMaps ids_;
  std::size_t duplicates_dropped_ = 0;
};

/// Sparse N x M matrix with +1 (right), -1 (wrong) at interacting pairs.
struct InteractionMatrix {
  CsrMatrix entries;

  std::int64_t rows() const noexcept { return entries.rows; }
  std::int64_t cols() const noexcept { return entries.cols; }
  std::size_t nnz() const noexcept { return entries.nnz(); }
  double at(std::int32_t s, std::int32_t e) const { return entries.at(s, e); }
};

inline InteractionMatrix build_interaction_matrix(const Dataset& d, std::span<const Response> subset) {
  std::vector<CsrMatrix::Entry> e;
  e.reserve(subset.size());
  std::set<std::pair<std::int32_t, std::int32_t>> seen;
  for (const Response& r : subset) {
    if (r.student < 0 || r.student >= d.n_students() || r.exercise < 0 || r.exercise >= d.n_exercises()) {
      throw DataError("interaction subset references ids outside the dataset");
    }
    if (!seen.emplace(r.student, r.exercise).second) {
      throw DataError("interaction subset contains a duplicated (student, exercise) pair");
    }
    e.push_back({r.student, r.exercise, r.score == 1 ? 1.0 : -1.0});
  }
  return {CsrMatrix::from_entries(d.n_students(), d.n_exercises(), std::move(e))};
}

// ---------------------------------------------------------------------------
// Splitting and noise.

struct SplitRatios {
  double train = 0.7;
  double valid = 0.1;
  double test = 0.2;

  void validate() const {
    if (train <= 0.0 || valid < 0.0 || test < 0.0 || std::abs(train + valid + test - 1.0) > 1e-9) {
      throw ConfigError("split ratios must be non-negative, train > 0, and sum to 1");
    }
  }
};

struct Split {
  std::vector<Response> train;
  std::vector<Response> valid;
  std::vector<Response> test;
  SplitRatios ratios;
  std::uint64_t seed = 0;
  std::size_t excluded_students = 0;  ///< students with no logs at all

  bool operator==(const Split& o) const {
    return train == o.train && valid == o.valid && test == o.test;
  }
};

/// Per-student stratified shuffle split. Each student's logs are shuffled and
/// cut into (train, valid, test) with rounded counts; every student with logs
/// keeps at least one train log.
inline Split split(const Dataset& d, SplitRatios ratios, std::uint64_t seed) {
  ratios.validate();
  std::vector<std::vector<Response>> by_student(static_cast<std::size_t>(d.n_students()));
  for (const Response& r : d.logs()) by_student[static_cast<std::size_t>(r.student)].push_back(r);

  Split out;
  out.ratios = ratios;
  out.seed = seed;
  for (std::int32_t s = 0; s < d.n_students(); ++s) {
    auto& logs = by_student[static_cast<std::size_t>(s)];
    if (logs.empty()) {
      ++out.excluded_students;
      continue;
    }
    Rng rng(seed, "split", static_cast<std::uint64_t>(s));
    rng.shuffle(std::span<Response>(logs));
    const auto n = static_cast<std::int64_t>(logs.size());
    std::int64_t n_test = std::llround(static_cast<double>(n) * ratios.test);
    std::int64_t n_valid = std::llround(static_cast<double>(n) * ratios.valid);
    while (n - n_test - n_valid < 1) {
      if (n_test >= n_valid && n_test > 0) {
        --n_test;
      } else {
        --n_valid;
      }
    }
    const std::int64_t n_train = n - n_test - n_valid;
    out.train.insert(out.train.end(), logs.begin(), logs.begin() + n_train);
    out.valid.insert(out.valid.end(), logs.begin() + n_train, logs.begin() + n_train + n_valid);
    out.test.insert(out.test.end(), logs.begin() + n_train + n_valid, logs.end());
  }
  return out;
}

/// Flips each train score independently with probability p_n.
inline Split inject_noise(const Split& s, double p_n, std::uint64_t seed) {
  if (p_n < 0.0 || p_n > 1.0) throw ConfigError("noise ratio must lie in [0, 1]");
  Split out = s;
  Rng rng(seed, "noise");
  for (Response& r : out.train) {
    if (rng.bernoulli(p_n)) r.score = static_cast<std::int8_t>(1 - r.score);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Synthetic ground-truth datasets.

struct SyntheticSpec {
  std::int32_t n_students = 0;
  std::int32_t n_exercises = 0;
  std::int32_t n_concepts = 0;
  double concepts_per_exercise = 1.0;  ///< mean Q density, >= 1
  std::int32_t logs_per_student = 0;
  double slope = 4.0;                  ///< kappa in P(r=1) = sigma(kappa * disc * mean(mas - diff))
  std::uint64_t seed = 0;
  Matrix mastery;      ///< N x Z in [0,1]
  Matrix difficulty;   ///< M x Z in [0,1]
  Vector discrimination;  ///< M, in (0,1]

  /// Draws mastery and difficulty from U(0,1) and discrimination from U(0.5,1].
  static SyntheticSpec random(std::int32_t n, std::int32_t m, std::int32_t z, double density,
                              std::int32_t logs_per_student, std::uint64_t seed) {
    SyntheticSpec s;
    s.n_students = n;
    s.n_exercises = m;
    s.n_concepts = z;
    s.concepts_per_exercise = density;
    s.logs_per_student = logs_per_student;
    s.seed = seed;
    if (n < 1 || m < 1 || z < 1) throw ConfigError("synthetic spec needs N, M, Z >= 1");
    Rng rng(seed, "truth");
    s.mastery.resize(n, z);
    for (Eigen::Index i = 0; i < s.mastery.size(); ++i) s.mastery.data()[i] = rng.uniform();
    s.difficulty.resize(m, z);
    for (Eigen::Index i = 0; i < s.difficulty.size(); ++i) s.difficulty.data()[i] = rng.uniform();
    s.discrimination.resize(m);
    for (Eigen::Index i = 0; i < m; ++i) s.discrimination[i] = 1.0 - 0.5 * rng.uniform();
    return s;
  }

  /// Factor-structured truth: Mas*[s,k] = sigma(loading * g_s + e_sk) and
  /// Diff*[e,k] = sigma(loading * c_k + e_ek) with g, c, e standard normal, so
  /// a student's masteries share a general ability and an exercise's
  /// difficulty leans on its concepts. Discrimination is U(0.5, 1].
  static SyntheticSpec factor(std::int32_t n, std::int32_t m, std::int32_t z, double density,
                              std::int32_t logs_per_student, std::uint64_t seed, double loading) {
    SyntheticSpec s = random(n, m, z, density, logs_per_student, seed);
    Rng rng(seed, "truth-factor");
    auto logistic = [](double v) { return 1.0 / (1.0 + std::exp(-v)); };
    for (std::int32_t i = 0; i < n; ++i) {
      const double g = rng.normal();
      for (std::int32_t k = 0; k < z; ++k) s.mastery(i, k) = logistic(loading * g + rng.normal());
    }
    std::vector<double> c(static_cast<std::size_t>(z));
    for (double& v : c) v = rng.normal();
    for (std::int32_t e = 0; e < m; ++e) {
      for (std::int32_t k = 0; k < z; ++k) {
        s.difficulty(e, k) = logistic(loading * c[static_cast<std::size_t>(k)] + rng.normal());
      }
    }
    return s;
  }

  void validate() const {
    if (n_students < 1 || n_exercises < 1 || n_concepts < 1) {
      throw ConfigError("synthetic spec needs N, M, Z >= 1");
    }
    if (concepts_per_exercise < 1.0 || concepts_per_exercise > n_concepts) {
      throw ConfigError("concepts_per_exercise must lie in [1, Z]");
    }
    if (logs_per_student < 0 || logs_per_student > n_exercises) {
      throw ConfigError("logs_per_student must lie in [0, M]");
    }
    if (mastery.rows() != n_students || mastery.cols() != n_concepts) {
      throw ConfigError("mastery must be N x Z");
    }
    if (difficulty.rows() != n_exercises || difficulty.cols() != n_concepts) {
      throw ConfigError("difficulty must be M x Z");
    }
    if (discrimination.size() != n_exercises) throw ConfigError("discrimination must have M entries");
    if ((mastery.array() < 0.0).any() || (mastery.array() > 1.0).any() || (difficulty.array() < 0.0).any() ||
        (difficulty.array() > 1.0).any()) {
      throw ConfigError("mastery and difficulty must lie in [0, 1]");
    }
    if ((discrimination.array() <= 0.0).any() || (discrimination.array() > 1.0).any()) {
      throw ConfigError("discrimination must lie in (0, 1]");
    }
  }
};

struct SyntheticDataset {
  Dataset data;
  Matrix mastery;
  Matrix difficulty;
  Vector discrimination;
};

/// Probability of a right answer under the synthetic generator.
inline double synthetic_correct_probability(const SyntheticSpec& s, const QMatrix& q, std::int32_t student,
                                            std::int32_t exercise) {
  const auto concepts = q.concepts(exercise);
  double gap = 0.0;
  for (auto k : concepts) gap += s.mastery(student, k) - s.difficulty(exercise, k);
  gap /= static_cast<double>(concepts.size());
  const double logit = s.slope * s.discrimination[exercise] * gap;
  return 1.0 / (1.0 + std::exp(-logit));
}

inline SyntheticDataset generate_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  Rng rng(spec.seed, "synthetic");
  QMatrix q(spec.n_exercises, spec.n_concepts);
  const auto base = static_cast<std::int32_t>(std::floor(spec.concepts_per_exercise));
  const double frac = spec.concepts_per_exercise - base;
  std::vector<std::int32_t> pool(static_cast<std::size_t>(spec.n_concepts));
  for (std::int32_t e = 0; e < spec.n_exercises; ++e) {
    std::int32_t k = base + (rng.bernoulli(frac) ? 1 : 0);
    k = std::min(k, spec.n_concepts);
    for (std::int32_t c = 0; c < spec.n_concepts; ++c) pool[static_cast<std::size_t>(c)] = c;
    // Partial Fisher-Yates: first k entries become a uniform k-subset.
    for (std::int32_t i = 0; i < k; ++i) {
      const auto j = i + static_cast<std::int32_t>(rng.below(static_cast<std::uint64_t>(spec.n_concepts - i)));
      std::swap(pool[static_cast<std::size_t>(i)], pool[static_cast<std::size_t>(j)]);
      q.set(e, pool[static_cast<std::size_t>(i)]);
    }
  }

  std::vector<Response> logs;
  logs.reserve(static_cast<std::size_t>(spec.n_students) * static_cast<std::size_t>(spec.logs_per_student));
  std::vector<std::int32_t> ex(static_cast<std::size_t>(spec.n_exercises));
  for (std::int32_t s = 0; s < spec.n_students; ++s) {
    for (std::int32_t e = 0; e < spec.n_exercises; ++e) ex[static_cast<std::size_t>(e)] = e;
    for (std::int32_t i = 0; i < spec.logs_per_student; ++i) {
      const auto j = i + static_cast<std::int32_t>(rng.below(static_cast<std::uint64_t>(spec.n_exercises - i)));
      std::swap(ex[static_cast<std::size_t>(i)], ex[static_cast<std::size_t>(j)]);
      const std::int32_t e = ex[static_cast<std::size_t>(i)];
      const double p = synthetic_correct_probability(spec, q, s, e);
      logs.push_back({s, e, static_cast<std::int8_t>(rng.bernoulli(p) ? 1 : 0)});
    }
  }
  SyntheticDataset out;
  out.data = Dataset::create(spec.n_students, spec.n_exercises, spec.n_concepts, std::move(logs), std::move(q));
  out.mastery = spec.mastery;
  out.difficulty = spec.difficulty;
  out.discrimination = spec.discrimination;
  return out;
}

/// Fresh responses from the same ground truth and Q-matrix: each student
/// answers `logs_per_student` distinct exercises drawn with `seed`.
inline std::vector<Response> resample_responses(const SyntheticSpec& spec, const QMatrix& q,
                                                std::int32_t logs_per_student, std::uint64_t seed) {
  spec.validate();
  if (logs_per_student < 0 || logs_per_student > spec.n_exercises) {
    throw ConfigError("logs_per_student must lie in [0, M]");
  }
  Rng rng(seed, "resample");
  std::vector<Response> logs;
  std::vector<std::int32_t> ex(static_cast<std::size_t>(spec.n_exercises));
  for (std::int32_t s = 0; s < spec.n_students; ++s) {
    for (std::int32_t e = 0; e < spec.n_exercises; ++e) ex[static_cast<std::size_t>(e)] = e;
    for (std::int32_t i = 0; i < logs_per_student; ++i) {
      const auto j = i + static_cast<std::int32_t>(rng.below(static_cast<std::uint64_t>(spec.n_exercises - i)));
      std::swap(ex[static_cast<std::size_t>(i)], ex[static_cast<std::size_t>(j)]);
      const std::int32_t e = ex[static_cast<std::size_t>(i)];
      logs.push_back({s, e, static_cast<std::int8_t>(rng.bernoulli(synthetic_correct_probability(spec, q, s, e)) ? 1 : 0)});
    }
  }
  return logs;
}

// ---------------------------------------------------------------------------
// CSV input/output.

namespace detail {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) out.push_back(trim(field));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

/// Reads a headed CSV, checking the header names, and returns the data rows.
inline std::vector<std::vector<std::string>> read_csv(const std::filesystem::path& path,
                                                      const std::vector<std::string>& header) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  std::string line;
  std::size_t line_no = 0;
  std::vector<std::vector<std::string>> rows;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    auto fields = split_csv_line(line);
    if (!have_header) {
      if (fields != header) {
        std::string want;
        for (const auto& h : header) want += (want.empty() ? "" : ",") + h;
        throw ParseError(path.string(), line_no, "expected header '" + want + "'");
      }
      have_header = true;
      continue;
    }
    if (fields.size() != header.size()) {
      throw ParseError(path.string(), line_no,
                       "expected " + std::to_string(header.size()) + " fields, got " + std::to_string(fields.size()));
    }
    for (const auto& f : fields) {
      if (f.empty()) throw ParseError(path.string(), line_no, "empty field");
    }
    fields.push_back(std::to_string(line_no));
    rows.push_back(std::move(fields));
  }
  if (!have_header) throw ParseError(path.string(), line_no + 1, "missing header");
  return rows;
}

inline bool parse_int(const std::string& s, long long& out) {
  const char* b = s.data();
  const char* e = s.data() + s.size();
  auto [p, ec] = std::from_chars(b, e, out);
  return ec == std::errc() && p == e;
}

/// Dense index assignment: numeric ids in numeric order when every id is an
/// integer, lexicographic order otherwise.
inline std::vector<std::string> ordered_ids(const std::set<std::string>& raw) {
  std::vector<std::string> ids(raw.begin(), raw.end());
  bool numeric = true;
  long long v = 0;
  for (const auto& s : ids) numeric = numeric && parse_int(s, v);
  if (numeric) {
    std::sort(ids.begin(), ids.end(), [](const std::string& a, const std::string& b) {
      long long x = 0, y = 0;
      parse_int(a, x);
      parse_int(b, y);
      return x < y;
    });
  }
  return ids;
}

inline std::unordered_map<std::string, std::int32_t> index_of(const std::vector<std::string>& ids) {
  std::unordered_map<std::string, std::int32_t> m;
  for (std::size_t i = 0; i < ids.size(); ++i) m.emplace(ids[i], static_cast<std::int32_t>(i));
  return m;
}

}  // namespace detail

/// Loads `student_id,exercise_id,score` logs and an `exercise_id,concept_id` Q
/// relation. String ids are remapped to dense indices (see IdMaps).
inline Dataset load_dataset(const std::filesystem::path& logs_path, const std::filesystem::path& q_path) {
  const auto log_rows = detail::read_csv(logs_path, {"student_id", "exercise_id", "score"});
  const auto q_rows = detail::read_csv(q_path, {"exercise_id", "concept_id"});

  std::set<std::string> students, exercises, concepts;
  for (const auto& r : log_rows) {
    students.insert(r[0]);
    exercises.insert(r[1]);
    if (r[2] != "0" && r[2] != "1") {
      throw ParseError(logs_path.string(), std::stoull(r[3]), "score must be 0 or 1, got '" + r[2] + "'");
    }
  }
  for (const auto& r : q_rows) {
    exercises.insert(r[0]);
    concepts.insert(r[1]);
  }
  IdMaps ids{detail::ordered_ids(students), detail::ordered_ids(exercises), detail::ordered_ids(concepts)};
  if (ids.concepts.empty()) throw DataError("Q-matrix file lists no concepts");
  const auto s_idx = detail::index_of(ids.students);
  const auto e_idx = detail::index_of(ids.exercises);
  const auto c_idx = detail::index_of(ids.concepts);

  const auto n = static_cast<std::int32_t>(ids.students.size());
  const auto m = static_cast<std::int32_t>(ids.exercises.size());
  const auto z = static_cast<std::int32_t>(ids.concepts.size());
  if (n == 0) throw DataError("response log file is empty");
  QMatrix q(m, z);
  for (const auto& r : q_rows) q.set(e_idx.at(r[0]), c_idx.at(r[1]));
  for (std::int32_t e = 0; e < m; ++e) {
    if (q.concepts(e).empty()) {
      throw DataError("exercise '" + ids.exercises[static_cast<std::size_t>(e)] + "' has an empty concept set");
    }
  }
  std::vector<Response> logs;
  logs.reserve(log_rows.size());
  for (const auto& r : log_rows) {
    logs.push_back({s_idx.at(r[0]), e_idx.at(r[1]), static_cast<std::int8_t>(r[2] == "1" ? 1 : 0)});
  }
  return Dataset::create(n, m, z, std::move(logs), std::move(q), std::move(ids));
}

inline void write_logs_csv(std::ostream& out, const Dataset& d, std::span<const Response> logs) {
  out << "student_id,exercise_id,score\n";
  for (const auto& r : logs) {
    out << d.ids().students[static_cast<std::size_t>(r.student)] << ','
        << d.ids().exercises[static_cast<std::size_t>(r.exercise)] << ',' << static_cast<int>(r.score) << '\n';
  }
}

inline void write_q_csv(std::ostream& out, const Dataset& d) {
  out << "exercise_id,concept_id\n";
  for (std::int32_t e = 0; e < d.n_exercises(); ++e) {
    for (auto k : d.q().concepts(e)) {
      out << d.ids().exercises[static_cast<std::size_t>(e)] << ',' << d.ids().concepts[static_cast<std::size_t>(k)]
          << '\n';
    }
  }
}

}  // namespace orcdf
