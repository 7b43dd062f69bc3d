#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <string>
#include <vector>

#include "orcdf.hpp"

namespace orcdf::testing {

inline Matrix random_matrix(Eigen::Index r, Eigen::Index c, Rng& rng, double scale = 1.0) {
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = scale * (2.0 * rng.uniform() - 1.0);
  return m;
}

/// Scalar function of a list of matrix inputs, written against a tape.
using VarFn = std::function<Var(Tape&, const std::vector<Var>&)>;

/// Norm-wise relative error between analytic and central-difference
/// gradients, worst over the inputs.
inline double gradcheck(const VarFn& f, const std::vector<Matrix>& inputs, double h = 1e-5) {
  std::vector<Tensor> params;
  for (std::size_t i = 0; i < inputs.size(); ++i) params.emplace_back("x" + std::to_string(i), inputs[i]);
  {
    Tape tape;
    std::vector<Var> vs;
    for (auto& p : params) vs.push_back(tape.leaf(p));
    tape.backward(f(tape, vs));
  }
  auto eval = [&](const std::vector<Matrix>& xs) {
    Tape tape(Tape::Options{false, true});
    std::vector<Var> vs;
    for (const auto& x : xs) vs.push_back(tape.constant(x));
    return f(tape, vs).scalar();
  };
  double worst = 0.0;
  std::vector<Matrix> xs = inputs;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    Matrix num(inputs[i].rows(), inputs[i].cols());
    for (Eigen::Index k = 0; k < num.size(); ++k) {
      const double x0 = xs[i].data()[k];
      xs[i].data()[k] = x0 + h;
      const double fp = eval(xs);
      xs[i].data()[k] = x0 - h;
      const double fm = eval(xs);
      xs[i].data()[k] = x0;
      num.data()[k] = (fp - fm) / (2.0 * h);
    }
    const Matrix ana = params[i].has_grad() ? params[i].grad : Matrix::Zero(num.rows(), num.cols());
    const double scale = std::max({ana.norm(), num.norm(), 1e-12});
    worst = std::max(worst, (ana - num).norm() / scale);
  }
  return worst;
}

/// Same check against named parameters that a closure reads through
/// tape.leaf(). At most `per_tensor` entries of each tensor are probed.
inline double gradcheck_params(const std::function<Var(Tape&)>& f, const ParameterList& params, Rng& rng,
                               std::size_t per_tensor = 24, double h = 1e-5) {
  for (Tensor* p : params) p->zero_grad();
  {
    Tape tape;
    tape.backward(f(tape));
  }
  auto eval = [&] {
    Tape tape(Tape::Options{false, true});
    return f(tape).scalar();
  };
  double worst = 0.0;
  for (Tensor* p : params) {
    const auto n = static_cast<std::size_t>(p->value.size());
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    if (n > per_tensor) {
      rng.shuffle(std::span<std::size_t>(idx));
      idx.resize(per_tensor);
    }
    Eigen::VectorXd ana(static_cast<Eigen::Index>(idx.size())), num(static_cast<Eigen::Index>(idx.size()));
    for (std::size_t j = 0; j < idx.size(); ++j) {
      double& x = p->value.data()[idx[j]];
      const double x0 = x;
      x = x0 + h;
      const double fp = eval();
      x = x0 - h;
      const double fm = eval();
      x = x0;
      num[static_cast<Eigen::Index>(j)] = (fp - fm) / (2.0 * h);
      ana[static_cast<Eigen::Index>(j)] = p->grad.data()[idx[j]];
    }
    const double scale = std::max({ana.norm(), num.norm(), 1e-12});
    worst = std::max(worst, (ana - num).norm() / scale);
  }
  return worst;
}

/// Random dataset with every student and exercise present; each student
/// answers `per_student` distinct exercises.
inline Dataset random_dataset(std::int32_t n, std::int32_t m, std::int32_t z, std::int32_t per_student, Rng& rng) {
  QMatrix q(m, z);
  for (std::int32_t e = 0; e < m; ++e) {
    q.set(e, static_cast<std::int32_t>(rng.below(static_cast<std::uint64_t>(z))));
    if (rng.bernoulli(0.3)) q.set(e, static_cast<std::int32_t>(rng.below(static_cast<std::uint64_t>(z))));
  }
  std::vector<Response> logs;
  std::vector<std::int32_t> ex(static_cast<std::size_t>(m));
  for (std::int32_t s = 0; s < n; ++s) {
    for (std::int32_t e = 0; e < m; ++e) ex[static_cast<std::size_t>(e)] = e;
    rng.shuffle(std::span<std::int32_t>(ex));
    for (std::int32_t i = 0; i < per_student; ++i) {
      logs.push_back({s, ex[static_cast<std::size_t>(i)], static_cast<std::int8_t>(rng.bernoulli(0.5) ? 1 : 0)});
    }
  }
  return Dataset::create(n, m, z, std::move(logs), std::move(q));
}

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("orcdf_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

  std::filesystem::path write(const std::string& name, const std::string& text) const {
    std::ofstream(path_ / name) << text;
    return path_ / name;
  }

 private:
  std::filesystem::path path_;
};

inline std::vector<double> to_vector(const Vector& v) { return {v.data(), v.data() + v.size()}; }

inline double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  if (n == 0) return std::nan("");
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace orcdf::testing
