#pragma once

#include <cstddef>
#include <functional>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "mmaccel/random.hpp"

namespace mmaccel {

/// Thrown when a state function returns a non-finite value.
class EvaluationError : public std::runtime_error {
 public:
  EvaluationError(std::size_t particle, std::string label, const std::string& what)
      : std::runtime_error(what), particle_(particle), label_(std::move(label)) {}
  std::size_t particle() const noexcept { return particle_; }
  const std::string& label() const noexcept { return label_; }

 private:
  std::size_t particle_;
  std::string label_;
};

/// J weighted particles in d dimensions. Positions are stored row-major
/// (particle j occupies [j*d, (j+1)*d)). Weights are nonnegative and sum to 1.
class Ensemble {
 public:
  /// Validates and stores. Throws std::invalid_argument when the sizes
  /// disagree, a weight is negative or non-finite, or the weights do not sum
  /// to 1 within 1e-12.
  Ensemble(std::size_t dim, std::vector<double> positions, std::vector<double> weights);

  /// Equal weights 1/J.
  static Ensemble uniform(std::size_t dim, std::vector<double> positions);
  /// J copies of one point, equal weights.
  static Ensemble point_mass(std::span<const double> point, std::size_t count);
  /// Rescales arbitrary nonnegative masses to sum 1. Throws if the total is
  /// not positive and finite.
  static Ensemble normalized(std::size_t dim, std::vector<double> positions,
                             std::vector<double> masses);

  std::size_t size() const noexcept { return weights_.size(); }
  std::size_t dim() const noexcept { return dim_; }

  std::span<const double> position(std::size_t j) const noexcept {
    return {positions_.data() + j * dim_, dim_};
  }
  double weight(std::size_t j) const noexcept { return weights_[j]; }

  const std::vector<double>& positions() const noexcept { return positions_; }
  const std::vector<double>& weights() const noexcept { return weights_; }

  /// Same weights, new positions (the integrator's update path).
  Ensemble with_positions(std::vector<double> positions) const;

  /// Weighted mean and (population) variance of one coordinate.
  double mean(std::size_t coord) const;
  double variance(std::size_t coord) const;
  /// Kish effective sample size 1 / sum(w^2).
  double effective_size() const;

 private:
  Ensemble() = default;
  std::size_t dim_ = 0;
  std::vector<double> positions_;
  std::vector<double> weights_;
};

/// Ordered family R_0 = 1, R_1, ..., R_L of scalar functions on R^d.
class StateFunctions {
 public:
  using Function = std::function<double(std::span<const double>)>;

  /// R_0 = 1 is prepended; `functions` holds R_1..R_L. Requires L >= 1 and
  /// labels.size() == functions.size().
  StateFunctions(std::vector<Function> functions, std::vector<std::string> labels);

  /// L + 1, including R_0.
  std::size_t size() const noexcept { return functions_.size() + 1; }
  /// L.
  std::size_t count() const noexcept { return functions_.size(); }

  double operator()(std::size_t l, std::span<const double> x) const {
    return l == 0 ? 1.0 : functions_[l - 1](x);
  }
  /// Writes R_0..R_L at x into out (size L+1).
  void evaluate(std::span<const double> x, std::span<double> out) const;

  /// Label of R_l; R_0 is "1".
  const std::string& label(std::size_t l) const { return labels_[l]; }

 private:
  std::vector<Function> functions_;
  std::vector<std::string> labels_;
};

/// Macroscopic state m_0..m_L at a given model time.
struct MacroState {
  std::vector<double> values;
  double time = 0.0;

  std::size_t size() const noexcept { return values.size(); }
  double operator[](std::size_t l) const { return values[l]; }
};

/// Row-major J x (L+1) table of R_l(X_j). Throws EvaluationError on the
/// first non-finite entry.
std::vector<double> evaluate_features(const Ensemble& ens, const StateFunctions& R);

/// m_l = sum_j w_j R_l(X_j), summed in fixed chunk order; m_0 is exactly 1.
MacroState restrict_to_macro(const Ensemble& ens, const StateFunctions& R, double time = 0.0);

/// sum_j w_j ln(J w_j) with 0 ln 0 = 0. Lies in [0, ln J].
double weight_entropy(const Ensemble& ens);

/// Stratified resampling: one uniform per stratum [(k-1)/J, k/J), drawn in
/// stratum order from `rng`. Output has J equally weighted copies.
Ensemble stratified_resample(const Ensemble& ens, RandomStream& rng);

/// Copy counts n_j produced by stratified resampling for the given weights
/// and stratum uniforms (u_k in [0,1)). Sum of counts is J.
std::vector<std::size_t> stratified_counts(std::span<const double> weights,
                                           std::span<const double> stratum_uniforms);

/// CSV snapshot: header particle,weight,x0..x{d-1}; 17 significant digits.
void write_ensemble_csv(std::ostream& out, const Ensemble& ens);
Ensemble read_ensemble_csv(std::istream& in);

}  // namespace mmaccel
