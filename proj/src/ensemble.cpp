#include "mmaccel/ensemble.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>

#include "mmaccel/csv.hpp"
#include "mmaccel/parallel.hpp"

namespace mmaccel {

namespace {
constexpr double kWeightSumTol = 1e-12;

// Neumaier-compensated sum; plain summation of 1e5 equal weights drifts past
// the 1e-12 normalization tolerance.
double compensated_sum(std::span<const double> xs) {
  double sum = 0.0, comp = 0.0;
  for (double x : xs) {
    const double t = sum + x;
    comp += std::abs(sum) >= std::abs(x) ? (sum - t) + x : (x - t) + sum;
    sum = t;
  }
  return sum + comp;
}
}  // namespace

Ensemble::Ensemble(std::size_t dim, std::vector<double> positions, std::vector<double> weights)
    : dim_(dim), positions_(std::move(positions)), weights_(std::move(weights)) {
  if (dim_ == 0) throw std::invalid_argument("ensemble: dimension must be positive");
  if (weights_.empty()) throw std::invalid_argument("ensemble: needs at least one particle");
  if (positions_.size() != weights_.size() * dim_) {
    throw std::invalid_argument("ensemble: " + std::to_string(positions_.size()) +
                                " coordinates for " + std::to_string(weights_.size()) +
                                " particles of dimension " + std::to_string(dim_));
  }
  for (std::size_t j = 0; j < weights_.size(); ++j) {
    const double w = weights_[j];
    if (!(w >= 0.0) || !std::isfinite(w)) {
      throw std::invalid_argument("ensemble: invalid weight at particle " + std::to_string(j));
    }
  }
  const double sum = compensated_sum(weights_);
  if (std::abs(sum - 1.0) > kWeightSumTol) {
    std::ostringstream msg;
    msg.precision(17);
    msg << "ensemble: weights sum to " << sum << ", expected 1";
    throw std::invalid_argument(msg.str());
  }
}

Ensemble Ensemble::uniform(std::size_t dim, std::vector<double> positions) {
  if (dim == 0 || positions.size() % dim != 0 || positions.empty()) {
    throw std::invalid_argument("ensemble: positions do not form whole particles");
  }
  const std::size_t n = positions.size() / dim;
  return Ensemble(dim, std::move(positions), std::vector<double>(n, 1.0 / static_cast<double>(n)));
}

Ensemble Ensemble::point_mass(std::span<const double> point, std::size_t count) {
  std::vector<double> pos;
  pos.reserve(point.size() * count);
  for (std::size_t j = 0; j < count; ++j) pos.insert(pos.end(), point.begin(), point.end());
  return uniform(point.size(), std::move(pos));
}

Ensemble Ensemble::normalized(std::size_t dim, std::vector<double> positions,
                              std::vector<double> masses) {
  const double total = compensated_sum(masses);
  if (!(total > 0.0) || !std::isfinite(total)) {
    throw std::invalid_argument("ensemble: total mass is not positive and finite");
  }
  for (double& m : masses) m /= total;
  return Ensemble(dim, std::move(positions), std::move(masses));
}

Ensemble Ensemble::with_positions(std::vector<double> positions) const {
  if (positions.size() != positions_.size()) {
    throw std::invalid_argument("ensemble: replacement positions have the wrong size");
  }
  Ensemble out;
  out.dim_ = dim_;
  out.positions_ = std::move(positions);
  out.weights_ = weights_;
  return out;
}

double Ensemble::mean(std::size_t coord) const {
  double m = 0.0;
  for (std::size_t j = 0; j < size(); ++j) m += weights_[j] * positions_[j * dim_ + coord];
  return m;
}

double Ensemble::variance(std::size_t coord) const {
  const double m = mean(coord);
  double v = 0.0;
  for (std::size_t j = 0; j < size(); ++j) {
    const double d = positions_[j * dim_ + coord] - m;
    v += weights_[j] * d * d;
  }
  return v;
}

double Ensemble::effective_size() const {
  double s = 0.0;
  for (double w : weights_) s += w * w;
  return 1.0 / s;
}

StateFunctions::StateFunctions(std::vector<Function> functions, std::vector<std::string> labels)
    : functions_(std::move(functions)) {
  if (functions_.empty()) throw std::invalid_argument("state functions: need L >= 1");
  if (labels.size() != functions_.size()) {
    throw std::invalid_argument("state functions: one label per function required");
  }
  labels_.reserve(labels.size() + 1);
  labels_.emplace_back("1");
  for (auto& l : labels) labels_.push_back(std::move(l));
}

void StateFunctions::evaluate(std::span<const double> x, std::span<double> out) const {
  out[0] = 1.0;
  for (std::size_t l = 0; l < functions_.size(); ++l) out[l + 1] = functions_[l](x);
}

std::vector<double> evaluate_features(const Ensemble& ens, const StateFunctions& R) {
  const std::size_t width = R.size();
  std::vector<double> table(ens.size() * width);
  parallel_for(ens.size(), kDefaultChunk, [&](std::size_t b, std::size_t e) {
    for (std::size_t j = b; j < e; ++j) {
      std::span<double> row(table.data() + j * width, width);
      R.evaluate(ens.position(j), row);
      for (std::size_t l = 1; l < width; ++l) {
        if (!std::isfinite(row[l])) {
          throw EvaluationError(j, R.label(l),
                                "state function '" + R.label(l) + "' is not finite at particle " +
                                    std::to_string(j));
        }
      }
    }
  });
  return table;
}

MacroState restrict_to_macro(const Ensemble& ens, const StateFunctions& R, double time) {
  const std::size_t width = R.size();
  const auto features = evaluate_features(ens, R);
  const auto& w = ens.weights();
  MacroState m;
  m.time = time;
  m.values = chunked_sum(ens.size(), width, [&](std::size_t b, std::size_t e, double* acc) {
    for (std::size_t j = b; j < e; ++j) {
      const double* row = features.data() + j * width;
      for (std::size_t l = 1; l < width; ++l) acc[l] += w[j] * row[l];
    }
  });
  m.values[0] = 1.0;
  return m;
}

double weight_entropy(const Ensemble& ens) {
  const double J = static_cast<double>(ens.size());
  double h = 0.0;
  for (double w : ens.weights()) {
    if (w > 0.0) h += w * std::log(J * w);
  }
  return std::clamp(h, 0.0, std::log(J));
}

std::vector<std::size_t> stratified_counts(std::span<const double> weights,
                                           std::span<const double> stratum_uniforms) {
  const std::size_t J = weights.size();
  const std::size_t K = stratum_uniforms.size();
  std::vector<std::size_t> counts(J, 0);
  // The last stratum is closed at 1; rounding in the running sum must not hand
  // copies to trailing zero-weight particles.
  std::size_t last = J - 1;
  while (last > 0 && weights[last] == 0.0) --last;
  std::size_t j = 0;
  double upper = weights[0];
  for (std::size_t k = 0; k < K; ++k) {
    const double u = (static_cast<double>(k) + stratum_uniforms[k]) / static_cast<double>(K);
    while (j < last && u >= upper) {
      ++j;
      upper += weights[j];
    }
    ++counts[j];
  }
  return counts;
}

Ensemble stratified_resample(const Ensemble& ens, RandomStream& rng) {
  const std::size_t J = ens.size();
  std::vector<double> u(J);
  for (auto& x : u) x = rng.uniform();
  const auto counts = stratified_counts(ens.weights(), u);
  std::vector<double> pos;
  pos.reserve(ens.positions().size());
  for (std::size_t j = 0; j < J; ++j) {
    const auto x = ens.position(j);
    for (std::size_t c = 0; c < counts[j]; ++c) pos.insert(pos.end(), x.begin(), x.end());
  }
  return Ensemble::uniform(ens.dim(), std::move(pos));
}

void write_ensemble_csv(std::ostream& out, const Ensemble& ens) {
  std::vector<std::string> header{"particle", "weight"};
  for (std::size_t i = 0; i < ens.dim(); ++i) header.push_back("x" + std::to_string(i));
  csv::write_row(out, header);
  for (std::size_t j = 0; j < ens.size(); ++j) {
    out << j << ',' << csv::format(ens.weight(j));
    for (double x : ens.position(j)) out << ',' << csv::format(x);
    out << '\n';
  }
}

Ensemble read_ensemble_csv(std::istream& in) {
  const auto table = csv::read_numeric(in);
  if (table.header.size() < 3 || table.header[0] != "particle" || table.header[1] != "weight") {
    throw std::runtime_error("ensemble csv: expected header particle,weight,x0,...");
  }
  const std::size_t dim = table.header.size() - 2;
  std::vector<double> pos, w;
  pos.reserve(table.rows.size() * dim);
  w.reserve(table.rows.size());
  for (const auto& row : table.rows) {
    w.push_back(row[1]);
    pos.insert(pos.end(), row.begin() + 2, row.end());
  }
  return Ensemble(dim, std::move(pos), std::move(w));
}

}  // namespace mmaccel
