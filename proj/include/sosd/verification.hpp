#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace sosd {

enum class Lemma { kL1, kL2, kL3, kL4, kL6, kL7, kL8 };

struct SuiteReport {
  std::string name;
  std::uint64_t seed = 0;
  std::size_t trials = 0;
  std::size_t violations = 0;
  double worst_slack = 0.0;   // most negative slack seen (0 when all clean)
  double min_margin = 0.0;    // tightest satisfied gap
  std::size_t dim_min = 0, dim_max = 0;

  bool passed() const { return violations == 0; }
};

/// Randomized numeric certification of one inequality at absolute slack
/// tolerance 1e-9. Violations are counted, never thrown.
SuiteReport check_inequality_suite(Lemma lemma, std::size_t trials, std::uint64_t seed,
                                   std::size_t dim_min, std::size_t dim_max);

/// Both descent inequalities on exact quadratics 0.5*beta*||w||^2, where the
/// smoothness constant is known rather than estimated.
SuiteReport check_descent_lemma(double beta, double eta, std::size_t trials,
                                std::uint64_t seed);

struct GradcheckConfig {
  std::size_t n, d, classes;
  double sigma;
  double noise;
  std::uint64_t seed;
};

struct GradcheckReport {
  std::size_t configs = 0;
  double worst_rel_error = 0.0;
  bool passed(double threshold = 1e-6) const { return worst_rel_error < threshold; }
};

/// Central finite differences (h = 1e-5) against the analytic gradients of
/// all three trainables, entrywise, error measured relative to the gradient
/// scale of each matrix.
GradcheckReport finite_diff_gradcheck(const std::vector<GradcheckConfig>& configs);
std::vector<GradcheckConfig> default_gradcheck_configs(std::size_t count, std::uint64_t seed);

/// 3 D^2 eta / (2 (1 + sqrt(d))).
double check_phase1_bound(double d, double eta, double big_d);

/// Least-squares slope of ln(dl) against ln(ds); nullopt when fewer than
/// five usable pairs or the abscissa has no variance.
std::optional<double> fit_phase2_exponent(const std::vector<std::pair<double, double>>& pairs);

Lemma lemma_from_string(const std::string& s);
std::string to_string(Lemma lemma);

}  // namespace sosd
