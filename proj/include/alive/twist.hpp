#ifndef ALIVE_TWIST_HPP
#define ALIVE_TWIST_HPP

#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "alive/abc.hpp"
#include "alive/models.hpp"
#include "alive/rng.hpp"
#include "alive/smc.hpp"

namespace alive {

/// A positive function h_n(k) on the latent state of generation n, together
/// with the pieces the twisted filters need:
///
///   Q(h_n)(k) = integral of f(k' | k) h_n(k') dk'
///   a sampler for k' proportional to f(k' | k) h_n(k')
///
/// and the same two quantities for the first generation, whose latent state
/// has the law of K_1 (K_0 from the prior followed by one transition).
///
/// Steps are 0-based indices into the observation sequence. All values are logs.
class TwistFunction {
 public:
  virtual ~TwistFunction() = default;

  virtual int lag() const { return 0; }
  virtual std::string description() const = 0;

  virtual double log_h(std::span<const double> y, std::size_t step, double k) const = 0;
  virtual double log_qh(std::span<const double> y, std::size_t step, double k_prev) const = 0;
  virtual double sample_twisted(std::span<const double> y, std::size_t step, double k_prev,
                                Stream& stream) const = 0;

  virtual double log_qh_initial(std::span<const double> y) const = 0;
  virtual double sample_twisted_initial(std::span<const double> y, Stream& stream) const = 0;
};

using TwistPtr = std::shared_ptr<const TwistFunction>;

/// Lookahead lag actually used at `step`: min(lag, T - 1 - step). Zero means
/// h is identically one at that step.
int effective_lag(int lag, std::size_t step, std::size_t T);

/// h_n(k) = p(y_{n+l} | k_n = k) for the linear Gaussian model, in closed form.
TwistPtr lg_twist(const LinearGaussianParams& params, int lag);

/// Lookahead twist for the stochastic volatility model under its Gaussian
/// surrogate: h_n(k) = N(y_{n+l}; delta e^{m/2}, 2 gamma^2 e^m) with m = F^l k.
/// Q(h) is computed by Gauss-Hermite quadrature centred at the mode of f h.
/// The twisted transition is sampled exactly: from a tangent hull when
/// delta = 0 (f h is then log-concave), otherwise by rejection from f.
TwistPtr sv_twist(const StochVolParams& params, int lag);

/// h = value everywhere. The twisted filters then reduce to the untwisted ones.
TwistPtr constant_twist(const HmmModel& model, double value = 1.0);

/// Discrete-model twist from a table: table[step][state] > 0.
TwistPtr discrete_table_twist(const DiscreteHmmParams& params, std::vector<std::vector<double>> table);

/// Backward-recursion table beta_n(s) = P(y_{n+1:T} accepted | K_n = s) for the
/// ABC-smeared discrete model: the finite-horizon optimal twist.
std::vector<std::vector<double>> discrete_oracle_table(const DiscreteHmmParams& params,
                                                       std::span<const double> observations);

/// Twisted bootstrap particle filter: one uniformly chosen slot per step takes
/// an ancestor proportional to W * Q(h) and a state proportional to f * h.
BootstrapResult twisted_bootstrap_filter(const HmmModel& model, const TwistFunction& twist,
                                         std::span<const double> observations, std::size_t N,
                                         Stream& stream);

/// Alive twisted particle filter. Each step draws one twisted particle first,
/// then untwisted particles until N acceptances, and finally moves the twisted
/// particle to a uniform position among the first T-1.
///
/// Per-step log factor:
///   log(N-1) - log(T-1) + log Phi(h) - log[(T-1)^{-1} sum_{i<T} h(k_i)]
/// where Phi(h) = sum_j W_j Q(h)(k_j) / sum_j W_j over the previous pool.
AliveResult alive_twisted_filter(const HmmModel& model, const AbcKernel& kernel,
                                 const TwistFunction& twist, std::span<const double> observations,
                                 std::size_t N, std::size_t cap, Stream& stream);

}  // namespace alive

#endif  // ALIVE_TWIST_HPP
