#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "barker/adaptation.hpp"
#include "barker/proposals.hpp"
#include "barker/targets.hpp"

namespace barker {

/// Current position with cached target evaluations. `grad` is left empty for
/// gradient-free families.
struct ChainState {
  Vector x;
  double log_pi = 0.0;
  Vector grad;
  long t = 0;
};

ChainState make_chain_state(const TargetModel& target, const Vector& x, Family family);

struct StepResult {
  double accept_prob = 0.0;
  bool accepted = false;
  bool divergent = false;
  Vector proposal;
  int grad_evals = 0;
};

/// One Metropolis-Hastings transition. A divergent proposal gets acceptance
/// probability 0. The acceptance uniform is drawn on every step.
StepResult mh_step(ChainState& state, const ProposalKernel& kernel, const TargetModel& target,
                   Rng& rng);

struct Trace {
  Vector initial;
  /// Row t is the state after step t (empty when not stored).
  Matrix samples;
  /// Row t is the point proposed at step t (empty when not stored).
  Matrix proposals;
  Vector accept_prob;
  std::vector<std::uint8_t> accepted;
  /// ||y_t - x_t||^2 for the proposal made at step t.
  Vector proposed_sq_jump;
  long grad_evals = 0;
  long divergences = 0;
  std::uint64_t seed = 0;
  nlohmann::json manifest;

  long n_steps() const { return accept_prob.size(); }
  double mean_accept() const { return accept_prob.size() ? accept_prob.mean() : 0.0; }
};

struct TraceOptions {
  bool store_samples = true;
  bool store_proposals = true;
  /// Called after every step with the post-step state.
  std::function<void(const ChainState&, const StepResult&)> observer;
};

Trace run_chain(const Vector& init, const ProposalKernel& kernel, const TargetModel& target,
                long n_steps, Rng& rng, const TraceOptions& options = {});

struct AdaptiveRun {
  Trace trace;
  AdaptationTrace adaptation;
  AdaptationState final_state;
};

struct AdaptiveOptions {
  TraceOptions trace;
  /// Record the adaptation state every this many steps (0 disables).
  long record_every = 1;
  /// Called after every step with the post-step chain and adaptation states.
  std::function<void(const ChainState&, const StepResult&, const AdaptationState&)> observer;
};

/// Adaptive chain: each step proposes with adapted_kernel(state, base), then
/// updates the adaptation state from the pre-step point and its acceptance
/// probability.
AdaptiveRun run_chain_adaptive(const Vector& init, const ProposalKernel& base,
                               AdaptationState adaptation, const TargetModel& target,
                               long n_steps, Rng& rng, const AdaptiveOptions& options = {});

/// Columns: t, x_1..x_d, accept_prob, accepted. Requires stored samples.
void write_trace_csv(const Trace& trace, const std::string& path);
void write_trace_manifest(const Trace& trace, const std::string& path);

}  // namespace barker
