#include "barker/sampler.hpp"

#include <cassert>
#include <cstdio>
#include <fstream>

namespace barker {

ChainState make_chain_state(const TargetModel& target, const Vector& x, Family family) {
  ChainState s;
  s.x = x;
  if (uses_gradient(family)) {
    s.log_pi = target.log_density_and_grad(x, s.grad);
    if (!all_finite(s.grad)) throw UsageError("initial point has a non-finite gradient");
  } else {
    s.log_pi = target.log_density(x);
  }
  if (!std::isfinite(s.log_pi)) throw UsageError("initial point has non-finite log density");
  return s;
}

StepResult mh_step(ChainState& state, const ProposalKernel& kernel, const TargetModel& target,
                   Rng& rng) {
#ifndef NDEBUG
  assert(std::abs(target.log_density(state.x) - state.log_pi) <=
         1e-9 * std::max(1.0, std::abs(state.log_pi)));
#endif
  const bool gradient = uses_gradient(kernel.family);
  StepResult r;
  ProposalOutcome out = propose(kernel, state.x, state.grad, target, rng);
  double log_pi_y = -std::numeric_limits<double>::infinity();
  Vector grad_y;
  bool divergent = out.aux.divergent;
  if (kernel.family == Family::HMC) {
    r.grad_evals = out.grad_evals;
    log_pi_y = out.log_pi_y.value_or(log_pi_y);
    grad_y = std::move(out.grad_y);
  } else if (gradient) {
    r.grad_evals = 1;
    if (!divergent) {
      log_pi_y = target.log_density_and_grad(out.y, grad_y);
      complete_outcome(out, kernel, state.x, state.grad, grad_y);
      divergent = out.aux.divergent;
    }
  } else if (!divergent) {
    log_pi_y = target.log_density(out.y);
  }

  double log_alpha = log_pi_y - state.log_pi + out.log_correction;
  if (divergent || std::isnan(log_alpha)) {
    divergent = true;
    log_alpha = -std::numeric_limits<double>::infinity();
  }
  r.accept_prob = std::exp(std::min(0.0, log_alpha));
  r.divergent = divergent;
  const double u = rng.uniform();
  r.accepted = u < r.accept_prob;
  r.proposal = std::move(out.y);
  if (r.accepted) {
    state.x = r.proposal;
    state.log_pi = log_pi_y;
    if (gradient) state.grad = std::move(grad_y);
  }
  state.t += 1;
  return r;
}

namespace {

struct TraceRecorder {
  Trace& trace;
  const TraceOptions& options;
  long index = 0;

  TraceRecorder(Trace& tr, const TraceOptions& opt, const Vector& init, long n)
      : trace(tr), options(opt) {
    const Eigen::Index d = init.size();
    trace.initial = init;
    trace.accept_prob.resize(n);
    trace.accepted.resize(n);
    trace.proposed_sq_jump.resize(n);
    if (options.store_samples) trace.samples.resize(n, d);
    if (options.store_proposals) trace.proposals.resize(n, d);
  }

  void record(const Vector& before, const ChainState& s, const StepResult& r) {
    trace.accept_prob[index] = r.accept_prob;
    trace.accepted[index] = r.accepted ? 1 : 0;
    trace.proposed_sq_jump[index] =
        all_finite(r.proposal) ? (r.proposal - before).squaredNorm() : 0.0;
    if (options.store_samples) trace.samples.row(index) = s.x.transpose();
    if (options.store_proposals) trace.proposals.row(index) = r.proposal.transpose();
    trace.grad_evals += r.grad_evals;
    trace.divergences += r.divergent ? 1 : 0;
    ++index;
  }
};

nlohmann::json base_manifest(const ProposalKernel& kernel, const TargetModel& target,
                             long n_steps, std::uint64_t seed) {
  return {{"seed", seed}, {"n_steps", n_steps}, {"kernel", kernel.describe()},
          {"target", target.describe()}};
}

}  // namespace

Trace run_chain(const Vector& init, const ProposalKernel& kernel, const TargetModel& target,
                long n_steps, Rng& rng, const TraceOptions& options) {
  if (n_steps < 1) throw UsageError("run_chain: n_steps must be >= 1");
  kernel.validate();
  Trace trace;
  trace.seed = rng.seed();
  TraceRecorder rec(trace, options, init, n_steps);
  ChainState state = make_chain_state(target, init, kernel.family);
  Vector before;
  for (long t = 0; t < n_steps; ++t) {
    before = state.x;
    const StepResult r = mh_step(state, kernel, target, rng);
    rec.record(before, state, r);
    if (options.observer) options.observer(state, r);
  }
  trace.manifest = base_manifest(kernel, target, n_steps, trace.seed);
  trace.manifest["grad_evals"] = trace.grad_evals;
  trace.manifest["divergences"] = trace.divergences;
  return trace;
}

AdaptiveRun run_chain_adaptive(const Vector& init, const ProposalKernel& base,
                               AdaptationState adaptation, const TargetModel& target,
                               long n_steps, Rng& rng, const AdaptiveOptions& options) {
  if (n_steps < 1) throw UsageError("run_chain_adaptive: n_steps must be >= 1");
  if (adaptation.dim() != target.dim())
    throw UsageError("run_chain_adaptive: adaptation state dimension mismatch");
  AdaptiveRun run;
  run.trace.seed = rng.seed();
  TraceRecorder rec(run.trace, options.trace, init, n_steps);
  ChainState state = make_chain_state(target, init, base.family);
  Vector before;
  for (long t = 0; t < n_steps; ++t) {
    const ProposalKernel kernel = adapted_kernel(adaptation, base);
    before = state.x;
    const StepResult r = mh_step(state, kernel, target, rng);
    adapt_update(adaptation, before, r.accept_prob);
    rec.record(before, state, r);
    if (options.record_every > 0 && (t + 1) % options.record_every == 0)
      run.adaptation.record(adaptation);
    if (options.trace.observer) options.trace.observer(state, r);
    if (options.observer) options.observer(state, r, adaptation);
  }
  run.trace.manifest = base_manifest(base, target, n_steps, run.trace.seed);
  run.trace.manifest["adaptation"] = {{"kappa", adaptation.kappa},
                                      {"alpha_star", adaptation.alpha_star},
                                      {"diagonal_only", adaptation.diagonal_only}};
  run.trace.manifest["grad_evals"] = run.trace.grad_evals;
  run.trace.manifest["divergences"] = run.trace.divergences;
  run.final_state = std::move(adaptation);
  return run;
}

void write_trace_csv(const Trace& trace, const std::string& path) {
  if (trace.samples.rows() != trace.n_steps())
    throw UsageError("write_trace_csv: trace was recorded without samples");
  std::ofstream out(path);
  if (!out) throw UsageError("cannot open " + path);
  const Eigen::Index d = trace.samples.cols();
  out << 't';
  for (Eigen::Index i = 0; i < d; ++i) out << ",x_" << (i + 1);
  out << ",accept_prob,accepted\n";
  char buf[32];
  for (long t = 0; t < trace.n_steps(); ++t) {
    out << (t + 1);
    for (Eigen::Index i = 0; i < d; ++i) {
      std::snprintf(buf, sizeof buf, "%.17g", trace.samples(t, i));
      out << ',' << buf;
    }
    std::snprintf(buf, sizeof buf, "%.17g", trace.accept_prob[t]);
    out << ',' << buf << ',' << int(trace.accepted[t]) << '\n';
  }
}

void write_trace_manifest(const Trace& trace, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw UsageError("cannot open " + path);
  out << trace.manifest.dump(2) << '\n';
}

}  // namespace barker
