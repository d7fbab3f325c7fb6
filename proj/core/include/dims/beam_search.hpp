#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <utility>
#include <vector>

namespace dims {

struct BeamOptions {
  std::size_t beam_size = 4;
  std::size_t min_len = 10;
  std::size_t max_len = 30;
  std::size_t start_token = 2;
  std::size_t eos_token = 3;
  /// Never emitted (padding, start symbol).
  std::vector<std::size_t> banned;
};

struct BeamResult {
  std::vector<std::size_t> tokens;  // EOS excluded
  double log_prob = 0;
  double score = 0;  // log_prob / steps
  bool ended_with_eos = false;
};

namespace detail {

constexpr double kMaskedLogProb = -std::numeric_limits<double>::infinity();

/// Log-probabilities with banned tokens, and EOS before min_len, masked out.
template <class Probs>
std::vector<double> masked_log_probs(const Probs& probs, std::size_t generated,
                                     const BeamOptions& options) {
  std::vector<double> out(probs.size());
  for (std::size_t i = 0; i < probs.size(); ++i) {
    out[i] = std::log(std::max(static_cast<double>(probs[i]), 1e-300));
  }
  for (auto b : options.banned) {
    if (b < out.size()) out[b] = kMaskedLogProb;
  }
  if (generated < options.min_len && options.eos_token < out.size()) {
    out[options.eos_token] = kMaskedLogProb;
  }
  return out;
}

inline void validate(const BeamOptions& options) {
  if (options.beam_size == 0) throw std::invalid_argument("beam size must be positive");
  if (options.min_len > options.max_len) throw std::invalid_argument("min_len exceeds max_len");
}

}  // namespace detail

/// Length-normalised beam search. `step(state, prev_token)` returns a pair of
/// (probabilities over the output space, next state).
template <class State, class StepFn>
BeamResult beam_search(const State& initial, StepFn&& step, const BeamOptions& options) {
  detail::validate(options);
  struct Hypothesis {
    std::vector<std::size_t> tokens;
    double log_prob;
    State state;
  };
  struct Candidate {
    std::size_t parent;
    std::size_t token;
    double log_prob;
  };

  std::vector<Hypothesis> live{{{}, 0.0, initial}};
  std::vector<BeamResult> finished;
  for (std::size_t t = 0; t < options.max_len && !live.empty(); ++t) {
    std::vector<Candidate> candidates;
    std::vector<State> next_states;
    for (std::size_t h = 0; h < live.size(); ++h) {
      const auto& hyp = live[h];
      auto [probs, next] = step(hyp.state, hyp.tokens.empty() ? options.start_token : hyp.tokens.back());
      next_states.push_back(std::move(next));
      auto logp = detail::masked_log_probs(probs, hyp.tokens.size(), options);
      std::vector<std::size_t> order(logp.size());
      for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
      const auto keep = std::min(order.size(), 2 * options.beam_size);
      std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(keep), order.end(),
                        [&](std::size_t a, std::size_t b) {
                          return logp[a] > logp[b] || (logp[a] == logp[b] && a < b);
                        });
      for (std::size_t i = 0; i < keep; ++i) {
        if (logp[order[i]] == detail::kMaskedLogProb) break;
        candidates.push_back({h, order[i], hyp.log_prob + logp[order[i]]});
      }
    }
    std::stable_sort(candidates.begin(), candidates.end(),
                     [](const Candidate& a, const Candidate& b) { return a.log_prob > b.log_prob; });
    std::vector<Hypothesis> next_live;
    for (const auto& c : candidates) {
      const auto& parent = live[c.parent];
      if (c.token == options.eos_token) {
        finished.push_back({parent.tokens, c.log_prob,
                            c.log_prob / static_cast<double>(parent.tokens.size() + 1), true});
      } else {
        auto tokens = parent.tokens;
        tokens.push_back(c.token);
        next_live.push_back({std::move(tokens), c.log_prob, next_states[c.parent]});
      }
      if (next_live.size() == options.beam_size || finished.size() == options.beam_size) break;
    }
    live = std::move(next_live);
    if (finished.size() >= options.beam_size) break;
  }
  if (finished.empty()) {
    for (const auto& hyp : live) {
      finished.push_back({hyp.tokens, hyp.log_prob,
                          hyp.log_prob / static_cast<double>(std::max<std::size_t>(hyp.tokens.size(), 1)),
                          false});
    }
  }
  if (finished.empty()) return {};
  std::stable_sort(finished.begin(), finished.end(),
                   [](const BeamResult& a, const BeamResult& b) { return a.score > b.score; });
  return finished.front();
}

/// Argmax decoding with the same masking rules as beam_search.
template <class State, class StepFn>
BeamResult greedy_decode(const State& initial, StepFn&& step, const BeamOptions& options) {
  detail::validate(options);
  BeamResult out;
  State state = initial;
  std::size_t prev = options.start_token;
  for (std::size_t t = 0; t < options.max_len; ++t) {
    auto [probs, next] = step(state, prev);
    auto logp = detail::masked_log_probs(probs, out.tokens.size(), options);
    std::size_t best = 0;
    for (std::size_t i = 1; i < logp.size(); ++i) {
      if (logp[i] > logp[best]) best = i;
    }
    out.log_prob += logp[best];
    if (best == options.eos_token) {
      out.ended_with_eos = true;
      break;
    }
    out.tokens.push_back(best);
    state = std::move(next);
    prev = best;
  }
  const auto steps = out.tokens.size() + (out.ended_with_eos ? 1 : 0);
  out.score = out.log_prob / static_cast<double>(std::max<std::size_t>(steps, 1));
  return out;
}

}  // namespace dims
