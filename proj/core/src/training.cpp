#include "dims/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <random>
#include <sstream>

namespace dims {

namespace fs = std::filesystem;

namespace {

constexpr std::uint64_t kMix = 0x9E3779B97F4A7C15ULL;

metrics::RougeScore add_scaled(metrics::RougeScore acc, const metrics::RougeScore& s, double w) {
  auto add = [w](metrics::RougeComponent& a, const metrics::RougeComponent& b) {
    a.precision += w * b.precision;
    a.recall += w * b.recall;
    a.f1 += w * b.f1;
  };
  add(acc.rouge1, s.rouge1);
  add(acc.rouge2, s.rouge2);
  add(acc.rougeL, s.rougeL);
  return acc;
}

std::string format_double(double v) {
  std::ostringstream out;
  out << std::setprecision(9) << v;
  return out.str();
}

std::string gradient_diagnostics(const ParameterStore& store) {
  std::ostringstream out;
  for (const auto& [name, param] : store) {
    Real norm = 0;
    std::size_t bad = 0;
    if (param.has_grad()) {
      for (auto g : param.grad()) {
        if (std::isfinite(g)) {
          norm += g * g;
        } else {
          ++bad;
        }
      }
    }
    Real pnorm = 0;
    for (auto v : param.values()) pnorm += v * v;
    out << name << " param_norm=" << std::sqrt(pnorm) << " grad_norm=" << std::sqrt(norm);
    if (bad) out << " non_finite_grads=" << bad;
    out << '\n';
  }
  return out.str();
}

}  // namespace

EvalResult evaluate(const DimsModel& model, const Vocabulary& vocab, std::span<const Sample> samples,
                    const EvalOptions& options) {
  EvalResult result;
  std::vector<metrics::RankingResult> rankings;
  for (const auto& sample : samples) {
    auto ids = encode_sample(sample, vocab);
    auto pred = options.greedy ? model.predict_greedy(sample, ids, vocab)
                               : model.predict(sample, ids, vocab, options.beam_size);
    SampleEval se;
    se.id = sample.id;
    se.summary = pred.summary;
    se.reference = sample.summary;
    se.cover = pred.cover;
    se.positive = sample.positive;
    se.cover_scores.assign(pred.cover_scores.begin(), pred.cover_scores.end());
    se.rouge = metrics::rouge(se.summary, se.reference);
    rankings.push_back({se.cover_scores, se.positive});
    result.samples.push_back(std::move(se));
  }
  if (samples.empty()) return result;
  const double w = 1.0 / static_cast<double>(samples.size());
  for (const auto& se : result.samples) result.rouge = add_scaled(result.rouge, se.rouge, w);
  result.map = metrics::map_score(rankings);
  result.candidates = rankings.front().scores.size();
  const bool uniform = std::all_of(rankings.begin(), rankings.end(), [&](const auto& r) {
    return r.scores.size() == result.candidates;
  });
  if (uniform) {
    for (auto k : options.recall_ks) {
      if (k <= result.candidates) {
        result.recall.emplace_back(k, metrics::recall_at_k(rankings, result.candidates, k));
      }
    }
  }
  return result;
}

EvalResult average_results(std::span<const EvalResult> results) {
  EvalResult avg;
  if (results.empty()) return avg;
  const double w = 1.0 / static_cast<double>(results.size());
  avg.candidates = results.front().candidates;
  avg.recall = results.front().recall;
  for (auto& [k, v] : avg.recall) v = 0;
  for (const auto& r : results) {
    avg.rouge = add_scaled(avg.rouge, r.rouge, w);
    avg.map += w * r.map;
    for (std::size_t i = 0; i < avg.recall.size() && i < r.recall.size(); ++i) {
      avg.recall[i].second += w * r.recall[i].second;
    }
  }
  return avg;
}

Trainer::Trainer(const RunConfig& config, Vocabulary vocab, std::vector<Sample> train,
                 std::vector<Sample> validation, TrainerOptions options)
    : config_(config),
      vocab_(std::move(vocab)),
      train_(std::move(train)),
      validation_(std::move(validation)),
      options_(std::move(options)),
      model_(std::make_unique<DimsModel>(config_, vocab_.size())),
      optimizer_(static_cast<Real>(config_.learning_rate), static_cast<Real>(config_.adagrad_eps),
                 static_cast<Real>(config_.adagrad_init)) {
  if (train_.empty()) throw std::invalid_argument("training set is empty");
  train_ids_.reserve(train_.size());
  for (const auto& s : train_) {
    model_->check_compatible(s);
    train_ids_.push_back(encode_sample(s, vocab_));
  }
  for (const auto& s : validation_) model_->check_compatible(s);
  if (!options_.out_dir.empty()) {
    fs::create_directories(options_.out_dir);
    std::ofstream(options_.out_dir / "config.json") << config_.to_json() << '\n';
  }
}

void Trainer::restore(LoadedCheckpoint checkpoint) {
  if (checkpoint.vocab.tokens() != vocab_.tokens()) {
    throw CheckpointError("checkpoint vocabulary differs from the training vocabulary");
  }
  auto& dst = model_->parameters();
  const auto& src = checkpoint.model->parameters();
  if (dst.size() != src.size()) throw CheckpointError("checkpoint architecture differs");
  for (auto& [name, param] : dst) {
    if (!src.contains(name) || src.at(name).shape() != param.shape()) {
      throw CheckpointError("checkpoint tensor " + name + " does not match");
    }
    auto v = src.at(name).values();
    std::copy(v.begin(), v.end(), param.mutable_values().begin());
  }
  if (checkpoint.optimizer) {
    for (const auto& [name, acc] : checkpoint.optimizer->accumulators()) {
      optimizer_.set_accumulator(name, acc);
    }
  }
  step_ = checkpoint.meta.step;
}

std::size_t Trainer::steps_per_epoch() const {
  const auto b = static_cast<std::size_t>(config_.batch_size);
  return (train_.size() + b - 1) / b;
}

std::size_t Trainer::total_steps() const {
  auto total = steps_per_epoch() * static_cast<std::size_t>(config_.epochs);
  if (options_.max_steps > 0) total = std::min(total, options_.max_steps);
  return total;
}

std::vector<std::size_t> Trainer::epoch_order(std::size_t epoch) const {
  std::vector<std::size_t> order(train_.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(static_cast<std::uint64_t>(config_.seed) * kMix + epoch + 1);
  std::shuffle(order.begin(), order.end(), rng);
  return order;
}

StepRecord Trainer::train_step() {
  const auto spe = steps_per_epoch();
  const auto epoch = step_ / spe;
  const auto batch = step_ % spe;
  const auto order = epoch_order(epoch);
  const auto b = static_cast<std::size_t>(config_.batch_size);
  const auto begin = batch * b;
  const auto end = std::min(order.size(), begin + b);
  const auto count = static_cast<Real>(end - begin);

  std::mt19937_64 rng((static_cast<std::uint64_t>(config_.seed) ^ kMix) + step_ * kMix);
  auto& store = model_->parameters();
  store.zero_grad();

  StepRecord rec;
  rec.step = step_ + 1;
  rec.epoch = epoch;
  for (auto i = begin; i < end; ++i) {
    const auto idx = order[i];
    const auto& sample = train_[idx];
    try {
      Tape tape;
      TapeScope scope(tape);
      auto loss = model_->loss(sample, train_ids_[idx], &rng);
      rec.seq_loss += loss.seq.item() / count;
      rec.pic_loss += loss.pic.item() / count;
      rec.target_tokens += train_ids_[idx].target_ids.size();
      tape.backward((Real{1} / count) * loss.total);
    } catch (const NumericError& e) {
      throw TrainingError("non-finite value at step " + std::to_string(rec.step) + " on sample " +
                              sample.id + ": " + e.what(),
                          gradient_diagnostics(store));
    }
  }
  if (!std::isfinite(gradient_norm(store))) {
    throw TrainingError("non-finite gradient at step " + std::to_string(rec.step),
                        gradient_diagnostics(store));
  }
  if (config_.clip_mode == "norm") {
    clip_gradient_norm(store, static_cast<Real>(config_.clip_hi));
  } else {
    clip_gradient_values(store, static_cast<Real>(config_.clip_lo),
                         static_cast<Real>(config_.clip_hi));
  }
  optimizer_.step(store);
  for (const auto& [name, param] : store) {
    for (auto v : param.values()) {
      if (!std::isfinite(v)) {
        throw TrainingError("parameter " + name + " became non-finite at step " +
                                std::to_string(rec.step),
                            gradient_diagnostics(store));
      }
    }
  }
  ++step_;
  return rec;
}

std::optional<EvalResult> Trainer::validate() {
  if (validation_.empty()) return std::nullopt;
  EvalOptions opts;
  opts.beam_size = static_cast<std::size_t>(config_.val_beam);
  return evaluate(*model_, vocab_, validation_, opts);
}

void Trainer::save(const fs::path& dir, const std::map<std::string, double>& metrics) const {
  save_checkpoint(dir, *model_, vocab_, &optimizer_, {step_, metrics});
}

void Trainer::keep_if_best(double score, TrainResult& result) {
  const auto keep = static_cast<std::size_t>(config_.keep_best);
  auto worse = [](const auto& a, const auto& b) { return a.first > b.first; };
  if (best_.size() >= keep && !(score > best_.back().first)) return;
  std::ostringstream name;
  name << "ckpt-" << std::setw(8) << std::setfill('0') << step_;
  auto dir = options_.out_dir / name.str();
  best_.emplace_back(score, dir);
  std::stable_sort(best_.begin(), best_.end(), worse);
  while (best_.size() > keep) {
    fs::remove_all(best_.back().second);
    best_.pop_back();
  }
  save(dir, {{"val_rouge_l", score}});
  result.kept_checkpoints.clear();
  for (const auto& [s, p] : best_) result.kept_checkpoints.push_back(p);
}

void Trainer::record(StepRecord& rec, TrainResult& result) {
  const auto spe = steps_per_epoch();
  const auto val_every = static_cast<std::size_t>(config_.val_every);
  const bool due = val_every > 0 ? rec.step % val_every == 0 : rec.step % spe == 0;
  if (due || rec.step == total_steps()) {
    if (auto val = validate()) {
      rec.val_rouge_l = val->rouge.rougeL.f1;
      rec.val_map = val->map;
      if (!options_.out_dir.empty()) {
        keep_if_best(*rec.val_rouge_l + 1e-9 * val->map, result);
      }
    }
  }
  if (!options_.out_dir.empty()) {
    const auto path = options_.out_dir / "metrics.csv";
    const bool fresh = !fs::exists(path);
    std::ofstream log(path, std::ios::app);
    if (fresh) log << "step,epoch,seq_loss,pic_loss,val_rouge_l,val_map\n";
    log << rec.step << ',' << rec.epoch << ',' << format_double(rec.seq_loss) << ','
        << format_double(rec.pic_loss) << ','
        << (rec.val_rouge_l ? format_double(*rec.val_rouge_l) : "") << ','
        << (rec.val_map ? format_double(*rec.val_map) : "") << '\n';
  }
  if (options_.on_step) options_.on_step(rec);
  result.steps.push_back(rec);
}

TrainResult Trainer::run() {
  TrainResult result;
  const auto total = total_steps();
  while (step_ < total) {
    auto rec = train_step();
    record(rec, result);
  }
  if (!options_.out_dir.empty()) save(options_.out_dir / "last");
  result.final_step = step_;
  return result;
}

}  // namespace dims
