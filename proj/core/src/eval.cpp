#include "stc/eval.hpp"

#include <map>
#include <utility>

#include "stc/error.hpp"

namespace stc::eval {
namespace {

// Key of an answer's equivalence class; numeric classes sort first on equal
// renderings.
using ClassKey = std::pair<std::string, bool>;

ClassKey class_key(const CanonicalAnswer& a) {
  return {class_representative(a).render(), !a.is_numeric()};
}

CanonicalAnswer vote(std::span<const Sample> samples, bool critique_only) {
  std::map<ClassKey, std::pair<std::size_t, const CanonicalAnswer*>> counts;
  for (const Sample& s : samples) {
    if (!s.answer) continue;
    if (critique_only && s.final_score.value_or(0) != 1) continue;
    auto& slot = counts[class_key(*s.answer)];
    ++slot.first;
    slot.second = &*s.answer;
  }
  if (counts.empty()) throw InvalidInput("no sample carries an answer");
  // std::map iterates keys in ascending order, so the first maximum wins ties.
  auto best = counts.begin();
  for (auto it = counts.begin(); it != counts.end(); ++it)
    if (it->second.first > best->second.first) best = it;
  return class_representative(*best->second.second);
}

void check_binary(std::span<const int> v, const char* what) {
  for (int x : v)
    if (x != 0 && x != 1)
      throw InvalidInput(std::string(what) + " must be 0 or 1");
}

}  // namespace

bool is_correct(const Sample& sample, const CanonicalAnswer& gold) {
  return sample.answer && answers_equal(*sample.answer, gold);
}

double pass_at_n(const SampleSet& samples, std::size_t n) {
  if (n == 0) throw InvalidInput("pass@n needs n >= 1");
  if (samples.empty()) throw InvalidInput("pass@n over an empty sample set");
  double total = 0.0;
  for (const ProblemSamples& p : samples) {
    if (p.samples.size() < n)
      throw InvalidInput("problem '" + p.problem_id + "' has " +
                         std::to_string(p.samples.size()) +
                         " samples, fewer than n = " + std::to_string(n));
    if (n == 1) {
      std::size_t correct = 0;
      for (const Sample& s : p.samples) correct += is_correct(s, p.gold);
      total += static_cast<double>(correct) /
               static_cast<double>(p.samples.size());
    } else {
      bool any = false;
      for (std::size_t i = 0; i < n && !any; ++i)
        any = is_correct(p.samples[i], p.gold);
      total += any ? 1.0 : 0.0;
    }
  }
  return total / static_cast<double>(samples.size());
}

CanonicalAnswer majority_vote(std::span<const Sample> samples) {
  return vote(samples, false);
}

CanonicalAnswer best_of_k_critique(std::span<const Sample> samples) {
  for (const Sample& s : samples)
    if (s.answer && s.final_score.value_or(0) == 1) return vote(samples, true);
  return vote(samples, false);
}

double selection_accuracy(const SampleSet& samples, SelectionMethod method,
                          std::size_t k) {
  if (samples.empty()) throw InvalidInput("selection over an empty sample set");
  std::size_t correct = 0;
  for (const ProblemSamples& p : samples) {
    if (p.samples.size() < k)
      throw InvalidInput("problem '" + p.problem_id + "' has fewer than k = " +
                         std::to_string(k) + " samples");
    const auto first = std::span<const Sample>(p.samples).first(k);
    try {
      const CanonicalAnswer pick = method == SelectionMethod::Majority
                                       ? majority_vote(first)
                                       : best_of_k_critique(first);
      correct += answers_equal(pick, p.gold);
    } catch (const InvalidInput&) {
      // Nothing to select from: counts as a miss.
    }
  }
  return static_cast<double>(correct) / static_cast<double>(samples.size());
}

CritiqueMetrics critique_metrics(std::span<const int> predictions,
                                 std::span<const int> labels) {
  if (predictions.size() != labels.size())
    throw InvalidInput("predictions and labels differ in length");
  if (predictions.empty()) throw InvalidInput("no items to score");
  check_binary(predictions, "predictions");
  check_binary(labels, "labels");

  CritiqueMetrics m;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const bool p = predictions[i] == 1;
    const bool l = labels[i] == 1;
    if (p && l) ++m.counts.tp;
    if (p && !l) ++m.counts.fp;
    if (!p && !l) ++m.counts.tn;
    if (!p && l) ++m.counts.fn;
  }
  const auto& c = m.counts;
  if (c.tp + c.fp > 0) m.precision = double(c.tp) / double(c.tp + c.fp);
  if (c.tp + c.fn > 0) m.recall = double(c.tp) / double(c.tp + c.fn);
  if (m.precision + m.recall > 0.0)
    m.f1 = 2.0 * m.precision * m.recall / (m.precision + m.recall);
  if (c.tn + c.fp > 0) m.specificity = double(c.tn) / double(c.tn + c.fp);
  return m;
}

CritiqueMetrics answer_critique_metrics(const SampleSet& samples) {
  std::vector<int> preds;
  std::vector<int> labels;
  for (const ProblemSamples& p : samples)
    for (const Sample& s : p.samples) {
      preds.push_back(s.final_score.value_or(0) == 1 ? 1 : 0);
      labels.push_back(is_correct(s, p.gold) ? 1 : 0);
    }
  return critique_metrics(preds, labels);
}

std::optional<CritiqueMetrics> process_critique_metrics(
    const SampleSet& samples) {
  std::vector<int> preds;
  std::vector<int> labels;
  for (const ProblemSamples& p : samples)
    for (const Sample& s : p.samples) {
      if (s.gold_step_labels.empty()) continue;
      if (s.gold_step_labels.size() != s.step_scores.size())
        throw InvalidInput("problem '" + p.problem_id +
                           "': step scores and gold step labels differ in "
                           "length");
      for (std::size_t i = 0; i < s.step_scores.size(); ++i) {
        preds.push_back(s.step_scores[i].value_or(0) == 1 ? 1 : 0);
        labels.push_back(s.gold_step_labels[i]);
      }
    }
  if (preds.empty()) return std::nullopt;
  return critique_metrics(preds, labels);
}

ProblemSamples synthetic_problem(const EnsembleConfig& cfg, Rng& rng,
                                 std::string problem_id) {
  ProblemSamples p;
  p.problem_id = std::move(problem_id);
  p.gold = CanonicalAnswer::integer(0);
  p.samples.reserve(cfg.k);
  for (std::size_t i = 0; i < cfg.k; ++i) {
    Sample s;
    const bool correct = rng.bernoulli(cfg.p_correct);
    long long value = 0;
    if (!correct) {
      value = rng.bernoulli(cfg.p_shared_mistake) || cfg.distinct_wrong == 0
                  ? 1
                  : 2 + static_cast<long long>(rng.below(cfg.distinct_wrong));
    }
    s.answer = CanonicalAnswer::integer(value);
    bool score = correct;
    if (!cfg.oracle_critique && !rng.bernoulli(cfg.critique_accuracy))
      score = !correct;
    s.final_score = score ? 1 : 0;
    p.samples.push_back(std::move(s));
  }
  return p;
}

}  // namespace stc::eval
