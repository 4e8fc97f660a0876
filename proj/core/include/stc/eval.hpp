#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "stc/random.hpp"
#include "stc/rewards.hpp"
#include "stc/verifier.hpp"

namespace stc::eval {

struct Sample {
  std::optional<CanonicalAnswer> answer;
  std::optional<int> final_score;
  std::vector<StepScore> step_scores;
  std::vector<int> gold_step_labels;  // empty when unavailable
};

struct ProblemSamples {
  std::string problem_id;
  CanonicalAnswer gold;
  std::vector<Sample> samples;
};

using SampleSet = std::vector<ProblemSamples>;

bool is_correct(const Sample& sample, const CanonicalAnswer& gold);

// n == 1: mean per-sample correctness. n > 1: fraction of problems with a
// correct answer among the first n samples. Averaged over problems. Throws
// InvalidInput if a problem has fewer than n samples or n == 0.
double pass_at_n(const SampleSet& samples, std::size_t n);

// Most frequent answer under answers_equal, absent answers skipped. Ties go
// to the lexicographically smallest rendering of the class representative,
// which is also what is returned. Throws InvalidInput if no answer is present.
CanonicalAnswer majority_vote(std::span<const Sample> samples);

// Majority vote over the samples whose final critique score is 1; falls back
// to all samples when none is.
CanonicalAnswer best_of_k_critique(std::span<const Sample> samples);

enum class SelectionMethod { Majority, Critique };

// Accuracy of the selector over the first k samples of every problem.
double selection_accuracy(const SampleSet& samples, SelectionMethod method,
                          std::size_t k);

struct ConfusionCounts {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t tn = 0;
  std::size_t fn = 0;

  std::size_t total() const noexcept { return tp + fp + tn + fn; }
  bool operator==(const ConfusionCounts&) const = default;
};

// Positive class: "the step/answer is correct" (label 1).
struct CritiqueMetrics {
  ConfusionCounts counts;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;                     // 0 when precision + recall == 0
  std::optional<double> specificity;  // absent when tn + fp == 0
};

CritiqueMetrics critique_metrics(std::span<const int> predictions,
                                 std::span<const int> labels);

// Final critique score (absent counted as 0) against answer correctness.
CritiqueMetrics answer_critique_metrics(const SampleSet& samples);

// Step scores (absent counted as 0) against gold step labels, over every
// sample that carries labels. Absent when no sample does.
std::optional<CritiqueMetrics> process_critique_metrics(
    const SampleSet& samples);

// Synthetic test-time-scaling ensembles: each sample is correct with
// probability `p_correct`; wrong samples repeat one shared systematic
// mistake with probability `p_shared_mistake`, otherwise one of
// `distinct_wrong` other wrong answers; each final critique score matches
// correctness with probability `critique_accuracy`.
struct EnsembleConfig {
  std::size_t k = 8;
  double p_correct = 0.3;
  double p_shared_mistake = 0.5;
  std::size_t distinct_wrong = 5;
  double critique_accuracy = 0.8;
  bool oracle_critique = false;  // score == correctness exactly
};

ProblemSamples synthetic_problem(const EnsembleConfig& cfg, Rng& rng,
                                 std::string problem_id);

}  // namespace stc::eval
