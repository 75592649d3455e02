// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "mmagent/backends.hpp"
#include "mmagent/errors.hpp"

namespace mmagent::evalharness {

MMAGENT_ERROR_TYPE(MalformedVerdict);
MMAGENT_ERROR_TYPE(AmbiguousSelection);
MMAGENT_ERROR_TYPE(ManifestError);

struct QAItem {
    std::string id;
    std::string question;
    std::string ground_truth;  // answer text (open-ended) or option key (multiple choice)
    std::vector<std::pair<std::string, std::string>> options;  // (key, text); empty = open-ended
    std::string category;
    std::string media_path;

    bool multiple_choice() const { return !options.empty(); }
    void validate() const;
};

enum class JudgeVerdict { Correct, Incorrect, PartiallyCorrect };

std::string to_string(JudgeVerdict v);

// The judge prompt with the three fields substituted into the template.
std::string build_judge_prompt(const QAItem& item, const std::string& system_answer,
                               const std::string& template_dir);

// Accepts exactly one line of the form "System Answer: <verdict>" (an
// optional bracket pair around the verdict is tolerated).
JudgeVerdict parse_judge_response(const std::string& response);

// Grades an open-ended answer against ground truth; retries once with a
// format reminder before raising MalformedVerdict.
JudgeVerdict judge(const QAItem& item, const std::string& system_answer,
                   backends::ChatBackend& backend, const std::string& template_dir);

// True iff the answer selects the ground-truth option, by key mention or
// unique option-text containment. Matching several options is an error.
bool score_mc(const QAItem& item, const std::string& system_answer);

struct VerdictWeights {
    double correct = 1.0;
    double partially_correct = 0.5;
    double incorrect = 0.0;

    double weight(JudgeVerdict v) const;
};

struct ItemResult {
    std::string id;
    std::string category;
    JudgeVerdict verdict = JudgeVerdict::Incorrect;
};

// 2x2 cell percentages (one decimal place) over paired runs:
// rows = without critic correct?, columns = with critic correct?.
// Cells always sum to 100.0 exactly (largest-remainder rounding).
struct ConfusionMatrix {
    double both_correct = 0.0;
    double only_without = 0.0;  // critic turned a correct answer wrong
    double only_with = 0.0;     // critic recovered a wrong answer
    double neither = 0.0;

    double sum() const { return both_correct + only_without + only_with + neither; }
};

struct EvalReport {
    double overall_accuracy = 0.0;
    // (category, accuracy, item count) in first-appearance order; empty
    // categories are omitted rather than reported as zero.
    std::vector<std::tuple<std::string, double, std::size_t>> per_category;
    std::vector<ItemResult> items;
    VerdictWeights weights;
    std::optional<ConfusionMatrix> ablation;

    std::string render_table() const;
    std::string to_json() const;
};

EvalReport aggregate(const std::vector<ItemResult>& items, VerdictWeights weights = {});

ConfusionMatrix critic_ablation(const std::vector<std::pair<bool, bool>>& paired);

// JSON-lines manifest: {"id","media","question","answer"| "options"+"answer",
// "category"} per line.
std::vector<QAItem> load_manifest(const std::string& path);

// Runs `evaluate` over the items with up to `parallelism` workers and
// aggregates; item order in the report matches the manifest.
EvalReport run_eval(const std::vector<QAItem>& items,
                    const std::function<JudgeVerdict(const QAItem&)>& evaluate,
                    VerdictWeights weights = {}, int parallelism = 1);

}  // namespace mmagent::evalharness
