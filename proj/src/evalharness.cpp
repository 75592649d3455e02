// SPDX-License-Identifier: Apache-2.0
#include "mmagent/evalharness.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "mmagent/templates.hpp"

namespace mmagent::evalharness {

using json = nlohmann::json;

namespace {

std::string trim(const std::string& s) {
    auto begin = s.find_first_not_of(" \t\r\n");
    if (begin == std::string::npos) return {};
    auto end = s.find_last_not_of(" \t\r\n");
    return s.substr(begin, end - begin + 1);
}

std::string normalize(const std::string& s) {
    std::string out;
    out.reserve(s.size());
    bool in_space = true;
    for (char c : s) {
        if (std::isspace(static_cast<unsigned char>(c))) {
            if (!in_space) out.push_back(' ');
            in_space = true;
        } else {
            out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
            in_space = false;
        }
    }
    while (!out.empty() && out.back() == ' ') out.pop_back();
    return out;
}

bool contains_word(const std::string& haystack, const std::string& needle) {
    std::size_t pos = 0;
    auto is_word = [](char c) {
        return std::isalnum(static_cast<unsigned char>(c)) != 0;
    };
    while ((pos = haystack.find(needle, pos)) != std::string::npos) {
        bool left_ok = pos == 0 || !is_word(haystack[pos - 1]);
        std::size_t after = pos + needle.size();
        bool right_ok = after >= haystack.size() || !is_word(haystack[after]);
        if (left_ok && right_ok) return true;
        ++pos;
    }
    return false;
}

}  // namespace

void QAItem::validate() const {
    if (id.empty()) throw ManifestError("item without an id");
    if (question.empty()) throw ManifestError("item " + id + " has no question");
    if (!options.empty()) {
        if (options.size() < 2)
            throw ManifestError("item " + id + " needs at least two options");
        bool found = std::any_of(options.begin(), options.end(),
                                 [&](const auto& o) { return o.first == ground_truth; });
        if (!found)
            throw ManifestError("item " + id + " ground truth is not an option key");
    }
}

std::string to_string(JudgeVerdict v) {
    switch (v) {
        case JudgeVerdict::Correct: return "Correct";
        case JudgeVerdict::Incorrect: return "Incorrect";
        case JudgeVerdict::PartiallyCorrect: return "Partially Correct";
    }
    return "Incorrect";
}

std::string build_judge_prompt(const QAItem& item, const std::string& system_answer,
                               const std::string& template_dir) {
    return templates::render(templates::load_text_file(template_dir + "/judge.txt"),
                             {{"question", item.question},
                              {"ground_truth", item.ground_truth},
                              {"system_answer", system_answer}});
}

JudgeVerdict parse_judge_response(const std::string& response) {
    std::string line = trim(response);
    if (line.find('\n') != std::string::npos)
        throw MalformedVerdict("expected a single line, got: " + line.substr(0, 120));
    constexpr const char* kPrefix = "System Answer:";
    if (line.rfind(kPrefix, 0) != 0)
        throw MalformedVerdict("expected \"System Answer: [Verdict]\", got: " +
                               line.substr(0, 120));
    std::string verdict = trim(line.substr(std::string(kPrefix).size()));
    if (verdict.size() >= 2 && verdict.front() == '[' && verdict.back() == ']')
        verdict = trim(verdict.substr(1, verdict.size() - 2));
    if (verdict == "Correct") return JudgeVerdict::Correct;
    if (verdict == "Incorrect") return JudgeVerdict::Incorrect;
    if (verdict == "Partially Correct") return JudgeVerdict::PartiallyCorrect;
    throw MalformedVerdict("unknown verdict: \"" + verdict + "\"");
}

JudgeVerdict judge(const QAItem& item, const std::string& system_answer,
                   backends::ChatBackend& backend, const std::string& template_dir) {
    backends::Request request;
    request.messages.push_back({"user", build_judge_prompt(item, system_answer, template_dir)});

    for (int attempt = 0; attempt < 2; ++attempt) {
        auto response = backends::chat(backend, request);
        try {
            return parse_judge_response(response.text);
        } catch (const MalformedVerdict&) {
            if (attempt == 1) throw;
        }
        request.messages.push_back({"assistant", response.text});
        request.messages.push_back(
            {"user", "Respond with exactly one line in the form \"System Answer: [Verdict]\" "
                     "where [Verdict] is one of \"Correct\", \"Incorrect\", or \"Partially "
                     "Correct\". No extra lines and no extra text whatsoever."});
    }
    throw MalformedVerdict("unreachable");
}

bool score_mc(const QAItem& item, const std::string& system_answer) {
    std::string answer = normalize(system_answer);

    std::vector<std::string> matched;
    for (const auto& [key, text] : item.options) {
        std::string norm_key = normalize(key);
        bool hit = contains_word(answer, "option " + norm_key) || answer == norm_key;
        if (!hit && !text.empty()) {
            std::string norm_text = normalize(text);
            hit = !norm_text.empty() &&
                  (answer.find(norm_text) != std::string::npos || answer == norm_text);
        }
        if (hit) matched.push_back(key);
    }
    if (matched.size() > 1)
        throw AmbiguousSelection("answer for item " + item.id + " matches " +
                                 std::to_string(matched.size()) + " options");
    return matched.size() == 1 && matched.front() == item.ground_truth;
}

double VerdictWeights::weight(JudgeVerdict v) const {
    switch (v) {
        case JudgeVerdict::Correct: return correct;
        case JudgeVerdict::PartiallyCorrect: return partially_correct;
        case JudgeVerdict::Incorrect: return incorrect;
    }
    return incorrect;
}

EvalReport aggregate(const std::vector<ItemResult>& items, VerdictWeights weights) {
    EvalReport report;
    report.weights = weights;
    report.items = items;
    if (items.empty()) return report;

    double total = 0.0;
    std::vector<std::string> category_order;
    std::map<std::string, std::pair<double, std::size_t>> by_category;  // score, count
    for (const auto& item : items) {
        double w = weights.weight(item.verdict);
        total += w;
        auto [it, inserted] = by_category.try_emplace(item.category, 0.0, 0);
        if (inserted) category_order.push_back(item.category);
        it->second.first += w;
        it->second.second += 1;
    }
    report.overall_accuracy = total / static_cast<double>(items.size());
    for (const auto& category : category_order) {
        const auto& [score, count] = by_category[category];
        report.per_category.emplace_back(category, score / static_cast<double>(count), count);
    }
    return report;
}

ConfusionMatrix critic_ablation(const std::vector<std::pair<bool, bool>>& paired) {
    ConfusionMatrix matrix;
    if (paired.empty()) return matrix;

    std::array<std::size_t, 4> counts{};  // TT, TF, FT, FF
    for (auto [without_correct, with_correct] : paired) {
        int cell = (without_correct ? 0 : 2) + (with_correct ? 0 : 1);
        counts[static_cast<std::size_t>(cell)] += 1;
    }

    // Largest-remainder apportionment in tenths of a percent, so the four
    // one-decimal cells always sum to exactly 100.0.
    const double n = static_cast<double>(paired.size());
    std::array<double, 4> exact{};
    std::array<long, 4> tenths{};
    long assigned = 0;
    for (std::size_t i = 0; i < 4; ++i) {
        exact[i] = 1000.0 * static_cast<double>(counts[i]) / n;
        tenths[i] = static_cast<long>(std::floor(exact[i]));
        assigned += tenths[i];
    }
    std::array<std::size_t, 4> order{0, 1, 2, 3};
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return exact[a] - std::floor(exact[a]) > exact[b] - std::floor(exact[b]);
    });
    for (long left = 1000 - assigned, i = 0; left > 0; --left, ++i)
        tenths[order[static_cast<std::size_t>(i)]] += 1;

    matrix.both_correct = static_cast<double>(tenths[0]) / 10.0;
    matrix.only_without = static_cast<double>(tenths[1]) / 10.0;
    matrix.only_with = static_cast<double>(tenths[2]) / 10.0;
    matrix.neither = static_cast<double>(tenths[3]) / 10.0;
    return matrix;
}

std::string EvalReport::render_table() const {
    std::ostringstream out;
    out << std::fixed << std::setprecision(1);
    out << "items: " << items.size() << "\n";
    out << "weights: Correct=" << std::setprecision(2) << weights.correct
        << " PartiallyCorrect=" << weights.partially_correct
        << " Incorrect=" << weights.incorrect << "\n";
    out << std::setprecision(1);
    out << "overall accuracy: " << overall_accuracy * 100.0 << "%\n";
    if (!per_category.empty()) {
        out << "per-category:\n";
        for (const auto& [category, accuracy, count] : per_category)
            out << "  " << category << ": " << accuracy * 100.0 << "% (" << count << ")\n";
    }
    if (ablation) {
        out << "critic ablation (rows: without critic, columns: with critic):\n";
        out << "  both correct:        " << ablation->both_correct << "%\n";
        out << "  critic broke it:     " << ablation->only_without << "%\n";
        out << "  critic fixed it:     " << ablation->only_with << "%\n";
        out << "  neither correct:     " << ablation->neither << "%\n";
    }
    return out.str();
}

std::string EvalReport::to_json() const {
    json doc;
    doc["overall_accuracy"] = overall_accuracy;
    doc["weights"] = {{"correct", weights.correct},
                      {"partially_correct", weights.partially_correct},
                      {"incorrect", weights.incorrect}};
    json categories = json::array();
    for (const auto& [category, accuracy, count] : per_category)
        categories.push_back({{"category", category}, {"accuracy", accuracy}, {"count", count}});
    doc["per_category"] = std::move(categories);
    json item_list = json::array();
    for (const auto& item : items)
        item_list.push_back(
            {{"id", item.id}, {"category", item.category}, {"verdict", to_string(item.verdict)}});
    doc["items"] = std::move(item_list);
    if (ablation)
        doc["critic_ablation"] = {{"both_correct", ablation->both_correct},
                                  {"only_without_critic", ablation->only_without},
                                  {"only_with_critic", ablation->only_with},
                                  {"neither", ablation->neither}};
    return doc.dump(2);
}

std::vector<QAItem> load_manifest(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ManifestError("cannot open manifest: " + path);

    std::vector<QAItem> items;
    std::string line;
    std::size_t line_number = 0;
    while (std::getline(in, line)) {
        ++line_number;
        if (trim(line).empty()) continue;
        json record = json::parse(line, nullptr, false);
        if (record.is_discarded())
            throw ManifestError("bad record on line " + std::to_string(line_number) + " of " +
                                path);
        QAItem item;
        item.id = record.value("id", "");
        item.question = record.value("question", "");
        item.ground_truth = record.value("answer", "");
        item.category = record.value("category", "");
        item.media_path = record.value("media", "");
        if (record.contains("options")) {
            const auto& options = record.at("options");
            if (options.is_object()) {
                for (const auto& [key, text] : options.items())
                    item.options.emplace_back(key, text.get<std::string>());
            } else {
                // Array form: keys are "1".."n".
                std::size_t index = 1;
                for (const auto& text : options)
                    item.options.emplace_back(std::to_string(index++), text.get<std::string>());
            }
        }
        item.validate();
        items.push_back(std::move(item));
    }
    return items;
}

EvalReport run_eval(const std::vector<QAItem>& items,
                    const std::function<JudgeVerdict(const QAItem&)>& evaluate,
                    VerdictWeights weights, int parallelism) {
    std::vector<ItemResult> results(items.size());
    std::atomic<std::size_t> next{0};

    auto worker = [&] {
        for (;;) {
            std::size_t i = next.fetch_add(1);
            if (i >= items.size()) return;
            results[i] = ItemResult{items[i].id, items[i].category, evaluate(items[i])};
        }
    };

    int workers = std::max(1, std::min<int>(parallelism, static_cast<int>(items.size())));
    if (workers == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(static_cast<std::size_t>(workers));
        for (int i = 0; i < workers; ++i) pool.emplace_back(worker);
        for (auto& thread : pool) thread.join();
    }
    return aggregate(results, weights);
}

}  // namespace mmagent::evalharness
