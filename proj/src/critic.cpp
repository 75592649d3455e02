// SPDX-License-Identifier: Apache-2.0
#include "mmagent/critic.hpp"

#include <algorithm>
#include <array>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "mmagent/templates.hpp"

namespace mmagent::critic {

using ordered_json = nlohmann::ordered_json;

namespace {

constexpr std::size_t kMaxEvidenceTimestamps = 10;

const std::array<const char*, 3> kDefaultCriterionNames = {
    "Answer Completeness",
    "Reasoning Comprehensiveness",
    "Hallucination Detection",
};

std::vector<std::string> split_paragraphs(const std::string& text) {
    std::vector<std::string> out;
    std::string current;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) {
            if (!current.empty()) {
                out.push_back(current);
                current.clear();
            }
        } else {
            if (!current.empty()) current += "\n";
            current += line;
        }
    }
    if (!current.empty()) out.push_back(current);
    return out;
}

// Criteria render back into the <critic_guidelines> section: plain criteria
// as bare paragraphs (matching the shipped defaults byte-for-byte), graded
// criteria as labelled blocks.
std::string render_guidelines(const CriteriaSet& criteria) {
    std::ostringstream out;
    bool first = true;
    for (const auto& criterion : criteria.criteria()) {
        if (!first) out << "\n\n";
        first = false;
        if (criterion.grades.empty()) {
            out << criterion.description;
        } else {
            out << "Criteria: " << criterion.name << "\n";
            out << "Description: " << criterion.description << "\n";
            out << "Acceptable Values: ";
            for (std::size_t i = 0; i < criterion.grades.size(); ++i) {
                if (i) out << ", ";
                out << "\"" << criterion.grades[i].first << "\": \""
                    << criterion.grades[i].second << "\"";
            }
        }
    }
    return out.str();
}

ordered_json chain_logs(const session::ReasoningChain& chain) {
    ordered_json logs = ordered_json::array();
    for (const auto& entry : chain.entries())
        logs.push_back(ordered_json::parse(entry.serialized()));
    return logs;
}

Criterion parse_criterion(const std::string& name, const ordered_json& body) {
    Criterion criterion;
    criterion.name = name;
    if (body.is_string()) {
        criterion.description = body.get<std::string>();
    } else if (body.is_object()) {
        if (body.contains("Description"))
            criterion.description = body.at("Description").get<std::string>();
        for (const char* key : {"Acceptable Values", "Acceptable values"}) {
            if (!body.contains(key)) continue;
            for (const auto& [grade, label] : body.at(key).items())
                criterion.grades.emplace_back(grade,
                                              label.is_string() ? label.get<std::string>()
                                                                : label.dump());
        }
    } else {
        throw MalformedCriteria("criterion \"" + name + "\" has an unexpected shape");
    }
    criterion.validate();
    return criterion;
}

}  // namespace

void Criterion::validate() const {
    if (name.empty()) throw InvalidCriterion("criterion name is empty");
    if (grades.empty()) return;
    if (grades.size() != 5)
        throw InvalidCriterion("criterion \"" + name + "\" must grade exactly 1..5");
    for (std::size_t i = 0; i < 5; ++i) {
        if (grades[i].first != std::to_string(i + 1))
            throw InvalidCriterion("criterion \"" + name + "\" grade keys must be \"1\"..\"5\"");
        if (grades[i].second.empty())
            throw InvalidCriterion("criterion \"" + name + "\" grade " + grades[i].first +
                                   " has an empty label");
    }
}

CriteriaSet::CriteriaSet(std::vector<Criterion> criteria, CriteriaProvenance provenance)
    : criteria_(std::move(criteria)), provenance_(std::move(provenance)) {
    if (criteria_.empty()) throw InvalidCriterion("a criteria set needs at least one criterion");
    for (const auto& criterion : criteria_) {
        criterion.validate();
        auto count = std::count_if(criteria_.begin(), criteria_.end(),
                                   [&](const Criterion& c) { return c.name == criterion.name; });
        if (count != 1) throw InvalidCriterion("duplicate criterion \"" + criterion.name + "\"");
    }
}

std::vector<std::string> CriteriaSet::names() const {
    std::vector<std::string> out;
    out.reserve(criteria_.size());
    for (const auto& criterion : criteria_) out.push_back(criterion.name);
    return out;
}

void CriteriaSet::save(const std::string& path) const {
    ordered_json doc;
    doc["provenance"] = {{"problem_description", provenance_.problem_description},
                         {"instruction", provenance_.instruction},
                         {"task_description", provenance_.task_description},
                         {"human_intent", provenance_.human_intent}};
    ordered_json list = ordered_json::array();
    for (const auto& criterion : criteria_) {
        ordered_json grades = ordered_json::object();
        for (const auto& [grade, label] : criterion.grades) grades[grade] = label;
        list.push_back({{"name", criterion.name},
                        {"description", criterion.description},
                        {"grades", std::move(grades)}});
    }
    doc["criteria"] = std::move(list);

    std::filesystem::path p(path);
    if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw MalformedCriteria("cannot write criteria file: " + path);
    out << doc.dump(2) << "\n";
}

CriteriaSet CriteriaSet::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw MalformedCriteria("cannot open criteria file: " + path);
    ordered_json doc = ordered_json::parse(in, nullptr, false);
    if (doc.is_discarded()) throw MalformedCriteria("corrupt criteria file: " + path);

    CriteriaProvenance provenance;
    if (doc.contains("provenance")) {
        const auto& p = doc.at("provenance");
        provenance.problem_description = p.value("problem_description", "");
        provenance.instruction = p.value("instruction", "");
        provenance.task_description = p.value("task_description", "");
        provenance.human_intent = p.value("human_intent", "");
    }
    std::vector<Criterion> criteria;
    for (const auto& item : doc.at("criteria")) {
        Criterion criterion;
        criterion.name = item.at("name").get<std::string>();
        criterion.description = item.value("description", "");
        if (item.contains("grades"))
            for (const auto& [grade, label] : item.at("grades").items())
                criterion.grades.emplace_back(grade, label.get<std::string>());
        criteria.push_back(std::move(criterion));
    }
    return CriteriaSet(std::move(criteria), std::move(provenance));
}

CriteriaSet default_video_criteria(const std::string& template_dir) {
    auto text = templates::load_text_file(template_dir + "/video/critic.txt");
    auto paragraphs = split_paragraphs(templates::extract_section(text, "critic_guidelines"));
    if (paragraphs.size() != kDefaultCriterionNames.size())
        throw MalformedCriteria("critic template guidelines must hold exactly " +
                                std::to_string(kDefaultCriterionNames.size()) + " paragraphs");
    std::vector<Criterion> criteria;
    for (std::size_t i = 0; i < paragraphs.size(); ++i)
        criteria.push_back({kDefaultCriterionNames[i], paragraphs[i], {}});
    return CriteriaSet(std::move(criteria));
}

CriteriaSet generate_criteria(const std::string& problem_description,
                              const std::string& instruction,
                              const std::string& task_description,
                              const std::string& human_intent, backends::ChatBackend& backend,
                              const std::string& template_dir) {
    if (problem_description.empty() || instruction.empty() || task_description.empty())
        throw MalformedCriteria("problem description, instruction and task description must be "
                                "non-empty");

    auto prompt = templates::render(
        templates::load_text_file(template_dir + "/criteria_generation.txt"),
        {{"problem_description", problem_description},
         {"instruction", instruction},
         {"task_description", task_description},
         {"human_intent", human_intent}});

    backends::Request request;
    request.messages.push_back({"user", prompt});
    auto response = backends::chat(backend, request);

    // Accept a bare object or one wrapped in prose/fences, same repair
    // handling as the agent protocol.
    ordered_json record;
    {
        auto attempt = ordered_json::parse(response.text, nullptr, false);
        if (attempt.is_discarded() || !attempt.is_object()) {
            auto first = response.text.find('{');
            auto last = response.text.rfind('}');
            if (first == std::string::npos || last == std::string::npos || last < first)
                throw MalformedCriteria("backend did not return a criteria record");
            attempt = ordered_json::parse(response.text.substr(first, last - first + 1), nullptr,
                                          false);
            if (attempt.is_discarded() || !attempt.is_object())
                throw MalformedCriteria("backend did not return a criteria record");
        }
        record = std::move(attempt);
    }

    std::vector<Criterion> criteria;
    for (const auto& [name, body] : record.items())
        criteria.push_back(parse_criterion(name, body));
    if (criteria.empty()) throw MalformedCriteria("criteria record is empty");

    return CriteriaSet(std::move(criteria),
                       CriteriaProvenance{problem_description, instruction, task_description,
                                          human_intent});
}

std::vector<media::Timestamp> select_evidence(const session::ReasoningChain& chain,
                                              const std::string& vision_tool_name) {
    std::vector<media::Timestamp> timestamps;
    for (const auto& entry : chain.entries()) {
        const auto* agent = entry.agent_message();
        if (!agent) continue;
        const auto* step = std::get_if<protocol::Step>(agent);
        if (!step || step->action.tool_name != vision_tool_name) continue;
        auto arg = step->action.arg("timestamp");
        if (!arg) continue;
        timestamps.push_back(media::Timestamp::parse(*arg));
    }
    if (timestamps.empty())
        throw NoEvidence("chain holds no " + vision_tool_name + " calls");
    if (timestamps.size() > kMaxEvidenceTimestamps)
        timestamps.erase(timestamps.begin(),
                         timestamps.end() - static_cast<std::ptrdiff_t>(kMaxEvidenceTimestamps));
    return timestamps;
}

framegrid::PhotoGrid build_evidence_grid(const std::vector<media::Timestamp>& evidence,
                                         const media::MediaHandle& media) {
    std::vector<std::vector<media::Frame>> clips;
    std::vector<int> frame_counts;
    clips.reserve(evidence.size());
    for (const auto& ts : evidence) {
        clips.push_back(media::sample_clip(media, ts));
        frame_counts.push_back(static_cast<int>(clips.back().size()));
    }
    auto allocation = framegrid::allocate(evidence, frame_counts);
    return framegrid::compose(allocation, clips);
}

std::pair<std::string, std::string> build_critic_prompt(const session::ReasoningChain& chain,
                                                        const CriteriaSet& criteria,
                                                        const std::string& template_dir,
                                                        bool evidence_available,
                                                        const std::string& family) {
    auto text = templates::load_text_file(template_dir + "/" + family + "/critic.txt");
    auto system =
        templates::replace_section(text, "critic_guidelines", render_guidelines(criteria));

    ordered_json user{{"logs", chain_logs(chain)}};
    std::string user_text = user.dump(1);
    if (!evidence_available)
        user_text += "\n\nNote: no visual evidence was available for this session; "
                     "visual grounding cannot be checked directly.";
    return {std::move(system), std::move(user_text)};
}

CriticReport evaluate(const session::ReasoningChain& chain, const framegrid::PhotoGrid* grid,
                      const CriteriaSet& criteria, backends::ChatBackend& backend,
                      const std::string& template_dir, const std::string& family) {
    if (chain.size() == 0 || !chain.entries().back().agent_message() ||
        !std::holds_alternative<protocol::Answer>(*chain.entries().back().agent_message()))
        throw NoEvidence("critic runs only after a final Answer");
    if (grid && grid->images.size() > backends::kMaxImagesPerRequest)
        throw backends::ImageLimitExceeded("evidence grid holds " +
                                           std::to_string(grid->images.size()) + " composites");

    auto [system, user] =
        build_critic_prompt(chain, criteria, template_dir, grid != nullptr, family);

    backends::Request request;
    request.messages.push_back({"system", system});
    request.messages.push_back({"user", user});
    if (grid) request.images = grid->images;

    auto names = criteria.names();
    std::string raw;
    for (int attempt = 0; attempt < 2; ++attempt) {
        raw = backends::vision(backend, request).text;
        try {
            CriticReport report;
            report.message = protocol::parse_critic_message(raw, names);
            report.evidence_images = grid ? grid->images.size() : 0;

            // Optional grade extraction for graded rubrics.
            auto record = ordered_json::parse(raw, nullptr, false);
            if (record.is_object() && record.contains("Feedback") &&
                record["Feedback"].is_object()) {
                std::size_t i = 0;
                for (const auto& [key, value] : record["Feedback"].items()) {
                    if (i < names.size() && value.is_object() && value.contains("Grade"))
                        report.grades.emplace_back(names[i],
                                                   value["Grade"].is_string()
                                                       ? value["Grade"].get<std::string>()
                                                       : value["Grade"].dump());
                    ++i;
                }
            }
            return report;
        } catch (const protocol::MalformedMessage&) {
            if (attempt == 1) throw;
        } catch (const protocol::InvalidVerdict&) {
            if (attempt == 1) throw;
        } catch (const protocol::MissingCriterion&) {
            if (attempt == 1) throw;
        } catch (const protocol::MissingField&) {
            if (attempt == 1) throw;
        }
        request.messages.push_back({"assistant", raw});
        request.messages.push_back(
            {"user", "Respond in the exact JSON format given in <input-output>, with feedback "
                     "for every criterion and a final \"YES\" or \"NO\" verdict."});
    }
    throw protocol::MalformedMessage("unreachable");
}

}  // namespace mmagent::critic
