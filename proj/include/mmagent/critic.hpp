// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "mmagent/backends.hpp"
#include "mmagent/chain.hpp"
#include "mmagent/errors.hpp"
#include "mmagent/framegrid.hpp"
#include "mmagent/media.hpp"
#include "mmagent/protocol.hpp"

namespace mmagent::critic {

MMAGENT_ERROR_TYPE(MalformedCriteria);
MMAGENT_ERROR_TYPE(NoEvidence);
MMAGENT_ERROR_TYPE(InvalidCriterion);

// A rubric entry. Grades are optional: the video critic works from
// free-text guidelines, the image pipeline grades 1..5.
struct Criterion {
    std::string name;
    std::string description;
    std::vector<std::pair<std::string, std::string>> grades;  // "1".."5" -> label

    // Grade keys, when present, must be exactly "1".."5" with non-empty labels.
    void validate() const;
    bool operator==(const Criterion&) const = default;
};

// The four structured inputs criteria were generated from.
struct CriteriaProvenance {
    std::string problem_description;
    std::string instruction;
    std::string task_description;
    std::string human_intent;  // may be empty
    bool operator==(const CriteriaProvenance&) const = default;
};

class CriteriaSet {
public:
    CriteriaSet() = default;
    explicit CriteriaSet(std::vector<Criterion> criteria, CriteriaProvenance provenance = {});

    const std::vector<Criterion>& criteria() const { return criteria_; }
    std::vector<std::string> names() const;
    std::size_t size() const { return criteria_.size(); }
    const CriteriaProvenance& provenance() const { return provenance_; }

    void save(const std::string& path) const;
    static CriteriaSet load(const std::string& path);

private:
    std::vector<Criterion> criteria_;
    CriteriaProvenance provenance_;
};

// The three shipped evaluation guidelines (answer completeness, reasoning
// comprehensiveness, hallucination detection), read from the critic
// template. Used whenever criteria generation is not invoked.
CriteriaSet default_video_criteria(const std::string& template_dir);

// Asks the chat backend to formulate criteria from the four structured
// inputs. Criteria generation happens once per task configuration, never
// per query.
CriteriaSet generate_criteria(const std::string& problem_description,
                              const std::string& instruction,
                              const std::string& task_description,
                              const std::string& human_intent,
                              backends::ChatBackend& backend, const std::string& template_dir);

// Timestamps of the session's vision-tool calls in chain order, keeping
// only the last 10 when more exist. Throws NoEvidence when the chain holds
// no vision calls.
std::vector<media::Timestamp> select_evidence(const session::ReasoningChain& chain,
                                              const std::string& vision_tool_name =
                                                  "query_vision");

// Samples clips around the evidence timestamps and packs them into at most
// ten composites. Image sessions bypass this with single_image_grid.
framegrid::PhotoGrid build_evidence_grid(const std::vector<media::Timestamp>& evidence,
                                         const media::MediaHandle& media);

struct CriticReport {
    protocol::CriticMessage message;
    std::size_t evidence_images = 0;
    // Per-criterion grades where the backend supplied them.
    std::vector<std::pair<std::string, std::string>> grades;
};

// The critic prompt: the rendered template (tools, guidelines, input/output,
// sample response) as the system turn and the serialized logs as the user
// turn. Exposed separately for golden tests.
std::pair<std::string, std::string> build_critic_prompt(const session::ReasoningChain& chain,
                                                        const CriteriaSet& criteria,
                                                        const std::string& template_dir,
                                                        bool evidence_available = true,
                                                        const std::string& family = "video");

// Runs the critic over the chain and evidence grid. `grid` may be null for
// the text-only fallback (no vision calls to audit). Retries once with a
// format reminder before raising MalformedMessage.
CriticReport evaluate(const session::ReasoningChain& chain, const framegrid::PhotoGrid* grid,
                      const CriteriaSet& criteria, backends::ChatBackend& backend,
                      const std::string& template_dir, const std::string& family = "video");

}  // namespace mmagent::critic
