// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "mmagent/backends.hpp"
#include "mmagent/errors.hpp"
#include "mmagent/media.hpp"
#include "mmagent/protocol.hpp"
#include "mmagent/retrieval.hpp"

namespace mmagent::toolkit {

MMAGENT_ERROR_TYPE(DuplicateTool);
MMAGENT_ERROR_TYPE(MissingDependency);

struct ParamSpec {
    std::string name;
    std::string type = "str";
    std::string description;
};

struct ToolDescriptor {
    std::string name;
    std::vector<ParamSpec> params;
    std::string returns = "str";
    std::string description;  // rendered verbatim into the system prompt
    // Skip argument validation; used by trace replay, where the original
    // parameter schema is not recorded.
    bool accepts_any_args = false;

    // "Tool: name(p: str) -> str:\nDescription: ..."
    std::string render() const;
};

struct CallCost {
    std::uint64_t backend_calls = 0;
    std::uint64_t images = 0;
};

struct ToolResult {
    std::string output;  // exact text fed back as the protocol "Output" field
    std::vector<std::string> artifacts;  // media references shown to a backend, if any
    CallCost cost;
};

struct SessionContext {
    const media::MediaHandle* media = nullptr;
};

using ToolHandler = std::function<ToolResult(const protocol::Action&, SessionContext&)>;

class ToolRegistry {
public:
    // Registration order is preserved for prompt rendering.
    void register_tool(ToolDescriptor descriptor, ToolHandler handler);

    bool contains(const std::string& name) const;
    std::size_t size() const { return tools_.size(); }
    std::vector<ToolDescriptor> descriptors() const;

    // Numbered tool list for the prompt's <tools> section; a pure function
    // of the registry.
    std::string describe_all() const;

    // Unknown tools and bad arguments come back as output text so the
    // reasoner can recover; backend failures propagate.
    ToolResult dispatch(const protocol::Action& action, SessionContext& ctx) const;

private:
    struct Entry {
        ToolDescriptor descriptor;
        ToolHandler handler;
    };
    std::vector<Entry> tools_;
};

// Dependencies for the four video tools. The phrase index may be null when
// the transcript is empty; everything else is required.
struct VideoToolDeps {
    const media::Transcript* transcript = nullptr;
    const retrieval::PhraseIndex* phrase_index = nullptr;
    const retrieval::FrameIndex* frame_index = nullptr;
    const media::MediaHandle* media = nullptr;
    backends::ChatBackend* vision = nullptr;
    backends::EmbeddingBackend* embedder = nullptr;
    std::string template_dir = "templates";
};

// get_transcript, query_transcript, query_frames, query_vision — descriptor
// texts load from the shipped template fragments.
void register_video_tools(ToolRegistry& registry, const VideoToolDeps& deps);

struct ImageToolDeps {
    const media::MediaHandle* image = nullptr;
    // capability -> backend: "vit", "ocr", "detect", "recognize"
    std::map<std::string, backends::ChatBackend*> capabilities;
    std::string template_dir = "templates";
};

// vit_describe, ocr, detect_objects, recognize — thin delegations to the
// configured capability endpoints.
void register_image_tools(ToolRegistry& registry, const ImageToolDeps& deps);

// Name of the vision tool whose calls constitute critic evidence.
inline constexpr const char* kVisionToolName = "query_vision";

}  // namespace mmagent::toolkit
