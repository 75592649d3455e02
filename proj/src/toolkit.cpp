// SPDX-License-Identifier: Apache-2.0
#include "mmagent/toolkit.hpp"

#include <algorithm>
#include <sstream>

#include "mmagent/templates.hpp"

namespace mmagent::toolkit {

namespace {

std::string valid_tool_list(const std::vector<ToolDescriptor>& descriptors) {
    std::ostringstream out;
    for (std::size_t i = 0; i < descriptors.size(); ++i) {
        if (i) out << ", ";
        out << descriptors[i].name;
    }
    return out.str();
}

std::string load_fragment(const std::string& template_dir, const std::string& family,
                          const std::string& tool) {
    return templates::load_text_file(template_dir + "/" + family + "/tools/" + tool + ".txt");
}

std::string chomp(std::string text) {
    while (!text.empty() && (text.back() == '\n' || text.back() == '\r')) text.pop_back();
    return text;
}

ToolResult bad_arguments(const std::string& message) {
    return ToolResult{"Invalid arguments: " + message, {}, {}};
}

}  // namespace

std::string ToolDescriptor::render() const {
    std::ostringstream out;
    out << "Tool: " << name << "(";
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (i) out << ", ";
        out << params[i].name << ": " << params[i].type;
    }
    out << ") -> " << returns << ":\n";
    out << "Description: " << description;
    return out.str();
}

void ToolRegistry::register_tool(ToolDescriptor descriptor, ToolHandler handler) {
    if (contains(descriptor.name))
        throw DuplicateTool("tool \"" + descriptor.name + "\" is already registered");
    tools_.push_back({std::move(descriptor), std::move(handler)});
}

bool ToolRegistry::contains(const std::string& name) const {
    return std::any_of(tools_.begin(), tools_.end(),
                       [&](const Entry& e) { return e.descriptor.name == name; });
}

std::vector<ToolDescriptor> ToolRegistry::descriptors() const {
    std::vector<ToolDescriptor> out;
    out.reserve(tools_.size());
    for (const auto& entry : tools_) out.push_back(entry.descriptor);
    return out;
}

std::string ToolRegistry::describe_all() const {
    std::ostringstream out;
    for (std::size_t i = 0; i < tools_.size(); ++i) {
        if (i) out << "\n\n";
        out << (i + 1) << ")\n" << tools_[i].descriptor.render();
    }
    return out.str();
}

ToolResult ToolRegistry::dispatch(const protocol::Action& action, SessionContext& ctx) const {
    const Entry* entry = nullptr;
    for (const auto& candidate : tools_) {
        if (candidate.descriptor.name == action.tool_name) {
            entry = &candidate;
            break;
        }
    }
    if (!entry)
        return ToolResult{"Unknown tool \"" + action.tool_name +
                              "\". Valid tools: " + valid_tool_list(descriptors()),
                          {},
                          {}};

    if (!entry->descriptor.accepts_any_args) {
        // Every declared parameter is required; anything undeclared is rejected.
        for (const auto& [key, value] : action.tool_input) {
            bool declared = std::any_of(entry->descriptor.params.begin(),
                                        entry->descriptor.params.end(),
                                        [&](const ParamSpec& p) { return p.name == key; });
            if (!declared)
                return bad_arguments("\"" + action.tool_name + "\" has no parameter \"" + key +
                                     "\"");
        }
        for (const auto& param : entry->descriptor.params) {
            if (!action.arg(param.name))
                return bad_arguments("\"" + action.tool_name + "\" requires parameter \"" +
                                     param.name + "\"");
        }
    }

    try {
        return entry->handler(action, ctx);
    } catch (const BackendFailure&) {
        throw;  // transport problems are the session's to handle
    } catch (const backends::ImageLimitExceeded&) {
        throw;
    } catch (const Error& e) {
        return ToolResult{std::string("Tool error (") + e.code() + "): " + e.what(), {}, {}};
    }
}

void register_video_tools(ToolRegistry& registry, const VideoToolDeps& deps) {
    if (!deps.transcript) throw MissingDependency("video tools need a transcript store");
    if (!deps.frame_index) throw MissingDependency("video tools need a frame index");
    if (!deps.media) throw MissingDependency("video tools need a media handle");
    if (!deps.vision) throw MissingDependency("video tools need a vision backend");
    if (!deps.embedder) throw MissingDependency("video tools need an embedding backend");
    if (!deps.phrase_index && !deps.transcript->empty())
        throw MissingDependency("video tools need a phrase index for a non-empty transcript");

    registry.register_tool(
        ToolDescriptor{"get_transcript", {}, "str",
                       chomp(load_fragment(deps.template_dir, "video", "get_transcript"))},
        [transcript = deps.transcript](const protocol::Action&, SessionContext&) {
            return ToolResult{transcript->to_text(), {}, {}};
        });

    registry.register_tool(
        ToolDescriptor{"query_transcript",
                       {{"transcript_query", "str", "semantic search query"}},
                       "str",
                       chomp(load_fragment(deps.template_dir, "video", "query_transcript"))},
        [index = deps.phrase_index, embedder = deps.embedder](const protocol::Action& action,
                                                              SessionContext&) {
            if (!index)
                return ToolResult{"The transcript is empty; there are no phrases to search.",
                                  {},
                                  {}};
            auto hits = retrieval::search_phrases(*index, *action.arg("transcript_query"), 3,
                                                  *embedder);
            return ToolResult{retrieval::format_timestamps(hits), {}, {1, 0}};
        });

    registry.register_tool(
        ToolDescriptor{"query_frames",
                       {{"frames_query", "str", "natural-language frame search"}},
                       "str",
                       chomp(load_fragment(deps.template_dir, "video", "query_frames"))},
        [index = deps.frame_index, embedder = deps.embedder](const protocol::Action& action,
                                                             SessionContext&) {
            auto hits =
                retrieval::search_frames(*index, *action.arg("frames_query"), 3, *embedder);
            return ToolResult{retrieval::format_timestamps(hits), {}, {1, 0}};
        });

    registry.register_tool(
        ToolDescriptor{"query_vision",
                       {{"timestamp", "str", "clip center, HH:MM:SS"},
                        {"query", "str", "prompt about the clip"}},
                       "str",
                       chomp(load_fragment(deps.template_dir, "video", "query_vision"))},
        [media = deps.media, vision = deps.vision](const protocol::Action& action,
                                                   SessionContext&) {
            auto center = media::Timestamp::parse(*action.arg("timestamp"));
            auto frames = media::sample_clip(*media, center);

            backends::Request request;
            request.messages.push_back({"user", *action.arg("query")});
            std::vector<std::string> artifacts;
            for (auto& frame : frames) {
                artifacts.push_back(frame.image.label);
                request.images.push_back(std::move(frame.image));
            }
            auto response = backends::vision(*vision, request);
            return ToolResult{response.text, std::move(artifacts),
                              {1, static_cast<std::uint64_t>(request.images.size())}};
        });
}

void register_image_tools(ToolRegistry& registry, const ImageToolDeps& deps) {
    if (!deps.image) throw MissingDependency("image tools need an image handle");
    for (const char* capability : {"vit", "ocr", "detect", "recognize"}) {
        auto it = deps.capabilities.find(capability);
        if (it == deps.capabilities.end() || !it->second)
            throw MissingDependency(std::string("image tools need a \"") + capability +
                                    "\" backend");
    }

    auto delegate = [image = deps.image](backends::ChatBackend* backend,
                                         const std::string& prompt) {
        backends::Request request;
        request.messages.push_back({"user", prompt});
        request.images.push_back(image->image());
        auto response = backends::vision(*backend, request);
        return ToolResult{response.text, {image->image().label}, {1, 1}};
    };

    registry.register_tool(
        ToolDescriptor{"vit_describe",
                       {{"query", "str", "what to describe or look for"}},
                       "str",
                       chomp(load_fragment(deps.template_dir, "image", "vit_describe"))},
        [delegate, backend = deps.capabilities.at("vit")](const protocol::Action& action,
                                                          SessionContext&) {
            return delegate(backend, *action.arg("query"));
        });

    registry.register_tool(
        ToolDescriptor{"ocr", {}, "str",
                       chomp(load_fragment(deps.template_dir, "image", "ocr"))},
        [delegate, backend = deps.capabilities.at("ocr")](const protocol::Action&,
                                                          SessionContext&) {
            return delegate(backend, "Extract all text visible in this image.");
        });

    registry.register_tool(
        ToolDescriptor{"detect_objects", {}, "str",
                       chomp(load_fragment(deps.template_dir, "image", "detect_objects"))},
        [delegate, backend = deps.capabilities.at("detect")](const protocol::Action&,
                                                             SessionContext&) {
            return delegate(backend, "List the objects present in this image with locations.");
        });

    registry.register_tool(
        ToolDescriptor{"recognize",
                       {{"query", "str", "entity to recognize"}},
                       "str",
                       chomp(load_fragment(deps.template_dir, "image", "recognize"))},
        [delegate, backend = deps.capabilities.at("recognize")](const protocol::Action& action,
                                                                SessionContext&) {
            return delegate(backend, "Identify the following in this image: " +
                                         *action.arg("query"));
        });
}

}  // namespace mmagent::toolkit
