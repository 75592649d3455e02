// SPDX-License-Identifier: Apache-2.0
#include "mmagent/chain.hpp"

namespace mmagent::session {

std::string to_string(Role role) {
    switch (role) {
        case Role::User: return "user";
        case Role::Reasoner: return "reasoner";
        case Role::Tool: return "tool";
        case Role::Critic: return "critic";
    }
    return "user";
}

Role role_from_string(const std::string& text) {
    if (text == "user") return Role::User;
    if (text == "reasoner") return Role::Reasoner;
    if (text == "tool") return Role::Tool;
    if (text == "critic") return Role::Critic;
    throw Error("UnknownRole", "unknown chain role: " + text);
}

const protocol::AgentMessage* ChainEntry::agent_message() const {
    return std::get_if<protocol::AgentMessage>(&payload);
}

const protocol::CriticMessage* ChainEntry::critic_message() const {
    return std::get_if<protocol::CriticMessage>(&payload);
}

std::string ChainEntry::serialized() const {
    if (const auto* agent = agent_message()) return protocol::serialize_agent_message(*agent);
    return protocol::serialize_critic_message(*critic_message());
}

void ReasoningChain::append(Role role, protocol::AgentMessage message) {
    entries_.push_back({role, std::move(message), std::chrono::system_clock::now()});
}

void ReasoningChain::append(Role role, protocol::CriticMessage message) {
    entries_.push_back({role, std::move(message), std::chrono::system_clock::now()});
}

void ReasoningChain::append(ChainEntry entry) {
    entries_.push_back(std::move(entry));
}

bool equal_payloads(const ReasoningChain& a, const ReasoningChain& b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a.at(i).role != b.at(i).role) return false;
        if (a.at(i).payload != b.at(i).payload) return false;
    }
    return true;
}

}  // namespace mmagent::session
