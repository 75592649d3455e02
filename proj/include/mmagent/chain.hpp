// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <chrono>
#include <string>
#include <variant>
#include <vector>

#include "mmagent/protocol.hpp"

namespace mmagent::session {

enum class Role { User, Reasoner, Tool, Critic };

std::string to_string(Role role);
Role role_from_string(const std::string& text);

struct ChainEntry {
    Role role;
    std::variant<protocol::AgentMessage, protocol::CriticMessage> payload;
    std::chrono::system_clock::time_point ts;

    const protocol::AgentMessage* agent_message() const;
    const protocol::CriticMessage* critic_message() const;
    // Wire form of the payload, identical to what crossed the backend.
    std::string serialized() const;
};

// Append-only log of one session: the critic's primary evidence. Indices
// stay stable for the session lifetime.
class ReasoningChain {
public:
    void append(Role role, protocol::AgentMessage message);
    void append(Role role, protocol::CriticMessage message);
    void append(ChainEntry entry);

    const std::vector<ChainEntry>& entries() const { return entries_; }
    std::size_t size() const { return entries_.size(); }
    const ChainEntry& at(std::size_t index) const { return entries_.at(index); }

private:
    std::vector<ChainEntry> entries_;
};

// Payload-wise equality; wall-clock timestamps are excluded.
bool equal_payloads(const ReasoningChain& a, const ReasoningChain& b);

}  // namespace mmagent::session
