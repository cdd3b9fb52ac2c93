#pragma once

// A canned, rule-based stand-in for a chat model so the CLI, the service and
// demos run without network access. Replies follow every agent's protocol
// (orchestrator JSON, ReAct lines, judge scores, feedback schema) and depend
// only on the request text, so runs are reproducible.

#include <string>

#include "tacla/llm_gateway.hpp"

namespace tacla {

/// Dispatches on request.agent_role; requests without a role get a plain line.
std::string offline_reply(const ChatRequest& request);

}  // namespace tacla
