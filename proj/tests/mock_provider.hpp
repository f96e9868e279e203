#pragma once

#include <functional>
#include <mutex>
#include <string>
#include <vector>

#include "scbench/gateway.hpp"

namespace testutil {

// Provider backed by a function of the request; remembers every request.
class ScriptedProvider : public scbench::Provider {
  public:
    using Script = std::function<std::string(const scbench::ChatRequest &)>;
    explicit ScriptedProvider(Script script) : script_(std::move(script)) {}

    std::string complete(const scbench::ChatRequest &request) override {
        {
            std::lock_guard lock(mutex_);
            requests_.push_back(request);
        }
        return script_(request);
    }
    std::string_view mode() const override { return "live"; }

    std::vector<scbench::ChatRequest> requests() const {
        std::lock_guard lock(mutex_);
        return requests_;
    }

  private:
    Script script_;
    mutable std::mutex mutex_;
    std::vector<scbench::ChatRequest> requests_;
};

// Deterministic answers: the reasoning round echoes the first marker, the
// summary and zero-shot rounds answer with a label derived from it.
inline std::string echo_script(const scbench::ChatRequest &request) {
    const auto &last = request.messages.back().content;
    const auto open = last.find('[');
    if (last.find("step by step") != std::string::npos) {
        const auto comma = last.find_first_of(",]", open);
        return "Reasoning about " + last.substr(open + 1, comma - open - 1) + ".\nIt looks like a B cell.";
    }
    if (open == std::string::npos) return "B cells. Summary of the reasoning above.";
    return "B cells";
}

} // namespace testutil
