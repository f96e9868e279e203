#pragma once

#include <string>
#include <string_view>

namespace scbench {

enum class Role { system, user, assistant };

std::string_view to_string(Role role);
Role parse_role(std::string_view text);

struct ChatMessage {
    Role role;
    std::string content;

    bool operator==(const ChatMessage &) const = default;
};

} // namespace scbench
