#pragma once

#include <cstdint>
#include <string_view>

namespace chainblock {

enum class ResourceType : std::uint8_t { image, subdocument, script, other };

std::string_view to_string(ResourceType type);
// Accepts the names used by request instrumentation ("image", "iframe",
// "subdocument", "script", ...). Anything unrecognised maps to `other`.
ResourceType resource_type_from_string(std::string_view name);

}  // namespace chainblock
