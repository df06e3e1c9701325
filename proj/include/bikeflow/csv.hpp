#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace bikeflow {

/// RFC 4180 style: quoted cells, doubled quotes, CRLF tolerated. Blank
/// lines are skipped.
[[nodiscard]] std::vector<std::vector<std::string>> parse_csv(std::string_view text);

}  // namespace bikeflow
