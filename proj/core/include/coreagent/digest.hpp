// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <string_view>

namespace coreagent {

/// Lowercase hex SHA-256 of the input bytes.
std::string sha256_hex(std::string_view data);

std::string base64_encode(std::string_view data);
std::string base64_decode(std::string_view encoded);

}  // namespace coreagent
