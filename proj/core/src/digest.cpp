// SPDX-License-Identifier: Apache-2.0

#include "coreagent/digest.hpp"

#include <openssl/evp.h>

#include <array>
#include <memory>
#include <vector>

#include "coreagent/error.hpp"

namespace coreagent {

std::string sha256_hex(std::string_view data) {
  std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), md.data(), &len, EVP_sha256(), nullptr) != 1) {
    throw Error(ErrorKind::InvalidArgument, "sha256 computation failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(len * 2);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(kHex[md[i] >> 4]);
    out.push_back(kHex[md[i] & 0xF]);
  }
  return out;
}

std::string base64_encode(std::string_view data) {
  if (data.empty()) return {};
  std::vector<unsigned char> out(4 * ((data.size() + 2) / 3) + 1);
  const int n = EVP_EncodeBlock(out.data(), reinterpret_cast<const unsigned char*>(data.data()),
                                static_cast<int>(data.size()));
  return {reinterpret_cast<const char*>(out.data()), static_cast<size_t>(n)};
}

std::string base64_decode(std::string_view encoded) {
  if (encoded.empty()) return {};
  if (encoded.size() % 4 != 0) throw Error(ErrorKind::InvalidArgument, "base64 length not a multiple of 4");
  std::vector<unsigned char> out(3 * encoded.size() / 4 + 1);
  const int n = EVP_DecodeBlock(out.data(), reinterpret_cast<const unsigned char*>(encoded.data()),
                                static_cast<int>(encoded.size()));
  if (n < 0) throw Error(ErrorKind::InvalidArgument, "invalid base64 payload");
  size_t len = static_cast<size_t>(n);
  // EVP_DecodeBlock counts padding bytes as output.
  if (encoded.back() == '=') --len;
  if (encoded.size() >= 2 && encoded[encoded.size() - 2] == '=') --len;
  return {reinterpret_cast<const char*>(out.data()), len};
}

}  // namespace coreagent
