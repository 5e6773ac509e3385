// Copyright 2026 The featuremark Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "featuremark/errors.hpp"
#include "featuremark/hash.hpp"
#include "featuremark/random.hpp"

namespace featuremark {

inline constexpr std::size_t kMaxMessageBits = 32;
inline constexpr std::size_t kMaxEnumerableBits = 16;

/// Normalized target interval: the standard-normal CDF at -2 and +2.
inline constexpr double kTargetLow = 0.0228;
inline constexpr double kTargetHigh = 0.9772;

inline constexpr std::string_view kKeyHashAlgorithm = "siphash-2-4";
inline constexpr std::string_view kTargetPrngAlgorithm = "philox4x32-10";

/// b-bit payload, most significant bit first.
class Message {
 public:
  Message() = default;

  explicit Message(std::vector<std::uint8_t> bits) : bits_(std::move(bits)) {
    if (bits_.empty() || bits_.size() > kMaxMessageBits) {
      throw Error(Errc::bits_out_of_range, "message must have 1.." +
                                               std::to_string(kMaxMessageBits) + " bits");
    }
    for (auto& b : bits_) require(b <= 1, Errc::invalid_argument, "message bits must be 0 or 1");
  }

  static Message from_value(std::uint64_t value, std::size_t bits) {
    if (bits == 0 || bits > kMaxMessageBits) {
      throw Error(Errc::bits_out_of_range, "message must have 1.." +
                                               std::to_string(kMaxMessageBits) + " bits");
    }
    require(bits == 64 || value < (std::uint64_t{1} << bits), Errc::invalid_argument,
            "message value does not fit in the bit count");
    std::vector<std::uint8_t> out(bits);
    for (std::size_t i = 0; i < bits; ++i) out[i] = (value >> (bits - 1 - i)) & 1u;
    return Message(std::move(out));
  }

  /// Parses a string of '0' and '1'.
  static Message parse(std::string_view s) {
    std::vector<std::uint8_t> out;
    for (char c : s) {
      require(c == '0' || c == '1', Errc::invalid_argument, "message must be a string of 0/1");
      out.push_back(static_cast<std::uint8_t>(c - '0'));
    }
    return Message(std::move(out));
  }

  std::size_t size() const { return bits_.size(); }
  const std::vector<std::uint8_t>& bits() const { return bits_; }

  std::uint64_t value() const {
    std::uint64_t v = 0;
    for (auto b : bits_) v = (v << 1) | b;
    return v;
  }

  std::string to_string() const {
    std::string s;
    for (auto b : bits_) s.push_back(static_cast<char>('0' + b));
    return s;
  }

  friend bool operator==(const Message&, const Message&) = default;

 private:
  std::vector<std::uint8_t> bits_;
};

/// 128-bit detector secret.
struct Secret {
  std::array<std::uint8_t, 16> bytes{};

  static Secret from_hex(std::string_view hex) {
    require(hex.size() == 32, Errc::invalid_argument, "secret must be 32 hex digits");
    auto nibble = [](char c) -> int {
      if (c >= '0' && c <= '9') return c - '0';
      if (c >= 'a' && c <= 'f') return c - 'a' + 10;
      if (c >= 'A' && c <= 'F') return c - 'A' + 10;
      throw Error(Errc::invalid_argument, "secret contains a non-hex digit");
    };
    Secret s;
    for (std::size_t i = 0; i < 16; ++i) {
      s.bytes[i] = static_cast<std::uint8_t>(nibble(hex[2 * i]) << 4 | nibble(hex[2 * i + 1]));
    }
    return s;
  }

  /// Deterministic secret for tests and simulations.
  static Secret from_seed(std::uint64_t seed) {
    Secret s;
    HashStream stream(seed);
    for (std::size_t i = 0; i < 16; i += 8) {
      const std::uint64_t x = stream.next();
      for (std::size_t k = 0; k < 8; ++k) s.bytes[i + k] = static_cast<std::uint8_t>(x >> (8 * k));
    }
    return s;
  }

  std::string to_hex() const {
    static constexpr char kDigits[] = "0123456789abcdef";
    std::string out;
    for (auto b : bytes) {
      out.push_back(kDigits[b >> 4]);
      out.push_back(kDigits[b & 15]);
    }
    return out;
  }

  friend bool operator==(const Secret&, const Secret&) = default;
};

struct WatermarkKey {
  std::uint64_t seed = 0;
  Message message;

  friend bool operator==(const WatermarkKey&, const WatermarkKey&) = default;
};

/// seed = SipHash-2-4 keyed by the secret over "fmk1" || bit count || bits,
/// the bits packed big-endian into four bytes.
inline WatermarkKey message_to_key(const Message& m, const Secret& secret) {
  if (m.size() == 0 || m.size() > kMaxMessageBits) {
    throw Error(Errc::bits_out_of_range, "message must have 1.." +
                                             std::to_string(kMaxMessageBits) + " bits");
  }
  const auto v = static_cast<std::uint32_t>(m.value());
  const std::array<std::uint8_t, 9> input = {
      'f', 'm', 'k', '1', static_cast<std::uint8_t>(m.size()),
      static_cast<std::uint8_t>(v >> 24), static_cast<std::uint8_t>(v >> 16),
      static_cast<std::uint8_t>(v >> 8), static_cast<std::uint8_t>(v)};
  return {siphash24(secret.bytes, input), m};
}

/// tau_i = low + u_i (high - low) with u_i the i-th draw of a counter-mode
/// Philox stream keyed by the seed, so any prefix is stable.
inline std::vector<double> targets_from_key(const WatermarkKey& key, std::size_t count) {
  require(count >= 1, Errc::invalid_argument, "target count must be positive");
  const CounterStream stream(key.seed, 0);
  std::vector<double> out(count);
  for (std::size_t i = 0; i < count; ++i) {
    out[i] = kTargetLow + to_unit_interval(stream.at(i)) * (kTargetHigh - kTargetLow);
  }
  return out;
}

/// Every key for b-bit messages, ordered by message value.
inline std::vector<WatermarkKey> enumerate_keys(std::size_t bits, const Secret& secret) {
  if (bits == 0) throw Error(Errc::bits_out_of_range, "bit count must be positive");
  if (bits > kMaxEnumerableBits) {
    throw Error(Errc::space_too_large, "exhaustive key enumeration is limited to " +
                                           std::to_string(kMaxEnumerableBits) + " bits");
  }
  std::vector<WatermarkKey> keys;
  keys.reserve(std::size_t{1} << bits);
  for (std::uint64_t v = 0; v < (std::uint64_t{1} << bits); ++v) {
    keys.push_back(message_to_key(Message::from_value(v, bits), secret));
  }
  return keys;
}

inline constexpr int kKeyRegistryFormatVersion = 1;

/// On-disk key material. Keys themselves are always re-derived.
struct KeyRegistry {
  int format_version = kKeyRegistryFormatVersion;
  Secret secret;
  std::size_t bits = 0;

  std::vector<WatermarkKey> keys() const { return enumerate_keys(bits, secret); }

  nlohmann::json to_json() const {
    return {{"format_version", format_version},
            {"secret_hex", secret.to_hex()},
            {"bits", bits},
            {"key_hash", kKeyHashAlgorithm},
            {"target_prng", kTargetPrngAlgorithm}};
  }

  static KeyRegistry from_json(const nlohmann::json& j) {
    KeyRegistry r;
    try {
      r.format_version = j.at("format_version").get<int>();
      if (r.format_version != kKeyRegistryFormatVersion) {
        throw Error(Errc::version_mismatch, "unsupported key registry version");
      }
      if (j.contains("key_hash") && j["key_hash"].get<std::string>() != kKeyHashAlgorithm) {
        throw Error(Errc::version_mismatch, "key registry uses a different key hash");
      }
      if (j.contains("target_prng") &&
          j["target_prng"].get<std::string>() != kTargetPrngAlgorithm) {
        throw Error(Errc::version_mismatch, "key registry uses a different target generator");
      }
      r.secret = Secret::from_hex(j.at("secret_hex").get<std::string>());
      r.bits = j.at("bits").get<std::size_t>();
    } catch (const nlohmann::json::exception& e) {
      throw Error(Errc::config_invalid, std::string("key registry: ") + e.what());
    }
    if (r.bits == 0 || r.bits > kMaxMessageBits) {
      throw Error(Errc::bits_out_of_range, "key registry bit count out of range");
    }
    return r;
  }

  void save(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw Error(Errc::io_error, "cannot open " + path.string() + " for writing");
    out << to_json().dump(2) << '\n';
  }

  static KeyRegistry load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(Errc::io_error, "cannot open " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    try {
      return from_json(nlohmann::json::parse(buf.str()));
    } catch (const nlohmann::json::parse_error& e) {
      throw Error(Errc::config_invalid, std::string("key registry: ") + e.what());
    }
  }
};

}  // namespace featuremark
