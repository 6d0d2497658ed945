#pragma once

#include <array>
#include <cctype>
#include <string>
#include <string_view>
#include <utility>

#include "sparse_evo/errors.hpp"

namespace sparse_evo {

enum class RemovalRule { magnitude, cosine_weighted };
enum class AdditionRule { random, top_cosine, probabilistic_cosine };

/// Which removal and addition rule the end-of-epoch rewiring uses.
struct EvolutionPolicy {
  RemovalRule removal = RemovalRule::magnitude;
  AdditionRule addition = AdditionRule::random;

  bool operator==(const EvolutionPolicy&) const = default;

  bool needs_full_cosine() const { return addition != AdditionRule::random; }
  bool needs_edge_cosine() const { return removal == RemovalRule::cosine_weighted; }

  static EvolutionPolicy set() { return {RemovalRule::magnitude, AdditionRule::random}; }
  static EvolutionPolicy codaset() { return {RemovalRule::magnitude, AdditionRule::top_cosine}; }
  static EvolutionPolicy copaset() {
    return {RemovalRule::magnitude, AdditionRule::probabilistic_cosine};
  }
  static EvolutionPolicy corset() { return {RemovalRule::cosine_weighted, AdditionRule::random}; }
  static EvolutionPolicy codacorset() {
    return {RemovalRule::cosine_weighted, AdditionRule::top_cosine};
  }
  static EvolutionPolicy copacorset() {
    return {RemovalRule::cosine_weighted, AdditionRule::probabilistic_cosine};
  }

  std::string name() const {
    for (const auto& [n, p] : named()) if (p == *this) return n;
    return "unknown";
  }

  /// Case-insensitive lookup of "SET", "CoDASET", ..., "CoPACoRSET".
  static EvolutionPolicy from_name(std::string_view name) {
    auto lower = [](std::string_view s) {
      std::string out(s);
      for (auto& ch : out) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
      return out;
    };
    const std::string key = lower(name);
    for (const auto& [n, p] : named()) if (lower(n) == key) return p;
    throw InvalidConfig("unknown policy '" + std::string(name) +
                        "' (expected SET, CoDASET, CoPASET, CoRSET, CoDACoRSET or CoPACoRSET)");
  }

  static const std::array<std::pair<const char*, EvolutionPolicy>, 6>& named() {
    static const std::array<std::pair<const char*, EvolutionPolicy>, 6> table{{
        {"SET", set()},
        {"CoDASET", codaset()},
        {"CoPASET", copaset()},
        {"CoRSET", corset()},
        {"CoDACoRSET", codacorset()},
        {"CoPACoRSET", copacorset()},
    }};
    return table;
  }
};

}  // namespace sparse_evo
