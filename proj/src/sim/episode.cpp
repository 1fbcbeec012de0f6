#include "dfree/sim/episode.hpp"

#include <stdexcept>

namespace dfree::sim {

std::string_view split_name(Split s) {
  switch (s) {
    case Split::Train: return "train";
    case Split::Val: return "val";
    case Split::Test: return "test";
  }
  return "?";
}

Split parse_split(std::string_view s) {
  if (s == "train") return Split::Train;
  if (s == "val") return Split::Val;
  if (s == "test") return Split::Test;
  throw std::invalid_argument("unknown split: " + std::string(s));
}

std::string_view novelty_name(Novelty n) { return n == Novelty::Seen ? "seen" : "novel"; }

Novelty parse_novelty(std::string_view s) {
  if (s == "seen") return Novelty::Seen;
  if (s == "novel") return Novelty::Novel;
  throw std::invalid_argument("unknown novelty: " + std::string(s));
}

}  // namespace dfree::sim
