#include "flesd/ledger.hpp"

namespace flesd {

std::string to_string(Direction d) { return d == Direction::kUp ? "up" : "down"; }

std::string to_string(PayloadKind k) {
  switch (k) {
    case PayloadKind::kWeights:
      return "weights";
    case PayloadKind::kRepresentations:
      return "representations";
    case PayloadKind::kPublicData:
      return "public_data";
  }
  return "unknown";
}

std::uint64_t CommunicationLedger::total(Direction d) const {
  std::uint64_t sum = 0;
  for (const auto& r : records_)
    if (r.direction == d) sum += r.bytes;
  return sum;
}

std::uint64_t CommunicationLedger::total() const {
  std::uint64_t sum = 0;
  for (const auto& r : records_) sum += r.bytes;
  return sum;
}

}  // namespace flesd
