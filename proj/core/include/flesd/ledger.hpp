#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace flesd {

enum class Direction { kUp, kDown };
enum class PayloadKind { kWeights, kRepresentations, kPublicData };

std::string to_string(Direction d);
std::string to_string(PayloadKind k);

struct LedgerRecord {
  std::size_t round = 0;  // 0 = before the first round
  int client_id = 0;
  Direction direction = Direction::kDown;
  PayloadKind kind = PayloadKind::kWeights;
  std::uint64_t bytes = 0;
};

// Append-only log of simulated transfers, one record per payload per client.
class CommunicationLedger {
 public:
  void add(const LedgerRecord& r) { records_.push_back(r); }
  const std::vector<LedgerRecord>& records() const { return records_; }
  bool empty() const { return records_.empty(); }

  std::uint64_t total(Direction d) const;
  std::uint64_t total() const;
  std::uint64_t uplink() const { return total(Direction::kUp); }
  std::uint64_t downlink() const { return total(Direction::kDown); }

 private:
  std::vector<LedgerRecord> records_;
};

}  // namespace flesd
