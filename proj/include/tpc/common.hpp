#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace tpc {

enum class Errc {
  // ingest
  MalformedHeader,
  MalformedRow,
  BadTimestamp,
  NegativeCount,
  DuplicateTimestamp,
  TooFewRows,
  UnknownJunction,
  EmptySplit,
  // roadnet
  NegativeSpeed,
  NonAdjacentEdges,
  // neural
  BadShape,
  ShapeMismatch,
  BadLabel,
  StaleCache,
  EmptyDataset,
  BadMagic,
  VersionMismatch,
  CorruptPayload,
  // tuning
  KTooLarge,
  EmptyAxis,
  // metrics
  LengthMismatch,
  ClassOutOfRange,
  EmptyMatrix,
  NameCountMismatch,
  // routing
  BadClass,
  MissingInterval,
  ZeroSpeed,
  NoPath,
  UnknownVertex,
  UnknownSegment,
  // gateway
  BadRequest,
  BindFailure,
  DbLoadFailure,
};

const char* errc_name(Errc c);

/// Domain error carrying a stable code alongside the human-readable message.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message)
      : std::runtime_error(std::string(errc_name(code)) + ": " + message), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

// ---------------------------------------------------------------------------
// Civil datetime, seconds since 1970-01-01 00:00:00 with no zone attached.
// Sensor timestamps are wall-clock local time; we never convert zones.

struct DateTime {
  std::int64_t epoch_s = 0;

  friend auto operator<=>(const DateTime&, const DateTime&) = default;
};

DateTime make_datetime(int year, int month, int day, int hour, int minute, int second);
/// Parses the strict form `YYYY-MM-DD HH:MM:SS`; throws Error(BadTimestamp).
DateTime parse_datetime(const std::string& text);
std::string format_datetime(DateTime dt);
/// Seconds since local midnight, in [0, 86400).
int seconds_of_day(DateTime dt);

/// Parses `HH:MM` or `HH:MM:SS` into seconds of day; throws Error(BadTimestamp).
int parse_time_of_day(const std::string& text);

// ---------------------------------------------------------------------------
// Deterministic randomness. All sampling goes through explicit draws from
// mt19937_64 so results are identical across standard libraries.

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t next() { return gen_(); }

  /// Uniform double in [0, 1).
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Box-Muller; two uniform draws per sample.
  double normal(double mean, double stddev);

  /// Uniform index in [0, n); n must be positive.
  std::size_t below(std::size_t n) { return static_cast<std::size_t>(next() % n); }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::swap(v[i - 1], v[below(i)]);
    }
  }

 private:
  std::mt19937_64 gen_;
};

/// splitmix64-style mixing for deriving independent seed streams.
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b);

// ---------------------------------------------------------------------------
// File helpers.

std::string read_file(const std::string& path);
/// Writes via temp file + rename so readers never observe partial content.
void write_file_atomic(const std::string& path, const std::string& bytes);

}  // namespace tpc
