#include "tpc/common.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

namespace tpc {

const char* errc_name(Errc c) {
  switch (c) {
    case Errc::MalformedHeader: return "MalformedHeader";
    case Errc::MalformedRow: return "MalformedRow";
    case Errc::BadTimestamp: return "BadTimestamp";
    case Errc::NegativeCount: return "NegativeCount";
    case Errc::DuplicateTimestamp: return "DuplicateTimestamp";
    case Errc::TooFewRows: return "TooFewRows";
    case Errc::UnknownJunction: return "UnknownJunction";
    case Errc::EmptySplit: return "EmptySplit";
    case Errc::NegativeSpeed: return "NegativeSpeed";
    case Errc::NonAdjacentEdges: return "NonAdjacentEdges";
    case Errc::BadShape: return "BadShape";
    case Errc::ShapeMismatch: return "ShapeMismatch";
    case Errc::BadLabel: return "BadLabel";
    case Errc::StaleCache: return "StaleCache";
    case Errc::EmptyDataset: return "EmptyDataset";
    case Errc::BadMagic: return "BadMagic";
    case Errc::VersionMismatch: return "VersionMismatch";
    case Errc::CorruptPayload: return "CorruptPayload";
    case Errc::KTooLarge: return "KTooLarge";
    case Errc::EmptyAxis: return "EmptyAxis";
    case Errc::LengthMismatch: return "LengthMismatch";
    case Errc::ClassOutOfRange: return "ClassOutOfRange";
    case Errc::EmptyMatrix: return "EmptyMatrix";
    case Errc::NameCountMismatch: return "NameCountMismatch";
    case Errc::BadClass: return "BadClass";
    case Errc::MissingInterval: return "MissingInterval";
    case Errc::ZeroSpeed: return "ZeroSpeed";
    case Errc::NoPath: return "NoPath";
    case Errc::UnknownVertex: return "UnknownVertex";
    case Errc::UnknownSegment: return "UnknownSegment";
    case Errc::BadRequest: return "BadRequest";
    case Errc::BindFailure: return "BindFailure";
    case Errc::DbLoadFailure: return "DbLoadFailure";
  }
  return "Unknown";
}

namespace {

// Howard Hinnant's civil-date algorithms; avoids timezone-dependent mktime.
std::int64_t days_from_civil(int y, int m, int d) {
  y -= m <= 2;
  const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
  const unsigned yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy = (153u * static_cast<unsigned>(m + (m > 2 ? -3 : 9)) + 2u) / 5u +
                       static_cast<unsigned>(d) - 1u;
  const unsigned doe = yoe * 365u + yoe / 4u - yoe / 100u + doy;
  return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

void civil_from_days(std::int64_t z, int& y, int& m, int& d) {
  z += 719468;
  const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
  const unsigned doe = static_cast<unsigned>(z - era * 146097);
  const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
  const std::int64_t yy = static_cast<std::int64_t>(yoe) + era * 400;
  const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
  const unsigned mp = (5 * doy + 2) / 153;
  d = static_cast<int>(doy - (153 * mp + 2) / 5 + 1);
  m = static_cast<int>(mp < 10 ? mp + 3 : mp - 9);
  y = static_cast<int>(yy + (m <= 2));
}

int days_in_month(int y, int m) {
  static const int n[] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
  if (m == 2 && ((y % 4 == 0 && y % 100 != 0) || y % 400 == 0)) return 29;
  return n[m - 1];
}

bool parse_fixed_int(const std::string& s, std::size_t pos, std::size_t len, int& out) {
  int v = 0;
  for (std::size_t i = pos; i < pos + len; ++i) {
    if (i >= s.size() || s[i] < '0' || s[i] > '9') return false;
    v = v * 10 + (s[i] - '0');
  }
  out = v;
  return true;
}

}  // namespace

DateTime make_datetime(int year, int month, int day, int hour, int minute, int second) {
  return DateTime{days_from_civil(year, month, day) * 86400 + hour * 3600 + minute * 60 + second};
}

DateTime parse_datetime(const std::string& text) {
  // YYYY-MM-DD HH:MM:SS
  int Y, M, D, h, m, s;
  const bool shape_ok =
      text.size() == 19 && text[4] == '-' && text[7] == '-' && text[10] == ' ' &&
      text[13] == ':' && text[16] == ':' && parse_fixed_int(text, 0, 4, Y) &&
      parse_fixed_int(text, 5, 2, M) && parse_fixed_int(text, 8, 2, D) &&
      parse_fixed_int(text, 11, 2, h) && parse_fixed_int(text, 14, 2, m) &&
      parse_fixed_int(text, 17, 2, s);
  if (!shape_ok || M < 1 || M > 12 || D < 1 || D > days_in_month(Y, M) || h > 23 || m > 59 ||
      s > 59) {
    throw Error(Errc::BadTimestamp, "expected YYYY-MM-DD HH:MM:SS, got '" + text + "'");
  }
  return make_datetime(Y, M, D, h, m, s);
}

std::string format_datetime(DateTime dt) {
  std::int64_t days = dt.epoch_s / 86400;
  std::int64_t sod = dt.epoch_s % 86400;
  if (sod < 0) {
    sod += 86400;
    --days;
  }
  int y, m, d;
  civil_from_days(days, y, m, d);
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%04d-%02d-%02d %02d:%02d:%02d", y, m, d,
                static_cast<int>(sod / 3600), static_cast<int>((sod / 60) % 60),
                static_cast<int>(sod % 60));
  return buf;
}

int seconds_of_day(DateTime dt) {
  std::int64_t sod = dt.epoch_s % 86400;
  if (sod < 0) sod += 86400;
  return static_cast<int>(sod);
}

int parse_time_of_day(const std::string& text) {
  int h = 0, m = 0, s = 0;
  bool ok = false;
  if (text.size() == 5 && text[2] == ':') {
    ok = parse_fixed_int(text, 0, 2, h) && parse_fixed_int(text, 3, 2, m);
  } else if (text.size() == 8 && text[2] == ':' && text[5] == ':') {
    ok = parse_fixed_int(text, 0, 2, h) && parse_fixed_int(text, 3, 2, m) &&
         parse_fixed_int(text, 6, 2, s);
  }
  if (!ok || h > 23 || m > 59 || s > 59) {
    throw Error(Errc::BadTimestamp, "expected HH:MM[:SS], got '" + text + "'");
  }
  return h * 3600 + m * 60 + s;
}

double Rng::normal(double mean, double stddev) {
  const double u1 = 1.0 - uniform();  // (0, 1], keeps log finite
  const double u2 = uniform();
  return mean + stddev * std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
}

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  std::uint64_t z = a + 0x9e3779b97f4a7c15ull * (b + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::DbLoadFailure, "cannot open " + path);
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return bytes;
}

void write_file_atomic(const std::string& path, const std::string& bytes) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(Errc::DbLoadFailure, "cannot write " + tmp);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) throw Error(Errc::DbLoadFailure, "short write to " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace tpc
