#include "slipuq/io.hpp"

#include "slipuq/error.hpp"

#include <fmt/format.h>
#include <openssl/evp.h>

#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <memory>
#include <sstream>

namespace slipuq {

namespace fs = std::filesystem;

std::string sha256_hex(std::string_view data) {
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(),
                                                              EVP_MD_CTX_free);
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1 ||
      EVP_DigestUpdate(ctx.get(), data.data(), data.size()) != 1 ||
      EVP_DigestFinal_ex(ctx.get(), digest, &len) != 1) {
    throw std::runtime_error("sha256 computation failed");
  }
  std::string hex;
  hex.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) hex += fmt::format("{:02x}", digest[i]);
  return hex;
}

std::string sha256_file(const fs::path& path) { return sha256_hex(read_text(path)); }

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return fmt::format("{}", v);
}

double parse_double(std::string_view text) {
  while (!text.empty() && (text.front() == ' ' || text.front() == '\t')) text.remove_prefix(1);
  while (!text.empty() && (text.back() == ' ' || text.back() == '\t' || text.back() == '\r')) {
    text.remove_suffix(1);
  }
  if (text == "nan") return std::numeric_limits<double>::quiet_NaN();
  if (text == "inf") return std::numeric_limits<double>::infinity();
  if (text == "-inf") return -std::numeric_limits<double>::infinity();
  double v = 0.0;
  const char* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || ptr != end || text.empty()) {
    throw ConfigError("not a number: '" + std::string(text) + "'");
  }
  return v;
}

void write_text_atomic(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigError("cannot write " + tmp.string());
    out << text;
    if (!out) throw ConfigError("write failed for " + tmp.string());
  }
  fs::rename(tmp, path);
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string> split(std::string_view text, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = text.find(sep, start);
    out.emplace_back(text.substr(start, pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

std::string join(const std::vector<std::string>& parts, char sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += sep;
    out += parts[i];
  }
  return out;
}

void Manifest::set(const std::string& key, std::string value) {
  if (key.empty() || key.find_first_of("=\n") != std::string::npos ||
      value.find('\n') != std::string::npos) {
    throw std::invalid_argument("manifest key/value may not contain '=' or newlines: " + key);
  }
  for (auto& [k, v] : entries_) {
    if (k == key) {
      v = std::move(value);
      return;
    }
  }
  entries_.emplace_back(key, std::move(value));
}

std::optional<std::string> Manifest::get(const std::string& key) const {
  for (const auto& [k, v] : entries_) {
    if (k == key) return v;
  }
  return std::nullopt;
}

const std::string& Manifest::require(const std::string& key) const {
  for (const auto& [k, v] : entries_) {
    if (k == key) return v;
  }
  throw IntegrityError(origin_ + ": missing key '" + key + "'");
}

double Manifest::require_double(const std::string& key) const {
  try {
    return parse_double(require(key));
  } catch (const ConfigError&) {
    throw IntegrityError(origin_ + ": key '" + key + "' is not a number");
  }
}

long long Manifest::require_int(const std::string& key) const {
  const std::string& v = require(key);
  long long out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size() || v.empty()) {
    throw IntegrityError(origin_ + ": key '" + key + "' is not an integer");
  }
  return out;
}

std::string Manifest::to_string() const {
  std::string out;
  for (const auto& [k, v] : entries_) out += k + "=" + v + "\n";
  return out;
}

Manifest Manifest::parse(const std::string& text, const std::string& origin) {
  Manifest m;
  m.origin_ = origin;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos || eq == 0) {
      throw IntegrityError(origin + ":" + std::to_string(lineno) + ": expected key=value");
    }
    m.set(line.substr(0, eq), line.substr(eq + 1));
  }
  return m;
}

void Manifest::write(const fs::path& path) const { write_text_atomic(path, to_string()); }

Manifest Manifest::read(const fs::path& path) {
  return parse(read_text(path), path.string());
}

std::string csv_to_string(const std::vector<std::string>& header,
                          const Eigen::MatrixXd& values) {
  if (!header.empty() && static_cast<Eigen::Index>(header.size()) != values.cols()) {
    throw DimensionMismatch("csv header has " + std::to_string(header.size()) +
                            " names for " + std::to_string(values.cols()) + " columns");
  }
  std::string out = join(header, ',') + "\n";
  for (Eigen::Index r = 0; r < values.rows(); ++r) {
    for (Eigen::Index c = 0; c < values.cols(); ++c) {
      if (c) out += ',';
      out += format_double(values(r, c));
    }
    out += '\n';
  }
  return out;
}

CsvTable parse_csv(const std::string& text, const std::string& origin) {
  CsvTable t;
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw IntegrityError(origin + ": empty csv");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  t.header = split(line, ',');
  std::vector<double> data;
  std::size_t rows = 0;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = split(line, ',');
    if (fields.size() != t.header.size()) {
      throw IntegrityError(origin + ":" + std::to_string(lineno) + ": expected " +
                           std::to_string(t.header.size()) + " fields, got " +
                           std::to_string(fields.size()));
    }
    for (const auto& f : fields) {
      try {
        data.push_back(parse_double(f));
      } catch (const ConfigError& e) {
        throw IntegrityError(origin + ":" + std::to_string(lineno) + ": " + e.what());
      }
    }
    ++rows;
  }
  const auto cols = static_cast<Eigen::Index>(t.header.size());
  t.values.resize(static_cast<Eigen::Index>(rows), cols);
  for (std::size_t r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) {
      t.values(static_cast<Eigen::Index>(r), c) = data[r * static_cast<std::size_t>(cols) + static_cast<std::size_t>(c)];
    }
  }
  return t;
}

void write_csv(const fs::path& path, const std::vector<std::string>& header,
               const Eigen::MatrixXd& values) {
  write_text_atomic(path, csv_to_string(header, values));
}

CsvTable read_csv(const fs::path& path) { return parse_csv(read_text(path), path.string()); }

void write_gauge_csv(const fs::path& path, const GaugeRecord& rec) {
  if (rec.times.size() != rec.eta.size()) throw DimensionMismatch("gauge record length mismatch");
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rec.times.size()), 2);
  for (std::size_t i = 0; i < rec.times.size(); ++i) {
    m(static_cast<Eigen::Index>(i), 0) = rec.times[i];
    m(static_cast<Eigen::Index>(i), 1) = rec.eta[i];
  }
  write_csv(path, {"time_s", "eta_m"}, m);
}

GaugeRecord read_gauge_csv(const fs::path& path, std::string id) {
  const CsvTable t = read_csv(path);
  if (t.header != std::vector<std::string>{"time_s", "eta_m"}) {
    throw IntegrityError(path.string() + ": expected header time_s,eta_m");
  }
  GaugeRecord rec;
  rec.id = std::move(id);
  for (Eigen::Index r = 0; r < t.values.rows(); ++r) {
    const double time = t.values(r, 0);
    const double eta = t.values(r, 1);
    if (!std::isfinite(time) || !std::isfinite(eta)) {
      throw IntegrityError(path.string() + ": non-finite value at row " + std::to_string(r + 1));
    }
    if (!rec.times.empty() && time <= rec.times.back()) {
      throw IntegrityError(path.string() + ": times must be strictly increasing");
    }
    rec.times.push_back(time);
    rec.eta.push_back(eta);
  }
  return rec;
}

}  // namespace slipuq
