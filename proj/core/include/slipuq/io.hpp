#pragma once

#include "slipuq/forward_swe.hpp"

#include <Eigen/Dense>

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace slipuq {

std::string sha256_hex(std::string_view data);
std::string sha256_file(const std::filesystem::path& path);

// Shortest decimal text that reads back to the same double.
std::string format_double(double v);
// Strict parse of a whole field; throws ConfigError on junk.
double parse_double(std::string_view text);

// Writes to a sibling temporary and renames, so readers never see a partial
// file.
void write_text_atomic(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

// Ordered key=value text file. Lines starting with '#' are comments.
class Manifest {
 public:
  void set(const std::string& key, std::string value);
  void set(const std::string& key, double value) { set(key, format_double(value)); }
  void set(const std::string& key, long long value) { set(key, std::to_string(value)); }
  void set(const std::string& key, int value) { set(key, std::to_string(value)); }
  void set(const std::string& key, std::size_t value) { set(key, std::to_string(value)); }

  std::optional<std::string> get(const std::string& key) const;
  // Throws IntegrityError naming `path` context when absent.
  const std::string& require(const std::string& key) const;
  double require_double(const std::string& key) const;
  long long require_int(const std::string& key) const;

  const std::vector<std::pair<std::string, std::string>>& entries() const { return entries_; }

  std::string to_string() const;
  static Manifest parse(const std::string& text, const std::string& origin = "manifest");
  void write(const std::filesystem::path& path) const;
  static Manifest read(const std::filesystem::path& path);

 private:
  std::vector<std::pair<std::string, std::string>> entries_;
  std::string origin_ = "manifest";
};

struct CsvTable {
  std::vector<std::string> header;
  Eigen::MatrixXd values;
};

// Numeric CSV with one header line. Values are written with format_double,
// so a write/read round trip is bit-exact ("nan" and "inf" included).
std::string csv_to_string(const std::vector<std::string>& header,
                          const Eigen::MatrixXd& values);
CsvTable parse_csv(const std::string& text, const std::string& origin = "csv");
void write_csv(const std::filesystem::path& path, const std::vector<std::string>& header,
               const Eigen::MatrixXd& values);
CsvTable read_csv(const std::filesystem::path& path);

// Gauge series file: header "time_s,eta_m".
void write_gauge_csv(const std::filesystem::path& path, const GaugeRecord& rec);
GaugeRecord read_gauge_csv(const std::filesystem::path& path, std::string id);

std::vector<std::string> split(std::string_view text, char sep);
std::string join(const std::vector<std::string>& parts, char sep);

}  // namespace slipuq
