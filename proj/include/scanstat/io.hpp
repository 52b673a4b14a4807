#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "scanstat/harness.hpp"
#include "scanstat/region_model.hpp"

namespace scanstat {

std::string read_text(const std::filesystem::path& p);

// Writes to a temporary sibling and renames it over the target, so readers
// never see a partial file. Creates missing parent directories.
void write_atomic(const std::filesystem::path& p, std::string_view content);

// 64-bit FNV-1a as 16 hex digits.
std::string content_hash(std::string_view data);

// Shortest representation that reads back to the same double.
std::string format_double(double v);

class CsvWriter {
 public:
  explicit CsvWriter(std::vector<std::string> header);
  void row(const std::vector<std::string>& fields);
  const std::string& str() const noexcept { return out_; }

 private:
  void line(const std::vector<std::string>& fields);
  std::size_t width_;
  std::string out_;
};

struct LabeledPValue {
  std::string label;
  double p = 1.0;
};

// Two columns (period_label, p_value), comma separated. A first line whose
// second field is not a number is taken as a header.
std::vector<LabeledPValue> read_pvalue_csv(const std::filesystem::path& p);

// geo: "id x y", pop: "id population" (no period column).
void write_geometry(const std::filesystem::path& geo_file, const std::filesystem::path& pop_file, const Geometry& g);
// "id period count" rows.
void write_cases(const std::filesystem::path& cas_file, const StudyRegion& sr);

}  // namespace scanstat
