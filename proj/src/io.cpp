#include "scanstat/io.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <system_error>

#include "scanstat/errors.hpp"

namespace scanstat {

namespace fs = std::filesystem;

std::string read_text(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw InputError("cannot open " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_atomic(const fs::path& p, std::string_view content) {
  std::error_code ec;
  if (p.has_parent_path()) fs::create_directories(p.parent_path(), ec);
  if (ec) throw InputError("cannot create directory " + p.parent_path().string() + ": " + ec.message());
  fs::path tmp = p;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw InputError("cannot write " + tmp.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw InputError("write failed for " + tmp.string());
  }
  fs::rename(tmp, p, ec);
  if (ec) throw InputError("cannot move " + tmp.string() + " to " + p.string() + ": " + ec.message());
}

std::string content_hash(std::string_view data) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string format_double(double v) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

CsvWriter::CsvWriter(std::vector<std::string> header) : width_(header.size()) { line(header); }

void CsvWriter::row(const std::vector<std::string>& fields) {
  if (fields.size() != width_) throw std::logic_error("csv row width mismatch");
  line(fields);
}

void CsvWriter::line(const std::vector<std::string>& fields) {
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) out_ += ',';
    const std::string& f = fields[i];
    if (f.find_first_of(",\"\n") == std::string::npos) {
      out_ += f;
    } else {
      out_ += '"';
      for (char c : f) {
        if (c == '"') out_ += '"';
        out_ += c;
      }
      out_ += '"';
    }
  }
  out_ += '\n';
}

namespace {

std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

bool parse_double(const std::string& s, double& v) {
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  return r.ec == std::errc() && r.ptr == s.data() + s.size();
}

}  // namespace

std::vector<LabeledPValue> read_pvalue_csv(const fs::path& p) {
  std::istringstream in(read_text(p));
  std::vector<LabeledPValue> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    if (trim(line).empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos)
      throw InputError(p.string() + ":" + std::to_string(lineno) + ": expected 'period_label,p_value'");
    const std::string label = trim(line.substr(0, comma));
    std::string rest = trim(line.substr(comma + 1));
    if (const auto c2 = rest.find(','); c2 != std::string::npos) rest = trim(rest.substr(0, c2));
    double v = 0.0;
    if (!parse_double(rest, v)) {
      if (out.empty() && lineno == 1) continue;  // header
      throw InputError(p.string() + ":" + std::to_string(lineno) + ": p-value '" + rest + "' is not a number");
    }
    if (!(v > 0.0 && v <= 1.0))
      throw InputError(p.string() + ":" + std::to_string(lineno) + ": p-value " + rest + " is outside (0, 1]");
    out.push_back({label, v});
  }
  if (out.empty()) throw InputError(p.string() + ": no p-values");
  return out;
}

void write_geometry(const fs::path& geo_file, const fs::path& pop_file, const Geometry& g) {
  std::string geo, pop;
  for (std::size_t i = 0; i < g.regions.size(); ++i) {
    geo += g.regions[i].id + " " + format_double(g.regions[i].x) + " " + format_double(g.regions[i].y) + "\n";
    pop += g.regions[i].id + " " + format_double(g.population[i]) + "\n";
  }
  write_atomic(geo_file, geo);
  write_atomic(pop_file, pop);
}

void write_cases(const fs::path& cas_file, const StudyRegion& sr) {
  std::string s;
  for (std::size_t t = 0; t < sr.num_periods(); ++t)
    for (std::size_t i = 0; i < sr.size(); ++i)
      s += sr.region(i).id + " " + sr.periods()[t] + " " + std::to_string(sr.cases(t)[i]) + "\n";
  write_atomic(cas_file, s);
}

}  // namespace scanstat
