#include "scanstat/region_model.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <sstream>

#include "scanstat/errors.hpp"

namespace scanstat {

StudyRegion::StudyRegion(std::vector<Region> regions, std::vector<std::string> periods,
                         std::vector<std::vector<double>> population, std::vector<std::vector<Count>> cases)
    : periods_(std::move(periods)) {
  if (regions.empty()) throw InputError("study region has no regions");
  if (periods_.empty()) throw InputError("study region has no periods");
  if (population.size() != periods_.size() || cases.size() != periods_.size())
    throw InputError("population/case tables do not match the number of periods");
  for (std::size_t t = 0; t < periods_.size(); ++t) {
    if (population[t].size() != regions.size() || cases[t].size() != regions.size())
      throw InputError("period '" + periods_[t] + "': row count does not match the number of regions");
  }

  std::vector<std::size_t> perm(regions.size());
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  std::sort(perm.begin(), perm.end(), [&](std::size_t a, std::size_t b) { return regions[a].id < regions[b].id; });

  regions_.reserve(regions.size());
  for (std::size_t i : perm) regions_.push_back(regions[i]);
  population_.assign(periods_.size(), std::vector<double>(regions.size()));
  cases_.assign(periods_.size(), std::vector<Count>(regions.size()));
  for (std::size_t t = 0; t < periods_.size(); ++t) {
    for (std::size_t k = 0; k < perm.size(); ++k) {
      population_[t][k] = population[t][perm[k]];
      cases_[t][k] = cases[t][perm[k]];
    }
  }
  validate_and_totals();
}

void StudyRegion::validate_and_totals() {
  for (std::size_t i = 1; i < regions_.size(); ++i) {
    if (regions_[i].id == regions_[i - 1].id) throw InputError("duplicate region id '" + regions_[i].id + "'");
  }
  for (const auto& r : regions_) {
    if (!std::isfinite(r.x) || !std::isfinite(r.y)) throw InputError("region '" + r.id + "': non-finite centroid");
  }
  std::set<std::string> labels(periods_.begin(), periods_.end());
  if (labels.size() != periods_.size()) throw InputError("duplicate period label");

  total_cases_.assign(periods_.size(), 0);
  total_population_.assign(periods_.size(), 0.0);
  for (std::size_t t = 0; t < periods_.size(); ++t) {
    for (std::size_t i = 0; i < regions_.size(); ++i) {
      const double n = population_[t][i];
      if (!(n > 0.0) || !std::isfinite(n))
        throw InputError("region '" + regions_[i].id + "', period '" + periods_[t] + "': population must be positive");
      if (cases_[t][i] < 0)
        throw InputError("region '" + regions_[i].id + "', period '" + periods_[t] + "': negative case count");
      total_cases_[t] += cases_[t][i];
      total_population_[t] += n;
    }
  }
}

std::size_t StudyRegion::region_index(std::string_view id) const {
  auto it = std::lower_bound(regions_.begin(), regions_.end(), id,
                             [](const Region& r, std::string_view v) { return r.id < v; });
  if (it == regions_.end() || it->id != id) throw InputError("unknown region id '" + std::string(id) + "'");
  return static_cast<std::size_t>(it - regions_.begin());
}

std::size_t StudyRegion::period_index(std::string_view label) const {
  for (std::size_t t = 0; t < periods_.size(); ++t)
    if (periods_[t] == label) return t;
  throw InputError("unknown period '" + std::string(label) + "'");
}

StudyRegion StudyRegion::subset(std::span<const std::size_t> idx) const {
  std::vector<Region> regs;
  std::vector<std::vector<double>> pop(periods_.size());
  std::vector<std::vector<Count>> cas(periods_.size());
  for (std::size_t i : idx) {
    regs.push_back(regions_.at(i));
    for (std::size_t t = 0; t < periods_.size(); ++t) {
      pop[t].push_back(population_[t][i]);
      cas[t].push_back(cases_[t][i]);
    }
  }
  return StudyRegion(std::move(regs), periods_, std::move(pop), std::move(cas));
}

StudyRegion StudyRegion::aggregate(std::span<const std::size_t> periods, std::string label) const {
  if (periods.empty()) throw InputError("cannot aggregate an empty period set");
  std::vector<double> pop(size(), 0.0);
  std::vector<Count> cas(size(), 0);
  for (std::size_t t : periods) {
    if (t >= num_periods()) throw InputError("period index out of range");
    for (std::size_t i = 0; i < size(); ++i) {
      pop[i] += population_[t][i];
      cas[i] += cases_[t][i];
    }
  }
  return StudyRegion(regions_, {std::move(label)}, {std::move(pop)}, {std::move(cas)});
}

StudyRegion StudyRegion::with_cases(std::size_t period, std::vector<Count> counts) const {
  if (counts.size() != size()) throw InputError("count vector has the wrong length");
  auto cas = cases_;
  cas.at(period) = std::move(counts);
  return StudyRegion(regions_, periods_, population_, std::move(cas));
}

DistanceMatrix DistanceMatrix::subset(std::span<const std::size_t> idx) const {
  const auto k = static_cast<Eigen::Index>(idx.size());
  Eigen::MatrixXd s(k, k);
  for (Eigen::Index a = 0; a < k; ++a)
    for (Eigen::Index b = 0; b < k; ++b)
      s(a, b) = d_(static_cast<Eigen::Index>(idx[static_cast<std::size_t>(a)]),
                   static_cast<Eigen::Index>(idx[static_cast<std::size_t>(b)]));
  return DistanceMatrix(std::move(s));
}

DistanceMatrix distance_matrix(std::span<const Region> regions) {
  const auto m = static_cast<Eigen::Index>(regions.size());
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(m, m);
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index j = i + 1; j < m; ++j) {
      const auto& a = regions[static_cast<std::size_t>(i)];
      const auto& b = regions[static_cast<std::size_t>(j)];
      d(i, j) = d(j, i) = std::hypot(a.x - b.x, a.y - b.y);
    }
  }
  return DistanceMatrix(std::move(d));
}

DistanceMatrix distance_matrix(const StudyRegion& sr) { return distance_matrix(sr.regions()); }

WindowSet::WindowSet(std::vector<std::vector<std::size_t>> order, std::vector<std::size_t> max_length,
                     std::vector<CandidateCluster> windows, std::vector<std::size_t> window_length,
                     std::vector<std::vector<std::uint8_t>> emitted)
    : order_(std::move(order)),
      max_length_(std::move(max_length)),
      windows_(std::move(windows)),
      window_length_(std::move(window_length)),
      emitted_(std::move(emitted)) {}

WindowSet enumerate_windows(const DistanceMatrix& dm, std::span<const double> population, double max_fraction) {
  const std::size_t m = dm.size();
  if (population.size() != m) throw InputError("population vector does not match the distance matrix");
  if (!(max_fraction > 0.0 && max_fraction <= 1.0)) throw InputError("max_fraction must lie in (0, 1]");
  const double total = std::accumulate(population.begin(), population.end(), 0.0);
  const double cap = max_fraction * total;

  std::vector<std::vector<std::size_t>> order(m);
  std::vector<std::size_t> max_length(m, 0);
  std::vector<CandidateCluster> windows;
  std::vector<std::size_t> lengths;
  std::vector<std::vector<std::uint8_t>> emitted(m, std::vector<std::uint8_t>(m, 0));
  std::set<std::vector<std::size_t>> seen;

  for (std::size_t c = 0; c < m; ++c) {
    auto& ord = order[c];
    ord.resize(m);
    std::iota(ord.begin(), ord.end(), std::size_t{0});
    std::sort(ord.begin(), ord.end(), [&](std::size_t a, std::size_t b) {
      const double da = dm(c, a), db = dm(c, b);
      return da < db || (da == db && a < b);
    });
    // The center itself sorts first (d = 0) unless a coincident region has a
    // smaller index; force it to the front so every window contains its center.
    auto it = std::find(ord.begin(), ord.end(), c);
    std::rotate(ord.begin(), it, it + 1);

    double pop = 0.0;
    std::vector<std::size_t> members;
    for (std::size_t len = 1; len <= m; ++len) {
      const std::size_t r = ord[len - 1];
      pop += population[r];
      // Small relative slack so that a window sitting exactly on the cap is not
      // lost to summation order.
      if (pop > cap * (1.0 + 1e-12)) break;
      max_length[c] = len;
      members.insert(std::upper_bound(members.begin(), members.end(), r), r);
      if (seen.insert(members).second) {
        windows.push_back(CandidateCluster{c, members, dm(c, r)});
        lengths.push_back(len);
        emitted[c][len - 1] = 1;
      }
    }
  }
  return WindowSet(std::move(order), std::move(max_length), std::move(windows), std::move(lengths),
                   std::move(emitted));
}

WindowSet enumerate_windows(const StudyRegion& sr, const DistanceMatrix& dm, double max_fraction, std::size_t period) {
  return enumerate_windows(dm, sr.population(period), max_fraction);
}

// ---------------------------------------------------------------------------
// Text input

namespace {

struct Line {
  std::size_t number;
  std::vector<std::string> fields;
};

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

// Fields are separated by a single comma, or by runs of blanks when the line
// has no comma. '#' starts a comment line.
std::vector<Line> read_table(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open '" + path.string() + "'");
  std::vector<Line> out;
  std::string raw;
  std::size_t number = 0;
  while (std::getline(in, raw)) {
    ++number;
    const std::string line = trim(raw);
    if (line.empty() || line.front() == '#') continue;
    Line l{number, {}};
    if (line.find(',') != std::string::npos) {
      std::stringstream ss(line);
      std::string field;
      while (std::getline(ss, field, ',')) l.fields.push_back(trim(field));
      if (line.back() == ',') l.fields.emplace_back();
    } else {
      std::istringstream ss(line);
      std::string field;
      while (ss >> field) l.fields.push_back(field);
    }
    for (const auto& f : l.fields)
      if (f.empty()) throw InputError(path.string() + ":" + std::to_string(number) + ": empty field");
    out.push_back(std::move(l));
  }
  return out;
}

[[noreturn]] void malformed(const std::filesystem::path& path, std::size_t line, const std::string& why) {
  throw InputError(path.string() + ":" + std::to_string(line) + ": " + why);
}

double parse_real(const std::filesystem::path& path, std::size_t line, const std::string& s) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) malformed(path, line, "not a number: '" + s + "'");
    return v;
  } catch (const std::logic_error&) {
    malformed(path, line, "not a number: '" + s + "'");
  }
}

Count parse_count(const std::filesystem::path& path, std::size_t line, const std::string& s) {
  Count v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    // Accept integral values written as reals ("12.0").
    const double d = parse_real(path, line, s);
    if (d != std::floor(d)) malformed(path, line, "case count must be an integer: '" + s + "'");
    return static_cast<Count>(d);
  }
  return v;
}

// Numeric labels order numerically (1991 after 985), everything else lexicographically.
bool period_less(const std::string& a, const std::string& b) {
  double x = 0, y = 0;
  const auto ra = std::from_chars(a.data(), a.data() + a.size(), x);
  const auto rb = std::from_chars(b.data(), b.data() + b.size(), y);
  const bool na = ra.ec == std::errc() && ra.ptr == a.data() + a.size();
  const bool nb = rb.ec == std::errc() && rb.ptr == b.data() + b.size();
  if (na && nb) return x < y || (x == y && a < b);
  if (na != nb) return na;
  return a < b;
}

}  // namespace

StudyRegion load_study_region(const std::filesystem::path& geo_file, const std::filesystem::path& pop_file,
                              const std::filesystem::path& cas_file) {
  std::vector<Region> regions;
  std::map<std::string, std::size_t> index;
  for (const auto& l : read_table(geo_file)) {
    if (l.fields.size() < 3) malformed(geo_file, l.number, "expected 'id x y'");
    Region r{l.fields[0], parse_real(geo_file, l.number, l.fields[1]), parse_real(geo_file, l.number, l.fields[2])};
    if (!index.emplace(r.id, regions.size()).second) malformed(geo_file, l.number, "duplicate region id '" + r.id + "'");
    regions.push_back(std::move(r));
  }
  if (regions.empty()) throw InputError(geo_file.string() + ": no regions");

  constexpr const char* kNoPeriod = "";
  auto lookup = [&](const std::filesystem::path& path, std::size_t line, const std::string& id) {
    auto it = index.find(id);
    if (it == index.end()) malformed(path, line, "unknown region id '" + id + "'");
    return it->second;
  };

  // pop: id [period] population. Duplicate rows (strata) are summed.
  std::map<std::string, std::vector<double>> pop_by_period;
  bool pop_has_period = false;
  const auto pop_rows = read_table(pop_file);
  for (const auto& l : pop_rows) {
    if (l.fields.size() < 2) malformed(pop_file, l.number, "expected 'id [period] population'");
    const bool with_period = l.fields.size() >= 3;
    if (&l != &pop_rows.front() && with_period != pop_has_period)
      malformed(pop_file, l.number, "inconsistent column count");
    pop_has_period = with_period;
    const std::size_t r = lookup(pop_file, l.number, l.fields[0]);
    const std::string period = with_period ? l.fields[1] : kNoPeriod;
    const double n = parse_real(pop_file, l.number, with_period ? l.fields[2] : l.fields[1]);
    if (!(n > 0.0) || !std::isfinite(n)) malformed(pop_file, l.number, "population must be positive");
    auto& v = pop_by_period[period];
    v.resize(regions.size(), 0.0);
    v[r] += n;
  }

  // cas: id [period] count [covariates ignored].
  std::map<std::string, std::vector<Count>> cas_by_period;
  const auto cas_rows = read_table(cas_file);
  bool cas_has_period = false;
  for (const auto& l : cas_rows) {
    if (l.fields.size() < 2) malformed(cas_file, l.number, "expected 'id [period] count'");
    const bool with_period = l.fields.size() >= 3;
    if (&l != &cas_rows.front() && with_period != cas_has_period)
      malformed(cas_file, l.number, "inconsistent column count");
    cas_has_period = with_period;
    const std::size_t r = lookup(cas_file, l.number, l.fields[0]);
    const std::string period = with_period ? l.fields[1] : kNoPeriod;
    const Count y = parse_count(cas_file, l.number, with_period ? l.fields[2] : l.fields[1]);
    if (y < 0) malformed(cas_file, l.number, "negative case count");
    auto& v = cas_by_period[period];
    v.resize(regions.size(), 0);
    v[r] += y;
  }

  std::vector<std::string> periods;
  for (const auto& [p, _] : cas_by_period) periods.push_back(p);
  if (pop_has_period)
    for (const auto& [p, _] : pop_by_period)
      if (!cas_by_period.count(p)) periods.push_back(p);
  if (periods.empty()) periods.push_back(pop_has_period ? pop_by_period.begin()->first : std::string(kNoPeriod));
  std::sort(periods.begin(), periods.end(), period_less);
  periods.erase(std::unique(periods.begin(), periods.end()), periods.end());
  if (periods.size() > 1 && std::find(periods.begin(), periods.end(), kNoPeriod) != periods.end())
    throw InputError(cas_file.string() + ": mixes rows with and without a period column");

  std::vector<std::vector<double>> pop;
  std::vector<std::vector<Count>> cas;
  for (const auto& p : periods) {
    const std::vector<double>* pv = nullptr;
    if (pop_has_period) {
      auto it = pop_by_period.find(p);
      if (it == pop_by_period.end()) throw InputError(pop_file.string() + ": no populations for period '" + p + "'");
      pv = &it->second;
    } else {
      pv = &pop_by_period[kNoPeriod];
    }
    std::vector<double> row = *pv;
    row.resize(regions.size(), 0.0);
    for (std::size_t i = 0; i < regions.size(); ++i)
      if (!(row[i] > 0.0))
        throw InputError(pop_file.string() + ": region '" + regions[i].id + "' has no population" +
                         (p.empty() ? std::string() : " for period '" + p + "'"));
    pop.push_back(std::move(row));
    auto c = cas_by_period[p];
    c.resize(regions.size(), 0);
    cas.push_back(std::move(c));
  }
  for (auto& p : periods)
    if (p.empty()) p = "all";
  return StudyRegion(std::move(regions), std::move(periods), std::move(pop), std::move(cas));
}

}  // namespace scanstat
