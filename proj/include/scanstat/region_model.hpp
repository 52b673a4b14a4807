#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace scanstat {

using Count = std::int64_t;

struct Region {
  std::string id;
  double x = 0.0;
  double y = 0.0;
};

// Regions with centroids plus per-period populations and case counts.
// Regions are kept sorted by id so that every downstream result is
// independent of input row order. Immutable after construction.
class StudyRegion {
 public:
  StudyRegion() = default;

  // population[t][i] and cases[t][i] for period t, region i (after sorting by id
  // the rows are permuted together with `regions`). Throws InputError when an
  // invariant is violated.
  StudyRegion(std::vector<Region> regions, std::vector<std::string> periods,
              std::vector<std::vector<double>> population, std::vector<std::vector<Count>> cases);

  std::size_t size() const noexcept { return regions_.size(); }
  std::size_t num_periods() const noexcept { return periods_.size(); }

  const Region& region(std::size_t i) const { return regions_.at(i); }
  std::span<const Region> regions() const noexcept { return regions_; }
  const std::vector<std::string>& periods() const noexcept { return periods_; }

  std::span<const double> population(std::size_t period) const { return population_.at(period); }
  std::span<const Count> cases(std::size_t period) const { return cases_.at(period); }
  Count total_cases(std::size_t period) const { return total_cases_.at(period); }
  double total_population(std::size_t period) const { return total_population_.at(period); }

  // Index of a region id / period label. Throws InputError when unknown.
  std::size_t region_index(std::string_view id) const;
  std::size_t period_index(std::string_view label) const;

  // Restriction to a subset of regions (indices into this object).
  StudyRegion subset(std::span<const std::size_t> regions) const;

  // Single-period region whose populations and counts are summed over `periods`.
  StudyRegion aggregate(std::span<const std::size_t> periods, std::string label) const;

  // Copy with the counts of one period replaced.
  StudyRegion with_cases(std::size_t period, std::vector<Count> counts) const;

 private:
  void validate_and_totals();

  std::vector<Region> regions_;
  std::vector<std::string> periods_;
  std::vector<std::vector<double>> population_;
  std::vector<std::vector<Count>> cases_;
  std::vector<Count> total_cases_;
  std::vector<double> total_population_;
};

// Symmetric matrix of Euclidean centroid distances.
class DistanceMatrix {
 public:
  DistanceMatrix() = default;
  explicit DistanceMatrix(Eigen::MatrixXd d) : d_(std::move(d)) {}

  std::size_t size() const noexcept { return static_cast<std::size_t>(d_.rows()); }
  double operator()(std::size_t i, std::size_t j) const { return d_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)); }
  const Eigen::MatrixXd& matrix() const noexcept { return d_; }
  DistanceMatrix subset(std::span<const std::size_t> idx) const;

 private:
  Eigen::MatrixXd d_;
};

DistanceMatrix distance_matrix(const StudyRegion& sr);
DistanceMatrix distance_matrix(std::span<const Region> regions);

// A circular window: the `length` nearest regions to `center`.
struct CandidateCluster {
  std::size_t center = 0;
  std::vector<std::size_t> members;  // ascending region indices
  double radius = 0.0;               // distance from center to farthest member
};

// Candidate windows for one geometry. Besides the deduplicated window list it
// keeps, for every center, the neighbour order and the longest admissible
// prefix, which is what the scan kernels iterate over.
class WindowSet {
 public:
  WindowSet() = default;
  WindowSet(std::vector<std::vector<std::size_t>> order, std::vector<std::size_t> max_length,
            std::vector<CandidateCluster> windows, std::vector<std::size_t> window_length,
            std::vector<std::vector<std::uint8_t>> emitted);

  std::size_t num_regions() const noexcept { return order_.size(); }
  std::size_t size() const noexcept { return windows_.size(); }
  const std::vector<CandidateCluster>& windows() const noexcept { return windows_; }
  const CandidateCluster& window(std::size_t w) const { return windows_.at(w); }
  // Number of prefix members of window w along its center's order.
  std::size_t window_length(std::size_t w) const { return window_length_.at(w); }

  // Regions sorted by (distance from center, index).
  std::span<const std::size_t> order(std::size_t center) const { return order_.at(center); }
  std::size_t max_length(std::size_t center) const { return max_length_.at(center); }
  // Whether the prefix of the given length (>= 1) at this center is a window of
  // the deduplicated list (false for later repeats of the same member set).
  bool emitted(std::size_t center, std::size_t length) const { return emitted_[center][length - 1] != 0; }

 private:
  std::vector<std::vector<std::size_t>> order_;
  std::vector<std::size_t> max_length_;
  std::vector<CandidateCluster> windows_;
  std::vector<std::size_t> window_length_;
  std::vector<std::vector<std::uint8_t>> emitted_;
};

// Circular windows centred on region centroids whose population does not exceed
// max_fraction of the total. The population cap uses the given reference period.
WindowSet enumerate_windows(const StudyRegion& sr, const DistanceMatrix& dm, double max_fraction = 0.5,
                            std::size_t period = 0);
WindowSet enumerate_windows(const DistanceMatrix& dm, std::span<const double> population, double max_fraction = 0.5);

// Loads the three text files (geo, pop, cas). See README for the format.
StudyRegion load_study_region(const std::filesystem::path& geo_file, const std::filesystem::path& pop_file,
                              const std::filesystem::path& cas_file);

}  // namespace scanstat
