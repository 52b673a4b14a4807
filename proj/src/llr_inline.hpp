#pragma once

#include <cmath>

#include "scanstat/region_model.hpp"

namespace scanstat::detail {

// log_lr without argument checks. Windows holding the whole population score 0.
inline double llr_unchecked(Count cases_in, double pop_in, Count total_cases, double total_pop) noexcept {
  const double pop_out = total_pop - pop_in;
  if (!(pop_out > 0.0)) return 0.0;
  const double y_in = static_cast<double>(cases_in);
  const double y_out = static_cast<double>(total_cases - cases_in);
  // inside rate > outside rate, without dividing
  if (!(y_in * pop_out > y_out * pop_in)) return 0.0;
  const double rate = static_cast<double>(total_cases) / total_pop;
  double v = y_in * std::log(y_in / (pop_in * rate));
  if (y_out > 0.0) v += y_out * std::log(y_out / (pop_out * rate));
  return v > 0.0 ? v : 0.0;
}

}  // namespace scanstat::detail
