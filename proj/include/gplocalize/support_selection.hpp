#ifndef GPLOCALIZE_SUPPORT_SELECTION_HPP
#define GPLOCALIZE_SUPPORT_SELECTION_HPP

#include <span>
#include <vector>

#include "gplocalize/gp_core.hpp"
#include "gplocalize/sparse_gp.hpp"

namespace gplocalize {

/// Greedy maximum-variance selection. Each round picks the candidate whose
/// noise-free variance given the picks so far is largest; candidates within
/// 1e-12 * signal_var of the maximum count as tied and the lowest index wins.
/// Returns candidate indices in selection order, so a smaller k always gives
/// a prefix of a larger one.
std::vector<std::size_t> greedy_support_indices(std::span<const Location> candidates, int k,
                                                const Hyperparams& h);

/// The selected candidates as a support set.
SupportSet select_support_set(std::span<const Location> candidates, int k, const Hyperparams& h);

} // namespace gplocalize

#endif // GPLOCALIZE_SUPPORT_SELECTION_HPP
