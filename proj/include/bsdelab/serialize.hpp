#ifndef BSDELAB_SERIALIZE_HPP
#define BSDELAB_SERIALIZE_HPP

#include <string>

#include "bsdelab/process.hpp"

namespace bsdelab {

// Tree text format:
//   {"time_grid":[...], "nodes":[{"id":..,"parent":..,"time_idx":..,
//                                 "prob":..,"children":[...]}, ...]}
// where "prob" is the one-step transition probability from the parent.
// Processes serialize as {"node_id": value} maps (value: scalar or array).
std::string serialize_space(const FilteredSpace& sp);
FilteredSpace deserialize_space(const std::string& text);

std::string serialize_process(const ScalarAdapted& x);
std::string serialize_process(const VecPredictable& x);
ScalarAdapted deserialize_scalar_process(const SpacePtr& sp, const std::string& text);

}  // namespace bsdelab

#endif
