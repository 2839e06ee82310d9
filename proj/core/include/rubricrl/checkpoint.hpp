#ifndef RUBRICRL_CHECKPOINT_HPP_
#define RUBRICRL_CHECKPOINT_HPP_

#include <filesystem>
#include <string>
#include <string_view>

#include "rubricrl/policy.hpp"

namespace rubricrl {

// Text checkpoint:
//
//   rubricrl-checkpoint 1
//   num_attributes <K>
//   features_per_attribute <P>
//   version <n>
//   noise_reduction <rho>
//   values <count>
//   <one value per line, flat layout of PolicyParams>
//
// Values use shortest round-trip formatting, so write -> read is exact.
std::string serialize_checkpoint(const PolicyParams& params);
PolicyParams parse_checkpoint(std::string_view text);

void save_checkpoint(const std::filesystem::path& path, const PolicyParams& params);
PolicyParams load_checkpoint(const std::filesystem::path& path);

}  // namespace rubricrl

#endif  // RUBRICRL_CHECKPOINT_HPP_
