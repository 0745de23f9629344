#pragma once

#include <cstdint>

#include "lipspline/config.hpp"
#include "lipspline/network.hpp"
#include "lipspline/training.hpp"

namespace lipspline::cli {

/// Reads every net.* key; values missing from the config keep the fields of `defaults`.
NetworkSpec read_network_spec(Config& config, const NetworkSpec& defaults, std::uint64_t seed);

/// Reads every train.* key on top of `defaults`.
TrainConfig read_train_config(Config& config, const TrainConfig& defaults, std::uint64_t seed);

}  // namespace lipspline::cli
