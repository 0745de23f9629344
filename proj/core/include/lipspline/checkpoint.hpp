#pragma once

#include <filesystem>
#include <map>
#include <string>

#include "lipspline/network.hpp"

namespace lipspline {

// Text archive, one record per line:
//   lipspline-checkpoint 1
//   spec <key> <value>              network architecture
//   meta <key> <value>              free-form run metadata
//   tensor <name> <rank> <dims...>  followed by one line of hexfloat values
//   state <layer> <rank> <dims...>  power-iteration vector, same value line
//   end
// Values are written with %a, so a save/load round trip is bit-exact.

using CheckpointMeta = std::map<std::string, std::string>;

std::string serialize_checkpoint(const Network& net, const CheckpointMeta& meta = {});
Network deserialize_checkpoint(const std::string& text, CheckpointMeta* meta = nullptr);

void save_checkpoint(const std::filesystem::path& path, const Network& net, const CheckpointMeta& meta = {});
Network load_checkpoint(const std::filesystem::path& path, CheckpointMeta* meta = nullptr);

}  // namespace lipspline
