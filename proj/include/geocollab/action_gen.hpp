#pragma once

#include <cstdint>
#include <random>
#include <string>

#include "geocollab/protocol.hpp"
#include "geocollab/scene.hpp"

namespace geocollab::sim {

struct ActionSpec {
  protocol::MessageKind kind = protocol::MessageKind::chat;
  Json payload;
};

/// A random action that is valid against `scene` when submitted by `author`
/// as leader. Ids are derived from `author` and `counter`, which is advanced.
/// Draws only raw engine output so a seed reproduces the same stream on every
/// platform.
ActionSpec random_action(std::mt19937_64& rng, const geo::SceneState& scene, const std::string& author,
                         std::uint64_t& counter);

}  // namespace geocollab::sim
