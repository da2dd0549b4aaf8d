#pragma once

#include <vector>

#include "geocollab/protocol.hpp"

namespace geocollab::protocol {

/// One canonical example envelope per message kind, in kAllKinds order. These
/// are the golden examples in docs/protocol.md and the output of
/// `geocollab protocol-dump`.
std::vector<Envelope> golden_examples();

}  // namespace geocollab::protocol
