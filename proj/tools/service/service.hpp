#pragma once

#include <cstddef>
#include <memory>

#include "maskforge/landmarks.hpp"
#include "maskforge/parsing.hpp"
#include "maskforge/synth.hpp"

namespace httplib {
class Server;
}

namespace maskforge::service {

inline constexpr std::size_t kMaxPayloadBytes = 16u << 20;

/// Immutable state shared by all request handlers.
struct ServiceState {
    CanonicalLayout canon;
    StyleLibrary library;
    LabelConfig labels;
};

/// Registers /healthz and the /v1 routes and sets the payload limit.
void install_routes(httplib::Server& server, std::shared_ptr<const ServiceState> state);

}  // namespace maskforge::service
