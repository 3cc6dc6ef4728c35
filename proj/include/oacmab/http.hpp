#pragma once

#include "oacmab/service.hpp"

namespace httplib {
class Server;
}

namespace oacmab {

/// Installs the session routes and permissive CORS headers on `server`.
/// POST /sessions/{id}/snapshot is available when the store has a snapshot directory.
void install_routes(httplib::Server& server, SessionStore& store);

}  // namespace oacmab
