#pragma once

namespace repoctx {

// Entry point behind the binary: exit 0 on success, 1 on domain errors,
// 2 on usage errors. Machine-readable error records go to stderr.
int dispatch(int argc, const char* const* argv);

} // namespace repoctx
