#pragma once

namespace ionkink {

/// Entry point of the `ionkink` command. Returns 0 on success, 1 on a usage error and 2 when a
/// numerical step fails.
int cli_main(int argc, char** argv);

}  // namespace ionkink
