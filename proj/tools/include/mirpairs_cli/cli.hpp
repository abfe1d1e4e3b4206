#pragma once

// Entry point of the mirpairs command-line tool. Returns the process exit
// code: 0 success, 2 usage error, 3 configuration/validation error,
// 4 runtime failure.

namespace mirpairs_cli {

int run(int argc, char** argv);

}  // namespace mirpairs_cli
