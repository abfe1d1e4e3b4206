#include "mirpairs_cli/cli.hpp"

int main(int argc, char** argv) { return mirpairs_cli::run(argc, argv); }
