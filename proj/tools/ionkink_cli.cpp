#include "ionkink/cli.hpp"

int main(int argc, char** argv) { return ionkink::cli_main(argc, argv); }
