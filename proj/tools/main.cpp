#include "eqsynth/cli.hpp"

int main(int argc, char** argv) { return eqsynth::cli_main(argc, argv); }
