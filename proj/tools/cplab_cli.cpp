#include "cplab/cli.hpp"

int main(int argc, char** argv) { return cplab::cli_main(argc, argv); }
