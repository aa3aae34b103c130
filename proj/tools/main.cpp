#include "fcu/cli.hpp"

int main(int argc, char** argv) { return fcu::run_cli(argc, argv); }
