#include "opscale/cli.hpp"

int main(int argc, char** argv) { return opscale::cli::main_entry(argc, argv); }
