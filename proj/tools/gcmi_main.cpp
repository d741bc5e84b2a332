#include "gcmi/cli.hpp"

int main(int argc, char** argv) { return gcmi::cli_main(argc, argv); }
