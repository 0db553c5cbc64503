#include "partreg/cli.hpp"

int main(int argc, char** argv) { return partreg::run_cli(argc, argv); }
