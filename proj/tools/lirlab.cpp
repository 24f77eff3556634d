#include "lir/cli.hpp"

int main(int argc, char** argv) { return lir::run_cli(argc, argv); }
