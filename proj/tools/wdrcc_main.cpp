#include "wdrcc/cli.hpp"

int main(int argc, char** argv) { return wdrcc::run_cli(argc, argv); }
