#include "stga/cli.hpp"

int main(int argc, char** argv) { return stga::run_cli(argc, argv); }
