#include "cpsde/cli.hpp"

int main(int argc, char** argv) { return cpsde::run_cli(argc, argv); }
