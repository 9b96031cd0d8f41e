#include "active_design/harness/cli.hpp"

int main(int argc, char** argv) { return active_design::harness::cli_main(argc, argv); }
