#include "cbf/cli.hpp"

int main(int argc, char** argv) { return cbf::run_cli(argc, argv); }
