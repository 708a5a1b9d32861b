#include "exitnet/cli.hpp"

int main(int argc, char** argv) { return exitnet::run_cli(argc, argv); }
