#include "posemfa/cli.hpp"

int main(int argc, char** argv) { return posemfa::run_cli(argc, argv); }
