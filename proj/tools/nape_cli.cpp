#include "nape/cli.hpp"

int main(int argc, char** argv) { return nape::run_cli(argc, argv); }
