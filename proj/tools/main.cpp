#include "seganet/cli.hpp"

int main(int argc, char** argv) { return seganet::run_cli(argc, argv); }
