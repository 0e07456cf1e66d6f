#include "hca_marl/cli.hpp"

int main(int argc, char** argv) { return hca_marl::run_cli(argc, argv); }
