#include "marginal_evo/cli.hpp"

int main(int argc, char** argv) { return marginal_evo::run_cli(argc, argv); }
