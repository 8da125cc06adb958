#include "cli.hpp"

int main(int argc, char** argv) { return cdtm::cli::run_cli(argc, argv); }
