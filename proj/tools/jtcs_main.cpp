#include "jtcs/cli.hpp"

int main(int argc, char** argv) { return jtcs::cli::parse_and_run(argc, argv); }
