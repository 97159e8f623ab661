#include "openrg/cli.hpp"

int main(int argc, char** argv) { return openrg::cli::run(argc, argv); }
