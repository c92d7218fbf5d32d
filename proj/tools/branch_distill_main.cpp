#include "bd/cli.hpp"

int main(int argc, char** argv) { return bd::cli::run(argc, argv); }
