#include "nfk/cli.hpp"

int main(int argc, char** argv) { return nfk::cli::main(argc, argv); }
