#include "explab/cli.hpp"

int main(int argc, char** argv) { return explab::cli::main(argc, argv); }
