#include "tumornet/cli/cli.hpp"

int main(int argc, char** argv) { return tumornet::cli::main(argc, argv); }
