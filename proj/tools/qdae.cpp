#include "qdae/cli/cli.hpp"

int main(int argc, char** argv) { return qdae::cli::main(argc, argv); }
