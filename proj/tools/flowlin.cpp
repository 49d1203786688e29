#include "flowlin_cli.hpp"

int main(int argc, char** argv) { return flowlin::cli::run(argc, argv); }
