#include "cli.hpp"

int main(int argc, char** argv) { return genefield::cli::run(argc, argv); }
