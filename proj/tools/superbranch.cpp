#include "superbranch/cli.hpp"

int main(int argc, char** argv) { return superbranch::cli::run(argc, argv); }
