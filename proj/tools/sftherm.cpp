#include "sftherm/cli.hpp"

int main(int argc, char** argv) { return sftherm::cli::run(argc, argv); }
