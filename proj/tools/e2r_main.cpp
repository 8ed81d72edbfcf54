#include "e2r/cli.hpp"

int main(int argc, char** argv) { return e2r::cli::run(argc, argv); }
