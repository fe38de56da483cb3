#include "cacaotk/cli.hpp"

int main(int argc, char** argv) { return cacaotk::cli::run(argc, argv); }
