#include "lipspline_cli/cli.hpp"

int main(int argc, char** argv) { return lipspline::cli::run(argc, argv); }
