#include "profmatch/cli.hpp"

int main(int argc, char** argv) { return profmatch::cli_main(argc, argv); }
