#include "locabc/cli.hpp"

int main(int argc, char** argv) { return locabc::cli_main(argc, argv); }
