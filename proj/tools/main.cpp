#include "mentorkd/cli.hpp"

int main(int argc, char** argv) { return mentorkd::cli_main(argc, argv); }
