#include "ctxparrot/cli.hpp"

int main(int argc, char **argv) { return ctxparrot::cli::run(argc, argv); }
