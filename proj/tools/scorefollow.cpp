#include "scorefollow/runtime/cli.hpp"

int main(int argc, char** argv) { return scorefollow::cli_main(argc, argv); }
