#include "mvdet/cli.hpp"

int main(int argc, char** argv) { return mvdet::cli::run(argc, argv); }
