#include "enthymeme/cli.hpp"

int main(int argc, char** argv) { return enthymeme::cli::run(argc, argv); }
