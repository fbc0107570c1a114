#include "cli.hpp"

int main(int argc, char** argv) { return annoconsist::cli::run(argc, argv); }
