#include "lfd/cli.hpp"

int main(int argc, char** argv) { return lfd::cli::run(argc, argv); }
