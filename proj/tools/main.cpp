#include "commands.hpp"

int main(int argc, char** argv) { return contdyn::cli::run(argc, argv); }
