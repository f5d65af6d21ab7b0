#include "commands.hpp"

int main(int argc, char** argv) { return confclust::cli::run(argc, argv); }
