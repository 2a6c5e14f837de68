#include <readsetdist/commands.hpp>

int main(int argc, char** argv) { return rsd::cli::run(argc, argv); }
