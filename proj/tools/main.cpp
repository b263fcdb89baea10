#include "commands.hpp"

int main(int argc, char** argv) { return flexitac::cli::run(argc, argv); }
