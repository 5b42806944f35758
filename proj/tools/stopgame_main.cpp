#include "stopgame/cli/commands.hpp"

int main(int argc, char** argv) { return stopgame::cli::run(argc, argv); }
