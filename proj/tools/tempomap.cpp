#include "tempomap/cli.hpp"

int main(int argc, char** argv) { return tempomap::run_cli(argc, argv); }
