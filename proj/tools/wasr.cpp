#include "wasr/cli.hpp"

int main(int argc, char** argv) { return wasr::run_cli({argv + 1, argv + argc}); }
