#include "alignmeter/cli.hpp"

int main(int argc, char** argv) { return alignmeter::cli::run(argc, argv); }
