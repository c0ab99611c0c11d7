#include "rits/cli.hpp"

int main(int argc, char** argv) { return rits::cli::run(argc, argv); }
