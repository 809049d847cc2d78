#include "moranfilt/cli.hpp"

int main(int argc, char** argv) { return moranfilt::cli::run(argc, argv); }
