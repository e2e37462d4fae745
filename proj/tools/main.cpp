#include "mcsample/cli.hpp"

int main(int argc, char** argv) { return mcs::run(argc, argv); }
