#include "nlagg/experiment.hpp"

int main(int argc, char** argv) { return nlagg::cli_main(argc, argv); }
