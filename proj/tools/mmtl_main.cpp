#include "mmtl/experiment.hpp"

int main(int argc, char** argv) { return mmtl::cli_main(argc, argv); }
