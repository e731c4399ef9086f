#include "experiment.hpp"

int main(int argc, char** argv) { return mlpbsde::cli::run_cli(argc, argv); }
