#include "lexint_cli.hpp"

int main(int argc, char** argv) { return lexint::cli::run_cli(argc, argv); }
