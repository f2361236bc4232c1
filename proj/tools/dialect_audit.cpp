#include "dialect_audit/cli.hpp"

int main(int argc, char** argv) { return dialect_audit::cli::run(argc, argv); }
