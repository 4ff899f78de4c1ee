#include "arp/cli.hpp"

int main(int argc, char** argv) { return arp::cli::run_cli(argc, argv); }
