#include "tpc/gateway.hpp"

int main(int argc, char** argv) { return tpc::gateway::run_cli(argc, argv); }
