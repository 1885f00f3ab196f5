#include "splitperc/cli.hpp"

int main(int argc, char** argv) {
    return splitperc::parse_and_run(argc, argv, splitperc::process_environment());
}
