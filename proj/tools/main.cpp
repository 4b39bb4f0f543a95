#include "burstcast/cli.hpp"

#include <malloc.h>

#include <iostream>

int main(int argc, char** argv) {
    // Training churns through large short-lived buffers; keep them on the
    // heap instead of mapping and unmapping pages for every op.
    mallopt(M_MMAP_THRESHOLD, 256 << 20);
    mallopt(M_TRIM_THRESHOLD, 512 << 20);
    return burstcast::run_cli(argc, argv, std::cout, std::cerr);
}
