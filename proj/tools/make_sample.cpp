// Writes the procedural test scene used as the bundled sample.
#include <cstdlib>
#include <iostream>
#include <string>

#include "veil/image_io.hpp"
#include "veil/simulate.hpp"

int main(int argc, char** argv) {
    if (argc < 2) {
        std::cerr << "usage: make_sample <output> [size] [seed]\n";
        return 1;
    }
    const int size = argc > 2 ? std::atoi(argv[2]) : 256;
    const auto seed = argc > 3 ? std::strtoull(argv[3], nullptr, 10) : 2016ULL;
    if (size < 1) {
        std::cerr << "size must be positive\n";
        return 1;
    }
    try {
        veil::save_image(veil::synthetic_scene(size, size, seed), argv[1]);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 0;
}
