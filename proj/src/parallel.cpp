#include "fdsad/parallel.hpp"

#include <cstdlib>
#include <string>

namespace fdsad {

unsigned worker_count() {
    if (const char* env = std::getenv("FDSAD_THREADS")) {
        try {
            const int v = std::stoi(env);
            if (v >= 1) return static_cast<unsigned>(v);
        } catch (...) {
        }
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : hw;
}

}  // namespace fdsad
