#include "bemf/parallel.hpp"

#include <cstdlib>
#include <string>

namespace bemf {

unsigned default_workers() {
    if (const char* env = std::getenv("BEMF_WORKERS")) {
        try {
            int n = std::stoi(env);
            if (n > 0) return static_cast<unsigned>(n);
        } catch (...) {
        }
    }
    unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : hw;
}

}  // namespace bemf
