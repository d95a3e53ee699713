#ifndef LESIONLAB_ERRORS_HPP
#define LESIONLAB_ERRORS_HPP

#include <stdexcept>

namespace lesionlab {

// Invalid configuration or parameters; the CLI maps this to exit code 1.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Failure while computing (divergence, degenerate inputs, I/O); exit code 2.
class ComputeError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace lesionlab

#endif  // LESIONLAB_ERRORS_HPP
