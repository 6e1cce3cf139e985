#pragma once

namespace acquire {

// Kernels that have an OpenMP path take an ExecPolicy. Serial and Parallel
// produce identical results; the serial path is the reference the tests and
// the benchmark compare against.
enum class ExecPolicy { Serial, Parallel };

}  // namespace acquire
