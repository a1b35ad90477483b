#pragma once

namespace mzgrad {

// Kernels with a parallel path take an ExecPolicy; results are required to be
// byte-identical between the two (the parallel path only splits loop ranges
// whose iterations write disjoint outputs).
enum class ExecPolicy { serial, parallel };

}  // namespace mzgrad
